"""Eviction-set construction and evaluation.

Everything here that models the attacker operates through an AttackerView
(hit/miss bit only).  The ground-truth helpers at the bottom are
evaluator-privileged: they see IDF keys and are never called from the
profiling code paths.
"""

import random
from dataclasses import dataclass, field

from .idf import derive_indices

PPP = "PPP"
RANDOM_SAMPLING = "RANDOM_SAMPLING"

_ADDR_BITS = 48


@dataclass
class EvictionSet:
    addresses: list
    provenance: str

    def __len__(self):
        return len(self.addresses)


@dataclass
class ProfilingStats:
    total_read_accesses: int = 0
    collected: int = 0
    truly_conflicting: int = 0
    rounds: int = 0
    complete: bool = True


@dataclass
class PPPParams:
    """Knobs for Prime+Prune+Probe.

    batch_size defaults to the cache capacity (prime the whole cache).
    probe mode "first_miss" stops each probe pass at the first missing
    survivor; that miss is the only one untainted by the probe's own
    insertions, which is what makes noise-free profiling on a skewed cache
    exact.  "all" collects every miss of the pass (faster, noisier).
    """

    batch_size: int = 0
    max_rounds: int = 256
    max_prune_rounds: int = 32
    probe_mode: str = "first_miss"
    drain_fills: int = 0


class VictimHandle:
    """Trigger-only handle on the victim's secret address."""

    def __init__(self, view, target):
        self._view = view
        self._target = target

    def trigger(self):
        """Victim accesses its address; returns the (timing-)observable hit bit."""
        return self._view.access(self._target)

    def reveal_target(self):
        """Evaluator-only: the secret address, for ground-truth scoring."""
        return self._target


def fresh_address(rng, used):
    while True:
        a = rng.getrandbits(_ADDR_BITS)
        if a not in used:
            used.add(a)
            return a


def random_eviction_set(rng, n):
    """n distinct uniform addresses."""
    if n < 1:
        raise ValueError("n must be >= 1")
    used = set()
    return EvictionSet([fresh_address(rng, used) for _ in range(n)], RANDOM_SAMPLING)


def ppp_profile(view, victim, target_size, params, rng, between_rounds=None):
    """Prime+Prune+Probe until target_size addresses are collected.

    Per round: prime the candidate batch, prune (re-access, dropping misses)
    until a clean pass, trigger the victim, probe the survivors and collect
    the miss(es).  Candidates are topped up with fresh random addresses each
    round so the victim line keeps getting evicted by the priming.

    between_rounds is an optional evaluator hook run before each round; the
    experiment harness uses it to model a victim whose line is freshly
    fetched on every trigger (the noise-free profiling setting).
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    batch = params.batch_size
    if batch <= 0:
        raise ValueError("params.batch_size must be set (> 0)")
    start_accesses = view.accesses
    used = set()
    candidates = [fresh_address(rng, used) for _ in range(batch)]
    collected = []
    stats = ProfilingStats()
    while len(collected) < target_size:
        stats.rounds += 1
        if stats.rounds > params.max_rounds:
            stats.complete = False
            break
        if between_rounds is not None:
            between_rounds()
        # prime
        for c in candidates:
            view.access(c)
        # prune: drop candidates that miss, until one clean pass
        for _ in range(params.max_prune_rounds):
            missed = {c for c in candidates if not view.access(c)}
            if not missed:
                break
            candidates = [c for c in candidates if c not in missed]
        victim.trigger()
        # On designs with a victim cache the victim's displacement parks
        # there and stays invisible to the probe; a burst of fresh fills
        # drains the parked lines out to memory where the probe can see them.
        for _ in range(params.drain_fills):
            view.access(fresh_address(rng, used))
        # probe
        missed_round = []
        for c in candidates:
            if not view.access(c):
                missed_round.append(c)
                if params.probe_mode == "first_miss":
                    break
        for c in missed_round:
            candidates.remove(c)
            collected.append(c)
            if len(collected) >= target_size:
                break
        # top up the batch with fresh candidates
        while len(candidates) < batch:
            candidates.append(fresh_address(rng, used))
    stats.collected = len(collected)
    stats.total_read_accesses = view.accesses - start_accesses
    return EvictionSet(collected[:target_size], PPP), stats


def eviction_success_rate(cache, view, es, victim, trials):
    """Fraction of trials in which accessing the eviction set evicts the
    victim's line.  Each trial starts from a flushed cache (same keys) with
    the victim line re-primed."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    successes = 0
    addrs = es.addresses
    access = view.access
    for _ in range(trials):
        cache.flush()
        victim.trigger()
        for a in addrs:
            access(a)
        if not victim.trigger():
            successes += 1
    return successes / trials


def ground_truth_conflicts(keys, s, es, target):
    """Evaluator-privileged: how many set members share at least one
    per-division index with the target."""
    tgt = derive_indices(target, keys, s)
    count = 0
    for a in es.addresses:
        idxs = derive_indices(a, keys, s)
        if any(x == y for x, y in zip(idxs, tgt)):
            count += 1
    return count


def truly_conflicting_members(keys, s, addresses, target):
    tgt = derive_indices(target, keys, s)
    out = []
    for a in addresses:
        idxs = derive_indices(a, keys, s)
        if any(x == y for x, y in zip(idxs, tgt)):
            out.append(a)
    return out


@dataclass
class FlushReport:
    flushed: int
    missing: list = field(default_factory=list)


def vc_flush_attack(view, watch_set, n_flush, rng):
    """Access n_flush fresh random addresses, then re-probe the watch set and
    report which members now miss."""
    used = set(watch_set)
    for _ in range(n_flush):
        view.access(fresh_address(rng, used))
    missing = [a for a in watch_set if not view.access(a)]
    return FlushReport(flushed=n_flush, missing=missing)
