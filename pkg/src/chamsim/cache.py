"""Cache state machines: the randomized skewed cache with a reinserting victim
cache, plus the baseline models, all behind one lookup interface.

Only tags are simulated; every security and miss-rate experiment here depends
on line presence and placement, never on data payloads.

Telemetry (the ordered event log) is a privileged observer channel for the
evaluator.  Attacker code must go through AttackerView, which exposes nothing
but the hit/miss bit of a lookup.
"""

import csv
import random
from dataclasses import dataclass, field, replace

from .errors import InternalConsistencyError, InvalidConfigError
from .idf import derive_indices, keys_from_rng

EMPTY = -1

# Model catalog (7 entries).
FULLY_ASSOCIATIVE_RANDOM = "FULLY_ASSOCIATIVE_RANDOM"
SET_ASSOCIATIVE = "SET_ASSOCIATIVE"
CEASER = "CEASER"
CEASER_S = "CEASER_S"
CHAMELEON = "CHAMELEON"
CHAMELEON_NO_REINSERT = "CHAMELEON_NO_REINSERT"
CEASER_PLUS_VC = "CEASER_PLUS_VC"

MODELS = (
    FULLY_ASSOCIATIVE_RANDOM,
    SET_ASSOCIATIVE,
    CEASER,
    CEASER_S,
    CHAMELEON,
    CHAMELEON_NO_REINSERT,
    CEASER_PLUS_VC,
)

_VC_MODELS = {CHAMELEON, CHAMELEON_NO_REINSERT, CEASER_PLUS_VC}
_IDF_MODELS = {CEASER, CEASER_S} | _VC_MODELS

RANDOM = "RANDOM"
LRU = "LRU"

# Telemetry event kinds.
RSC_HIT = "RSC_HIT"
VC_HIT = "VC_HIT"
MISS = "MISS"
EVICT_TO_MEMORY = "EVICT_TO_MEMORY"
REINSERT_SWAP = "REINSERT_SWAP"


def list_models():
    """Names of all supported cache models."""
    return list(MODELS)


@dataclass(frozen=True)
class CacheConfig:
    """Geometry and behavior knobs for one cache instance.

    s sets (power of two), w total ways, d divisions (d | w), w_vc victim
    cache ways (VC-bearing models only).  reinsert_period is the number of
    lookups between automatic reinsertion passes; 1 (the default) runs the
    pass to completion at the end of every lookup.
    """

    model: str
    s: int
    w: int
    d: int = 1
    w_vc: int = 0
    replacement: str = RANDOM
    seed: int = 0
    reinsert_period: int = 1

    def validate(self):
        if self.model not in MODELS:
            raise InvalidConfigError(f"unknown model {self.model!r}")
        if self.s < 1 or (self.s & (self.s - 1)) != 0:
            raise InvalidConfigError(f"s={self.s} is not a power of two")
        if self.w < 1:
            raise InvalidConfigError(f"w={self.w} must be >= 1")
        if not (1 <= self.d <= self.w):
            raise InvalidConfigError(f"d={self.d} outside [1, w={self.w}]")
        if self.w % self.d != 0:
            raise InvalidConfigError(f"d={self.d} does not divide w={self.w}")
        if self.replacement not in (RANDOM, LRU):
            raise InvalidConfigError(f"unknown replacement {self.replacement!r}")
        if self.model in _VC_MODELS:
            if self.w_vc < 1:
                raise InvalidConfigError(
                    f"model {self.model} requires w_vc >= 1, got {self.w_vc}")
        elif self.w_vc != 0:
            raise InvalidConfigError(
                f"model {self.model} is VC-less but w_vc={self.w_vc}")
        if self.model in (CEASER, CEASER_PLUS_VC) and self.d != 1:
            raise InvalidConfigError(f"model {self.model} requires d=1")
        if self.reinsert_period < 0:
            raise InvalidConfigError("reinsert_period must be >= 0")
        return self

    @property
    def n_lines(self):
        return self.s * self.w

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def label(self):
        base = f"{self.model} s={self.s} w={self.w} d={self.d}"
        if self.model in _VC_MODELS:
            base += f" w_vc={self.w_vc}"
        return base

    # Flat key=value serialization (keys are exactly the field names).
    _FIELDS = ("model", "s", "w", "d", "w_vc", "replacement", "seed",
               "reinsert_period")

    def to_kv(self):
        return "".join(f"{k} = {getattr(self, k)}\n" for k in self._FIELDS)

    @classmethod
    def from_kv(cls, text):
        vals = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfigError(f"line {lineno}: expected key = value")
            k, v = (part.strip() for part in line.split("=", 1))
            if k not in cls._FIELDS:
                raise InvalidConfigError(f"line {lineno}: unknown key {k!r}")
            vals[k] = v
        if "model" not in vals:
            raise InvalidConfigError("missing required key 'model'")
        kwargs = {"model": vals.pop("model")}
        if "replacement" in vals:
            kwargs["replacement"] = vals.pop("replacement")
        for k, v in vals.items():
            kwargs[k] = int(v)
        return cls(**kwargs).validate()


class AccessOutcome:
    """Result of one lookup.  `hit` is the only attacker-visible field;
    `internal_detail` is telemetry-only."""

    __slots__ = ("hit", "internal_detail")

    def __init__(self, hit, internal_detail):
        self.hit = hit
        self.internal_detail = internal_detail

    def __repr__(self):
        return f"AccessOutcome(hit={self.hit}, detail={self.internal_detail})"


_OUT_RSC_HIT = AccessOutcome(True, RSC_HIT)
_OUT_VC_HIT = AccessOutcome(True, VC_HIT)
_OUT_MISS = AccessOutcome(False, MISS)


class AttackerView:
    """The attacker-facing handle: lookup's hit bit and nothing else.

    Also counts accesses so profiling cost can be accounted without giving
    the attacker code any privileged state.
    """

    __slots__ = ("_lookup", "accesses")

    def __init__(self, cache):
        self._lookup = cache.lookup
        self.accesses = 0

    def access(self, a):
        self.accesses += 1
        return self._lookup(a).hit


class Cache:
    """Base class: telemetry plumbing and the privileged evaluator surface."""

    def __init__(self, config, record_events=True):
        config.validate()
        self.config = config
        self.rng = random.Random(config.seed)
        self.record_events = record_events
        self.events = []
        self.step = 0
        self.hits = 0
        self.misses = 0
        self.mem_evictions = 0

    # -- telemetry -------------------------------------------------------
    def telemetry_drain(self):
        evs = self.events
        self.events = []
        return evs

    def telemetry_to_csv(self, path):
        """Export the pending event log as CSV (step, event, tag_hex).

        REINSERT_SWAP rows carry the tag leaving the RSC (the swap's VC-bound
        line); the VC-bound direction is the information-bearing one.
        """
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["step", "event", "tag_hex"])
            for ev in self.events:
                step, kind = ev[0], ev[1]
                if kind == REINSERT_SWAP:
                    tag = ev[3]
                else:
                    tag = ev[2] if len(ev) > 2 else EMPTY
                wr.writerow([step, kind, "" if tag == EMPTY else f"{tag:x}"])

    def attacker_view(self):
        return AttackerView(self)

    # -- evaluator surface, overridden per model --------------------------
    def lookup(self, a):
        raise NotImplementedError

    def flush(self):
        raise NotImplementedError

    def invalidate(self, a):
        raise NotImplementedError

    def resident_tags(self):
        raise NotImplementedError

    def occupancy(self):
        return len(self.resident_tags())


class FullyAssociativeCache(Cache):
    """N-line fully associative cache with random replacement."""

    def __init__(self, config, record_events=True):
        super().__init__(config, record_events)
        self.n = config.n_lines
        self._init_state()

    def _init_state(self):
        self.lines = [EMPTY] * self.n
        self.where = {}
        self.free = list(range(self.n - 1, -1, -1))

    def lookup(self, a):
        self.step += 1
        if a in self.where:
            self.hits += 1
            if self.record_events:
                self.events.append((self.step, RSC_HIT, a))
            return _OUT_RSC_HIT
        self.misses += 1
        if self.record_events:
            self.events.append((self.step, MISS, a))
        if self.free:
            pos = self.free.pop()
        else:
            pos = self.rng.randrange(self.n)
            old = self.lines[pos]
            del self.where[old]
            self.mem_evictions += 1
            if self.record_events:
                self.events.append((self.step, EVICT_TO_MEMORY, old))
        self.lines[pos] = a
        self.where[a] = pos
        return _OUT_MISS

    def flush(self):
        self._init_state()

    def invalidate(self, a):
        """Drop a line; returns the vacated slot index, else None."""
        pos = self.where.pop(a, None)
        if pos is not None:
            self.lines[pos] = EMPTY
            self.free.append(pos)
        return pos

    def place(self, pos, tag):
        """Metrology hook: refill a slot vacated by invalidate() without
        going through the replacement path."""
        if self.lines[pos] != EMPTY:
            raise InternalConsistencyError(f"place into occupied slot {pos}")
        self.lines[pos] = tag
        self.where[tag] = pos
        self.free.remove(pos)

    def resident_tags(self):
        return list(self.where)


class SetAssociativeCache(Cache):
    """Plain set-associative baseline; the set index is the address low bits."""

    def __init__(self, config, record_events=True):
        super().__init__(config, record_events)
        if config.d != 1:
            raise InvalidConfigError("SET_ASSOCIATIVE requires d=1")
        self.s = config.s
        self.w = config.w
        self._init_state()

    def _init_state(self):
        self.lines = [EMPTY] * (self.s * self.w)
        self.lru = {} if self.config.replacement == LRU else None

    def _victim_way(self, base):
        lines = self.lines
        for k in range(base, base + self.w):
            if lines[k] == EMPTY:
                return k
        if self.lru is not None:
            order = self.lru[base]
            return order.pop(0)
        return base + self.rng.randrange(self.w)

    def _touch(self, base, pos):
        if self.lru is not None:
            order = self.lru.setdefault(base, [])
            if pos in order:
                order.remove(pos)
            order.append(pos)

    def lookup(self, a):
        self.step += 1
        base = (a & (self.s - 1)) * self.w
        lines = self.lines
        for k in range(base, base + self.w):
            if lines[k] == a:
                self.hits += 1
                self._touch(base, k)
                if self.record_events:
                    self.events.append((self.step, RSC_HIT, a))
                return _OUT_RSC_HIT
        self.misses += 1
        if self.record_events:
            self.events.append((self.step, MISS, a))
        pos = self._victim_way(base)
        old = lines[pos]
        if old != EMPTY:
            self.mem_evictions += 1
            if self.record_events:
                self.events.append((self.step, EVICT_TO_MEMORY, old))
        lines[pos] = a
        self._touch(base, pos)
        return _OUT_MISS

    def flush(self):
        self._init_state()

    def invalidate(self, a):
        """Drop a line; returns the vacated slot index, else None."""
        base = (a & (self.s - 1)) * self.w
        for k in range(base, base + self.w):
            if self.lines[k] == a:
                self.lines[k] = EMPTY
                if self.lru is not None and base in self.lru and k in self.lru[base]:
                    self.lru[base].remove(k)
                return k
        return None

    def place(self, pos, tag):
        """Metrology hook: refill a slot vacated by invalidate() with a tag
        whose set index matches that slot."""
        if self.lines[pos] != EMPTY:
            raise InternalConsistencyError(f"place into occupied slot {pos}")
        if (tag & (self.s - 1)) != pos // self.w:
            raise InternalConsistencyError(
                f"tag {tag:#x} does not map to set {pos // self.w}")
        self.lines[pos] = tag
        self._touch((pos // self.w) * self.w, pos)

    def resident_tags(self):
        return [t for t in self.lines if t != EMPTY]


class SkewedCache(Cache):
    """Randomized skewed cache, optionally with a reinserting victim cache.

    Covers CEASER (d=1), CEASER-S, CHAMELEON, CHAMELEON_NO_REINSERT and
    CEASER_PLUS_VC.  The RSC is a d x s x (w/d) tag array stored flat; the VC
    cursors are kept as unbounded shadow counters whose value mod w_vc is the
    slot index, so the catch-up comparison of the automatic reinsertion loop
    stays well defined across wrap-around.
    """

    def __init__(self, config, record_events=True):
        super().__init__(config, record_events)
        self.s = config.s
        self.w = config.w
        self.d = config.d
        self.wd = config.w // config.d
        self.w_vc = config.w_vc
        self.has_vc = config.model in _VC_MODELS
        self.reinsert_on_hit = config.model in (CHAMELEON, CEASER_PLUS_VC)
        self.auto_reinsert_on = self.reinsert_on_hit and config.reinsert_period > 0
        # period 1 (the default) only ever has pending work after a miss, so
        # hit paths can skip the bookkeeping entirely
        self._deferred_reinsert = self.auto_reinsert_on and config.reinsert_period > 1
        self.keys = keys_from_rng(self.rng, self.d, generation=0)
        self.generation = 0
        self._memo = {}
        self._init_state()

    def _init_state(self):
        self.rsc = [EMPTY] * (self.d * self.s * self.wd)
        self.vc = [EMPTY] * self.w_vc
        self.ins_ctr = 0      # shadow counter behind idx_vc_insert
        self.reins_ctr = 0    # shadow counter behind idx_vc_reinsert
        self.lru = {} if self.config.replacement == LRU else None
        self.lookups_since_reinsert = 0
        self.division_inserts = [0] * self.d

    # cursor positions as slot indices, per the state contract
    @property
    def idx_vc_insert(self):
        return self.ins_ctr % self.w_vc if self.w_vc else 0

    @property
    def idx_vc_reinsert(self):
        return self.reins_ctr % self.w_vc if self.w_vc else 0

    def indices(self, a):
        idxs = self._memo.get(a)
        if idxs is None:
            idxs = derive_indices(a, self.keys, self.s)
            self._memo[a] = idxs
        return idxs

    def _touch(self, base, pos):
        if self.lru is not None:
            order = self.lru.setdefault(base, [])
            if pos in order:
                order.remove(pos)
            order.append(pos)

    def _victim_way(self, base):
        """Way to (re)fill in the set starting at base: first empty way if
        any, else the replacement policy's victim."""
        rsc = self.rsc
        for k in range(base, base + self.wd):
            if rsc[k] == EMPTY:
                return k
        if self.lru is not None:
            return self.lru[base].pop(0)
        return base + self.rng.randrange(self.wd)

    def lookup(self, a):
        self.step += 1
        idxs = self.indices(a)
        rsc = self.rsc
        s, wd = self.s, self.wd
        for i in range(self.d):
            base = (i * s + idxs[i]) * wd
            for k in range(base, base + wd):
                if rsc[k] == a:
                    self.hits += 1
                    self._touch(base, k)
                    if self.record_events:
                        self.events.append((self.step, RSC_HIT, a))
                    if self._deferred_reinsert:
                        self._tick_reinsert()
                    return _OUT_RSC_HIT
        if self.has_vc:
            vc = self.vc
            for j in range(self.w_vc):
                if vc[j] == a:
                    self.hits += 1
                    if self.record_events:
                        self.events.append((self.step, VC_HIT, a))
                    if self.reinsert_on_hit:
                        self.rsc_reinsert(j)
                    if self._deferred_reinsert:
                        self._tick_reinsert()
                    return _OUT_VC_HIT
        self.misses += 1
        if self.record_events:
            self.events.append((self.step, MISS, a))
        self.rsc_insert(a, idxs)
        if self.auto_reinsert_on:
            if self._deferred_reinsert:
                self._tick_reinsert()
            else:
                self.automatic_reinsert()
        return _OUT_MISS

    def _tick_reinsert(self):
        self.lookups_since_reinsert += 1
        if self.lookups_since_reinsert >= self.config.reinsert_period:
            self.lookups_since_reinsert = 0
            self.automatic_reinsert()

    def rsc_insert(self, a, idxs):
        """Insert a at a uniformly drawn division; a valid victim line moves
        to the VC at the advanced insert cursor (pre-increment), evicting the
        slot's previous occupant to memory."""
        d_hat = self.rng.randrange(self.d) if self.d > 1 else 0
        self.division_inserts[d_hat] += 1
        base = (d_hat * self.s + idxs[d_hat]) * self.wd
        pos = self._victim_way(base)
        victim = self.rsc[pos]
        if victim == a:
            raise InternalConsistencyError("insert of an already-present tag")
        if victim != EMPTY:
            if self.has_vc:
                self.ins_ctr += 1
                slot = self.ins_ctr % self.w_vc
                old = self.vc[slot]
                if old != EMPTY:
                    self.mem_evictions += 1
                    if self.record_events:
                        self.events.append((self.step, EVICT_TO_MEMORY, old))
                self.vc[slot] = victim
            else:
                self.mem_evictions += 1
                if self.record_events:
                    self.events.append((self.step, EVICT_TO_MEMORY, victim))
        self.rsc[pos] = a
        self._touch(base, pos)

    def rsc_reinsert(self, vc_slot):
        """Swap VC[vc_slot] with a replacement-policy victim in one of the
        line's sets.  Slot-preserving; never evicts to memory."""
        tag = self.vc[vc_slot]
        if tag == EMPTY:
            raise InternalConsistencyError(f"reinsert of empty VC slot {vc_slot}")
        idxs = self.indices(tag)
        d_hat = self.rng.randrange(self.d) if self.d > 1 else 0
        base = (d_hat * self.s + idxs[d_hat]) * self.wd
        pos = self._victim_way(base)
        out = self.rsc[pos]
        self.rsc[pos] = tag
        self.vc[vc_slot] = out
        self._touch(base, pos)
        if self.record_events:
            self.events.append((self.step, REINSERT_SWAP, tag, out))

    def automatic_reinsert(self):
        """Reinsert pending VC lines until the reinsert counter catches up
        with the insert counter.  A slot can be empty if a VC hit already
        reinserted the pending line; such slots are skipped."""
        while self.reins_ctr < self.ins_ctr:
            self.reins_ctr += 1
            slot = self.reins_ctr % self.w_vc
            if self.vc[slot] != EMPTY:
                self.rsc_reinsert(slot)

    def rekey(self):
        """Draw fresh keys from the cache's PRNG stream and flush everything."""
        self.generation += 1
        self.keys = keys_from_rng(self.rng, self.d, generation=self.generation)
        self._memo = {}
        self._init_state()

    def flush(self):
        """Invalidate all contents, keeping keys (and their memo table)."""
        self._init_state()

    def invalidate(self, a):
        """Drop a line; returns the vacated slot token (an RSC flat index or
        ("vc", slot)) so state-surgery callers can refill it, else None."""
        idxs = self.indices(a)
        for i in range(self.d):
            base = (i * self.s + idxs[i]) * self.wd
            for k in range(base, base + self.wd):
                if self.rsc[k] == a:
                    self.rsc[k] = EMPTY
                    if self.lru is not None and base in self.lru and k in self.lru[base]:
                        self.lru[base].remove(k)
                    return k
        for j in range(self.w_vc):
            if self.vc[j] == a:
                self.vc[j] = EMPTY
                return ("vc", j)
        return None

    def slot_coords(self, pos):
        """Map an RSC flat index to its (division, set index) pair."""
        return pos // (self.s * self.wd), (pos // self.wd) % self.s

    def place(self, pos, tag):
        """Metrology hook: refill a slot vacated by invalidate() with a tag
        whose derived index matches that slot, bypassing the insertion path.
        Used by the leakage estimator to keep the cache exactly full without
        perturbing any other state."""
        if isinstance(pos, tuple):
            _, j = pos
            if self.vc[j] != EMPTY:
                raise InternalConsistencyError(f"place into occupied VC slot {j}")
            self.vc[j] = tag
            return
        if self.rsc[pos] != EMPTY:
            raise InternalConsistencyError(f"place into occupied RSC slot {pos}")
        division, index = self.slot_coords(pos)
        if self.indices(tag)[division] != index:
            raise InternalConsistencyError(
                f"tag {tag:#x} does not map to set {index} of division {division}")
        self.rsc[pos] = tag
        if self.lru is not None:
            self._touch((pos // self.wd) * self.wd, pos)

    def resident_tags(self):
        tags = [t for t in self.rsc if t != EMPTY]
        tags += [t for t in self.vc if t != EMPTY]
        return tags

    def check_tag_uniqueness(self):
        tags = self.resident_tags()
        if len(tags) != len(set(tags)):
            raise InternalConsistencyError("duplicate tag in RSC ∪ VC")


def make_cache(config, record_events=True):
    """Init: build a cache instance for the given configuration."""
    config.validate()
    if config.model == FULLY_ASSOCIATIVE_RANDOM:
        return FullyAssociativeCache(config, record_events)
    if config.model == SET_ASSOCIATIVE:
        return SetAssociativeCache(config, record_events)
    return SkewedCache(config, record_events)
