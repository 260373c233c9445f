"""Leakage metrics: Welch's t, closed-form collision probabilities with
Monte-Carlo oracles, and the relative eviction entropy estimator.

The entropy estimator is an operationalization: bits of mutual information
per eviction between a victim's secret address and the identity of the
attacker line that gets evicted to memory, plug-in estimated with a
Miller-Madow bias correction.  Only orderings and magnitudes are meaningful,
not third decimals.
"""

import math
import random
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .cache import EVICT_TO_MEMORY
from .errors import EstimatorPrecisionError, InvalidConfigError
from .idf import derive_indices_batch, generate_keys

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Welch's t
# ---------------------------------------------------------------------------

def welch_t(a, b):
    """Welch's unequal-variance t statistic for the means of two samples.

    Zero-variance edge cases: equal means give 0, unequal means give a
    signed infinity sentinel so sweep pipelines stay total.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("welch_t needs at least 2 samples per set")
    ma, mb = a.mean(), b.mean()
    se2 = a.var(ddof=1) / a.size + b.var(ddof=1) / b.size
    if se2 == 0.0:
        if ma == mb:
            return 0.0
        return math.copysign(math.inf, ma - mb)
    return float((ma - mb) / math.sqrt(se2))


# ---------------------------------------------------------------------------
# Closed-form collision probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityModel:
    """Geometry symbols for the closed forms: s sets, w ways, d divisions."""

    s: int
    w: int
    d: int

    def validate(self):
        if self.s < 1 or (self.s & (self.s - 1)) != 0:
            raise InvalidConfigError(f"s={self.s} is not a power of two")
        if self.w < 1 or self.d < 1 or self.d > self.w or self.w % self.d:
            raise InvalidConfigError("need 1 <= d <= w and d | w")
        return self


def full_collision_prob(m):
    """Probability two random addresses collide in every division: s^(-d)."""
    m.validate()
    return float(m.s) ** (-m.d)


def partial_collision_prob(m):
    """Probability of a collision in at least one division, under one index
    per way: 1 - ((s-1)/s)^w.  Stated for d = w; approximate otherwise."""
    m.validate()
    return 1.0 - ((m.s - 1) / m.s) ** m.w


def proxy_prob(m):
    """Probability a random address collides with two fixed addresses in
    different divisions: w^2 / s^2 for d = w, clamped to [0, 1]."""
    m.validate()
    return min(1.0, (m.w / m.s) ** 2)


def second_order_eviction_prob(m):
    """Chance a known proxy chain evicts the target under random
    replacement: w^(-4)."""
    m.validate()
    return float(m.w) ** (-4)


# ---------------------------------------------------------------------------
# Monte-Carlo oracles for the closed forms
# ---------------------------------------------------------------------------

def _rand_addrs(rng, n):
    return rng.integers(0, 1 << 48, size=n, dtype=np.uint64)


def mc_full_collision(m, n_pairs, seed):
    """Fraction of random address pairs whose indices collide in all d
    divisions, measured through the real IDF."""
    m.validate()
    rng = np.random.default_rng(seed)
    keys = generate_keys(int(rng.integers(1 << 30)), m.d)
    a = _rand_addrs(rng, n_pairs)
    b = _rand_addrs(rng, n_pairs)
    coll = np.ones(n_pairs, dtype=bool)
    for k in keys:
        coll &= derive_indices_batch(a, k, m.s) == derive_indices_batch(b, k, m.s)
    return float(coll.mean())


def mc_partial_collision(m, n_pairs, seed):
    """Fraction of random pairs colliding in at least one of w single-way
    divisions (d = w)."""
    m.validate()
    rng = np.random.default_rng(seed)
    keys = generate_keys(int(rng.integers(1 << 30)), m.w)
    a = _rand_addrs(rng, n_pairs)
    b = _rand_addrs(rng, n_pairs)
    coll = np.zeros(n_pairs, dtype=bool)
    for k in keys:
        coll |= derive_indices_batch(a, k, m.s) == derive_indices_batch(b, k, m.s)
    return float(coll.mean())


def mc_proxy(m, n_samples, seed, n_anchor_pairs=8):
    """Fraction of random addresses X that collide with fixed C in some
    division and with fixed Y in a different one, averaged over anchor
    pairs (C, Y)."""
    m.validate()
    rng = np.random.default_rng(seed)
    keys = generate_keys(int(rng.integers(1 << 30)), m.w)
    total = 0
    per = n_samples // n_anchor_pairs
    for _ in range(n_anchor_pairs):
        c = np.uint64(rng.integers(1 << 48))
        y = np.uint64(rng.integers(1 << 48))
        x = _rand_addrs(rng, per)
        hit_c = np.zeros(per, dtype=bool)
        hit_y_other = np.zeros(per, dtype=bool)
        cols_c = []
        cols_y = []
        for k in keys:
            xi = derive_indices_batch(x, k, m.s)
            cols_c.append(xi == int(derive_indices_batch(np.array([c]), k, m.s)[0]))
            cols_y.append(xi == int(derive_indices_batch(np.array([y]), k, m.s)[0]))
        cols_c = np.stack(cols_c)
        cols_y = np.stack(cols_y)
        # need a C-collision in some division i and a Y-collision in some j != i
        any_c = cols_c.any(axis=0)
        any_y = cols_y.any(axis=0)
        same_only = (cols_c & cols_y).any(axis=0) & (cols_c.sum(axis=0) == 1) \
            & (cols_y.sum(axis=0) == 1)
        ok = any_c & any_y & ~same_only
        total += int(ok.sum())
    return total / (per * n_anchor_pairs)


def mc_proxy_pairs(m, n_samples, seed):
    """Unbiased oracle for w^2/s^2: mean number of division pairs (i, j)
    in which a random X collides with random anchors C (division i) and Y
    (division j).  Each of the w^2 pairs occurs with probability exactly
    1/s^2, so the expectation equals the closed form; the event fraction of
    mc_proxy is below it by the double-counting the approximation ignores.
    """
    m.validate()
    rng = np.random.default_rng(seed)
    keys = generate_keys(int(rng.integers(1 << 30)), m.w)
    x = _rand_addrs(rng, n_samples)
    c = _rand_addrs(rng, n_samples)
    y = _rand_addrs(rng, n_samples)
    c_hits = np.zeros(n_samples, dtype=np.int64)
    y_hits = np.zeros(n_samples, dtype=np.int64)
    for k in keys:
        xi = derive_indices_batch(x, k, m.s)
        c_hits += xi == derive_indices_batch(c, k, m.s)
        y_hits += xi == derive_indices_batch(y, k, m.s)
    return float((c_hits * y_hits).mean())


def mc_second_order(s, w, trials, seed):
    """Event-level oracle for the w^(-4) chain on a real CHAMELEON instance.

    Scripted scenario per trial: flush; access C, then X (collides with C in
    exactly one division), then Y (collides with X in exactly one other
    division, never with C).  Success = C displaced out of the RSC during
    Y's lookup, observed via the reinsert-swap telemetry.
    """
    from .cache import CHAMELEON, CacheConfig, REINSERT_SWAP, make_cache
    from .idf import derive_indices

    cfg = CacheConfig(model=CHAMELEON, s=s, w=w, d=w, w_vc=2, seed=seed)
    cache = make_cache(cfg)
    rng = random.Random(seed ^ 0x5EC0)
    keys, sets = cache.keys, s

    def idx(a):
        return derive_indices(a, keys, sets)

    c_addr = rng.getrandbits(48)
    ci = idx(c_addr)
    # X: exactly one collision division with C
    while True:
        x_addr = rng.getrandbits(48)
        xi = idx(x_addr)
        shared = [i for i in range(w) if xi[i] == ci[i]]
        if len(shared) == 1:
            div_cx = shared[0]
            break
    # Y: exactly one collision division with X, different from div_cx, none with C
    while True:
        y_addr = rng.getrandbits(48)
        yi = idx(y_addr)
        if any(yi[i] == ci[i] for i in range(w)):
            continue
        shared = [i for i in range(w) if yi[i] == xi[i]]
        if len(shared) == 1 and shared[0] != div_cx:
            break

    from .cache import EMPTY

    successes = 0
    for _ in range(trials):
        cache.lookup(c_addr)
        cache.lookup(x_addr)
        cache.events.clear()
        cache.lookup(y_addr)
        for ev in cache.events:
            if ev[1] == REINSERT_SWAP and ev[3] == c_addr:
                successes += 1
                break
        cache.events.clear()
        # targeted cleanup: only these three lines ever enter the cache
        cache.invalidate(c_addr)
        cache.invalidate(x_addr)
        cache.invalidate(y_addr)
        for j in range(cache.w_vc):
            cache.vc[j] = EMPTY
        cache.ins_ctr = cache.reins_ctr = 0
    return successes / trials


def binomial_sigma(p, n):
    return math.sqrt(max(p * (1.0 - p), 1e-300) / n)


# ---------------------------------------------------------------------------
# Mutual information / relative eviction entropy
# ---------------------------------------------------------------------------

def mutual_information_bits(joint):
    """Plug-in MI (bits) of a joint count table {(x, y): count}, with the
    Miller-Madow corrected value returned alongside.

    Returns (plugin, corrected); corrected is clamped at 0.
    """
    n = sum(joint.values())
    if n == 0:
        raise ValueError("empty joint table")
    nx = defaultdict(int)
    ny = defaultdict(int)
    for (x, y), c in joint.items():
        nx[x] += c
        ny[y] += c
    mi = 0.0
    for (x, y), c in joint.items():
        mi += c * math.log((c * n) / (nx[x] * ny[y]))
    mi /= n * LN2
    # Miller-Madow bias for MI: (K_xy - K_x - K_y + 1) / (2 n ln 2)
    bias = (len(joint) - len(nx) - len(ny) + 1) / (2.0 * n * LN2)
    return mi, max(0.0, mi - bias)


_NO_EVICTION = -2  # observation symbol when the victim access evicts nothing


@dataclass
class EntropyReport:
    bits: float
    plugin_bits: float
    ci_low: float
    ci_high: float
    n: int


MIN_ENTROPY_TRIALS = 100_000


def _plugin_mi_bits(ix, iy, counts):
    """Plug-in MI in bits from parallel cell arrays (x code, y code, count)."""
    counts = counts.astype(np.float64)
    n = counts.sum()
    nx = np.bincount(ix, weights=counts)
    ny = np.bincount(iy, weights=counts)
    return float(np.sum(counts * np.log((counts * n) / (nx[ix] * ny[iy])))
                 / (n * LN2))


def _independence_baseline(nx, ny, rng, reps):
    """Mean plug-in MI of synthetic tables drawn with the same marginals but
    independent X and Y: the finite-sample bias floor of the plug-in MI at
    this sample size and sparsity."""
    n = int(nx.sum())
    px = nx / n
    py = ny / n
    k_y = len(py)
    vals = []
    for _ in range(reps):
        xs = rng.choice(len(px), size=n, p=px).astype(np.int64)
        ys = rng.choice(k_y, size=n, p=py).astype(np.int64)
        codes, counts = np.unique(xs * k_y + ys, return_counts=True)
        vals.append(_plugin_mi_bits(codes // k_y, codes % k_y, counts))
    return float(np.mean(vals))


def _slot_candidates(cache, pool):
    """Group the pool by the slot constraint of the cache family: per
    (division, set index) for skewed designs, per set for set-associative,
    one unconstrained group for fully associative.  Returns a lookup
    function slot_token -> candidate list."""
    if hasattr(cache, "keys"):  # skewed family
        table = [defaultdict(list) for _ in range(cache.d)]
        addrs = np.array(pool, dtype=np.uint64)
        for g, key in enumerate(cache.keys):
            for a, idx in zip(pool, derive_indices_batch(addrs, key, cache.s)):
                table[g][int(idx)].append(a)

        def candidates(pos):
            if isinstance(pos, tuple):  # VC slot: unconstrained
                return pool
            g, i = cache.slot_coords(pos)
            return table[g][i]
        return candidates
    if hasattr(cache, "where"):  # fully associative
        return lambda pos: pool
    by_set = defaultdict(list)
    for a in pool:
        by_set[a & (cache.s - 1)].append(a)
    return lambda pos: by_set[pos // cache.w]


def relative_eviction_entropy(cache_factory, trials, n_secrets=64, seed=0,
                              bootstrap=20):
    """Estimate bits leaked per eviction about the victim's secret address.

    Protocol: fill the cache from an attacker pool twice its capacity (so
    every set saturates); per trial a victim accesses one of n_secrets fixed
    secret addresses and telemetry identifies which attacker line got evicted
    to memory.  The trial is then undone by surgery: the secret line is
    invalidated and its slot refilled with a randomly drawn non-resident pool
    line that maps to the same set, so the cache stays exactly full while
    slot occupants keep churning.  The churn is essential: it marginalizes
    which division a displacement came from, so the estimate reflects what
    the evicted address itself reveals rather than a frozen placement.

    The estimate is the plug-in MI between secret index and evicted identity
    minus an empirical independence baseline (plug-in MI of same-marginal
    tables with X and Y independent), which removes the sparse-table bias
    that dominates for weakly leaking designs.  The CI is a multinomial
    bootstrap of the debiased statistic (covers variance at this n).
    """
    if trials < MIN_ENTROPY_TRIALS:
        raise EstimatorPrecisionError(
            f"trials={trials} below documented minimum {MIN_ENTROPY_TRIALS}")
    cache = cache_factory()
    rng = random.Random(seed)
    capacity = cache.config.n_lines
    used = set()

    def fresh():
        while True:
            a = rng.getrandbits(48)
            if a not in used:
                used.add(a)
                return a

    pool = [fresh() for _ in range(2 * capacity)]
    secrets = [fresh() for _ in range(n_secrets)]

    for _ in range(5):
        before = cache.misses
        for a in pool:
            cache.lookup(a)
        if cache.misses == before:
            break
    cache.telemetry_drain()

    candidates = _slot_candidates(cache, pool)
    resident = set(cache.resident_tags())
    joint = defaultdict(int)
    for _ in range(trials):
        j = rng.randrange(n_secrets)
        cache.events.clear()
        cache.lookup(secrets[j])
        obs = _NO_EVICTION
        for ev in cache.events:
            if ev[1] == EVICT_TO_MEMORY:
                obs = ev[2]
                break
        joint[(j, obs)] += 1
        if obs != _NO_EVICTION:
            resident.discard(obs)
        pos = cache.invalidate(secrets[j])
        cands = candidates(pos)
        for _ in range(64):
            z = cands[rng.randrange(len(cands))]
            if z not in resident:
                cache.place(pos, z)
                resident.add(z)
                break
        cache.events.clear()

    # Re-encode the joint table as dense numpy cell arrays.
    xs = sorted({x for x, _ in joint})
    ys = sorted({y for _, y in joint})
    x_code = {v: i for i, v in enumerate(xs)}
    y_code = {v: i for i, v in enumerate(ys)}
    ix = np.array([x_code[x] for x, _ in joint], dtype=np.int64)
    iy = np.array([y_code[y] for _, y in joint], dtype=np.int64)
    counts = np.array(list(joint.values()), dtype=np.int64)
    nx = np.bincount(ix, weights=counts.astype(np.float64))
    ny = np.bincount(iy, weights=counts.astype(np.float64))

    brng = np.random.default_rng(seed)
    plugin = _plugin_mi_bits(ix, iy, counts)
    bits = max(0.0, plugin - _independence_baseline(nx, ny, brng, reps=3))

    boots = []
    probs = counts / counts.sum()
    for _ in range(bootstrap):
        re_counts = brng.multinomial(int(counts.sum()), probs)
        keep = re_counts > 0
        b_ix, b_iy, b_counts = ix[keep], iy[keep], re_counts[keep]
        b_nx = np.bincount(b_ix, weights=b_counts.astype(np.float64),
                           minlength=len(nx))
        b_ny = np.bincount(b_iy, weights=b_counts.astype(np.float64),
                           minlength=len(ny))
        b_plugin = _plugin_mi_bits(b_ix, b_iy, b_counts)
        boots.append(max(0.0, b_plugin - _independence_baseline(
            b_nx, b_ny, brng, reps=1)))
    # Resampling an already-sparse table re-incurs the plug-in bias, so the
    # bootstrap distribution is offset from the debiased estimate; use its
    # spread recentred on the point estimate.
    lo, hi = np.percentile(boots, [2.5, 97.5])
    center = float(np.mean(boots))
    ci_low = max(0.0, bits - (center - float(lo)))
    ci_high = bits + (float(hi) - center)
    return EntropyReport(bits=bits, plugin_bits=plugin,
                         ci_low=ci_low, ci_high=ci_high, n=trials)
