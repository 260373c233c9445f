"""Trace-driven single-level miss-rate comparison across cache models.

Desk-scale stand-in for a full-system IPC study: miss rates only, one cache
level, synthetic or file-based traces at line granularity.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .cache import make_cache
from .errors import InvalidConfigError, TraceParseError

UNIFORM = "UNIFORM"
ZIPF = "ZIPF"
LOOP = "LOOP"
TRACE_KINDS = (UNIFORM, ZIPF, LOOP)

TRACE_CSV_SCHEMA = "chamsim/trace/v1"


@dataclass
class Trace:
    accesses: list
    source: str = "synthetic"

    def __len__(self):
        return len(self.accesses)


@dataclass
class MissRateReport:
    model: str
    accesses: int
    misses: int
    miss_rate: float
    relative_to_baseline: float


def load_trace(path):
    """Parse a trace file: one lowercase hex line address per line, '#'
    comments allowed."""
    accesses = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                accesses.append(int(line, 16))
            except ValueError:
                raise TraceParseError(path, lineno, f"not a hex address: {line!r}")
    if not accesses:
        raise TraceParseError(path, 0, "empty trace")
    return Trace(accesses, source=path)


def save_trace(trace, path):
    with open(path, "w") as fh:
        for a in trace.accesses:
            fh.write(f"{a:x}\n")


def _scramble(ids):
    """Map small integer line ids to spread-out addresses, deterministically
    (splitmix64 finalizer), so baseline set-index bits are unbiased."""
    x = np.asarray(ids, dtype=np.uint64)
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return x & np.uint64((1 << 48) - 1)


def synth_trace(kind, length, seed, alpha=1.0, working_set=4096, universe=65536):
    """Deterministic synthetic trace: UNIFORM, ZIPF(alpha) or
    LOOP(working_set)."""
    if length < 1:
        raise InvalidConfigError("length must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == LOOP:
        ids = np.resize(np.arange(working_set, dtype=np.uint64), length)
    elif kind == UNIFORM:
        ids = rng.integers(0, universe, size=length, dtype=np.uint64)
    elif kind == ZIPF:
        if alpha <= 0:
            raise InvalidConfigError(f"zipf alpha={alpha} must be > 0")
        p = 1.0 / np.arange(1, universe + 1, dtype=float) ** alpha
        p /= p.sum()
        ids = rng.choice(universe, size=length, p=p).astype(np.uint64)
    else:
        raise InvalidConfigError(f"unknown trace kind {kind!r}")
    addrs = _scramble(ids)
    return Trace([int(a) for a in addrs],
                 source=f"{kind}(len={length},seed={seed})")


def run_trace(trace, configs):
    """Replay the trace against each config; the first config is the
    baseline for the relative miss-rate column."""
    if not configs:
        raise InvalidConfigError("need at least one config")
    reports = []
    base_rate = None
    for cfg in configs:
        cache = make_cache(cfg, record_events=False)
        lookup = cache.lookup
        for a in trace.accesses:
            lookup(a)
        rate = cache.misses / len(trace.accesses)
        if base_rate is None:
            base_rate = rate
            rel = 1.0
        elif base_rate == 0.0:
            rel = 1.0 if rate == 0.0 else float("inf")
        else:
            rel = rate / base_rate
        reports.append(MissRateReport(model=cfg.label(), accesses=len(trace.accesses),
                                      misses=cache.misses, miss_rate=rate,
                                      relative_to_baseline=rel))
    return reports


def write_reports_csv(reports, path, schema=TRACE_CSV_SCHEMA):
    with open(path, "w", newline="") as fh:
        fh.write(f"#{schema}\n")
        wr = csv.writer(fh)
        wr.writerow(["model", "accesses", "misses", "miss_rate", "relative"])
        for r in reports:
            wr.writerow([r.model, r.accesses, r.misses,
                         f"{r.miss_rate:.6f}", f"{r.relative_to_baseline:.6f}"])
