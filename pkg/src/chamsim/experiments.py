"""Reproducible experiment runners and their CSV/JSON result writers.

Each runner takes an :class:`ExperimentSpec`, derives an independent seed for
every run from the master seed, and returns rows suitable for CSV output.
Every row carries the per-run (or per-config) derived seed so any single run
can be replayed in isolation.

CSV files start with a schema comment line ``#chamsim/<kind>/v1`` so that
downstream consumers can check they are reading the format they expect.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import statistics
from dataclasses import dataclass, field

from .attacker import (
    PPP,
    RANDOM_SAMPLING,
    PPPParams,
    VictimHandle,
    eviction_success_rate,
    fresh_address,
    ppp_profile,
    random_eviction_set,
    truly_conflicting_members,
)
from .cache import (
    CHAMELEON_NO_REINSERT,
    CacheConfig,
    make_cache,
)
from .errors import InvalidConfigError
from .metrics import relative_eviction_entropy, welch_t
from .tracesim import (
    LOOP,
    TRACE_KINDS,
    ZIPF,
    run_trace,
    synth_trace,
    write_reports_csv,
)

ENTROPY = "ENTROPY"
EVICTION_RATE = "EVICTION_RATE"
TTEST = "TTEST"
PPP_TPR = "PPP_TPR"
PPP_COST = "PPP_COST"
VC_NOISE = "VC_NOISE"
TRACE = "TRACE"

EXPERIMENTS = (ENTROPY, EVICTION_RATE, TTEST, PPP_TPR, PPP_COST, VC_NOISE, TRACE)

ENTROPY_CSV_SCHEMA = "chamsim/entropy/v1"
EVICT_CSV_SCHEMA = "chamsim/evict/v1"
TTEST_CSV_SCHEMA = "chamsim/ttest/v1"
PPP_CSV_SCHEMA = "chamsim/ppp/v1"
VCNOISE_CSV_SCHEMA = "chamsim/vcnoise/v1"

_GEOMETRY_FIELDS = ("model", "s", "w", "d", "w_vc")


def derive_seed(master: int, *parts) -> int:
    """Derive an independent 63-bit seed from a master seed and run labels.

    Hash-based so that neighbouring run indices produce unrelated streams
    and any individual run can be replayed from (master, parts) alone.
    """
    text = repr((int(master),) + tuple(parts))
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully describes one experiment: what to run, on which cache configs,
    with which statistical budget, under which master seed."""

    experiment: str
    configs: tuple = ()
    seed: int = 0
    # EVICT / TTEST budget
    M: int = 200
    trials: int = 1000
    set_size_factor: int = 4
    max_rounds: int = 40
    # PPP / VCNOISE budget
    victims: int = 50
    # ENTROPY budget
    entropy_trials: int = 200_000
    n_secrets: int = 64
    # TRACE parameters
    trace_kind: str = ZIPF
    trace_length: int = 200_000
    trace_alpha: float = 1.0
    trace_working_set: int = 4096
    trace_universe: int = 65536

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if not self.configs:
            raise InvalidConfigError("experiment needs at least one cache config")
        for cfg in self.configs:
            cfg.validate()
        for name in ("M", "trials", "set_size_factor", "max_rounds",
                     "victims", "entropy_trials", "n_secrets",
                     "trace_length", "trace_working_set", "trace_universe"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.experiment == TRACE:
            if self.trace_kind not in TRACE_KINDS:
                raise InvalidConfigError(
                    f"unknown trace kind {self.trace_kind!r}; expected one of {TRACE_KINDS}"
                )
            if self.trace_alpha <= 0:
                raise InvalidConfigError(f"trace_alpha must be > 0, got {self.trace_alpha}")

    def to_kv(self) -> str:
        lines = [f"experiment = {self.experiment}"]
        for name in ("seed", "M", "trials", "set_size_factor", "max_rounds",
                     "victims", "entropy_trials", "n_secrets", "trace_kind",
                     "trace_length", "trace_alpha", "trace_working_set",
                     "trace_universe"):
            lines.append(f"{name} = {getattr(self, name)}")
        for i, cfg in enumerate(self.configs):
            for line in cfg.to_kv().splitlines():
                lines.append(f"config{i}.{line}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "ExperimentSpec":
        plain = {}
        grouped = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("config") and "." in key:
                prefix, sub = key.split(".", 1)
                index_text = prefix[len("config"):]
                if not index_text.isdigit():
                    raise InvalidConfigError(f"line {lineno}: bad config group {prefix!r}")
                grouped.setdefault(int(index_text), {})[sub] = value
            else:
                plain[key] = value
        if "experiment" not in plain:
            raise InvalidConfigError("spec is missing the 'experiment' key")
        kwargs = {"experiment": plain.pop("experiment").upper()}
        ints = ("seed", "M", "trials", "set_size_factor", "max_rounds",
                "victims", "entropy_trials", "n_secrets", "trace_length",
                "trace_working_set", "trace_universe")
        for key, value in plain.items():
            if key in ints:
                kwargs[key] = int(value)
            elif key == "trace_alpha":
                kwargs[key] = float(value)
            elif key == "trace_kind":
                kwargs[key] = value.upper()
            else:
                raise InvalidConfigError(f"unknown spec key {key!r}")
        configs = []
        for index in sorted(grouped):
            kv = "\n".join(f"{k} = {v}" for k, v in grouped[index].items())
            configs.append(CacheConfig.from_kv(kv))
        kwargs["configs"] = tuple(configs)
        spec = cls(**kwargs)
        spec.validate()
        return spec


def _geometry_cells(cfg: CacheConfig) -> dict:
    return {"model": cfg.model, "s": cfg.s, "w": cfg.w, "d": cfg.d, "w_vc": cfg.w_vc}


@dataclass
class ExperimentResult:
    """CSV-ready outcome of one experiment: schema line, column order, rows,
    and a JSON-serializable summary (including replay seeds)."""

    schema: str
    fieldnames: tuple
    rows: list
    summary: dict = field(default_factory=dict)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"#{self.schema}\n")
            writer = csv.DictWriter(fh, fieldnames=list(self.fieldnames))
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)

    def write_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(
                {"schema": self.schema, "rows": self.rows, "summary": self.summary},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")


def _evict_samples(cfg: CacheConfig, spec: ExperimentSpec, config_index: int):
    """Run `spec.M` independent profile-then-evict experiments on `cfg`.

    Each run profiles an eviction set with Prime+Prune+Probe, draws an
    equally sized random set, and measures both sets' eviction success rate
    against the same victim.  Returns (ppp_rates, random_rates, rows).
    """
    set_size = spec.set_size_factor * cfg.w
    ppp_rates = []
    random_rates = []
    rows = []
    for run in range(spec.M):
        seed = derive_seed(spec.seed, spec.experiment, config_index, run)
        cache = make_cache(cfg.with_seed(seed), record_events=False)
        view = cache.attacker_view()
        rng = random.Random(derive_seed(seed, "attacker"))
        target = fresh_address(rng, set())
        victim = VictimHandle(view, target)
        params = PPPParams(batch_size=cfg.n_lines, probe_mode="all",
                           max_rounds=spec.max_rounds)
        es, _stats = ppp_profile(
            view, victim, set_size, params, rng,
            between_rounds=lambda: cache.invalidate(target),
        )
        rand_es = random_eviction_set(rng, set_size)
        rate_ppp = eviction_success_rate(cache, view, es, victim, spec.trials)
        rate_rand = eviction_success_rate(cache, view, rand_es, victim, spec.trials)
        ppp_rates.append(rate_ppp)
        random_rates.append(rate_rand)
        base = _geometry_cells(cfg)
        rows.append({**base, "run": run, "seed": seed, "provenance": PPP,
                     "set_size": set_size, "success_rate": f"{rate_ppp:.6f}"})
        rows.append({**base, "run": run, "seed": seed,
                     "provenance": RANDOM_SAMPLING, "set_size": set_size,
                     "success_rate": f"{rate_rand:.6f}"})
    return ppp_rates, random_rates, rows


def run_evict(spec: ExperimentSpec) -> ExperimentResult:
    """Per-run eviction success rates of profiled vs. random sets."""
    spec.validate()
    rows = []
    summary = {"runs": []}
    for ci, cfg in enumerate(spec.configs):
        ppp_rates, random_rates, cfg_rows = _evict_samples(cfg, spec, ci)
        rows.extend(cfg_rows)
        summary["runs"].append({
            "config": cfg.to_kv().replace("\n", " "),
            "mean_ppp": statistics.fmean(ppp_rates),
            "mean_random": statistics.fmean(random_rates),
        })
    return ExperimentResult(
        schema=EVICT_CSV_SCHEMA,
        fieldnames=_GEOMETRY_FIELDS + ("run", "seed", "provenance", "set_size",
                                       "success_rate"),
        rows=rows,
        summary=summary,
    )


def run_ttest(spec: ExperimentSpec) -> ExperimentResult:
    """Welch's t between profiled and random eviction success rates.

    A |t| above the 4.5 decision threshold means the profiled sets are
    statistically distinguishable from random guessing, i.e. profiling
    extracted real placement information.
    """
    spec.validate()
    rows = []
    for ci, cfg in enumerate(spec.configs):
        ppp_rates, random_rates, _ = _evict_samples(cfg, spec, ci)
        t_value = welch_t(ppp_rates, random_rates)
        rows.append({
            **_geometry_cells(cfg),
            "M": spec.M,
            "trials": spec.trials,
            "seed": derive_seed(spec.seed, spec.experiment, ci),
            "t_value": f"{t_value:.4f}",
            "mean_ppp": f"{statistics.fmean(ppp_rates):.6f}",
            "mean_random": f"{statistics.fmean(random_rates):.6f}",
        })
    return ExperimentResult(
        schema=TTEST_CSV_SCHEMA,
        fieldnames=_GEOMETRY_FIELDS + ("M", "trials", "seed", "t_value",
                                       "mean_ppp", "mean_random"),
        rows=rows,
        summary={"threshold": 4.5},
    )


def run_ppp(spec: ExperimentSpec) -> ExperimentResult:
    """Prime+Prune+Probe profiling quality: aggregate true-positive rate of
    collected addresses and attacker reads spent per truly conflicting one.

    PPP_COST uses the first-miss probe everywhere: after a clean prune pass
    and a single victim trigger, only the first probed miss is attributable
    to the victim, so on a design without a victim cache every collected
    address is a true conflict.  PPP_TPR additionally adapts the attack to
    designs with a victim cache, where the victim's displacement parks in the
    VC and first-miss probing starves: there it drains the VC with fresh
    fills after each trigger and collects every probed miss.
    """
    spec.validate()
    rows = []
    for ci, cfg in enumerate(spec.configs):
        use_drain = spec.experiment == PPP_TPR and cfg.w_vc > 0
        probe_mode = "all" if use_drain else "first_miss"
        drain = 2 * cfg.w_vc if use_drain else 0
        collected_total = 0
        true_total = 0
        reads_total = 0
        complete = 0
        for v in range(spec.victims):
            seed = derive_seed(spec.seed, spec.experiment, ci, v)
            cache = make_cache(cfg.with_seed(seed), record_events=False)
            view = cache.attacker_view()
            rng = random.Random(derive_seed(seed, "attacker"))
            target = fresh_address(rng, set())
            victim = VictimHandle(view, target)
            params = PPPParams(batch_size=cfg.n_lines, probe_mode=probe_mode,
                               max_rounds=spec.max_rounds, drain_fills=drain)
            es, stats = ppp_profile(
                view, victim, spec.set_size_factor * cfg.w, params, rng,
                between_rounds=lambda: cache.invalidate(target),
            )
            trues = truly_conflicting_members(cache.keys, cfg.s, es.addresses, target)
            collected_total += len(es.addresses)
            true_total += len(trues)
            reads_total += stats.total_read_accesses
            complete += stats.complete
        tpr = true_total / collected_total if collected_total else 0.0
        reads_per_true = reads_total / true_total if true_total else float("inf")
        rows.append({
            **_geometry_cells(cfg),
            "n_lines": cfg.n_lines,
            "victims": spec.victims,
            "seed": derive_seed(spec.seed, spec.experiment, ci),
            "collected": collected_total,
            "true_conflicting": true_total,
            "tpr": f"{tpr:.6f}",
            "reads_per_true": f"{reads_per_true:.1f}",
            "complete_profiles": complete,
        })
    return ExperimentResult(
        schema=PPP_CSV_SCHEMA,
        fieldnames=_GEOMETRY_FIELDS + ("n_lines", "victims", "seed", "collected",
                                       "true_conflicting", "tpr",
                                       "reads_per_true", "complete_profiles"),
        rows=rows,
        summary={},
    )


def run_vcnoise(spec: ExperimentSpec) -> ExperimentResult:
    """Fraction of attacker-observed evictions that are noise, i.e. caused by
    victim-cache displacement rather than a genuine index conflict.

    Protocol per victim: prime a watch set covering the cache, trigger the
    victim once, push the victim-cache contents out with fresh fills, then
    probe the watch set and classify every miss against the ground-truth
    index conflict oracle.
    """
    spec.validate()
    rows = []
    for ci, cfg in enumerate(spec.configs):
        if cfg.model != CHAMELEON_NO_REINSERT:
            raise InvalidConfigError(
                f"VC_NOISE requires {CHAMELEON_NO_REINSERT} configs, got {cfg.model}"
            )
        noisy_total = 0
        miss_total = 0
        for v in range(spec.victims):
            seed = derive_seed(spec.seed, spec.experiment, ci, v)
            cache = make_cache(cfg.with_seed(seed), record_events=False)
            view = cache.attacker_view()
            rng = random.Random(derive_seed(seed, "attacker"))
            used = set()
            pool = [fresh_address(rng, used) for _ in range(cfg.n_lines)]
            for _ in range(3):
                for a in pool:
                    view.access(a)
            watch = [a for a in pool if view.access(a)]
            target = fresh_address(rng, used)
            view.access(target)
            # Drain the victim cache: each fresh fill pushes one parked line
            # out to memory, so a full drain emits w_vc stale lines.
            for _ in range(4 * cfg.w_vc):
                view.access(fresh_address(rng, used))
            missing = [a for a in watch if not view.access(a)]
            trues = truly_conflicting_members(cache.keys, cfg.s, missing, target)
            miss_total += len(missing)
            noisy_total += len(missing) - len(trues)
        noisy_per_victim = noisy_total / spec.victims
        rows.append({
            **_geometry_cells(cfg),
            "victims": spec.victims,
            "seed": derive_seed(spec.seed, spec.experiment, ci),
            "observed_misses": miss_total,
            "noisy_misses": noisy_total,
            "noisy_per_victim": f"{noisy_per_victim:.4f}",
        })
    return ExperimentResult(
        schema=VCNOISE_CSV_SCHEMA,
        fieldnames=_GEOMETRY_FIELDS + ("victims", "seed", "observed_misses",
                                       "noisy_misses", "noisy_per_victim"),
        rows=rows,
        summary={},
    )


def run_entropy(spec: ExperimentSpec) -> ExperimentResult:
    """Mutual information between a victim's secret index and the identity of
    the attacker line evicted to memory, in bits, with a bootstrap CI."""
    spec.validate()
    rows = []
    for ci, cfg in enumerate(spec.configs):
        seed = derive_seed(spec.seed, spec.experiment, ci)
        seeded = cfg.with_seed(seed)
        report = relative_eviction_entropy(
            lambda: make_cache(seeded, record_events=True),
            trials=spec.entropy_trials,
            n_secrets=spec.n_secrets,
            seed=derive_seed(seed, "protocol"),
        )
        rows.append({
            **_geometry_cells(cfg),
            "trials": spec.entropy_trials,
            "seed": seed,
            "bits": f"{report.bits:.4f}",
            "plugin_bits": f"{report.plugin_bits:.4f}",
            "ci_low": f"{report.ci_low:.4f}",
            "ci_high": f"{report.ci_high:.4f}",
        })
    return ExperimentResult(
        schema=ENTROPY_CSV_SCHEMA,
        fieldnames=_GEOMETRY_FIELDS + ("trials", "seed", "bits", "plugin_bits",
                                       "ci_low", "ci_high"),
        rows=rows,
        summary={"n_secrets": spec.n_secrets},
    )


def run_trace_experiment(spec: ExperimentSpec, output: str) -> ExperimentResult:
    """Trace-driven miss rates for every config, relative to the first one."""
    spec.validate()
    trace_seed = derive_seed(spec.seed, spec.experiment, spec.trace_kind)
    trace = synth_trace(
        spec.trace_kind,
        spec.trace_length,
        seed=trace_seed,
        alpha=spec.trace_alpha,
        working_set=spec.trace_working_set,
        universe=spec.trace_universe,
    )
    seeded = [cfg.with_seed(derive_seed(spec.seed, spec.experiment, ci))
              for ci, cfg in enumerate(spec.configs)]
    reports = run_trace(trace, seeded)
    write_reports_csv(reports, output)
    rows = [{"model": r.model, "accesses": r.accesses, "misses": r.misses,
             "miss_rate": f"{r.miss_rate:.6f}",
             "relative": f"{r.relative_to_baseline:.6f}"}
            for r in reports]
    return ExperimentResult(
        schema="chamsim/trace/v1",
        fieldnames=("model", "accesses", "misses", "miss_rate", "relative"),
        rows=rows,
        summary={"trace_kind": spec.trace_kind, "trace_seed": trace_seed},
    )


_RUNNERS = {
    ENTROPY: run_entropy,
    EVICTION_RATE: run_evict,
    TTEST: run_ttest,
    PPP_TPR: run_ppp,
    PPP_COST: run_ppp,
    VC_NOISE: run_vcnoise,
}


def run_experiment(spec: ExperimentSpec, output: str) -> ExperimentResult:
    """Dispatch on spec.experiment, run it, and write the CSV to `output`."""
    spec.validate()
    if spec.experiment == TRACE:
        return run_trace_experiment(spec, output)
    result = _RUNNERS[spec.experiment](spec)
    result.write_csv(output)
    return result
