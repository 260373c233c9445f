"""Command-line entry point.

Subcommands::

    chamsim list-models                      # catalog of cache models
    chamsim validate --spec FILE             # check a spec file, print diagnostics
    chamsim run --spec FILE --out CSV        # run the experiment a spec describes
    chamsim entropy|evict|ttest|ppp-tpr|ppp-cost|vcnoise|trace ...
                                             # inline one-off experiments

Inline experiment subcommands take repeated ``--config k=v,k=v`` cache
definitions plus the relevant budget flags; ``run`` takes everything from a
key=value spec file (``configN.`` prefixes group cache configs).

Exit codes: 0 success, 2 invalid spec/config, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .cache import CacheConfig, list_models
from .errors import ChamsimError, InvalidConfigError
from .experiments import (
    ENTROPY,
    EVICTION_RATE,
    EXPERIMENTS,
    PPP_COST,
    PPP_TPR,
    TRACE,
    TTEST,
    VC_NOISE,
    ExperimentSpec,
    run_experiment,
)
from .tracesim import TRACE_KINDS

_SUBCOMMAND_EXPERIMENTS = {
    "entropy": ENTROPY,
    "evict": EVICTION_RATE,
    "ttest": TTEST,
    "ppp-tpr": PPP_TPR,
    "ppp-cost": PPP_COST,
    "vcnoise": VC_NOISE,
    "trace": TRACE,
}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _parse_inline_config(text: str) -> CacheConfig:
    kv = "\n".join(part.strip() for part in text.split(",") if part.strip())
    return CacheConfig.from_kv(kv)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", action="append", default=[],
                        metavar="K=V,...",
                        help="inline cache config, e.g. model=CHAMELEON,s=128,w=8,d=8,w_vc=8 (repeatable)")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--json", default=None, help="optional JSON report path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chamsim",
        description="Behavioral simulator of randomized cache organizations "
                    "and their eviction-based side channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-models", help="print the cache model catalog")

    p_val = sub.add_parser("validate", help="validate a spec file")
    p_val.add_argument("--spec", required=True, help="spec file path")

    p_run = sub.add_parser("run", help="run the experiment described by a spec file")
    p_run.add_argument("--spec", required=True, help="spec file path")
    p_run.add_argument("--out", required=True, help="output CSV path")
    p_run.add_argument("--json", default=None, help="optional JSON report path")

    for name, experiment in _SUBCOMMAND_EXPERIMENTS.items():
        p = sub.add_parser(name, help=f"run a {experiment} experiment inline")
        _add_common(p)
        if experiment in (EVICTION_RATE, TTEST):
            p.add_argument("--m", type=int, default=200, dest="M",
                           help="outer repetitions per config")
            p.add_argument("--trials", type=int, default=1000,
                           help="eviction trials per success-rate estimate")
            p.add_argument("--max-rounds", type=int, default=40,
                           help="profiling round budget")
        if experiment in (PPP_TPR, PPP_COST):
            p.add_argument("--victims", type=int, default=50,
                           help="independent victims per config")
            p.add_argument("--max-rounds", type=int, default=8,
                           help="profiling round budget per victim")
        if experiment == VC_NOISE:
            p.add_argument("--victims", type=int, default=50,
                           help="independent victims per config")
        if experiment == ENTROPY:
            p.add_argument("--entropy-trials", type=int, default=200_000,
                           help="victim accesses per config")
            p.add_argument("--n-secrets", type=int, default=64,
                           help="size of the victim's secret address set")
        if experiment == TRACE:
            p.add_argument("--kind", default="ZIPF", choices=[k for k in TRACE_KINDS],
                           help="synthetic trace kind")
            p.add_argument("--length", type=int, default=200_000)
            p.add_argument("--alpha", type=float, default=1.0,
                           help="ZIPF skew exponent")
            p.add_argument("--working-set", type=int, default=4096,
                           help="LOOP working-set size in lines")
            p.add_argument("--universe", type=int, default=65536,
                           help="distinct lines in UNIFORM/ZIPF traces")
    return parser


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    experiment = _SUBCOMMAND_EXPERIMENTS[args.command]
    configs = tuple(_parse_inline_config(c) for c in args.config)
    kwargs = {"experiment": experiment, "configs": configs, "seed": args.seed}
    for attr, field_name in (("M", "M"), ("trials", "trials"),
                             ("max_rounds", "max_rounds"),
                             ("victims", "victims"),
                             ("entropy_trials", "entropy_trials"),
                             ("n_secrets", "n_secrets"),
                             ("kind", "trace_kind"),
                             ("length", "trace_length"),
                             ("alpha", "trace_alpha"),
                             ("working_set", "trace_working_set"),
                             ("universe", "trace_universe")):
        if hasattr(args, attr):
            kwargs[field_name] = getattr(args, attr)
    return ExperimentSpec(**kwargs)


def _load_spec(path) -> ExperimentSpec:
    # A missing or unreadable spec file is a usage error, not a runtime one.
    try:
        with open(path) as fh:
            return ExperimentSpec.from_kv(fh.read())
    except OSError as exc:
        raise InvalidConfigError(str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-models":
            for model in list_models():
                print(model)
            return EXIT_OK
        if args.command == "validate":
            spec = _load_spec(args.spec)
            print(f"OK: {spec.experiment} with {len(spec.configs)} config(s), "
                  f"seed {spec.seed}")
            return EXIT_OK
        if args.command == "run":
            spec = _load_spec(args.spec)
        else:
            spec = _spec_from_args(args)
        spec.validate()
        result = run_experiment(spec, args.out)
        if args.json:
            result.write_json(args.json)
        print(f"{spec.experiment}: wrote {len(result.rows)} row(s) to {args.out}")
        return EXIT_OK
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ChamsimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
