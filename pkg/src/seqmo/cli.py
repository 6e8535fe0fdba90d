"""Command line entry point: ``seqmo {gen-instance,run,compare,trace}``.

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .core import make_rng
from .harness import (
    ConfigError,
    RunConfig,
    compare,
    run,
    trace_table,
    write_manifest,
    write_run,
)
from .neuralnet import TrainingDivergence
from .problems import InstanceFormatError, generate_moqap, generate_motsp, save_instance

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _gen_instance(args) -> int:
    gen = generate_motsp if args.problem == "motsp" else generate_moqap
    try:
        inst = gen(args.n, args.k, make_rng(args.seed, "instance"), seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    save_instance(inst, args.out)
    print(f"wrote {inst.kind} n={inst.n} k={inst.n_obj} to {args.out}")
    return EXIT_OK


def _run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed).validate()
    result = run(cfg)
    out = write_run(result, args.out)
    print(f"{cfg.instance_label} {cfg.label} seed={cfg.seed} hv={result.hv:.6f} "
          f"fe={result.evaluations} generations={result.generations} -> {out}")
    return EXIT_OK


def _compare(args) -> int:
    if args.config:
        base = RunConfig.from_file(args.config)
    elif args.profile == "full":
        base = RunConfig.full_profile()
    else:
        base = RunConfig()
    base = replace(base, problem=args.problem, instance_path=None)
    if args.max_fe is not None:
        base = replace(base, max_fe=args.max_fe)
    templates = [replace(base, n=n).validate() for n in args.sizes]
    seeds = list(range(1, args.seeds + 1))
    table = compare(templates, args.algorithms, seeds, workers=args.workers)
    print(table.to_text(), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(table.runs_csv())
        (out / "summary.csv").write_text(table.summary_csv())
        (out / "table.txt").write_text(table.to_text())
        write_manifest(out / "manifest.json", base.to_ini(),
                       {"sizes": args.sizes, "algorithms": args.algorithms, "seeds": seeds})
    return EXIT_OK


def _trace(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "update_trace.csv"
    if not path.exists():
        raise ConfigError(f"no update trace at {path}")
    print(trace_table(path), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqmo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="generate a random instance file")
    g.add_argument("--problem", choices=["motsp", "moqap"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen_instance)

    r = sub.add_parser("run", help="run one configuration and write its artefacts")
    r.add_argument("--config", required=True, help="INI run config")
    r.add_argument("--seed", type=int, help="override the run seed")
    r.add_argument("--out", default="run_out")
    r.set_defaults(func=_run)

    c = sub.add_parser("compare", help="multi-seed HV comparison table")
    c.add_argument("--problem", choices=["motsp", "moqap"], default="motsp")
    c.add_argument("--sizes", type=int, nargs="+", default=[15, 20])
    c.add_argument("--algorithms", nargs="+", default=["nsga2", "moead", "seqmo-moead"])
    c.add_argument("--seeds", type=int, default=10, help="runs seeds 1..SEEDS")
    c.add_argument("--profile", choices=["desk", "full"], default="desk")
    c.add_argument("--config", help="INI template overriding the profile")
    c.add_argument("--max-fe", type=int)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out")
    c.set_defaults(func=_compare)

    t = sub.add_parser("trace", help="print the update-count table of a run")
    t.add_argument("path", help="run output directory or update_trace.csv")
    t.set_defaults(func=_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InstanceFormatError) as exc:
        print(f"seqmo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"seqmo: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
