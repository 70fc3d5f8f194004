"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.  ``COSTWISE_LOG`` sets
the log level (error, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .hub import StoreError, UnknownOperatorError, load_store, save_store
from .learners import FitConfig
from .logs import read_jobs, write_jobs
from .optimizer import Mode, SamplingConfig, Strategy, optimize
from .optimizer.fixtures import load_cost_fixture, parse_cost_fixture
from .plan import PlanError, build_plan

log = logging.getLogger("costwise")


class DataError(Exception):
    """Bad or missing input data; exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _setup_logging() -> None:
    level = os.environ.get("COSTWISE_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from exc


def _load_store(path: str):
    if not Path(path).is_file():
        raise DataError(f"store not found: {path}")
    return load_store(path)


def _read_logs(paths: Sequence[str]):
    out = []
    for p in paths:
        if not Path(p).is_file():
            raise DataError(f"log file not found: {p}")
        out.append(read_jobs(p))
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    from .workbench import WorkloadConfig, gen_workload

    cfg = WorkloadConfig(
        n_templates=args.templates, instances_per_template=args.instances, days=args.days,
        adhoc_fraction=args.adhoc, input_growth=args.growth, noise_cv=args.noise,
        seed=args.seed, hard_mode=args.hard_mode,
    )
    wl = gen_workload(cfg, jobs=args.jobs)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out}: {exc.strerror}") from exc
    for i, day in enumerate(wl.days, start=1):
        path = out / f"day{i}.jsonl"
        try:
            n = write_jobs(path, day)
        except OSError as exc:
            raise DataError(f"cannot write {path}: {exc.strerror}") from exc
        adhoc = sum(j.adhoc for j in day)
        print(f"{path}: {n} plans, {adhoc} ad-hoc")
    print(f"ad-hoc share: {wl.adhoc_share():.4f}")
    return 0


def cmd_train(args) -> int:
    from .workbench import COMBINED_FIT, train_from_days

    if len(args.logs) < 2:
        raise DataError("train needs at least two day files (individual models, then combined models)")
    days = _read_logs(args.logs)
    cfg = FitConfig(alpha=args.alpha, seed=args.seed)
    ccfg = FitConfig(**{**COMBINED_FIT.to_dict(), "seed": args.seed})
    t0 = time.perf_counter()
    store = train_from_days(days, args.min_occurrences, cfg, ccfg, jobs=args.jobs)
    took = time.perf_counter() - t0
    try:
        save_store(store, args.out)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc.strerror}") from exc
    for fam, n in store.counts().items():
        print(f"{fam}: {n} models")
    print(f"trained in {took:.2f}s -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    from .workbench import EmptyTestSet, evaluate

    store = _load_store(args.store)
    jobs = [j for day in _read_logs(args.logs) for j in day]
    try:
        report = evaluate(store, jobs)
    except EmptyTestSet as exc:
        raise DataError(str(exc)) from exc
    _write(args.out, report.to_csv())
    return 0


def cmd_optimize(args) -> int:
    mode = Mode(args.mode)
    if args.fixture:
        try:
            doc = json.loads(Path(args.fixture).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read fixture {args.fixture}: {exc}") from exc
        plan, source, samples = parse_cost_fixture(doc)
        cfg = SamplingConfig(P_max=args.p_max, explicit=tuple(args.samples or samples))
        if mode is Mode.FIXED:
            mode = Mode.SAMPLING
    elif args.example:
        plan, source, samples = load_cost_fixture()
        cfg = SamplingConfig(P_max=args.p_max, explicit=tuple(args.samples or samples))
        mode = Mode.SAMPLING
    else:
        if not args.store or not args.plan:
            raise DataError("optimize needs --store and --plan (or --fixture)")
        source = _load_store(args.store)
        try:
            plan = build_plan(Path(args.plan).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read plan {args.plan}: {exc.strerror}") from exc
        explicit = tuple(args.samples) if args.samples else None
        cfg = SamplingConfig(strategy=Strategy(args.strategy), s=args.s, k=args.k, P_max=args.p_max,
                             seed=args.seed, explicit=explicit)
    result = optimize(plan, source, cfg, mode)
    for i, st in enumerate(result.stages, start=1):
        print(f"stage {i} ({st.boundary}, {st.n_nodes} ops): partitions={st.partitions} cost={st.cost_ms:g}",
              file=sys.stderr)
    _write(args.out, json.dumps(result.to_document(), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_bench_explore(args) -> int:
    from .workbench import bench_explore, explore_csv, oracle_for, pick_stages

    store = _load_store(args.store)
    jobs = [j for day in _read_logs(args.logs) for j in day]
    if not jobs:
        raise DataError("empty test set")
    stages = pick_stages(jobs, args.stages, args.seed)
    oracle = oracle_for(args.gen_seed, jobs, args.hard_mode) if args.gen_seed is not None else None
    rows = bench_explore(store, stages, oracle, P_max=args.p_max)
    _write(args.out, explore_csv(rows))
    return 0


def cmd_compare(args) -> int:
    from .workbench import WorkloadConfig, compare_plans, gen_workload, logical_suite

    store = _load_store(args.store)
    cfg = WorkloadConfig(
        n_templates=args.templates, instances_per_template=args.instances, days=args.days,
        adhoc_fraction=args.adhoc, noise_cv=args.noise, seed=args.seed, hard_mode=args.hard_mode,
    )
    wl = gen_workload(cfg)
    report = compare_plans(logical_suite(wl), store, wl.oracle)
    _write(args.out, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    return 0


# --------------------------------------------------------------------------
# parser


def _workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--templates", type=int, default=50)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--days", type=int, default=3)
    p.add_argument("--adhoc", type=float, default=0.0, help="ad-hoc share of each day's jobs")
    p.add_argument("--noise", type=float, default=0.1, help="latency noise coefficient of variation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hard-mode", action="store_true", help="add a latency term outside the feature span")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="costwise", description="Learned cost models and resource-aware plan search.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic workload, one JSONL file per day")
    _workload_flags(p)
    p.add_argument("--growth", type=float, default=0.03, help="daily input growth")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a store: individual models on all but the last file")
    p.add_argument("logs", nargs="+", help="day files in time order")
    p.add_argument("--out", default="store.json")
    p.add_argument("--min-occurrences", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.1, help="elastic-net penalty of the individual models")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a store on held-out logs (CSV)")
    p.add_argument("logs", nargs="+")
    p.add_argument("--store", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimize", help="optimize a plan; prints the annotated plan JSON")
    p.add_argument("--store")
    p.add_argument("--plan")
    p.add_argument("--fixture", help="plan with per-operator cost tables instead of a store")
    p.add_argument("--example", action="store_true", help="use the bundled two-stage cost-table example")
    p.add_argument("--mode", default=Mode.FIXED.value, choices=[m.value for m in Mode])
    p.add_argument("--strategy", default=Strategy.GEOMETRIC.value, choices=[s.value for s in Strategy])
    p.add_argument("--s", type=int, default=2, help="geometric skipping coefficient")
    p.add_argument("--k", type=int, default=20, help="uniform/random sample count")
    p.add_argument("--samples", type=int, nargs="+", help="explicit partition counts to sample")
    p.add_argument("--p-max", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench-explore", help="look-ups vs cost gap of partition exploration strategies (CSV)")
    p.add_argument("logs", nargs="+", help="logs to draw stages from")
    p.add_argument("--store", required=True)
    p.add_argument("--stages", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gen-seed", type=int, help="generation seed of the logs; enables the true-cost gap")
    p.add_argument("--hard-mode", action="store_true")
    p.add_argument("--p-max", type=int, default=3000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench_explore)

    p = sub.add_parser("compare", help="default-cost vs learned plans under the true latency (JSON)")
    _workload_flags(p)
    p.add_argument("--store", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"costwise: {exc}", file=sys.stderr)
        return 2
    except (PlanError, StoreError, UnknownOperatorError, ValueError, KeyError) as exc:
        print(f"costwise: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
