"""Accuracy reports for a store, a deliberately weak default cost, and plan comparisons."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from ..features import FAMILIES
from ..hub import CostModelStore, TrainingRow, extract_training_rows, predict_rows
from ..learners import median_rel_error, p95_rel_error, pearson
from ..logs import LoggedJob
from ..optimizer import FunctionCostProvider, Mode, SamplingConfig, optimize
from ..plan import PhysicalKind, PlanNode
from .oracle import OracleParams, oracle_curve

# ms per output row; a fixed per-kind table that ignores P, L and context
DEFAULT_COST_PER_ROW: dict[PhysicalKind, float] = {
    PhysicalKind.EXTRACT: 1.0e-4,
    PhysicalKind.FILTER: 2.0e-5,
    PhysicalKind.PROJECT: 1.0e-5,
    PhysicalKind.HASH_JOIN: 2.0e-4,
    PhysicalKind.MERGE_JOIN: 3.0e-4,
    PhysicalKind.HASH_AGG: 1.0e-3,
    PhysicalKind.STREAM_AGG: 8.0e-4,
    PhysicalKind.SORT: 2.0e-4,
    PhysicalKind.EXCHANGE: 5.0e-5,
    PhysicalKind.UDF: 3.0e-4,
    PhysicalKind.UNION: 1.0e-5,
    PhysicalKind.OUTPUT: 5.0e-4,
}

REPORT_FAMILIES = FAMILIES + ("combined", "default")
CSV_HEADER = ("family", "day", "pearson", "median_err", "p95_err", "coverage")


class EmptyTestSet(ValueError):
    pass


def default_cost(node: PlanNode) -> float:
    """k_op · C."""
    return DEFAULT_COST_PER_ROW[node.kind] * node.stats.output_card


def default_provider() -> FunctionCostProvider:
    return FunctionCostProvider(lambda node, P: default_cost(node))


@dataclass(frozen=True)
class EvalRow:
    family: str
    day: int
    pearson: float
    median_err: float
    p95_err: float
    coverage: float
    n: int


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def get(self, family: str, day: Optional[int] = None) -> EvalRow:
        for r in self.rows:
            if r.family == family and (day is None or r.day == day):
                return r
        raise KeyError((family, day))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.family, r.day, _fmt(r.pearson), _fmt(r.median_err), _fmt(r.p95_err), _fmt(r.coverage)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def _metrics(family: str, day: int, pred: np.ndarray, actual: np.ndarray) -> EvalRow:
    covered = ~np.isnan(pred)
    n = int(covered.sum())
    cov = n / len(pred) if len(pred) else float("nan")
    if n == 0:
        return EvalRow(family, day, float("nan"), float("nan"), float("nan"), cov, 0)
    p, a = pred[covered], actual[covered]
    try:
        r = pearson(p, a) if n >= 2 else float("nan")
    except ValueError:
        r = float("nan")
    return EvalRow(family, day, r, median_rel_error(p, a), p95_rel_error(p, a), cov, n)


def evaluate(
    store: CostModelStore,
    test_logs: Union[Sequence[LoggedJob], Sequence[TrainingRow]],
) -> EvalReport:
    """Per family and day: metrics on covered rows plus coverage."""
    items = list(test_logs)
    if not items:
        raise EmptyTestSet("empty test set")
    rows = items if isinstance(items[0], TrainingRow) else extract_training_rows(items)
    if not rows:
        raise EmptyTestSet("empty test set")
    days = sorted({r.day for r in rows})
    report: list[EvalRow] = []
    for day in days:
        sel = [r for r in rows if r.day == day]
        preds, comb = predict_rows(store, sel)
        actual = np.array([r.actual_ms for r in sel])
        default = np.array([DEFAULT_COST_PER_ROW[PhysicalKind(r.kind)] * r.basic.C for r in sel])
        cols = {**preds, "combined": comb, "default": default}
        for fam in REPORT_FAMILIES:
            report.append(_metrics(fam, day, cols[fam], actual))
    return EvalReport(report)


# --------------------------------------------------------------------------
# plan comparison


def true_latency(plan: PlanNode, oracle: OracleParams, template: str) -> tuple[float, float]:
    """(plan latency, processing time) under the noiseless oracle.

    Latency is the sum of exclusive latencies; processing time sums
    partition count times exclusive latency.
    """
    lat = 0.0
    work = 0.0
    for n in plan.walk():
        ms = float(oracle_curve(n, [n.partition_count], oracle, template)[0])
        lat += ms
        work += n.partition_count * ms
    return lat, work


def _shape(node: PlanNode) -> tuple:
    return (node.kind.value, node.partition_count, tuple(_shape(c) for c in node.children))


@dataclass
class PlanChange:
    template: str
    changed: bool
    baseline_ms: float
    candidate_ms: float
    baseline_work: float
    candidate_work: float


@dataclass
class PlanChangeReport:
    changes: list[PlanChange] = field(default_factory=list)

    @property
    def n_plans(self) -> int:
        return len(self.changes)

    @property
    def n_changed(self) -> int:
        return sum(c.changed for c in self.changes)

    @property
    def fraction_changed(self) -> float:
        return self.n_changed / self.n_plans if self.n_plans else 0.0

    @property
    def fraction_improved(self) -> float:
        """Share of changed plans whose true latency went down."""
        ch = [c for c in self.changes if c.changed]
        return sum(c.candidate_ms < c.baseline_ms for c in ch) / len(ch) if ch else 0.0

    @property
    def processing_delta(self) -> float:
        """Candidate minus baseline total processing time (negative = saving)."""
        return sum(c.candidate_work - c.baseline_work for c in self.changes)

    @property
    def latency_delta(self) -> float:
        return sum(c.candidate_ms - c.baseline_ms for c in self.changes)

    def summary(self) -> dict:
        base_work = sum(c.baseline_work for c in self.changes)
        return {
            "plans": self.n_plans,
            "changed": self.n_changed,
            "fraction_changed": self.fraction_changed,
            "fraction_improved": self.fraction_improved,
            "latency_delta_ms": self.latency_delta,
            "processing_delta_ms": self.processing_delta,
            "processing_delta_rel": self.processing_delta / base_work if base_work else 0.0,
        }


def compare_plans(
    logical_suite: Iterable[tuple[PlanNode, str]],
    store,
    oracle: OracleParams,
    baseline: Optional[tuple[object, Union[Mode, str]]] = None,
    candidate: Optional[tuple[object, Union[Mode, str]]] = None,
    cfg: SamplingConfig = SamplingConfig(),
) -> PlanChangeReport:
    """Optimize each plan under two arms and score both results with the noiseless oracle.

    Defaults: baseline = (default cost, FixedPartitions); candidate = (store, Analytical).
    """
    base_src, base_mode = baseline or (None, Mode.FIXED)
    cand_src, cand_mode = candidate or (store, Mode.ANALYTICAL)
    report = PlanChangeReport()
    for plan, template in logical_suite:
        a = optimize(plan, base_src if base_src is not None else default_provider(), cfg, base_mode)
        b = optimize(plan, cand_src, cfg, cand_mode)
        la, wa = true_latency(a.root, oracle, template)
        lb, wb = true_latency(b.root, oracle, template)
        report.changes.append(PlanChange(template, _shape(a.root) != _shape(b.root), la, lb, wa, wb))
    return report
