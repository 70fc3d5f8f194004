"""Seeded synthetic recurring workloads.

A template is a random logical operator tree (2-10 operators) with fixed
physical choices, fixed datasets and fixed parameters.  Each day every
template runs ``instances_per_template`` times on that day's inputs, with
cardinalities drifting by ``input_growth`` per day and jittering per instance.
Ad-hoc jobs are one-off templates mixed in at ``adhoc_fraction`` of the day.
Every node is stamped with a latency drawn from the hidden oracle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..learners.rng import derive_seed
from ..logs import LoggedJob
from ..optimizer.resources import heuristic_partitions
from ..plan import LogicalKind, PhysicalKind, PlanNode, Stats, decompose_stages
from .oracle import OracleParams, oracle_latency

DATASETS = (
    "clicks", "impressions", "orders", "users", "sessions", "queries", "ads", "events",
    "payments", "devices", "geo", "catalog", "reviews", "carts", "search", "mail",
)

_UNARY = (LogicalKind.FILTER, LogicalKind.PROJECT, LogicalKind.GROUP_AGG, LogicalKind.SORT, LogicalKind.UDF)
_UNARY_WEIGHTS = np.array([0.3, 0.2, 0.25, 0.1, 0.15])
_PHYSICAL = {
    LogicalKind.GET: (PhysicalKind.EXTRACT,),
    LogicalKind.FILTER: (PhysicalKind.FILTER,),
    LogicalKind.PROJECT: (PhysicalKind.PROJECT,),
    LogicalKind.JOIN: (PhysicalKind.HASH_JOIN, PhysicalKind.MERGE_JOIN),
    LogicalKind.GROUP_AGG: (PhysicalKind.HASH_AGG, PhysicalKind.STREAM_AGG),
    LogicalKind.SORT: (PhysicalKind.SORT,),
    LogicalKind.UDF: (PhysicalKind.UDF,),
    LogicalKind.OUTPUT: (PhysicalKind.OUTPUT,),
}


@dataclass(frozen=True)
class WorkloadConfig:
    n_templates: int = 50
    instances_per_template: int = 10
    days: int = 3
    adhoc_fraction: float = 0.0
    input_growth: float = 0.03
    noise_cv: float = 0.1
    seed: int = 0
    hard_mode: bool = False
    P_max: int = 3000
    # spread of logged partition counts around the size heuristic, in powers of 2
    partition_spread: float = 2.5

    def __post_init__(self):
        if min(self.n_templates, self.instances_per_template, self.days) < 1:
            raise ValueError("counts must be positive")
        if not 0.0 <= self.adhoc_fraction < 1.0:
            raise ValueError("adhoc_fraction must be in [0, 1)")
        if self.noise_cv < 0 or self.input_growth <= -1.0:
            raise ValueError("invalid drift or noise")


@dataclass(eq=False)
class TemplateOp:
    logical: LogicalKind
    physical: PhysicalKind
    children: list["TemplateOp"] = field(default_factory=list)
    factor: float = 1.0  # output rows per input row
    row_scale: float = 1.0  # output row length relative to input
    base_rows: float = 0.0  # leaves
    row_len: float = 0.0  # leaves
    dataset: str = ""
    params: tuple[str, ...] = ()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


@dataclass(eq=False)
class Template:
    name: str
    root: TemplateOp
    adhoc: bool = False


def _random_subtree(rng: np.random.Generator, budget: int) -> TemplateOp:
    if budget == 1:
        ds = DATASETS[int(rng.integers(len(DATASETS)))]
        return TemplateOp(
            LogicalKind.GET, PhysicalKind.EXTRACT,
            base_rows=float(10 ** rng.uniform(6.0, 8.5)), row_len=float(rng.uniform(50, 400)), dataset=ds,
        )
    if budget >= 3 and rng.random() < 0.3:
        left = 1 + int(rng.integers(budget - 2))
        kids = [_random_subtree(rng, left), _random_subtree(rng, budget - 1 - left)]
        phys = _PHYSICAL[LogicalKind.JOIN][int(rng.integers(2))]
        key = f"key={DATASETS[int(rng.integers(len(DATASETS)))]}_id"
        return TemplateOp(LogicalKind.JOIN, phys, kids, factor=float(rng.uniform(0.2, 1.5)), params=(key,))
    kind = _UNARY[int(rng.choice(len(_UNARY), p=_UNARY_WEIGHTS))]
    child = _random_subtree(rng, budget - 1)
    choices = _PHYSICAL[kind]
    phys = choices[int(rng.integers(len(choices)))]
    col = f"col_{'abcdefgh'[int(rng.integers(8))]}"
    if kind is LogicalKind.FILTER:
        return TemplateOp(kind, phys, [child], factor=float(rng.uniform(0.05, 0.9)), params=(f"pred={col}",))
    if kind is LogicalKind.PROJECT:
        return TemplateOp(kind, phys, [child], row_scale=float(rng.uniform(0.3, 0.9)), params=(f"cols={col}",))
    if kind is LogicalKind.GROUP_AGG:
        return TemplateOp(kind, phys, [child], factor=float(10 ** rng.uniform(-3, -0.7)),
                          row_scale=float(rng.uniform(0.3, 1.0)), params=(f"group_by={col}",))
    if kind is LogicalKind.SORT:
        return TemplateOp(kind, phys, [child], params=(f"order_by={col}",))
    return TemplateOp(kind, phys, [child], factor=float(rng.uniform(0.5, 1.5)),
                      row_scale=float(rng.uniform(0.8, 1.5)), params=(f"udf=fn_{col}",))


def random_template(seed: int, name: str, adhoc: bool = False) -> Template:
    rng = np.random.default_rng(seed)
    n_ops = int(rng.integers(2, 11))
    return Template(name, TemplateOp(LogicalKind.OUTPUT, PhysicalKind.OUTPUT, [_random_subtree(rng, n_ops - 1)]), adhoc)


def input_name(dataset: str, day: int) -> str:
    d = 1 + (day - 1) % 28
    m = 8 + (day - 1) // 28
    return f"{dataset}_2019_{m:02d}_{d:02d}.tsv"


def instantiate(template: Template, day: int, rng: np.random.Generator, growth: float) -> tuple[PlanNode, PlanNode]:
    """(physical plan with exchanges, matching logical plan) for one run; partitions unset."""
    scale = (1.0 + growth) ** (day - 1) * math.exp(0.3 * rng.standard_normal())

    def build(op: TemplateOp) -> tuple[PlanNode, PlanNode, float, float]:
        if not op.children:
            rows = op.base_rows * scale * math.exp(0.1 * rng.standard_normal())
            st = Stats(input_card=rows, base_card=rows, output_card=rows, avg_row_len=op.row_len)
            name = (input_name(op.dataset, day),)
            return (PlanNode(op.physical, st, [], inputs=name), PlanNode(op.logical, st, [], inputs=name), rows, op.row_len)
        built = [build(c) for c in op.children]
        I = sum(b[2] for b in built)
        jit = math.exp(0.05 * rng.standard_normal())
        if op.logical is LogicalKind.JOIN:
            C = max(b[2] for b in built) * op.factor * jit
            L = sum(b[3] for b in built)
        else:
            C = I * op.factor * (jit if op.factor != 1.0 else 1.0)
            L = built[0][3] * op.row_scale
        base = sum(_base(b[0]) for b in built)
        phys_kids = [b[0] for b in built]
        if op.logical in (LogicalKind.JOIN, LogicalKind.GROUP_AGG):
            phys_kids = [_exchange(k) for k in phys_kids]
        st = Stats(input_card=I, base_card=base, output_card=C, avg_row_len=L)
        phys = PlanNode(op.physical, st, phys_kids, params=op.params)
        logical = PlanNode(op.logical, st, [b[1] for b in built], params=op.params)
        return phys, logical, C, L

    phys, logical, _, _ = build(template.root)
    return phys, logical


def _base(node: PlanNode) -> float:
    return node.stats.base_card


def _exchange(child: PlanNode) -> PlanNode:
    st = Stats(
        input_card=child.stats.output_card, base_card=child.stats.base_card,
        output_card=child.stats.output_card, avg_row_len=child.stats.avg_row_len,
    )
    return PlanNode(PhysicalKind.EXCHANGE, st, [child])


def assign_partitions(plan: PlanNode, rng: np.random.Generator, spread: float, P_max: int) -> None:
    """Logged partition counts: the size heuristic scaled by a random power of two."""
    for stage in decompose_stages(plan):
        heur = heuristic_partitions(stage.boundary, P_max)
        p = int(round(heur * 2.0 ** rng.uniform(-spread, spread)))
        p = min(max(p, 1), P_max)
        for n in stage.nodes:
            n.partition_count = p


def execute(plan: PlanNode, oracle: OracleParams, template: str, rng: np.random.Generator, noise_cv: float) -> None:
    for n in plan.postorder():
        n.actual_latency_ms = oracle_latency(n, n.partition_count, oracle, template, rng, noise_cv)


@dataclass
class Workload:
    cfg: WorkloadConfig
    templates: list[Template]
    days: list[list[LoggedJob]]
    oracle: OracleParams
    logical: dict[str, PlanNode] = field(default_factory=dict, repr=False)  # job id -> logical plan

    @property
    def jobs(self) -> list[LoggedJob]:
        return [j for day in self.days for j in day]

    def adhoc_share(self) -> float:
        jobs = self.jobs
        return sum(j.adhoc for j in jobs) / len(jobs) if jobs else 0.0


def adhoc_count(recurring: int, fraction: float) -> int:
    return int(round(recurring * fraction / (1.0 - fraction))) if fraction > 0 else 0


def _template_seed(seed: int, idx: int) -> int:
    return derive_seed(seed, 1, idx)


def gen_workload(cfg: WorkloadConfig, jobs: int = 1) -> Workload:
    """Generate ``cfg.days`` days of logged jobs; identical for identical configs."""
    oracle = OracleParams(seed=derive_seed(cfg.seed, 9), hard_mode=cfg.hard_mode)
    templates = [random_template(_template_seed(cfg.seed, i), f"t{i:03d}") for i in range(cfg.n_templates)]
    for t in templates:
        oracle.register(t.name)
    n_adhoc = adhoc_count(cfg.n_templates * cfg.instances_per_template, cfg.adhoc_fraction)

    days: list[list[LoggedJob]] = []
    logical: dict[str, PlanNode] = {}
    for day in range(1, cfg.days + 1):
        work: list[tuple[str, Template]] = []
        for t in templates:
            for k in range(cfg.instances_per_template):
                work.append((f"d{day}-{t.name}-{k:02d}", t))
        for j in range(n_adhoc):
            t = random_template(derive_seed(cfg.seed, 2, day, j), f"adhoc-d{day}-{j:04d}", adhoc=True)
            oracle.register(t.name)
            work.append((f"d{day}-{t.name}", t))
        # coefficients are materialised serially so worker threads only read
        for _, t in work:
            for op in _walk_ops(t.root):
                oracle.coefficients(op.physical, t.name)
            oracle.coefficients(PhysicalKind.EXCHANGE, t.name)

        def run(i: int) -> tuple[LoggedJob, PlanNode]:
            job_id, t = work[i]
            rng = np.random.default_rng(derive_seed(cfg.seed, 3, day, i))
            phys, log_plan = instantiate(t, day, rng, cfg.input_growth)
            assign_partitions(phys, rng, cfg.partition_spread, cfg.P_max)
            execute(phys, oracle, t.name, rng, cfg.noise_cv)
            return LoggedJob(job_id, t.name, day, t.adhoc, phys), log_plan

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                out = list(pool.map(run, range(len(work))))
        else:
            out = [run(i) for i in range(len(work))]
        days.append([o[0] for o in out])
        for job, lp in out:
            logical[job.job_id] = lp
    return Workload(cfg, templates, days, oracle, logical)


def _walk_ops(op: TemplateOp):
    yield op
    for c in op.children:
        yield from _walk_ops(c)


def logical_suite(workload: Workload, day: Optional[int] = None, recurring_only: bool = True) -> list[tuple[PlanNode, str]]:
    """Logical plans of a day's jobs paired with their template names."""
    day = workload.cfg.days if day is None else day
    out = []
    for job in workload.days[day - 1]:
        if recurring_only and job.adhoc:
            continue
        out.append((workload.logical[job.job_id], job.template))
    return out
