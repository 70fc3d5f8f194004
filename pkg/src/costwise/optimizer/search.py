"""Memo-based physical plan search with per-stage partition selection.

The logical plan is expanded into groups (one per logical operator, plus an
Exchange group inserted below every input of a partition-sensitive
operator).  Stages are processed bottom-up.  Within a stage, every physical
alternative of the stage's groups is kept as a variant, so the parent sees
the actual subtree it would be built on; this matters because learned costs
depend on the operators below.  A stage's partition count is picked per mode,
and the stage's variants at that count, with their total costs, flow upward.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..plan import PlanError, PlanNode, PhysicalKind, Stats, build_plan, to_document
from .providers import CostProvider, ThetaUnavailable, as_provider
from .resources import (
    DegenerateStage, Mode, SamplingConfig, StageSelection, analytical_partition,
    heuristic_partitions, sample_partitions,
)
from .rules import enumerate_physical, needs_exchange

log = logging.getLogger(__name__)

MAX_VARIANTS = 256


@dataclass(eq=False)
class Group:
    """Equivalence class: one logical operator and its physical candidates."""

    candidates: tuple[PhysicalKind, ...]
    children: list["Group"]
    stats: Stats
    inputs: tuple[str, ...] = ()
    params: tuple[str, ...] = ()
    required: Optional[int] = None
    source: Optional[PlanNode] = None

    @property
    def is_boundary(self) -> bool:
        return all(k.is_boundary for k in self.candidates)


@dataclass(eq=False)
class Variant:
    """One physical subtree for a group; ``stage_nodes`` are its nodes in the current stage."""

    node: PlanNode
    lower_total: float
    stage_nodes: tuple[PlanNode, ...]
    total: float = float("nan")


@dataclass
class OptimizedPlan:
    root: PlanNode
    predicted_cost_ms: float
    lookup_count: int
    mode: str
    stages: list[StageSelection] = field(default_factory=list)
    node_costs: dict[int, float] = field(default_factory=dict, repr=False)

    def to_document(self) -> dict:
        ann = {k: {"predicted_ms": v} for k, v in self.node_costs.items()}
        return {
            "mode": self.mode,
            "predicted_ms": self.predicted_cost_ms,
            "lookups": self.lookup_count,
            "partitions": [s.partitions for s in self.stages],
            "stages": [s.to_dict() for s in self.stages],
            "plan": to_document(self.root, ann),
        }


def _exchange_group(child: Group) -> Group:
    base = _base_card(child)
    st = Stats(
        input_card=child.stats.output_card,
        base_card=base,
        output_card=child.stats.output_card,
        avg_row_len=child.stats.avg_row_len,
    )
    return Group((PhysicalKind.EXCHANGE,), [child], st)


def _base_card(g: Group) -> float:
    if not g.children:
        return g.stats.input_card
    return sum(_base_card(c) for c in g.children)


def expand(node: PlanNode) -> Group:
    kids = [expand(c) for c in node.children]
    if needs_exchange(node.kind):
        kids = [k if k.candidates == (PhysicalKind.EXCHANGE,) else _exchange_group(k) for k in kids]
    return Group(
        candidates=tuple(enumerate_physical(node.kind)),
        children=kids,
        stats=node.stats,
        inputs=node.inputs,
        params=node.params,
        required=node.required_partition,
        source=node,
    )


def _postorder(g: Group):
    for c in g.children:
        yield from _postorder(c)
    yield g


def group_stages(root: Group) -> list[list[Group]]:
    """Stages of groups, each in post-order, stages ordered by their top group."""
    owner: dict[int, list[Group]] = {}
    stages: list[list[Group]] = []
    top_pos: dict[int, int] = {}
    for pos, g in enumerate(_postorder(root)):
        if not g.children and g.candidates != (PhysicalKind.EXTRACT,):
            raise PlanError(f"leaf operator must be a scan, got {g.candidates[0].value}")
        if g.is_boundary:
            st = [g]
            stages.append(st)
        else:
            if any(k.is_boundary for k in g.candidates):
                raise PlanError("mixed boundary and non-boundary candidates")
            st = owner[id(g.children[0])]
            st.append(g)
        owner[id(g)] = st
        top_pos[id(st)] = pos
    stages.sort(key=lambda st: top_pos[id(st)])
    return stages


class _Search:
    def __init__(self, root: Group, provider: CostProvider, cfg: SamplingConfig, mode: Mode, max_variants: int):
        self.root = root
        self.provider = provider
        self.cfg = cfg
        self.mode = mode
        self.max_variants = max_variants
        self._nodes: dict[tuple, PlanNode] = {}
        self.final: dict[int, list[Variant]] = {}  # group id -> variants at the chosen P
        self.stage_p: dict[int, int] = {}  # node id -> stage partition count
        self.node_cost: dict[int, float] = {}
        self.records: list[StageSelection] = []

    # -- node construction ------------------------------------------------
    def _node(self, g: Group, kind: PhysicalKind, kids: Sequence[PlanNode]) -> PlanNode:
        key = (id(g), kind, tuple(id(k) for k in kids))
        node = self._nodes.get(key)
        if node is None:
            src = g.source
            if (
                src is not None and src.kind is kind
                and len(src.children) == len(kids)
                and all(a is b for a, b in zip(src.children, kids))
            ):
                node = src
            else:
                node = PlanNode(kind, g.stats, list(kids), inputs=g.inputs, params=g.params,
                                required_partition=g.required)
            self._nodes[key] = node
        return node

    def _variants(self, stage: list[Group]) -> list[Variant]:
        local: dict[int, list[Variant]] = {}
        for g in stage:
            options = []
            for c in g.children:
                options.append(self.final[id(c)] if id(c) in self.final else local[id(c)])
            out: list[Variant] = []
            for kind in g.candidates:
                for combo in itertools.product(*options):
                    node = self._node(g, kind, [v.node for v in combo])
                    lower = 0.0
                    nodes: list[PlanNode] = []
                    for c, v in zip(g.children, combo):
                        if id(c) in self.final:
                            lower += v.total
                        else:
                            lower += v.lower_total
                            nodes.extend(v.stage_nodes)
                    nodes.append(node)
                    out.append(Variant(node, lower, tuple(nodes)))
            if len(out) > self.max_variants:
                log.warning("pruning %d alternatives to %d", len(out), self.max_variants)
                out = out[: self.max_variants]
            local[id(g)] = out
        return local[id(stage[-1])]

    # -- costing ----------------------------------------------------------
    def _curves(self, variants: list[Variant], partitions: list[int], cache: dict[int, np.ndarray]) -> np.ndarray:
        """(variants × partitions) stage cost, lower stages included."""
        out = np.empty((len(variants), len(partitions)))
        for i, v in enumerate(variants):
            acc = np.full(len(partitions), v.lower_total)
            for n in v.stage_nodes:
                c = cache.get(id(n))
                if c is None:
                    c = np.asarray(self.provider.costs(n, partitions), dtype=np.float64)
                    cache[id(n)] = c
                acc = acc + c
            out[i] = acc
        return out

    def _pinned(self, stage: list[Group]) -> Optional[int]:
        req = {g.required for g in stage if g.required is not None}
        if len(req) > 1:
            raise PlanError(f"conflicting required partition counts in one stage: {sorted(req)}")
        return req.pop() if req else None

    def run_stage(self, stage: list[Group]) -> None:
        variants = self._variants(stage)
        pinned = self._pinned(stage)
        heur = heuristic_partitions(variants[0].stage_nodes[0], self.cfg.P_max, self.cfg.P_min)
        curve_rec: dict[int, float] = {}
        theta = None
        if pinned is not None or self.mode is Mode.FIXED:
            P = pinned if pinned is not None else heur
        elif self.mode is Mode.SAMPLING:
            samples = sample_partitions(self.cfg)
            cache: dict[int, np.ndarray] = {}
            curves = self._curves(variants, samples, cache)
            best = curves.min(axis=0)
            lower = np.array([v.lower_total for v in variants])
            stage_best = (curves - lower[:, None]).min(axis=0)
            curve_rec = {p: float(c) for p, c in zip(samples, stage_best)}
            j = int(np.argmin(best))
            P = samples[j]
            self._finish(stage, variants, [P], curves[:, j:j + 1], {k: c[j:j + 1] for k, c in cache.items()})
            self.records.append(self._record(stage, P, pinned, curve_rec, theta))
            return
        else:
            # provisional physical choice at the heuristic count, then θ of that choice
            chosen = variants[0]
            if len(variants) > 1:
                cur = self._curves(variants, [heur], {})
                chosen = variants[int(np.argmin(cur[:, 0]))]
            sum_p = sum_c = 0.0
            for n in chosen.stage_nodes:
                tp, tc = self.provider.theta(n)
                sum_p += tp
                sum_c += tc
            theta = (sum_p, sum_c)
            try:
                P = analytical_partition(sum_p, sum_c, self.cfg.P_min, self.cfg.P_max)
            except DegenerateStage:
                log.warning("no partition-dependent terms in stage; keeping heuristic P=%d", heur)
                P = heur
        cache = {}
        curves = self._curves(variants, [P], cache)
        self._finish(stage, variants, [P], curves, cache)
        self.records.append(self._record(stage, P, pinned, curve_rec, theta))

    def _finish(self, stage, variants, partitions, curves, cache) -> None:
        P = partitions[0]
        for v, c in zip(variants, curves[:, 0]):
            v.total = float(c)
            for n in v.stage_nodes:
                self.stage_p[id(n)] = P
                self.node_cost[id(n)] = float(cache[id(n)][0])
        order = sorted(range(len(variants)), key=lambda i: (variants[i].total, i))
        keep = [variants[i] for i in order[: self.max_variants]]
        self.final[id(stage[-1])] = keep

    def _record(self, stage, P, pinned, curve, theta) -> StageSelection:
        best = self.final[id(stage[-1])][0]
        cost = sum(self.node_cost[id(n)] for n in best.stage_nodes)
        return StageSelection(
            boundary=best.stage_nodes[0].kind.value,
            n_nodes=len(best.stage_nodes),
            partitions=P,
            cost_ms=float(cost),
            pinned=pinned is not None,
            curve=curve,
            theta=theta,
        )


def _materialize(node: PlanNode, stage_p: dict[int, int], costs: dict[int, float], out_costs: dict[int, float]) -> PlanNode:
    kids = [_materialize(c, stage_p, costs, out_costs) for c in node.children]
    copy = PlanNode(
        node.kind, node.stats, kids, inputs=node.inputs, params=node.params,
        partition_count=stage_p[id(node)], required_partition=node.required_partition,
    )
    out_costs[id(copy)] = costs[id(node)]
    return copy


def optimize(
    logical_plan: Union[PlanNode, dict, str],
    store,
    cfg: SamplingConfig = SamplingConfig(),
    mode: Union[Mode, str] = Mode.FIXED,
    max_variants: int = MAX_VARIANTS,
) -> OptimizedPlan:
    """Pick physical operators and stage partition counts minimising total cost.

    ``store`` is a CostModelStore or any cost provider.  Total cost of a
    subtree is its root's exclusive cost plus the totals of its children.
    """
    if logical_plan is None:
        raise PlanError("empty plan")
    if not isinstance(logical_plan, PlanNode):
        logical_plan = build_plan(logical_plan)
    mode = Mode(mode)
    if mode is Mode.NAIVE:
        # exhaustive grid; same machinery as sampling
        cfg = SamplingConfig(P_min=cfg.P_min, P_max=cfg.P_max, explicit=tuple(range(cfg.P_min, cfg.P_max + 1)))
        mode = Mode.SAMPLING
    provider = as_provider(store)
    start = provider.lookups
    root = expand(logical_plan)
    search = _Search(root, provider, cfg, mode, max_variants)
    try:
        for stage in group_stages(root):
            search.run_stage(stage)
    except ThetaUnavailable as exc:
        raise PlanError(f"analytical mode needs linear partition terms: {exc}") from exc
    best = search.final[id(root)][0]
    node_costs: dict[int, float] = {}
    final = _materialize(best.node, search.stage_p, search.node_cost, node_costs)
    return OptimizedPlan(
        root=final,
        predicted_cost_ms=best.total,
        lookup_count=provider.lookups - start,
        mode=mode.value,
        stages=search.records,
        node_costs=node_costs,
    )


def enumerate_plans(logical_plan: PlanNode) -> list[PlanNode]:
    """Every physical plan reachable from the rule table (exchanges inserted as in the search)."""

    def build(g: Group) -> list[PlanNode]:
        kid_sets = [build(c) for c in g.children]
        out = []
        for kind in g.candidates:
            for combo in itertools.product(*kid_sets):
                out.append(PlanNode(kind, g.stats, list(combo), inputs=g.inputs, params=g.params,
                                    required_partition=g.required))
        return out

    return build(expand(logical_plan))


__all__ = [
    "Group", "OptimizedPlan", "enumerate_plans", "expand", "group_stages", "optimize",
]
