"""Sources of exclusive operator costs for the search.

A provider answers ``costs(node, partitions)`` with one cost (ms) per
partition count and keeps a running count of model evaluations in
``lookups``.  Providers that can expose partition-dependent linear terms also
implement ``theta(node)``.
"""

from __future__ import annotations

import threading
from typing import Callable, Mapping, Optional, Protocol, Sequence

import numpy as np

from ..features import PER_PARTITION_NUMERATORS, BasicFeatures, basic_features, context_features
from ..hub import CostModelStore, UnknownOperatorError, predict_node
from ..learners import LinearCostModel
from ..plan import PlanNode
from ..signatures import compute_signatures


class CostProvider(Protocol):
    lookups: int

    def costs(self, node: PlanNode, partitions: Sequence[int]) -> np.ndarray: ...


class ThetaUnavailable(LookupError):
    pass


def theta_from_linear(model: LinearCostModel, basic: BasicFeatures) -> tuple[float, float]:
    """(θ_P, θ_C): coefficient of 1/P and of P in the model's raw-space linear predictor."""
    w, _ = model.raw_coefficients()
    index = {name: i for i, name in enumerate(model.feature_ids)}
    theta_p = 0.0
    for name, numer in PER_PARTITION_NUMERATORS.items():
        i = index.get(name)
        if i is not None and w[i] != 0.0:
            theta_p += float(w[i]) * numer(basic.I, basic.C, basic.L)
    i = index.get("P")
    theta_c = float(w[i]) if i is not None else 0.0
    return theta_p, theta_c


class _Counter:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.lookups = 0

    def _add(self, n: int) -> None:
        with self._lock:
            self.lookups += n


class StoreCostProvider(_Counter):
    """Exclusive cost = combined-model prediction; 1 + (#individual models present) evaluations each."""

    def __init__(self, store: CostModelStore):
        super().__init__()
        self.store = store
        self._cache: dict[int, tuple] = {}

    def _info(self, node: PlanNode):
        hit = self._cache.get(id(node))
        if hit is None or hit[0] is not node:
            sigs = compute_signatures(node)
            b = basic_features(node, partitions=1)
            hit = (node, sigs, b, context_features(node))
            self._cache[id(node)] = hit
        return hit

    def costs(self, node: PlanNode, partitions: Sequence[int]) -> np.ndarray:
        _, sigs, b, ctx = self._info(node)
        preds, comb = predict_node(self.store, node, partitions, sigs=sigs, basic=b, context=ctx)
        self._add(len(partitions) * (1 + sum(v is not None for v in preds.values())))
        return comb

    def predictions(self, node: PlanNode, partitions: Sequence[int]):
        _, sigs, b, ctx = self._info(node)
        preds, comb = predict_node(self.store, node, partitions, sigs=sigs, basic=b, context=ctx)
        self._add(len(partitions) * (1 + sum(v is not None for v in preds.values())))
        return preds, comb

    def theta(self, node: PlanNode) -> tuple[float, float]:
        _, sigs, b, _ = self._info(node)
        model = self.store.operator.get(sigs.operator)
        if model is None:
            raise UnknownOperatorError(node.kind.value)
        return theta_from_linear(model, b)


class FunctionCostProvider(_Counter):
    """Costs from a plain function ``fn(node, P) -> ms``; optional ``theta_fn(node)``."""

    def __init__(
        self,
        fn: Callable[[PlanNode, int], float],
        theta_fn: Optional[Callable[[PlanNode], tuple[float, float]]] = None,
        evaluations_per_lookup: int = 1,
    ):
        super().__init__()
        self.fn = fn
        self.theta_fn = theta_fn
        self.per_lookup = evaluations_per_lookup

    def costs(self, node: PlanNode, partitions: Sequence[int]) -> np.ndarray:
        self._add(self.per_lookup * len(partitions))
        return np.array([float(self.fn(node, int(p))) for p in partitions])

    def theta(self, node: PlanNode) -> tuple[float, float]:
        if self.theta_fn is None:
            raise ThetaUnavailable("this cost source has no linear partition terms")
        return self.theta_fn(node)


class TableCostProvider(_Counter):
    """Per-node cost tables ``{P: ms}``, keyed by node identity."""

    def __init__(self, tables: Mapping[int, Mapping[int, float]], nodes: Sequence[PlanNode] = ()):
        super().__init__()
        self.tables = {k: dict(v) for k, v in tables.items()}
        self._keep = list(nodes)

    @classmethod
    def for_plan(cls, root: PlanNode, tables_by_preorder: Mapping[int, Mapping[int, float]]) -> "TableCostProvider":
        nodes = list(root.walk())
        return cls({id(nodes[i]): t for i, t in tables_by_preorder.items()}, nodes)

    def partitions_for(self, node: PlanNode) -> list[int]:
        return sorted(self.tables.get(id(node), {}))

    def costs(self, node: PlanNode, partitions: Sequence[int]) -> np.ndarray:
        table = self.tables.get(id(node))
        if table is None:
            raise KeyError(f"no cost table for {node.kind.value}")
        self._add(len(partitions))
        try:
            return np.array([float(table[int(p)]) for p in partitions])
        except KeyError as exc:
            raise KeyError(f"no cost for {node.kind.value} at P={exc.args[0]}") from None

    def theta(self, node: PlanNode) -> tuple[float, float]:
        raise ThetaUnavailable("cost tables have no linear partition terms")


def as_provider(source) -> CostProvider:
    if isinstance(source, CostModelStore):
        return StoreCostProvider(source)
    if hasattr(source, "costs"):
        return source
    if callable(source):
        return FunctionCostProvider(source)
    raise TypeError(f"cannot derive costs from {type(source).__name__}")


def restricted_cost(theta_p: float, theta_c: float, partitions) -> np.ndarray:
    P = np.asarray(partitions, dtype=np.float64)
    return theta_p / P + theta_c * P


__all__ = [
    "CostProvider", "FunctionCostProvider", "StoreCostProvider", "TableCostProvider",
    "ThetaUnavailable", "as_provider", "restricted_cost", "theta_from_linear",
]
