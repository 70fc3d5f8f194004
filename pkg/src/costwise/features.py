"""Feature extraction for the learned cost models.

``lg(x)`` is ``ln(1 + x)`` throughout, so every feature is finite at zero.
Input templates and parameters enter as 64 hashed one-hot buckets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .plan import PlanError, PlanNode, normalize_input_name
from .signatures import fnv1a64

N_BUCKETS = 64

NUMERIC_IDS: tuple[str, ...] = (
    "I", "B", "C", "L", "P",
    "sqrt(I)", "sqrt(B)", "L*I", "L*B", "L*lg(B)", "L*lg(I)", "L*lg(C)",
    "B*C", "I*C", "B*lg(C)", "I*lg(C)", "lg(I)*lg(C)", "lg(B)*lg(C)",
    "I/P", "C/P", "I*L/P", "C*L/P", "sqrt(I)/P", "sqrt(C)/P", "lg(I)/P",
)
BUCKET_IDS: tuple[str, ...] = tuple(f"h{i:02d}" for i in range(N_BUCKETS))
FEATURE_IDS: tuple[str, ...] = NUMERIC_IDS + BUCKET_IDS
CONTEXT_IDS: tuple[str, ...] = ("CL", "D")
META_IDS: tuple[str, ...] = (
    "pred_subgraph", "pred_approx", "pred_input", "pred_operator",
    "has_subgraph", "has_approx", "has_input", "has_operator",
    "I", "B", "C", "I/P", "B/P", "C/P", "P",
)

# Features of the form g/P, with g as a function of (I, C, L).  Used to pull
# the partition-dependent terms out of a linear model.
PER_PARTITION_NUMERATORS = {
    "I/P": lambda I, C, L: I,
    "C/P": lambda I, C, L: C,
    "I*L/P": lambda I, C, L: I * L,
    "C*L/P": lambda I, C, L: C * L,
    "sqrt(I)/P": lambda I, C, L: math.sqrt(I),
    "sqrt(C)/P": lambda I, C, L: math.sqrt(C),
    "lg(I)/P": lambda I, C, L: math.log1p(I),
}


@dataclass(frozen=True)
class BasicFeatures:
    I: float
    B: float
    C: float
    L: float
    P: int
    IN: tuple[str, ...] = ()
    PM: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if min(self.I, self.B, self.C) < 0 or self.L <= 0 or self.P < 1:
            raise PlanError("invalid basic features")

    def at(self, partitions: int) -> "BasicFeatures":
        return replace(self, P=int(partitions))


@dataclass(frozen=True)
class ContextFeatures:
    CL: int
    D: int


class FeatureVector:
    """Fixed-order named feature values."""

    __slots__ = ("ids", "values")

    def __init__(self, ids: Sequence[str], values: np.ndarray):
        if len(ids) != len(values):
            raise ValueError("ids and values differ in length")
        self.ids = tuple(ids)
        self.values = np.asarray(values, dtype=np.float64)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.ids.index(name)])

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(self.ids, self.values)}

    def extended(self, extra_ids: Sequence[str], extra: Sequence[float]) -> "FeatureVector":
        return FeatureVector(self.ids + tuple(extra_ids), np.concatenate([self.values, np.asarray(extra, float)]))

    def csv_header(self) -> str:
        return ",".join(f'"{i}"' for i in self.ids)

    def to_csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in self.values)

    @classmethod
    def from_csv_row(cls, row: str, ids: Sequence[str] = FEATURE_IDS) -> "FeatureVector":
        return cls(ids, np.array([float(tok) for tok in row.split(",")]))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FeatureVector)
            and self.ids == other.ids
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"FeatureVector({len(self.ids)} features)"


def _leaf_rows(node: PlanNode) -> float:
    if node.is_leaf:
        return node.stats.input_card
    return sum(_leaf_rows(c) for c in node.children)


def _leaf_templates(node: PlanNode) -> list[str]:
    out: list[str] = []
    for n in node.walk():
        out.extend(normalize_input_name(raw) for raw in n.inputs)
    return out


def basic_features(node: PlanNode, partitions: Optional[int] = None) -> BasicFeatures:
    """Table of raw statistics for ``node``; ``partitions`` overrides its P."""
    if node.stats is None:
        raise PlanError("missing stats")
    p = partitions if partitions is not None else node.partition_count
    if p is None:
        raise PlanError("node has no partition count")
    if node.is_leaf:
        i = b = node.stats.input_card
    else:
        i = sum(c.stats.output_card for c in node.children)
        b = _leaf_rows(node)
    return BasicFeatures(
        I=float(i), B=float(b), C=float(node.stats.output_card), L=float(node.stats.avg_row_len),
        P=int(p), IN=tuple(_leaf_templates(node)), PM=tuple(node.params),
    )


def bucket_of(prefix: str, token: str) -> int:
    return fnv1a64((prefix + "\x00" + token).encode("utf-8")) % N_BUCKETS


def _bucket_vector(b: BasicFeatures) -> np.ndarray:
    out = np.zeros(N_BUCKETS)
    for t in b.IN:
        out[bucket_of("IN", t)] = 1.0
    for t in b.PM:
        out[bucket_of("PM", t)] = 1.0
    return out


def numeric_matrix(b: BasicFeatures, partitions: Sequence[int]) -> np.ndarray:
    """Numeric features of ``b`` evaluated at each partition count (rows)."""
    P = np.asarray(partitions, dtype=np.float64)
    I, B, C, L = b.I, b.B, b.C, b.L
    lI, lB, lC = math.log1p(I), math.log1p(B), math.log1p(C)
    sI, sB, sC = math.sqrt(I), math.sqrt(B), math.sqrt(C)
    fixed = np.array([
        I, B, C, L, 0.0,
        sI, sB, L * I, L * B, L * lB, L * lI, L * lC,
        B * C, I * C, B * lC, I * lC, lI * lC, lB * lC,
    ])
    out = np.empty((len(P), len(NUMERIC_IDS)))
    out[:, : len(fixed)] = fixed
    out[:, 4] = P
    numer = np.array([I, C, I * L, C * L, sI, sC, lI])
    out[:, len(fixed):] = numer[None, :] / P[:, None]
    return out


def feature_matrix(b: BasicFeatures, partitions: Sequence[int]) -> np.ndarray:
    num = numeric_matrix(b, partitions)
    buckets = np.broadcast_to(_bucket_vector(b), (num.shape[0], N_BUCKETS))
    return np.hstack([num, buckets])


def derived_features(b: BasicFeatures) -> FeatureVector:
    return FeatureVector(FEATURE_IDS, feature_matrix(b, [b.P])[0])


def context_features(node: PlanNode) -> ContextFeatures:
    """Operator count of the subgraph and its height (a leaf has depth 1)."""

    def height(n: PlanNode) -> int:
        return 1 + max((height(c) for c in n.children), default=0)

    return ContextFeatures(CL=node.size(), D=height(node))


@dataclass(frozen=True)
class MetaFeatures:
    pred_subgraph: float
    pred_approx: float
    pred_input: float
    pred_operator: float
    avail: tuple[bool, bool, bool, bool]
    I: float
    B: float
    C: float
    I_per_P: float
    B_per_P: float
    C_per_P: float
    P: float

    def as_array(self) -> np.ndarray:
        return np.array([
            self.pred_subgraph, self.pred_approx, self.pred_input, self.pred_operator,
            *(1.0 if f else 0.0 for f in self.avail),
            self.I, self.B, self.C, self.I_per_P, self.B_per_P, self.C_per_P, self.P,
        ])


FAMILIES = ("subgraph", "approx", "input", "operator")


def meta_features(preds: Mapping[str, Optional[float]], b: BasicFeatures) -> MetaFeatures:
    """Meta-model inputs; absent predictions are imputed with the operator one."""
    op = preds.get("operator")
    if op is None:
        raise ValueError("operator prediction is required")
    vals = []
    flags = []
    for fam in FAMILIES:
        v = preds.get(fam)
        flags.append(v is not None)
        vals.append(float(v) if v is not None else float(op))
    return MetaFeatures(
        *vals, avail=tuple(flags),
        I=b.I, B=b.B, C=b.C, I_per_P=b.I / b.P, B_per_P=b.B / b.P, C_per_P=b.C / b.P, P=float(b.P),
    )


def meta_matrix(pred_cols: Mapping[str, Optional[np.ndarray]], b: BasicFeatures, partitions: Sequence[int]) -> np.ndarray:
    """Vectorised :func:`meta_features` over partition counts."""
    P = np.asarray(partitions, dtype=np.float64)
    op = pred_cols["operator"]
    cols = []
    flags = []
    for fam in FAMILIES:
        v = pred_cols.get(fam)
        flags.append(np.full(len(P), 1.0 if v is not None else 0.0))
        cols.append(v if v is not None else op)
    return np.column_stack(cols + flags + [
        np.full(len(P), b.I), np.full(len(P), b.B), np.full(len(P), b.C),
        b.I / P, b.B / P, b.C / P, P,
    ])
