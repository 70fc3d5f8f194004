"""Hidden ground-truth latency for synthetic plans.

Exclusive latency of an operator at partition count P is

    a + b·I·L/P + c·C·L/P + d·P + e·√I

with coefficients drawn per (operator kind, template) from a seed.  Noise is
multiplicative lognormal with σ = noise_cv, one draw per operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..features import basic_features
from ..learners.rng import derive_seed
from ..plan import PhysicalKind, PlanNode
from ..signatures import fnv1a64

# per-kind scale of (a, b, c, d, e); b and c are ms per byte per partition
_KIND_SCALE: dict[PhysicalKind, tuple[float, float, float, float, float]] = {
    PhysicalKind.EXTRACT: (20.0, 2.0e-8, 0.0, 2.0, 2.0e-3),
    PhysicalKind.FILTER: (5.0, 5.0e-9, 2.5e-9, 0.5, 1.0e-3),
    PhysicalKind.PROJECT: (5.0, 2.5e-9, 2.5e-9, 0.5, 0.5e-3),
    PhysicalKind.HASH_JOIN: (30.0, 1.5e-8, 1.0e-8, 3.0, 2.0e-3),
    PhysicalKind.MERGE_JOIN: (30.0, 1.0e-8, 1.0e-8, 5.0, 4.0e-3),
    PhysicalKind.HASH_AGG: (20.0, 1.5e-8, 5.0e-9, 2.0, 1.0e-3),
    PhysicalKind.STREAM_AGG: (20.0, 1.0e-8, 5.0e-9, 3.0, 3.0e-3),
    PhysicalKind.SORT: (20.0, 2.5e-8, 0.0, 2.0, 2.0e-3),
    PhysicalKind.EXCHANGE: (30.0, 3.0e-8, 1.0e-8, 4.0, 1.0e-3),
    PhysicalKind.UDF: (20.0, 4.0e-8, 5.0e-9, 1.0, 2.0e-3),
    PhysicalKind.UNION: (5.0, 2.5e-9, 2.5e-9, 0.5, 0.5e-3),
    PhysicalKind.OUTPUT: (20.0, 0.0, 2.0e-8, 2.0, 1.0e-3),
}


class UnknownTemplateError(KeyError):
    pass


@dataclass(frozen=True)
class Coefficients:
    a: float
    b: float
    c: float
    d: float
    e: float

    def latency(self, I: float, C: float, L: float, P) -> np.ndarray:
        P = np.asarray(P, dtype=np.float64)
        return self.a + self.b * I * L / P + self.c * C * L / P + self.d * P + self.e * math.sqrt(I)


@dataclass
class OracleParams:
    """Coefficient source keyed by template; coefficients are derived lazily per kind."""

    seed: int
    templates: set = field(default_factory=set)
    hard_mode: bool = False
    spread: float = 0.35
    _cache: dict = field(default_factory=dict, repr=False)

    def register(self, template: str) -> None:
        self.templates.add(template)

    def set(self, kind: PhysicalKind, template: str, coef: Coefficients) -> None:
        self.templates.add(template)
        self._cache[(kind, template)] = coef

    def coefficients(self, kind: PhysicalKind, template: str) -> Coefficients:
        if template not in self.templates:
            raise UnknownTemplateError(f"no oracle coefficients for template {template!r}")
        key = (kind, template)
        hit = self._cache.get(key)
        if hit is None:
            rng = np.random.default_rng(derive_seed(self.seed, fnv1a64(kind.value.encode()), fnv1a64(template.encode())))
            mult = np.exp(self.spread * rng.standard_normal(5))
            a, b, c, d, e = (s * m for s, m in zip(_KIND_SCALE[kind], mult))
            hit = Coefficients(float(a), float(b), float(c), float(d), float(e))
            self._cache[key] = hit
        return hit


def oracle_latency(
    node: PlanNode,
    P: int,
    params: OracleParams,
    template: str,
    rng: Optional[np.random.Generator] = None,
    noise_cv: float = 0.0,
) -> float:
    """True exclusive latency (ms); noiseless when ``rng`` is None or ``noise_cv`` is 0."""
    b = basic_features(node, partitions=P)
    coef = params.coefficients(node.kind, template)
    ms = float(coef.latency(b.I, b.C, b.L, P))
    if params.hard_mode:
        ms += 0.01 * b.I * math.log1p(b.C) ** 2 * 1e-6
    if rng is not None and noise_cv > 0:
        ms *= math.exp(noise_cv * rng.standard_normal())
    return max(ms, 1e-6)


def oracle_curve(node: PlanNode, partitions, params: OracleParams, template: str) -> np.ndarray:
    """Noiseless latency at each partition count."""
    b = basic_features(node, partitions=1)
    out = params.coefficients(node.kind, template).latency(b.I, b.C, b.L, partitions)
    if params.hard_mode:
        out = out + 0.01 * b.I * math.log1p(b.C) ** 2 * 1e-6
    return np.maximum(out, 1e-6)
