"""Partition-count exploration for a stage.

A stage's partition count is the count chosen at its boundary operator; every
other operator in the stage inherits it.  Two strategies pick it: costing the
stage at a set of sampled counts, or reading the partition-dependent linear
terms off the operator models and minimising ``θ_P/P + θ_C·P`` in closed
form.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..features import basic_features
from ..learners.rng import SplitMix64
from ..plan import PlanError, PlanNode, Stage
from .providers import as_provider, restricted_cost

log = logging.getLogger(__name__)

GIB = float(1 << 30)
EVALS_PER_LOOKUP = 5  # four individual families + the combined model


class Strategy(str, enum.Enum):
    GEOMETRIC = "Geometric"
    UNIFORM = "Uniform"
    RANDOM = "Random"


class Mode(str, enum.Enum):
    FIXED = "FixedPartitions"
    SAMPLING = "Sampling"
    ANALYTICAL = "Analytical"
    NAIVE = "Naive"


@dataclass(frozen=True)
class SamplingConfig:
    strategy: Strategy = Strategy.GEOMETRIC
    s: int = 2
    k: int = 20
    P_min: int = 1
    P_max: int = 3000
    seed: int = 0
    # fixed sample list; overrides the strategy when given
    explicit: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.s < 1 or self.k < 1:
            raise ValueError("s and k must be positive")
        if not 1 <= self.P_min <= self.P_max:
            raise ValueError("need 1 <= P_min <= P_max")
        if self.explicit is not None:
            object.__setattr__(self, "explicit", tuple(int(p) for p in self.explicit))


class DegenerateStage(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# samples


def geometric_samples(cfg: SamplingConfig = SamplingConfig()) -> list[int]:
    """1, 2, then x + ceil(x/s) until P_max, restricted to [P_min, P_max]."""
    out = [1]
    x = 2
    while x <= cfg.P_max:
        out.append(x)
        x = x + -(-x // cfg.s)
    out = [p for p in out if p >= cfg.P_min and p <= cfg.P_max]
    return out or [cfg.P_min]


def uniform_samples(cfg: SamplingConfig) -> list[int]:
    grid = np.rint(np.linspace(cfg.P_min, cfg.P_max, cfg.k)).astype(np.int64)
    return sorted({int(p) for p in grid})


def random_samples(cfg: SamplingConfig) -> list[int]:
    span = cfg.P_max - cfg.P_min + 1
    idx = SplitMix64(cfg.seed).sample_indices(span, min(cfg.k, span))
    return [cfg.P_min + i for i in idx]


def sample_partitions(cfg: SamplingConfig) -> list[int]:
    if cfg.explicit is not None:
        if not cfg.explicit:
            raise ValueError("empty sample set")
        return sorted(set(cfg.explicit))
    if cfg.strategy is Strategy.GEOMETRIC:
        return geometric_samples(cfg)
    if cfg.strategy is Strategy.UNIFORM:
        return uniform_samples(cfg)
    return random_samples(cfg)


# --------------------------------------------------------------------------
# heuristics and closed form


def heuristic_partitions(node: PlanNode, P_max: int = 3000, P_min: int = 1) -> int:
    """Data-size rule for a boundary operator: one partition per GiB of base input."""
    b = basic_features(node, partitions=1)
    p = math.ceil(b.B * b.L / GIB)
    return int(min(max(p, P_min, 1), P_max))


def analytical_partition(sum_p: float, sum_c: float, P_min: int = 1, P_max: int = 3000) -> int:
    """Integer minimiser of ``sum_p/P + sum_c·P`` on [P_min, P_max]."""
    if sum_p == 0.0 and sum_c == 0.0:
        raise DegenerateStage("both partition terms are zero")
    if sum_p > 0.0 and sum_c > 0.0:
        x = math.sqrt(sum_p / sum_c)
        lo = int(min(max(math.floor(x), P_min), P_max))
        hi = int(min(max(math.ceil(x), P_min), P_max))
        cands = [lo, hi]
    else:
        # monotone or concave on the interval: an endpoint is optimal
        cands = [P_min, P_max]
    costs = restricted_cost(sum_p, sum_c, cands)
    return int(cands[int(np.argmin(costs))])


# --------------------------------------------------------------------------
# per-stage operations


def _stage_nodes(stage: Union[Stage, Sequence[PlanNode]]) -> list[PlanNode]:
    nodes = list(stage.nodes) if isinstance(stage, Stage) else list(stage)
    if not nodes:
        raise PlanError("empty stage")
    return nodes


def required_partition(stage: Union[Stage, Sequence[PlanNode]]) -> Optional[int]:
    pinned = {n.required_partition for n in _stage_nodes(stage) if n.required_partition is not None}
    if len(pinned) > 1:
        raise PlanError(f"conflicting required partition counts in one stage: {sorted(pinned)}")
    return pinned.pop() if pinned else None


def stage_cost_curve(stage, source, partitions: Sequence[int]) -> np.ndarray:
    """Stage cost (sum of exclusive costs) at each partition count."""
    provider = as_provider(source)
    P = [int(p) for p in partitions]
    total = np.zeros(len(P))
    for node in _stage_nodes(stage):
        total += provider.costs(node, P)
    return total


def explore_stage_sampling(stage, source, cfg: SamplingConfig = SamplingConfig()) -> tuple[int, float]:
    """Cost the stage at every sampled partition count; return (argmin, its cost)."""
    samples = sample_partitions(cfg)
    if not samples:
        raise ValueError("empty sample set")
    curve = stage_cost_curve(stage, source, samples)
    i = int(np.argmin(curve))
    return samples[i], float(curve[i])


def stage_theta(stage, source) -> tuple[float, float]:
    provider = as_provider(source)
    sum_p = sum_c = 0.0
    for node in _stage_nodes(stage):
        tp, tc = provider.theta(node)
        sum_p += tp
        sum_c += tc
    return sum_p, sum_c


def optimize_stage_analytical(stage, source, cfg: SamplingConfig = SamplingConfig()) -> int:
    """Closed-form partition count from the operator models' linear partition terms."""
    nodes = _stage_nodes(stage)
    sum_p, sum_c = stage_theta(nodes, source)
    try:
        return analytical_partition(sum_p, sum_c, cfg.P_min, cfg.P_max)
    except DegenerateStage:
        p = heuristic_partitions(nodes[0], cfg.P_max, cfg.P_min)
        log.warning("no partition-dependent terms in stage; keeping heuristic P=%d", p)
        return p


def derive_stage_partitions(stage, P_star: int) -> int:
    """Set every node of the stage to one partition count; a required count wins."""
    if P_star < 1:
        raise ValueError("partition count must be >= 1")
    nodes = _stage_nodes(stage)
    pinned = required_partition(nodes)
    p = pinned if pinned is not None else int(P_star)
    for n in nodes:
        n.partition_count = p
    return p


def count_lookups(
    m: Union[int, Sequence[int]],
    n_stages: int = 1,
    P_max: int = 3000,
    mode: Union[Mode, str] = Mode.SAMPLING,
    cfg: Optional[SamplingConfig] = None,
) -> int:
    """Model evaluations needed to pick partition counts.

    ``m`` is operators per stage (an int for ``n_stages`` equal stages, or one
    entry per stage).  Each operator costs one evaluation of each of the five
    models per partition count tried.
    """
    M = int(m) * int(n_stages) if isinstance(m, (int, np.integer)) else int(sum(m))
    if M < 0:
        raise ValueError("operator count must be non-negative")
    mode = Mode(mode)
    if mode is Mode.NAIVE:
        return EVALS_PER_LOOKUP * M * int(P_max)
    if mode is Mode.SAMPLING:
        cfg = cfg or SamplingConfig(P_max=P_max)
        return EVALS_PER_LOOKUP * M * len(sample_partitions(cfg))
    return EVALS_PER_LOOKUP * M


@dataclass
class StageSelection:
    """Outcome of partition selection for one stage."""

    boundary: str
    n_nodes: int
    partitions: int
    cost_ms: float
    pinned: bool = False
    curve: dict[int, float] = field(default_factory=dict)
    theta: Optional[tuple[float, float]] = None

    def to_dict(self) -> dict:
        d = {
            "boundary": self.boundary,
            "nodes": self.n_nodes,
            "partitions": self.partitions,
            "cost_ms": self.cost_ms,
            "pinned": self.pinned,
        }
        if self.curve:
            d["curve"] = {str(k): v for k, v in sorted(self.curve.items())}
        if self.theta is not None:
            d["theta_P"], d["theta_C"] = self.theta
        return d
