"""Physical plan search and per-stage partition selection."""

from .providers import (
    CostProvider, FunctionCostProvider, StoreCostProvider, TableCostProvider, ThetaUnavailable,
    as_provider, restricted_cost, theta_from_linear,
)
from .resources import (
    DegenerateStage, Mode, SamplingConfig, StageSelection, Strategy, analytical_partition,
    count_lookups, derive_stage_partitions, explore_stage_sampling, geometric_samples,
    heuristic_partitions, optimize_stage_analytical, random_samples, required_partition,
    sample_partitions, stage_cost_curve, stage_theta, uniform_samples,
)
from .rules import enumerate_physical, needs_exchange
from .search import OptimizedPlan, enumerate_plans, expand, group_stages, optimize

__all__ = [
    "CostProvider", "DegenerateStage", "FunctionCostProvider", "Mode", "OptimizedPlan",
    "SamplingConfig", "StageSelection", "StoreCostProvider", "Strategy", "TableCostProvider",
    "ThetaUnavailable", "analytical_partition", "as_provider", "count_lookups",
    "derive_stage_partitions", "enumerate_physical", "enumerate_plans", "expand",
    "explore_stage_sampling", "geometric_samples", "group_stages", "heuristic_partitions",
    "needs_exchange", "optimize", "optimize_stage_analytical", "random_samples",
    "required_partition", "restricted_cost", "sample_partitions", "stage_cost_curve",
    "stage_theta", "theta_from_linear", "uniform_samples",
]
