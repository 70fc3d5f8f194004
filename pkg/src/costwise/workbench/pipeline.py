"""Glue for the generate → train → evaluate loop used by the CLI and the acceptance suite."""

from __future__ import annotations

from typing import Sequence

from ..hub import CostModelStore, extract_training_rows, train_store
from ..learners import FitConfig
from ..learners.rng import derive_seed
from ..logs import LoggedJob
from .oracle import OracleParams

# Individual models are fit with a lighter penalty than the learner default:
# at alpha=1 on z-scored columns the log-target operator models lose every
# partition-dependent weight, which leaves nothing for the analytical planner.
INDIVIDUAL_FIT = FitConfig(alpha=0.1)
COMBINED_FIT = FitConfig()


def train_from_days(
    days: Sequence[Sequence[LoggedJob]],
    min_occurrences: int = 5,
    cfg: FitConfig = INDIVIDUAL_FIT,
    combined_cfg: FitConfig = COMBINED_FIT,
    jobs: int = 1,
) -> CostModelStore:
    """Individual models on every day but the last; combined models on the last day."""
    if len(days) < 2:
        raise ValueError("training needs at least two days of logs")
    first = extract_training_rows([j for day in days[:-1] for j in day])
    last = extract_training_rows(days[-1])
    return train_store(first, last, min_occurrences, cfg, combined_cfg, jobs)


def oracle_for(seed: int, jobs: Sequence[LoggedJob] = (), hard_mode: bool = False) -> OracleParams:
    """The oracle a workload generated with ``seed`` used, covering the given jobs' templates."""
    oracle = OracleParams(seed=derive_seed(seed, 9), hard_mode=hard_mode)
    for j in jobs:
        oracle.register(j.template)
    return oracle
