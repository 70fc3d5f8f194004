"""Partition-exploration benchmark: look-ups spent versus cost gap to a full grid scan."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..hub import CostModelStore
from ..learners.rng import SplitMix64, derive_seed
from ..optimizer import (
    SamplingConfig, StoreCostProvider, Strategy, explore_stage_sampling,
    optimize_stage_analytical, sample_partitions, stage_cost_curve,
)
from ..plan import PlanNode, decompose_stages
from .oracle import OracleParams, oracle_curve

EXPLORE_HEADER = ("strategy", "samples", "lookups", "cost_gap", "true_gap")


@dataclass(frozen=True)
class BenchStage:
    nodes: tuple[PlanNode, ...]
    template: str


@dataclass(frozen=True)
class ExploreRow:
    strategy: str
    samples: float  # per stage (mean)
    lookups: float  # per stage (mean)
    cost_gap: float  # median over stages, learned cost vs learned grid optimum
    true_gap: float  # median over stages, oracle cost vs oracle grid optimum (NaN without oracle)


def default_strategies() -> list[tuple[str, Optional[SamplingConfig]]]:
    out: list[tuple[str, Optional[SamplingConfig]]] = []
    for s in (1, 2, 4):
        out.append((f"Geometric(s={s})", SamplingConfig(Strategy.GEOMETRIC, s=s)))
    for k in (5, 10, 20, 40):
        out.append((f"Uniform(k={k})", SamplingConfig(Strategy.UNIFORM, k=k)))
    for k in (5, 10, 20, 40):
        out.append((f"Random(k={k})", SamplingConfig(Strategy.RANDOM, k=k, seed=k)))
    out.append(("Analytical", None))
    return out


def pick_stages(jobs, n: int, seed: int = 0) -> list[BenchStage]:
    """``n`` stages drawn without replacement from logged physical plans."""
    pool = [BenchStage(tuple(st.nodes), job.template) for job in jobs for st in decompose_stages(job.plan)]
    if n >= len(pool):
        return pool
    idx = SplitMix64(derive_seed(seed, 17)).sample_indices(len(pool), n)
    return [pool[i] for i in idx]


def bench_explore(
    store: CostModelStore,
    stages: Sequence[BenchStage],
    oracle: Optional[OracleParams] = None,
    strategies: Optional[list[tuple[str, Optional[SamplingConfig]]]] = None,
    P_min: int = 1,
    P_max: int = 3000,
) -> list[ExploreRow]:
    strategies = strategies or default_strategies()
    grid = np.arange(P_min, P_max + 1)
    learned = []
    truth = []
    for st in stages:
        learned.append(stage_cost_curve(st.nodes, StoreCostProvider(store), grid))
        if oracle is not None:
            truth.append(sum(oracle_curve(n, grid, oracle, st.template) for n in st.nodes))
    rows = []
    for name, cfg in strategies:
        gaps, tgaps, looks, nsamp = [], [], [], []
        for i, st in enumerate(stages):
            prov = StoreCostProvider(store)
            if cfg is None:
                acfg = SamplingConfig(P_min=P_min, P_max=P_max)
                P = optimize_stage_analytical(st.nodes, prov, acfg)
                stage_cost_curve(st.nodes, prov, [P])  # final costing at the chosen count
                nsamp.append(1)
            else:
                cfg_i = SamplingConfig(cfg.strategy, cfg.s, cfg.k, P_min, P_max, cfg.seed, cfg.explicit)
                P, _ = explore_stage_sampling(st.nodes, prov, cfg_i)
                nsamp.append(len(sample_partitions(cfg_i)))
            looks.append(prov.lookups)
            cur = learned[i]
            gaps.append(cur[P - P_min] / cur.min() - 1.0)
            if truth:
                tgaps.append(truth[i][P - P_min] / truth[i].min() - 1.0)
        rows.append(ExploreRow(
            name, float(np.mean(nsamp)), float(np.mean(looks)), float(np.median(gaps)),
            float(np.median(tgaps)) if tgaps else float("nan"),
        ))
    return rows


def explore_csv(rows: Sequence[ExploreRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPLORE_HEADER)
    for r in rows:
        w.writerow([r.strategy, f"{r.samples:.2f}", f"{r.lookups:.1f}", f"{r.cost_gap:.6f}", f"{r.true_gap:.6f}"])
    return buf.getvalue()
