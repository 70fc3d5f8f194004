"""Synthetic workloads with a hidden latency oracle, baselines and evaluation harnesses."""

from .evaluate import (
    CSV_HEADER, DEFAULT_COST_PER_ROW, EmptyTestSet, EvalReport, EvalRow, PlanChangeReport,
    compare_plans, default_cost, default_provider, evaluate, true_latency,
)
from .explore import BenchStage, ExploreRow, bench_explore, default_strategies, explore_csv, pick_stages
from .generator import (
    Template, Workload, WorkloadConfig, adhoc_count, gen_workload, input_name, instantiate,
    logical_suite, random_template,
)
from .oracle import Coefficients, OracleParams, UnknownTemplateError, oracle_curve, oracle_latency
from .pipeline import COMBINED_FIT, INDIVIDUAL_FIT, oracle_for, train_from_days

__all__ = [
    "BenchStage", "COMBINED_FIT", "CSV_HEADER", "Coefficients", "DEFAULT_COST_PER_ROW", "EmptyTestSet",
    "EvalReport", "EvalRow", "ExploreRow", "INDIVIDUAL_FIT", "OracleParams", "PlanChangeReport",
    "Template", "UnknownTemplateError", "Workload", "WorkloadConfig", "adhoc_count", "bench_explore",
    "compare_plans", "default_cost", "default_provider", "default_strategies", "evaluate",
    "explore_csv", "gen_workload", "input_name", "instantiate", "logical_suite", "oracle_curve",
    "oracle_for", "oracle_latency", "pick_stages", "random_template", "train_from_days", "true_latency",
]
