from .config import FitConfig
from .gbt import GbtCostModel, RegressionTree, best_split, fit_gbt, predict_gbt
from .linear import (
    FitError,
    LinearCostModel,
    fit_elastic_net,
    inverse_log_transform,
    log_transform,
    predict_linear,
)
from .metrics import kfold, median_rel_error, msle, p95_rel_error, pearson

__all__ = [
    "FitConfig", "FitError", "GbtCostModel", "LinearCostModel", "RegressionTree",
    "best_split", "fit_elastic_net", "fit_gbt", "inverse_log_transform", "kfold",
    "log_transform", "median_rel_error", "msle", "p95_rel_error", "pearson",
    "predict_gbt", "predict_linear",
]
