"""Elastic net trained by cyclic coordinate descent on log-latency targets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .config import FitConfig

# log(1+y) is clipped here before exponentiation so predictions stay finite
_MAX_LOG = 700.0


class FitError(ValueError):
    pass


def log_transform(y):
    """ln(y + 1); accepts scalars or arrays of non-negative latencies."""
    arr = np.asarray(y, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("latency must be finite and non-negative")
    out = np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def inverse_log_transform(t):
    out = np.expm1(np.minimum(np.asarray(t, dtype=np.float64), _MAX_LOG))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@numba.njit(cache=True, nogil=True)
def _objective(Zt, r, w, alpha, l1_ratio):
    n = Zt.shape[1]
    return 0.5 * (r @ r) / n + alpha * (l1_ratio * np.abs(w).sum() + 0.5 * (1.0 - l1_ratio) * (w @ w))


@numba.njit(cache=True, nogil=True)
def _coordinate_descent(Zt, y, alpha, l1_ratio, tol, max_iter):
    """Zt is the transposed standardised design (one contiguous row per feature)."""
    p, n = Zt.shape
    w = np.zeros(p)
    b = y.mean()
    r = y - b
    l1 = alpha * l1_ratio
    denom_l2 = alpha * (1.0 - l1_ratio)
    sq = np.empty(p)
    for j in range(p):
        sq[j] = np.dot(Zt[j], Zt[j]) / n
    history = np.empty(max_iter + 1)
    history[0] = _objective(Zt, r, w, alpha, l1_ratio)
    it = 0
    while it < max_iter:
        max_step = 0.0
        for j in range(p):
            old = w[j]
            zj = Zt[j]
            rho = np.dot(zj, r) / n + sq[j] * old
            if rho > l1:
                new = (rho - l1) / (sq[j] + denom_l2)
            elif rho < -l1:
                new = (rho + l1) / (sq[j] + denom_l2)
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for i in range(n):
                    r[i] -= delta * zj[i]
                w[j] = new
                if abs(delta) > max_step:
                    max_step = abs(delta)
        it += 1
        history[it] = _objective(Zt, r, w, alpha, l1_ratio)
        if max_step < tol:
            break
    return w, b, history[: it + 1]


@dataclass
class LinearCostModel:
    feature_ids: tuple[str, ...]
    weights: np.ndarray
    intercept: float
    mean: np.ndarray
    std: np.ndarray  # 0 marks a constant column whose weight is forced to 0
    n_rows: int = 0
    n_iter: int = 0
    objective_history: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def log_predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        live = self.std > 0
        Z = (X[:, live] - self.mean[live]) / self.std[live]
        return self.intercept + Z @ self.weights[live]

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return inverse_log_transform(self.log_predict(X))

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and intercept in unstandardised feature space."""
        w = np.zeros_like(self.weights)
        live = self.std > 0
        w[live] = self.weights[live] / self.std[live]
        b = self.intercept - float(np.sum(w[live] * self.mean[live]))
        return w, b

    def to_dict(self) -> dict:
        return {
            "type": "linear",
            "feature_ids": list(self.feature_ids),
            "weights": [float(v) for v in self.weights],
            "intercept": float(self.intercept),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "n_rows": self.n_rows,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearCostModel":
        if d.get("type") != "linear":
            raise ValueError("not a linear model")
        return cls(
            feature_ids=tuple(d["feature_ids"]),
            weights=np.array(d["weights"], dtype=np.float64),
            intercept=float(d["intercept"]),
            mean=np.array(d["mean"], dtype=np.float64),
            std=np.array(d["std"], dtype=np.float64),
            n_rows=int(d.get("n_rows", 0)),
            n_iter=int(d.get("n_iter", 0)),
        )


def _column_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.maximum(1.0, np.abs(mean))
    std[std <= 1e-12 * scale] = 0.0
    return mean, std


def fit_elastic_net(
    X: np.ndarray,
    y: np.ndarray,
    cfg: FitConfig = FitConfig(),
    feature_ids: Optional[Sequence[str]] = None,
    log_target: bool = True,
) -> LinearCostModel:
    """Fit on latencies ``y`` (ms).  With ``log_target=False`` ``y`` is used as is."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("empty dataset")
    if y.shape != (X.shape[0],):
        raise FitError("X and y disagree in length")
    if not np.all(np.isfinite(X)):
        raise FitError("non-finite feature")
    t = log_transform(y) if log_target else y
    if np.ndim(t) == 0:
        t = np.array([t])
    ids = tuple(feature_ids) if feature_ids is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    if len(ids) != X.shape[1]:
        raise FitError("feature_ids do not match columns")

    mean, std = _column_stats(X)
    live = std > 0
    weights = np.zeros(X.shape[1])
    if live.any():
        Zt = np.ascontiguousarray(((X[:, live] - mean[live]) / std[live]).T)
        w, b, history = _coordinate_descent(Zt, t, cfg.alpha, cfg.l1_ratio, cfg.tol, cfg.max_iter)
        weights[live] = w
        rises = np.diff(history) > 1e-12 * np.maximum(1.0, np.abs(history[1:]))
        if rises.any():
            raise FitError("coordinate descent increased the objective")
    else:
        b = float(t.mean())
        history = np.array([0.5 * float(np.mean((t - b) ** 2))])
    return LinearCostModel(
        feature_ids=ids, weights=weights, intercept=float(b), mean=mean, std=std,
        n_rows=X.shape[0], n_iter=len(history) - 1, objective_history=history,
    )


def predict_linear(m: LinearCostModel, x) -> float:
    """Latency (ms) for one feature vector; ``x`` is a FeatureVector, mapping or array."""
    values = _align(m.feature_ids, x)
    return float(m.predict_many(values[None, :])[0])


def _align(ids: Sequence[str], x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        if x.shape != (len(ids),):
            raise KeyError("feature vector does not match model")
        return x
    if hasattr(x, "ids") and tuple(x.ids) == tuple(ids):
        return x.values
    mapping = x.as_dict() if hasattr(x, "as_dict") else dict(x)
    missing = [i for i in ids if i not in mapping]
    if missing:
        raise KeyError(f"missing feature(s): {', '.join(missing[:5])}")
    return np.array([mapping[i] for i in ids], dtype=np.float64)


def elastic_net_objective(m: LinearCostModel, X: np.ndarray, t: np.ndarray, cfg: FitConfig) -> float:
    r = t - m.log_predict(X)
    w = m.weights
    return 0.5 * float(r @ r) / len(t) + cfg.alpha * (cfg.l1_ratio * float(np.abs(w).sum()) + 0.5 * (1 - cfg.l1_ratio) * float(w @ w))
