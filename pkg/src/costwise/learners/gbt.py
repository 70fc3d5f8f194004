"""Least-squares gradient boosted regression trees (MART style)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import FitConfig
from .linear import FitError, _align, inverse_log_transform, log_transform
from .rng import SplitMix64


@dataclass
class RegressionTree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf holding ``value[i]``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def depth(self) -> int:
        def d(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(d(self.left[i]), d(self.right[i]))

        return d(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            r = rows[inner]
            n = node[inner]
            go_left = X[r, f[inner]] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            value=np.array(d["value"], dtype=np.float64),
        )


def best_split(X: np.ndarray, r: np.ndarray, min_leaf: int = 1) -> Optional[tuple[int, float, float]]:
    """Greedy least-squares split: (feature, threshold, gain) or None.

    Candidate thresholds are midpoints between consecutive distinct values;
    rows with ``x <= threshold`` go left.  Ties keep the lowest feature index
    and the lowest threshold.
    """
    n = len(r)
    total = r.sum()
    base = total * total / n
    best: Optional[tuple[int, float, float]] = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cs = np.cumsum(r[order])
        n_left = np.arange(1, n)
        ok = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        s_left = cs[:-1]
        gain = s_left**2 / n_left + (total - s_left) ** 2 / (n - n_left) - base
        gain = np.where(ok, gain, -np.inf)
        k = int(np.argmax(gain))
        g = float(gain[k])
        if best is None or g > best[2]:
            lo, hi = xs[k], xs[k + 1]
            thr = lo + (hi - lo) / 2.0
            if not thr < hi:
                thr = lo
            best = (j, float(thr), g)
    return best


def _grow(X: np.ndarray, r: np.ndarray, max_depth: int, min_leaf: int) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    scale = max(1.0, float(r @ r))

    def node(idx: np.ndarray, depth: int) -> int:
        me = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(r[idx].mean()))
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            return me
        split = best_split(X[idx], r[idx], min_leaf)
        if split is None or split[2] <= 1e-12 * scale:
            return me
        j, thr, _ = split
        mask = X[idx, j] <= thr
        feature[me] = j
        threshold[me] = thr
        left[me] = node(idx[mask], depth + 1)
        right[me] = node(idx[~mask], depth + 1)
        return me

    node(np.arange(len(r)), 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
    )


@dataclass
class GbtCostModel:
    feature_ids: tuple[str, ...]
    trees: list[RegressionTree]
    base_score: float
    learning_rate: float
    seed: int
    max_depth: int = 5
    train_loss: list[float] = field(default_factory=list, repr=False, compare=False)

    def log_predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.apply(X)
        return out

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return inverse_log_transform(self.log_predict(X))

    def to_dict(self) -> dict:
        return {
            "type": "gbt",
            "feature_ids": list(self.feature_ids),
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "seed": int(self.seed),
            "max_depth": int(self.max_depth),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbtCostModel":
        if d.get("type") != "gbt":
            raise ValueError("not a boosted-tree model")
        return cls(
            feature_ids=tuple(d["feature_ids"]),
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            base_score=float(d["base_score"]),
            learning_rate=float(d["learning_rate"]),
            seed=int(d["seed"]),
            max_depth=int(d.get("max_depth", 5)),
        )


def fit_gbt(
    X: np.ndarray,
    y: np.ndarray,
    cfg: FitConfig = FitConfig(),
    feature_ids: Optional[Sequence[str]] = None,
    log_target: bool = True,
) -> GbtCostModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("empty dataset")
    if y.shape != (X.shape[0],):
        raise FitError("X and y disagree in length")
    if not np.all(np.isfinite(X)):
        raise FitError("non-finite feature")
    t = np.atleast_1d(log_transform(y) if log_target else y)
    n = len(t)
    ids = tuple(feature_ids) if feature_ids is not None else tuple(f"x{i}" for i in range(X.shape[1]))

    base = float(t.mean())
    F = np.full(n, base)
    rng = SplitMix64(cfg.seed)
    k = n if cfg.subsample >= 1.0 else max(1, int(round(cfg.subsample * n)))
    trees: list[RegressionTree] = []
    losses = [float(np.mean((t - F) ** 2))]
    for _ in range(cfg.n_trees):
        resid = t - F
        idx = np.arange(n) if k == n else np.array(rng.sample_indices(n, k))
        tree = _grow(X[idx], resid[idx], cfg.max_depth, cfg.min_samples_leaf)
        trees.append(tree)
        F = F + cfg.learning_rate * tree.apply(X)
        losses.append(float(np.mean((t - F) ** 2)))
    return GbtCostModel(
        feature_ids=ids, trees=trees, base_score=base, learning_rate=cfg.learning_rate,
        seed=cfg.seed, max_depth=cfg.max_depth, train_loss=losses,
    )


def predict_gbt(m: GbtCostModel, x) -> float:
    values = _align(m.feature_ids, x)
    return float(m.predict_many(values[None, :])[0])
