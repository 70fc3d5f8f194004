"""Accuracy metrics on latency predictions."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

_EPS = 1e-9


def _pair(pred: Sequence[float], actual: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise ValueError("length mismatch")
    if len(p) == 0:
        raise ValueError("empty input")
    return p, a


def msle(pred: Sequence[float], actual: Sequence[float]) -> float:
    """Mean squared difference of log(1 + x)."""
    p, a = _pair(pred, actual)
    d = np.log1p(p) - np.log1p(a)
    return float(np.mean(d * d))


def relative_errors(pred: Sequence[float], actual: Sequence[float], eps: float = _EPS) -> np.ndarray:
    p, a = _pair(pred, actual)
    return np.abs(p - a) / np.maximum(a, eps)


def median_rel_error(pred: Sequence[float], actual: Sequence[float], eps: float = _EPS) -> float:
    return float(np.median(relative_errors(pred, actual, eps)))


def p95_rel_error(pred: Sequence[float], actual: Sequence[float], eps: float = _EPS) -> float:
    return float(np.percentile(relative_errors(pred, actual, eps), 95))


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    x, y = _pair(a, b)
    # rescale first: extrapolating models can emit values whose squares overflow
    x = x / max(float(np.abs(x).max()), _EPS)
    y = y / max(float(np.abs(y).max()), _EPS)
    x = x - x.mean()
    y = y - y.mean()
    sx, sy = float(np.sqrt(x @ x)), float(np.sqrt(y @ y))
    if sx == 0 or sy == 0:
        raise ValueError("zero variance")
    return float(np.clip((x @ y) / (sx * sy), -1.0, 1.0))


def kfold(n: int, k: int, seed: int = 0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold (train_idx, test_idx) pairs."""
    order = np.random.default_rng(seed).permutation(n)
    for fold in np.array_split(order, k):
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        yield np.flatnonzero(mask), np.sort(fold)
