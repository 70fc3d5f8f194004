from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class FitConfig:
    """Hyper-parameters shared by the elastic net and the boosted trees."""

    alpha: float = 1.0
    l1_ratio: float = 0.5
    tol: float = 1e-6
    max_iter: int = 1000
    n_trees: int = 20
    max_depth: int = 5
    subsample: float = 0.9
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol and max_iter must be positive")
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("tree sizes must be positive")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        return cls(**d)
