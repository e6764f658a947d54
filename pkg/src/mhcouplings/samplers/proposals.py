"""Gaussian random-walk and Langevin proposals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .targets import TargetModel

LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class ProposalSpec:
    kind: str  # "rwm" or "mala"
    scale: float  # sigma for rwm, tau for mala

    def __post_init__(self):
        if self.kind not in ("rwm", "mala"):
            raise ValueError(f"unknown proposal kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("proposal scale must be positive")

    @property
    def sd(self) -> float:
        return self.scale if self.kind == "rwm" else float(np.sqrt(2 * self.scale))

    @property
    def symmetric(self) -> bool:
        return self.kind == "rwm"

    def mean(self, target: TargetModel, X: np.ndarray) -> np.ndarray:
        if self.kind == "rwm":
            return X
        if target.grad_log_density is None:
            raise ValueError("MALA needs a gradient of the log target")
        # drift along the gradient of log pi
        return X + self.scale * target.grad_log_density(X)

    def log_q(self, target: TargetModel, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Log proposal density of ``Y`` from ``X`` (row-wise)."""
        sd = self.sd
        d = X.shape[-1]
        Z = (Y - self.mean(target, X)) / sd
        return -0.5 * np.sum(Z * Z, axis=-1) - d * np.log(sd) - 0.5 * d * LOG_2PI

    def sample(self, target: TargetModel, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.mean(target, X) + self.sd * rng.standard_normal(X.shape)


def log_accept_ratio(target: TargetModel, prop: ProposalSpec, X: np.ndarray, Xp: np.ndarray) -> np.ndarray:
    """``log(pi(x') q(x', x) / (pi(x) q(x, x')))``, with ``-inf`` where the proposal is off-support."""
    with np.errstate(invalid="ignore"):
        lr = target.log_density(Xp) - target.log_density(X)
        if not prop.symmetric:
            lr = lr + prop.log_q(target, Xp, X) - prop.log_q(target, X, Xp)
    return np.where(np.isfinite(lr) | (lr == np.inf), lr, -np.inf)
