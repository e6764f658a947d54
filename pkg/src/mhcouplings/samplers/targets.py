"""Target densities on R^d. Log densities take arrays of shape (R, d)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class TargetModel:
    dim: int
    log_density: Callable[[np.ndarray], np.ndarray]
    grad_log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"


def standard_normal(dim: int = 1) -> TargetModel:
    return TargetModel(dim, lambda X: -0.5 * np.sum(X * X, axis=-1), lambda X: -X, f"normal{dim}")


def gaussian(mean, var) -> TargetModel:
    """Independent Gaussian coordinates with the given means and variances."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = np.broadcast_to(np.asarray(var, dtype=float), mean.shape).copy()
    return TargetModel(
        mean.size,
        lambda X: -0.5 * np.sum((X - mean) ** 2 / var, axis=-1),
        lambda X: -(X - mean) / var,
        "gaussian",
    )


def funnel(dim: int = 2, scale: float = 3.0) -> TargetModel:
    """Neal's funnel: v ~ N(0, scale^2), x_k | v ~ N(0, e^v)."""
    if dim < 2:
        raise ValueError("funnel needs dim >= 2")

    def logp(X):
        v, rest = X[..., 0], X[..., 1:]
        return -0.5 * v * v / scale**2 - 0.5 * (dim - 1) * v - 0.5 * np.sum(rest * rest, axis=-1) * np.exp(-v)

    def grad(X):
        v, rest = X[..., 0], X[..., 1:]
        g = np.empty_like(X)
        g[..., 0] = -v / scale**2 - 0.5 * (dim - 1) + 0.5 * np.sum(rest * rest, axis=-1) * np.exp(-v)
        g[..., 1:] = -rest * np.exp(-v)[..., None]
        return g

    return TargetModel(dim, logp, grad, f"funnel{dim}")


def uniform_box(lower, upper) -> TargetModel:
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))

    def logp(X):
        inside = np.all((X > lower) & (X < upper), axis=-1)
        return np.where(inside, 0.0, -np.inf)

    return TargetModel(lower.size, logp, None, "box")


def check_gradient(target: TargetModel, rng: np.random.Generator, n_points: int = 100, rtol: float = 1e-5,
                   atol: float = 1e-8, h: float = 1e-5, spread: float = 1.0) -> tuple[bool, float]:
    """Central finite differences against ``grad_log_density`` at random points.

    Returns ``(ok, worst relative error)``.
    """
    if target.grad_log_density is None:
        raise ValueError(f"target {target.name} has no gradient")
    X = spread * rng.standard_normal((n_points, target.dim))
    analytic = target.grad_log_density(X)
    numeric = np.empty_like(X)
    for k in range(target.dim):
        e = np.zeros(target.dim)
        e[k] = h
        numeric[:, k] = (target.log_density(X + e) - target.log_density(X - e)) / (2 * h)
    ok = bool(np.allclose(numeric, analytic, rtol=rtol, atol=atol))
    rel = np.abs(numeric - analytic) / np.maximum(np.abs(analytic), atol / rtol)
    return ok, float(rel.max())


BUILTIN = {"normal": standard_normal, "funnel": funnel}
