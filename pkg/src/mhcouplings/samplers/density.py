"""Density form of the two-step representation for atomless proposals.

For a kernel coupling with absolutely continuous part ``p``, move-one-chain
densities ``pbar_y(x, x')`` (``x`` moves, ``y`` stays) and ``pbar_x(y, y')``,
and joint stay probability ``rbar``, the proposal coupling has density

    q = p + pbar_y m(y, .) + m(x, .) pbar_x + m(x, .) m(y, .) rbar

with ``m(x, x') = q(x, x') (1 - a(x, x')) / r(x)`` (zero when ``r(x) = 0``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .proposals import ProposalSpec, log_accept_ratio
from .targets import TargetModel


@dataclass(frozen=True)
class RejectionProbability:
    value: float
    error: float
    method: str  # "quad" or "mc"


class MhDensity:
    """Proposal, acceptance and move densities of one MH kernel on R^d."""

    def __init__(self, target: TargetModel, proposal: ProposalSpec, mc_samples: int = 200_000, seed: int = 0):
        self.target = target
        self.proposal = proposal
        self.mc_samples = mc_samples
        self.seed = seed
        self._r = lru_cache(maxsize=4096)(self._rejection)

    def _arr(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float).reshape(-1, self.target.dim)

    def q(self, x, xp) -> np.ndarray:
        X, Xp = np.broadcast_arrays(self._arr(x), self._arr(xp))
        return np.exp(self.proposal.log_q(self.target, X, Xp))

    def a(self, x, xp) -> np.ndarray:
        X, Xp = np.broadcast_arrays(self._arr(x), self._arr(xp))
        return np.exp(np.minimum(log_accept_ratio(self.target, self.proposal, X, Xp), 0.0))

    def p(self, x, xp) -> np.ndarray:
        return self.q(x, xp) * self.a(x, xp)

    def _rejection(self, key: tuple) -> RejectionProbability:
        x = np.array(key, dtype=float)
        if self.target.dim == 1:
            sd = self.proposal.sd
            centre = float(self.proposal.mean(self.target, x[None, :])[0, 0])
            f = lambda z: float(self.p(x, [z])[0])
            # split at x and the proposal mean where the integrand has kinks
            pts = sorted({float(x[0]), centre})
            lo, hi = min(pts) - 12 * sd, max(pts) + 12 * sd
            val, err = integrate.quad(f, lo, hi, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
            return RejectionProbability(max(0.0, 1.0 - val), err, "quad")
        rng = np.random.default_rng([self.seed, *np.frombuffer(x.tobytes(), dtype=np.uint32).tolist()])
        X = np.repeat(x[None, :], self.mc_samples, axis=0)
        Z = self.proposal.sample(self.target, X, rng)
        acc = np.exp(np.minimum(log_accept_ratio(self.target, self.proposal, X, Z), 0.0))
        return RejectionProbability(float(1 - acc.mean()), float(acc.std() / np.sqrt(acc.size)), "mc")

    def r(self, x) -> RejectionProbability:
        """``r(x) = 1 - int p(x, z) dz``, the probability of staying put."""
        return self._r(tuple(float(v) for v in np.ravel(x)))

    def m(self, x, xp) -> np.ndarray:
        rx = self.r(x).value
        if rx <= 0:
            return np.zeros(np.broadcast_shapes(self._arr(x).shape, self._arr(xp).shape)[:1])
        return self.q(x, xp) * (1 - self.a(x, xp)) / rx


@dataclass(frozen=True)
class PbarSpec:
    """Densities of a kernel coupling at a fixed current pair ``(x, y)``."""

    name: str
    p: Callable  # (xp, yp) -> density of the absolutely continuous part
    pbar_y: Callable  # xp -> density of (x moves to xp, y stays)
    pbar_x: Callable  # yp -> density of (x stays, y moves to yp)
    rbar: float


def independent_spec(kernel: MhDensity, x, y) -> PbarSpec:
    rx, ry = kernel.r(x).value, kernel.r(y).value
    return PbarSpec(
        "independent",
        lambda xp, yp: kernel.p(x, xp) * kernel.p(y, yp),
        lambda xp: kernel.p(x, xp) * ry,
        lambda yp: rx * kernel.p(y, yp),
        rx * ry,
    )


def split_spec(kernel: MhDensity, x, y, epsilon: float, g: Callable) -> PbarSpec:
    """Split coupling off the diagonal; ``g = epsilon * nu`` is the minorizing density."""
    rx, ry = kernel.r(x).value, kernel.r(y).value
    s = 1.0 - epsilon

    def gz(z):
        return np.asarray(g(np.ravel(np.asarray(z, float))), float)

    return PbarSpec(
        "split",
        lambda xp, yp: (kernel.p(x, xp) - gz(xp)) * (kernel.p(y, yp) - gz(yp)) / s,
        lambda xp: (kernel.p(x, xp) - gz(xp)) * ry / s,
        lambda yp: rx * (kernel.p(y, yp) - gz(yp)) / s,
        rx * ry / s,
    )


@dataclass(frozen=True)
class TwoStepDensity:
    qbar: np.ndarray
    accept_x: np.ndarray  # P(b_x = 1 | x, y, x', y')
    accept_y: np.ndarray
    phi: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]  # densities of the four outcomes


def two_step_density(kernel: MhDensity, spec: PbarSpec, pair, xp, yp) -> TwoStepDensity:
    """Evaluate the proposal-coupling density and conditional acceptance rates at ``(xp, yp)``."""
    x, y = pair
    mx, my = kernel.m(x, xp), kernel.m(y, yp)
    phi11 = np.asarray(spec.p(xp, yp), float)
    phi10 = spec.pbar_y(xp) * my
    phi01 = mx * spec.pbar_x(yp)
    phi00 = mx * my * spec.rbar
    q = phi11 + phi10 + phi01 + phi00
    with np.errstate(invalid="ignore", divide="ignore"):
        ax = np.where(q > 0, (phi11 + phi10) / q, 1.0)
        ay = np.where(q > 0, (phi11 + phi01) / q, 1.0)
    return TwoStepDensity(q, ax, ay, (phi11, phi10, phi01, phi00))


def grid_mass(kernel: MhDensity, spec: PbarSpec, pair, lo: float, hi: float, points: int = 1201) -> float:
    """Trapezoid integral of the proposal-coupling density over ``[lo, hi]^2`` (1-D chains)."""
    g = np.linspace(lo, hi, points)
    XP, YP = np.meshgrid(g, g, indexing="ij")
    d = two_step_density(kernel, spec, pair, XP.ravel(), YP.ravel()).qbar.reshape(XP.shape)
    return float(integrate.trapezoid(integrate.trapezoid(d, g, axis=1), g))


def rwm_m(target: TargetModel, sigma: float, x, xp, kernel: Optional[MhDensity] = None) -> np.ndarray:
    kernel = kernel or MhDensity(target, ProposalSpec("rwm", sigma))
    return kernel.m(x, xp)


def mala_m(target: TargetModel, tau: float, x, xp, kernel: Optional[MhDensity] = None) -> np.ndarray:
    kernel = kernel or MhDensity(target, ProposalSpec("mala", tau))
    return kernel.m(x, xp)
