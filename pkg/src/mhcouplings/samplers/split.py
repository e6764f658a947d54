"""Minorization (split) couplings.

On the small set both chains jump to a shared draw from ``nu`` with
probability ``epsilon`` and otherwise move independently from their
residual laws ``(P(x,.) - epsilon nu) / (1 - epsilon)``. Outside the small set
the chains step independently from ``P``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import integrate, stats

from ..decomposition import (
    CAM, AcceptanceCoupling, CamReport, Pair, MarginalAcceptanceReport, build_cam, check_theorem1_conditions,
    compute_helpers, extract_acceptance_coupling, regenerate_pbar, verify_cam,
)
from ..kernels import FiniteKernel, MhProblem
from ..measure import ZERO, Dist, JointDist, as_rational


class MinorizationError(ValueError):
    pass


# -- finite spaces -----------------------------------------------------------

@dataclass(frozen=True)
class SplitCouplingSpec:
    """``epsilon = 0`` is accepted as the degenerate independent coupling."""

    epsilon: Fraction
    nu: Dist
    small_set: frozenset[int]
    outside: str = "independent"

    def __post_init__(self):
        eps = as_rational(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "small_set", frozenset(self.small_set))
        if not 0 <= eps <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.outside not in ("independent", "crn"):
            raise ValueError("outside must be 'independent' or 'crn'")

    def in_small_set(self, x: int) -> bool:
        return x in self.small_set

    def verify(self, P: FiniteKernel) -> None:
        """Exhaustive check of ``P(x, .) >= epsilon nu`` on the small set."""
        for x in sorted(self.small_set):
            for i in range(P.n):
                if P[x, i] < self.epsilon * self.nu[i]:
                    lab = P.space.labels
                    raise MinorizationError(
                        f"minorization fails at x={lab[x]}, state {lab[i]}: "
                        f"P = {P[x, i]} < epsilon nu = {self.epsilon * self.nu[i]}")

    def residual(self, P: FiniteKernel, x: int) -> Dist:
        eps = self.epsilon
        if eps == 1:
            raise MinorizationError("epsilon = 1 leaves no residual law")
        w = []
        for i in range(P.n):
            v = (P[x, i] - eps * self.nu[i]) / (1 - eps)
            if v < 0:
                raise MinorizationError(f"negative residual at x={P.space.label(x)}, state {P.space.label(i)}")
            w.append(v)
        return Dist(P.space, tuple(w))


def split_pbar(spec: SplitCouplingSpec, P: FiniteKernel, pair: Pair) -> JointDist:
    """Law of the next pair: ``eps * diag(nu) + (1 - eps) * residual_x (x) residual_y`` on the
    small set, ``P(x,.) (x) P(y,.)`` outside, and the diagonal copy once met."""
    x, y = pair
    if x == y:
        return JointDist.diagonal(P[x])
    if not (spec.in_small_set(x) and spec.in_small_set(y)):
        return JointDist.product(P[x], P[y])
    spec.verify(P)
    if spec.epsilon == 1:
        return JointDist.diagonal(spec.nu)
    rx, ry = spec.residual(P, x), spec.residual(P, y)
    n = P.n
    eps = spec.epsilon
    m = [[(1 - eps) * rx[i] * ry[j] + (eps * spec.nu[i] if i == j else ZERO) for j in range(n)]
         for i in range(n)]
    return JointDist(P.space, tuple(map(tuple, m)))


@dataclass(frozen=True)
class SplitRepresentation:
    pair: Pair
    pbar: JointDist
    cam: CAM
    qbar: JointDist
    acceptance: AcceptanceCoupling
    cam_report: CamReport
    marginal_acceptance: MarginalAcceptanceReport
    regenerates: bool
    # cells with x' != x, y' != y, x' != y'
    scope: tuple[Pair, ...]
    identity_failures: tuple[Pair, ...]  # q p11 vs (p - eps nu)(p - eps nu) / (1 - eps)
    literal_identity_failures: tuple[Pair, ...]  # same without the 1 / (1 - eps) factor

    @property
    def ok(self) -> bool:
        return self.cam_report.ok and self.marginal_acceptance.ok and self.regenerates and not self.identity_failures


def split_two_step_representation(spec: SplitCouplingSpec, Q: FiniteKernel, a, P: FiniteKernel,
                                  pair: Pair, seed: int = 0) -> SplitRepresentation:
    """Proposal coupling and acceptance coupling generating the split coupling at ``pair``.

    The mechanism is the general constructive one; on in-scope cells the
    accept-both density is compared against the residual product.
    """
    x, y = pair
    if x == y or not (spec.in_small_set(x) and spec.in_small_set(y)):
        raise MinorizationError("the split representation needs x != y, both in the small set")
    if spec.epsilon == 1:
        raise MinorizationError("epsilon = 1 has no residual branch")
    pbar = split_pbar(spec, P, pair)
    cam, qbar = build_cam(pbar, compute_helpers(Q, P), Q, P, pair)
    B = extract_acceptance_coupling(cam, qbar)
    regen = regenerate_pbar(qbar, B, pair)
    eps, nu = spec.epsilon, spec.nu
    n = P.n
    scope, bad, bad_literal = [], [], []
    for i in range(n):
        for j in range(n):
            if i == x or j == y or i == j:
                continue
            scope.append((i, j))
            lhs = qbar[i, j] * B[i, j][0]
            prod = (P[x, i] - eps * nu[i]) * (P[y, j] - eps * nu[j])
            if lhs != prod / (1 - eps):
                bad.append((i, j))
            if lhs != prod:
                bad_literal.append((i, j))
    return SplitRepresentation(
        pair, pbar, cam, qbar, B,
        verify_cam(cam, qbar, pbar, Q, pair, seed=seed),
        check_theorem1_conditions(qbar, B, Q, a, pair),
        regen == pbar, tuple(scope), tuple(bad), tuple(bad_literal),
    )


@dataclass
class SplitStepBatch:
    X: np.ndarray
    Y: np.ndarray
    coin: np.ndarray  # split branch taken with a shared nu draw
    split: np.ndarray  # both chains were in the small set and apart


def _cdf(d) -> np.ndarray:
    c = np.cumsum([float(v) for v in d])
    c[-1] = 1.0
    return c


@dataclass
class FiniteSplitSampler:
    problem: MhProblem
    spec: SplitCouplingSpec

    def __post_init__(self):
        self.spec.verify(self.problem.P)
        P = self.problem.P
        self._P = np.array([_cdf(P[i]) for i in range(P.n)])
        self._nu = _cdf(self.spec.nu)
        self._res = (np.array([_cdf(self.spec.residual(P, i)) if i in self.spec.small_set else _cdf(P[i])
                               for i in range(P.n)]) if self.spec.epsilon < 1 else self._P)
        self._C = np.array([i in self.spec.small_set for i in range(P.n)])

    @staticmethod
    def _draw(cdfs: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.minimum((u[:, None] >= cdfs).sum(axis=1), cdfs.shape[1] - 1)

    def step_batch(self, X: np.ndarray, Y: np.ndarray, rng: np.random.Generator) -> SplitStepBatch:
        R = X.shape[0]
        n = self.problem.n
        ux, uy, uc, un = rng.random(R), rng.random(R), rng.random(R), rng.random(R)
        met = X == Y
        split = ~met & self._C[X] & self._C[Y]
        coin = split & (uc < float(self.spec.epsilon))
        shared = np.minimum((un[:, None] >= self._nu).sum(axis=1), n - 1)
        crn = self.spec.outside == "crn"
        Xn = np.where(split, self._draw(self._res[X], ux), self._draw(self._P[X], ux))
        Yn_out = self._draw(self._P[Y], ux if crn else uy)
        Yn = np.where(split, self._draw(self._res[Y], uy), Yn_out)
        Xn = np.where(coin, shared, Xn)
        Yn = np.where(coin, shared, Yn)
        Yn = np.where(met, Xn, Yn)
        return SplitStepBatch(Xn, Yn, coin, split)


# -- 1-D random walk on a standard normal target ------------------------------

@dataclass(frozen=True)
class ContinuousSplit:
    """Minorization of the RWM kernel for ``N(0, 1)`` on ``C = [-c, c]``.

    ``g(x') = phi_sigma(|x'| + c) * exp(-x'^2 / 2)`` is below the density part of
    ``P(x, .)`` for every ``x`` in ``C``; ``epsilon = int g`` and ``nu = g / epsilon``.
    """

    sigma: float
    c: float
    epsilon: float = field(init=False)

    def __post_init__(self):
        eps, _ = integrate.quad(self.g, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
        object.__setattr__(self, "epsilon", float(eps))

    def g(self, z):
        z = np.asarray(z, dtype=float)
        return stats.norm.pdf(np.abs(z) + self.c, scale=self.sigma) * np.exp(-0.5 * z * z)

    def nu_density(self, z):
        return self.g(z) / self.epsilon

    def in_small_set(self, x) -> np.ndarray:
        return np.abs(np.asarray(x)) <= self.c

    def p_density(self, x, z):
        """Density part of ``P(x, .)``."""
        x, z = np.asarray(x, float), np.asarray(z, float)
        return stats.norm.pdf(z - x, scale=self.sigma) * np.minimum(1.0, np.exp(0.5 * (x * x - z * z)))

    def check_minorization(self, grid_points: int = 201, span: float = 8.0) -> float:
        """Smallest ``p(x, z) - g(z)`` over a grid of ``x`` in ``C`` and ``z``."""
        xs = np.linspace(-self.c, self.c, grid_points)
        zs = np.linspace(-span, span, 4 * grid_points)
        diff = self.p_density(xs[:, None], zs[None, :]) - self.g(zs)[None, :]
        return float(diff.min())

    def sample_nu(self, size: int, rng: np.random.Generator) -> np.ndarray:
        # envelope sqrt(2 pi) phi_sigma(c) phi(z); acceptance phi_sigma(|z|+c) / phi_sigma(c)
        out = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            z = rng.standard_normal(todo.size)
            keep = np.log(rng.random(todo.size)) <= (
                stats.norm.logpdf(np.abs(z) + self.c, scale=self.sigma) - stats.norm.logpdf(self.c, scale=self.sigma))
            out[todo[keep]] = z[keep]
            todo = todo[~keep]
        return out

    def mh_step(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        Z = X + self.sigma * rng.standard_normal(X.shape)
        acc = np.log(rng.random(X.shape)) <= np.minimum(0.0, 0.5 * (X * X - Z * Z))
        return np.where(acc, Z, X)

    def sample_residual(self, X: np.ndarray, rng: np.random.Generator, max_rounds: int = 10_000) -> np.ndarray:
        """Rejection from ``P(x, .)``: the stay-put atom is always kept, a move to
        ``z`` is kept with probability ``1 - g(z) / p(x, z)``."""
        X = np.asarray(X, float)
        out = np.empty_like(X)
        todo = np.arange(X.size)
        for _ in range(max_rounds):
            if not todo.size:
                return out
            Z = self.mh_step(X[todo], rng)
            stay = Z == X[todo]
            ratio = np.where(stay, 0.0, self.g(Z) / np.where(stay, 1.0, self.p_density(X[todo], Z)))
            if np.any(ratio > 1 + 1e-12):
                bad = todo[np.argmax(ratio)]
                raise MinorizationError(f"negative residual density at x={X[bad]:.6g}")
            keep = rng.random(todo.size) >= ratio
            out[todo[keep]] = Z[keep]
            todo = todo[~keep]
        raise MinorizationError("residual sampler did not terminate")

    def step_batch(self, X: np.ndarray, Y: np.ndarray, rng: np.random.Generator) -> SplitStepBatch:
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        met = X == Y
        split = ~met & self.in_small_set(X) & self.in_small_set(Y)
        coin = split & (rng.random(X.shape) < self.epsilon)
        Xn, Yn = self.mh_step(X, rng), self.mh_step(Y, rng)
        res = split & ~coin
        if np.any(res):
            Xn[res] = self.sample_residual(X[res], rng)
            Yn[res] = self.sample_residual(Y[res], rng)
        if np.any(coin):
            shared = self.sample_nu(int(coin.sum()), rng)
            Xn[coin] = shared
            Yn[coin] = shared
        Yn = np.where(met, Xn, Yn)
        return SplitStepBatch(Xn, Yn, coin, split)


def split_coupling_step(spec, state_pair, rng: np.random.Generator, problem: Optional[MhProblem] = None) -> dict:
    """Single split step from ``(x, y)`` for either a finite spec (needs ``problem``) or a
    :class:`ContinuousSplit`."""
    x, y = state_pair
    if isinstance(spec, ContinuousSplit):
        s = spec.step_batch(np.array([x], float), np.array([y], float), rng)
        return {"x": float(x), "y": float(y), "X": float(s.X[0]), "Y": float(s.Y[0]),
                "coin": bool(s.coin[0]), "split": bool(s.split[0])}
    if problem is None:
        raise ValueError("a finite split spec needs the MH problem")
    s = FiniteSplitSampler(problem, spec).step_batch(np.array([x]), np.array([y]), rng)
    return {"x": int(x), "y": int(y), "X": int(s.X[0]), "Y": int(s.Y[0]),
            "coin": bool(s.coin[0]), "split": bool(s.split[0])}
