"""Two-step decomposition of a kernel coupling into proposal and acceptance couplings.

Given a coupling ``Pbar`` of an MH-like kernel ``P`` at a pair ``(x, y)``,
:func:`build_cam` produces a coupled acceptance mechanism ``Phi`` and a proposal
coupling ``Qbar``; :func:`extract_acceptance_coupling` turns ``Phi`` into
conditional probabilities of the four accept/reject outcomes; and
:func:`regenerate_pbar` pushes ``Qbar`` and those probabilities forward again.
All arithmetic is exact.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .kernels import AcceptanceMatrix, FiniteKernel, MhProblem
from .measure import (
    ONE, ZERO, Dist, JointDist, StateSpace, SubDist, as_rational, check_coupling,
    random_frechet_element,
)

Pair = tuple[int, int]
# outcome order used everywhere: (b_x, b_y) = (1,1), (1,0), (0,1), (0,0)
OUTCOMES: tuple[tuple[int, int], ...] = ((1, 1), (1, 0), (0, 1), (0, 0))
ACCEPT_ALL = (ONE, ZERO, ZERO, ZERO)
EXHAUSTIVE_LIMIT = 12
SAMPLED_SUBSETS = 1024


class DecompositionError(RuntimeError):
    """An intermediate quantity went negative or a post-check failed."""


def _mat(n: int) -> list[list[Fraction]]:
    return [[ZERO] * n for _ in range(n)]


def _joint(space: StateSpace, m) -> JointDist:
    return JointDist(space, tuple(tuple(row) for row in m))


@dataclass(frozen=True)
class Helpers:
    alpha0: tuple[SubDist, ...]
    alpha1: tuple[SubDist, ...]
    beta: tuple[Fraction, ...]
    mu: tuple[Dist, ...]


def compute_helpers(Q: FiniteKernel, P: FiniteKernel) -> Helpers:
    """Rejected/accepted proposal masses, stay-put acceptance ratio and rejected-proposal law."""
    if Q.space != P.space:
        raise ValueError("Q and P live on different spaces")
    n, space = Q.n, Q.space
    a0, a1, beta, mu = [], [], [], []
    for x in range(n):
        row0 = []
        for i in range(n):
            if i == x:
                row0.append(ZERO)
                continue
            d = Q[x, i] - P[x, i]
            if d < 0:
                raise ValueError(f"P not weakly dominated by Q at ({space.label(x)},{space.label(i)})")
            row0.append(d)
        row1 = [Q[x, i] if i == x else P[x, i] for i in range(n)]
        a0.append(SubDist(space, tuple(row0)))
        a1.append(SubDist(space, tuple(row1)))
        stay = P[x, x]
        beta.append(Q[x, x] / stay if stay > 0 else ONE)
        if beta[-1] > 1:
            raise ValueError(f"Q(x,{{x}}) exceeds P(x,{{x}}) at {space.label(x)}")
        tot = sum(row0, ZERO)
        mu.append(Dist(space, tuple(v / tot for v in row0)) if tot > 0 else Dist.point_mass(space, x))
    return Helpers(tuple(a0), tuple(a1), tuple(beta), tuple(mu))


@dataclass(frozen=True)
class CAM:
    """Coupled acceptance mechanism at one current pair."""

    pair: Pair
    phi11: JointDist
    phi10: JointDist
    phi01: JointDist
    phi00: JointDist

    @property
    def components(self) -> tuple[JointDist, JointDist, JointDist, JointDist]:
        return (self.phi11, self.phi10, self.phi01, self.phi00)

    def total(self) -> JointDist:
        out = self.phi11
        for c in self.components[1:]:
            out = out + c
        return out


def build_cam(Pbar: JointDist, helpers: Helpers, Q: FiniteKernel, P: FiniteKernel, pair: Pair,
              check: bool = True) -> tuple[CAM, JointDist]:
    """Construct ``(Phi, Qbar)`` from a kernel coupling at ``pair``.

    ``Phi11`` is ``Pbar`` reweighted by ``beta`` on the stay-put rows/columns;
    the other three components are products of the leftover accepted mass with
    the rejected-proposal laws ``mu``.
    """
    x, y = pair
    n, space = Pbar.n, Pbar.space
    if check:
        rep = check_coupling(Pbar, P[x], P[y])
        if not rep:
            raise ValueError("Pbar is not a coupling of P(x,.) and P(y,.): " + "; ".join(rep.violations))
    bx, by = helpers.beta[x], helpers.beta[y]
    phi11 = _mat(n)
    for i in range(n):
        for j in range(n):
            w = Pbar[i, j]
            if i == x:
                w *= bx
            if j == y:
                w *= by
            phi11[i][j] = w
    psi10 = [helpers.alpha1[x][i] - sum(phi11[i], ZERO) for i in range(n)]
    psi01 = [helpers.alpha1[y][j] - sum((phi11[i][j] for i in range(n)), ZERO) for j in range(n)]
    psi00 = 1 - helpers.alpha1[x].total - helpers.alpha1[y].total + sum(map(sum, phi11), ZERO)
    for name, vals in (("Psi10", psi10), ("Psi01", psi01), ("Psi00", [psi00])):
        for v in vals:
            if v < 0:
                raise DecompositionError(f"{name} has a negative entry {v}; inputs are inconsistent")
    mux, muy = helpers.mu[x], helpers.mu[y]
    phi10 = [[psi10[i] * muy[j] for j in range(n)] for i in range(n)]
    phi01 = [[mux[i] * psi01[j] for j in range(n)] for i in range(n)]
    phi00 = [[psi00 * mux[i] * muy[j] for j in range(n)] for i in range(n)]
    cam = CAM(pair, *(_joint(space, m) for m in (phi11, phi10, phi01, phi00)))
    qbar = cam.total()
    if check:
        rep = check_coupling(qbar, Q[x], Q[y])
        if not rep:
            raise DecompositionError("Qbar fails its marginal check: " + "; ".join(rep.violations))
    return cam, qbar


# -- verification ------------------------------------------------------------

@dataclass
class CamReport:
    condition1: list[str] = field(default_factory=list)
    condition2: list[str] = field(default_factory=list)
    condition3: list[str] = field(default_factory=list)
    subsets_checked: int = 0
    exhaustive: bool = True

    @property
    def ok(self) -> bool:
        return not (self.condition1 or self.condition2 or self.condition3)

    def __bool__(self) -> bool:
        return self.ok

    def as_dict(self) -> dict:
        return {"ok": self.ok, "condition1": self.condition1, "condition2": self.condition2,
                "condition3": self.condition3, "subsets_checked": self.subsets_checked,
                "exhaustive": self.exhaustive}


def _subsets(items: list[int], rng: Optional[random.Random]):
    if rng is None:
        for r in range(len(items) + 1):
            yield from itertools.combinations(items, r)
    else:
        for _ in range(SAMPLED_SUBSETS):
            yield tuple(i for i in items if rng.random() < 0.5)


def verify_cam(cam: CAM, Qbar: JointDist, Pbar: JointDist, Q: FiniteKernel, pair: Pair,
               seed: int = 0, exhaustive: bool = False) -> CamReport:
    """Check the three defining conditions of a coupled acceptance mechanism.

    Condition 2 is checked in its four-case rectangle form over every
    ``A_x`` not containing ``x``. For each ``A_x`` the family of ``A_y`` is
    covered exactly by checking that the positive and negative parts of the
    row-aggregated residual both vanish; above ``EXHAUSTIVE_LIMIT`` states the
    ``A_x`` are sampled unless ``exhaustive`` is set.
    """
    x, y = pair
    n = Qbar.n
    lab = Qbar.space.labels
    f11, f10, f01, f00 = (c.weights for c in cam.components)
    rep = CamReport()
    for i in range(n):
        for j in range(n):
            tot = f11[i][j] + f10[i][j] + f01[i][j] + f00[i][j]
            if tot != Qbar[i, j]:
                rep.condition1.append(f"sum of Phi at ({lab[i]},{lab[j]}) is {tot}, Qbar has {Qbar[i, j]}")

    rest_x = [i for i in range(n) if i != x]
    rest_y = [j for j in range(n) if j != y]
    f10_row = [sum(f10[i], ZERO) for i in range(n)]
    f01_col = [sum((f01[i][j] for i in range(n)), ZERO) for j in range(n)]
    f00_tot = sum(map(sum, f00), ZERO)
    rng = None if exhaustive or n <= EXHAUSTIVE_LIMIT else random.Random(seed)
    rep.exhaustive = rng is None

    for Ax in _subsets(rest_x, rng):
        rep.subsets_checked += 1
        # case 1: Pbar(Ax x Ay) = Phi11(Ax x Ay) for all Ay
        resid = [sum((Pbar[i, j] - f11[i][j] for i in Ax), ZERO) for j in rest_y]
        pos = sum((v for v in resid if v > 0), ZERO)
        neg = sum((v for v in resid if v < 0), ZERO)
        if pos or neg:
            rep.condition2.append(f"case 1 fails for A_x={{{','.join(lab[i] for i in Ax)}}}: "
                                  f"max/min residual {pos}/{neg}")
        # case 2: Pbar(Ax x {y}) = Phi11(Ax x {y}) + Phi10(Ax x X)
        lhs = sum((Pbar[i, y] for i in Ax), ZERO)
        rhs = sum((f11[i][y] + f10_row[i] for i in Ax), ZERO)
        if lhs != rhs:
            rep.condition2.append(f"case 2 fails for A_x={{{','.join(lab[i] for i in Ax)}}}: {lhs} != {rhs}")
    for Ay in _subsets(rest_y, rng):
        rep.subsets_checked += 1
        # case 3: Pbar({x} x Ay) = Phi11({x} x Ay) + Phi01(X x Ay)
        lhs = sum((Pbar[x, j] for j in Ay), ZERO)
        rhs = sum((f11[x][j] + f01_col[j] for j in Ay), ZERO)
        if lhs != rhs:
            rep.condition2.append(f"case 3 fails for A_y={{{','.join(lab[j] for j in Ay)}}}: {lhs} != {rhs}")
    # case 4: the stay-put point
    lhs = Pbar[x, y]
    rhs = f11[x][y] + f10_row[x] + f01_col[y] + f00_tot
    if lhs != rhs:
        rep.condition2.append(f"case 4 fails at ({lab[x]},{lab[y]}): {lhs} != {rhs}")

    got_x = sum(f11[x], ZERO) + f10_row[x]
    got_y = sum((f11[i][y] for i in range(n)), ZERO) + f01_col[y]
    if got_x != Q[x, x]:
        rep.condition3.append(f"(Phi11+Phi10)({{x}} x X) = {got_x} but Q(x,{{x}}) = {Q[x, x]}")
    if got_y != Q[y, y]:
        rep.condition3.append(f"(Phi11+Phi01)(X x {{y}}) = {got_y} but Q(y,{{y}}) = {Q[y, y]}")
    return rep


# -- acceptance indicator coupling -------------------------------------------

@dataclass(frozen=True)
class AcceptanceCoupling:
    """Conditional law of ``(b_x, b_y)`` given the proposal pair, at one current pair.

    ``table[i][j]`` is ``(p11, p10, p01, p00)`` for proposal ``(s_i, s_j)``.
    """

    space: StateSpace
    pair: Pair
    table: tuple[tuple[tuple[Fraction, Fraction, Fraction, Fraction], ...], ...]
    off_support: frozenset[Pair] = frozenset()

    def __post_init__(self):
        n = len(self.space)
        tab = tuple(tuple(tuple(as_rational(v) for v in cell) for cell in row) for row in self.table)
        if len(tab) != n or any(len(r) != n for r in tab):
            raise ValueError(f"acceptance table must be {n}x{n}")
        for i, row in enumerate(tab):
            for j, cell in enumerate(row):
                if len(cell) != 4 or any(v < 0 for v in cell) or sum(cell, ZERO) != 1:
                    raise ValueError(f"bad acceptance vector {cell} at ({i},{j})")
        object.__setattr__(self, "table", tab)

    @classmethod
    def constant(cls, space: StateSpace, pair: Pair, vec=ACCEPT_ALL) -> "AcceptanceCoupling":
        n = len(space)
        return cls(space, pair, tuple(tuple(tuple(vec) for _ in range(n)) for _ in range(n)))

    @classmethod
    def from_function(cls, space: StateSpace, pair: Pair, fn) -> "AcceptanceCoupling":
        n = len(space)
        return cls(space, pair, tuple(tuple(tuple(fn(i, j)) for j in range(n)) for i in range(n)))

    def __getitem__(self, ij: Pair):
        i, j = ij
        return self.table[i][j]

    def component(self, k: int) -> list[list[Fraction]]:
        """The ``k``-th outcome probability as a matrix (0 -> p11, ..., 3 -> p00)."""
        return [[cell[k] for cell in row] for row in self.table]

    def p_accept_x(self, i: int, j: int) -> Fraction:
        c = self.table[i][j]
        return c[0] + c[1]

    def p_accept_y(self, i: int, j: int) -> Fraction:
        c = self.table[i][j]
        return c[0] + c[2]

    def with_entry(self, ij: Pair, vec) -> "AcceptanceCoupling":
        rows = [list(r) for r in self.table]
        rows[ij[0]][ij[1]] = tuple(vec)
        return AcceptanceCoupling(self.space, self.pair, tuple(map(tuple, rows)), self.off_support)


def extract_acceptance_coupling(cam: CAM, Qbar: JointDist) -> AcceptanceCoupling:
    """Radon-Nikodym derivatives ``dPhi_ij / dQbar``; off-support cells get ``(1,0,0,0)``."""
    n = Qbar.n
    rows, off = [], set()
    for i in range(n):
        row = []
        for j in range(n):
            q = Qbar[i, j]
            if q == 0:
                off.add((i, j))
                row.append(ACCEPT_ALL)
            else:
                row.append(tuple(c[i, j] / q for c in cam.components))
        rows.append(tuple(row))
    return AcceptanceCoupling(Qbar.space, cam.pair, tuple(rows), frozenset(off))


def regenerate_pbar(Qbar: JointDist, B: AcceptanceCoupling, pair: Pair) -> JointDist:
    """Law of ``(b_x x' + (1-b_x) x, b_y y' + (1-b_y) y)``."""
    x, y = pair
    n = Qbar.n
    out = _mat(n)
    for (i, j), q in Qbar.items():
        p11, p10, p01, p00 = B[i, j]
        out[i][j] += q * p11
        out[i][y] += q * p10
        out[x][j] += q * p01
        out[x][y] += q * p00
    return _joint(Qbar.space, out)


def cam_from_generation(Qbar: JointDist, B: AcceptanceCoupling, pair: Pair) -> CAM:
    """``Phi_ij(A) = P(proposal in A, b = (i,j))``."""
    n, space = Qbar.n, Qbar.space
    comps = [_mat(n) for _ in range(4)]
    for (i, j), q in Qbar.items():
        for k, p in enumerate(B[i, j]):
            comps[k][i][j] = q * p
    return CAM(pair, *(_joint(space, m) for m in comps))


@dataclass
class MarginalAcceptanceReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def check_theorem1_conditions(Qbar: JointDist, B: AcceptanceCoupling, Q: FiniteKernel,
                              a: AcceptanceMatrix, pair: Pair) -> MarginalAcceptanceReport:
    """Marginal acceptance rates: ``P(b_x = 1 | x, y, x') = a(x, x')`` and the same for ``y``."""
    x, y = pair
    n = Qbar.n
    lab = Qbar.space.labels
    rep = MarginalAcceptanceReport()
    if not check_coupling(Qbar, Q[x], Q[y]):
        rep.violations.append("Qbar is not a coupling of Q(x,.) and Q(y,.)")
        return rep
    for i in range(n):
        if Q[x, i] == 0:
            continue
        got = sum((Qbar[i, j] * B.p_accept_x(i, j) for j in range(n)), ZERO)
        want = a[x, i] * Q[x, i]
        if got != want:
            rep.violations.append(f"x-acceptance at x'={lab[i]}: {got} != a(x,x')Q(x,x') = {want}")
    for j in range(n):
        if Q[y, j] == 0:
            continue
        got = sum((Qbar[i, j] * B.p_accept_y(i, j) for i in range(n)), ZERO)
        want = a[y, j] * Q[y, j]
        if got != want:
            rep.violations.append(f"y-acceptance at y'={lab[j]}: {got} != a(y,y')Q(y,y') = {want}")
    return rep


# -- one-call pipeline -------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    pair: Pair
    pbar: JointDist
    helpers: Helpers
    cam: CAM
    qbar: JointDist
    acceptance: AcceptanceCoupling
    regenerated: JointDist
    cam_report: CamReport
    marginal_acceptance: MarginalAcceptanceReport

    @property
    def round_trip_exact(self) -> bool:
        return self.regenerated == self.pbar

    @property
    def ok(self) -> bool:
        return self.round_trip_exact and self.cam_report.ok and self.marginal_acceptance.ok


def decompose(problem: MhProblem, Pbar: JointDist, pair: Pair, helpers: Optional[Helpers] = None,
              seed: int = 0, exhaustive: bool = False) -> Decomposition:
    helpers = helpers or compute_helpers(problem.Q, problem.P)
    cam, qbar = build_cam(Pbar, helpers, problem.Q, problem.P, pair)
    B = extract_acceptance_coupling(cam, qbar)
    regen = regenerate_pbar(qbar, B, pair)
    return Decomposition(pair, Pbar, helpers, cam, qbar, B, regen,
                         verify_cam(cam, qbar, Pbar, problem.Q, pair, seed=seed, exhaustive=exhaustive),
                         check_theorem1_conditions(qbar, B, problem.Q, problem.a, pair))


# -- test oracle -------------------------------------------------------------

def sample_frechet_coupling(P: FiniteKernel, pair: Pair, seed: int, rounds: int = 3) -> JointDist:
    """Random element of the Frechet class of ``(P(x,.), P(y,.))``; ``rounds=0`` gives the product."""
    x, y = pair
    rng = random.Random(seed)
    g = random_frechet_element(list(P[x]), list(P[y]), rng, rounds=rounds)
    return _joint(P.space, g)


# -- non-lazy matrix form ----------------------------------------------------

@dataclass(frozen=True)
class DiscreteSpecialization:
    M11: JointDist
    M10: JointDist
    M01: JointDist
    M00: JointDist
    mu_x: Dist
    mu_y: Dist

    @property
    def MQ(self) -> JointDist:
        return self.M11 + self.M10 + self.M01 + self.M00

    @property
    def matrices(self):
        return (self.M11, self.M10, self.M01, self.M00)


def _mu_nonlazy(Q: FiniteKernel, P: FiniteKernel, x: int) -> Dist:
    r = P[x, x]
    n = Q.n
    if r == 0:
        return Dist.point_mass(Q.space, x)
    return Dist(Q.space, tuple((Q[x, i] - (P[x, i] if i != x else ZERO)) / r for i in range(n)))


def discrete_specialization(Pbar: JointDist, Q: FiniteKernel, P: FiniteKernel, pair: Pair,
                            cross_check: bool = True) -> DiscreteSpecialization:
    """Matrix form of the decomposition for proposals that never stay put.

    With ``cross_check`` the matrices are compared entrywise against
    :func:`build_cam`.
    """
    if Q.is_lazy():
        raise ValueError("proposal kernel has self-proposals; use build_cam for lazy proposals")
    x, y = pair
    n, space = Pbar.n, Pbar.space
    mux, muy = _mu_nonlazy(Q, P, x), _mu_nonlazy(Q, P, y)
    stay = Pbar[x, y]
    # a non-lazy proposal lands on x (or y) only through a rejection, so the whole
    # row x and column y leave M11, not just the (x, y) corner
    M11 = [[Pbar[i, j] if i != x and j != y else ZERO for j in range(n)] for i in range(n)]
    M10 = [[Pbar[i, y] * muy[j] if i != x else ZERO for j in range(n)] for i in range(n)]
    M01 = [[mux[i] * Pbar[x, j] if j != y else ZERO for j in range(n)] for i in range(n)]
    M00 = [[stay * mux[i] * muy[j] for j in range(n)] for i in range(n)]
    out = DiscreteSpecialization(*(_joint(space, m) for m in (M11, M10, M01, M00)), mux, muy)
    if cross_check:
        cam, _ = build_cam(Pbar, compute_helpers(Q, P), Q, P, pair)
        for name, got, want in zip(("M11", "M10", "M01", "M00"), out.matrices, cam.components):
            if got != want:
                raise DecompositionError(f"{name} disagrees with the general construction")
    return out


# -- resampling rejected proposals -------------------------------------------

def algorithm1_resampled_qbar(Qm: JointDist, Bm: AcceptanceCoupling, pair: Pair,
                              problem: Optional[MhProblem] = None) -> tuple[JointDist, AcceptanceCoupling]:
    """Exact output law of the rejected-proposal redraw procedure.

    Given the outcome ``(i, j)``, accepted coordinates keep their joint draw and
    each rejected coordinate is redrawn independently from its conditional law
    given the same outcome. Outcomes of probability zero contribute nothing.
    """
    if problem is not None:
        rep = check_theorem1_conditions(Qm, Bm, problem.Q, problem.a, pair)
        if not rep:
            raise ValueError("input pair does not satisfy the marginal acceptance conditions: "
                             + "; ".join(rep.violations))
    n, space = Qm.n, Qm.space
    phis = cam_from_generation(Qm, Bm, pair).components
    out = []
    for (bx, by), phi in zip(OUTCOMES, phis):
        mass = phi.total
        if mass == 0:
            out.append(_mat(n))
            continue
        if bx and by:
            out.append(phi.matrix())
            continue
        # a kept coordinate has the outcome-conditional marginal, and so does a
        # redrawn one, and the redraw is independent of the kept coordinate
        xm, ym = phi.x_marginal(), phi.y_marginal()
        out.append([[xm[i] * ym[j] / mass for j in range(n)] for i in range(n)])
    cam = CAM(pair, *(_joint(space, m) for m in out))
    qbar = cam.total()
    return qbar, extract_acceptance_coupling(cam, qbar)
