"""Maximal kernel couplings: the six-condition checker, construction and the
impossibility certificate for generating some maximal couplings from maximal
proposal couplings."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from .decomposition import (
    AcceptanceCoupling, Pair, check_theorem1_conditions, regenerate_pbar,
)
from .kernels import AcceptanceMatrix, FiniteKernel, MhProblem
from .measure import (
    ZERO, JointDist, MaximalityVerdict, ResidualStrategy, build_maximal_coupling, hahn_jordan,
    is_maximal_coupling, tv_distance,
)


class RouteDisagreement(AssertionError):
    """The pointwise conditions and the Hahn test gave different verdicts."""


def hahn_set_for_kernels(P: FiniteKernel, x: int, y: int) -> frozenset[int]:
    return hahn_jordan(P[x], P[y]).positive_set


@dataclass(frozen=True)
class Violation:
    condition: int
    proposal: Pair
    mass: Fraction  # Qbar(x', y') * P(outcome | x', y')


@dataclass
class MaximalityReport:
    pair: Pair
    S_xy: frozenset[int]
    violations: list[Violation] = field(default_factory=list)
    hahn_verdict: Optional[MaximalityVerdict] = None

    def condition_ok(self, k: int) -> bool:
        """Conditions 1-2 are prerequisites and always report true here."""
        return all(v.condition != k for v in self.violations)

    @property
    def condition_results(self) -> tuple[bool, ...]:
        return tuple(self.condition_ok(k) for k in range(1, 7))

    @property
    def verdict(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.verdict


def check_max_conditions(Qbar: JointDist, B: AcceptanceCoupling, Q: FiniteKernel, a: AcceptanceMatrix,
                         P: FiniteKernel, pair: Pair, cross_check: bool = True) -> MaximalityReport:
    """Evaluate the four pointwise acceptance restrictions on the support of ``Qbar``.

    Each forbids one outcome whenever it would move the pair to an off-diagonal
    destination with ``X`` outside ``S_xy`` or ``Y`` inside ``S_xy``. With
    ``cross_check`` the verdict is compared with the Hahn test on the
    regenerated coupling and a disagreement raises :class:`RouteDisagreement`.
    """
    rep1 = check_theorem1_conditions(Qbar, B, Q, a, pair)
    if not rep1:
        raise ValueError("marginal acceptance conditions fail: " + "; ".join(rep1.violations))
    x, y = pair
    S = hahn_set_for_kernels(P, x, y)
    report = MaximalityReport(pair, S)

    def forbidden(dest_x: int, dest_y: int) -> bool:
        return dest_x != dest_y and (dest_x not in S or dest_y in S)

    for (i, j), q in Qbar.items():
        p = B[i, j]
        # outcome k moves the pair to dests[k]
        dests = ((i, j), (i, y), (x, j), (x, y))
        for k, (dx, dy) in enumerate(dests):
            if p[k] > 0 and forbidden(dx, dy):
                report.violations.append(Violation(3 + k, (i, j), q * p[k]))
    if cross_check:
        report.hahn_verdict = is_maximal_coupling(regenerate_pbar(Qbar, B, pair), P[x], P[y])
        if report.hahn_verdict.maximal != report.verdict:
            raise RouteDisagreement(f"conditions say {report.verdict}, Hahn test says {report.hahn_verdict.maximal}")
    return report


def build_maximal_kernel_coupling(P: FiniteKernel, residual: ResidualStrategy = "product",
                                  pairs=None) -> dict[Pair, JointDist]:
    n = P.n
    pairs = pairs if pairs is not None else [(x, y) for x in range(n) for y in range(n)]
    return {(x, y): build_maximal_coupling(P[x], P[y], residual) for x, y in pairs}


def max_diagonal_mass(P: FiniteKernel, x: int, y: int) -> Fraction:
    return 1 - tv_distance(P[x], P[y])


# -- the impossibility example ------------------------------------------------

@dataclass(frozen=True)
class NonmaxCertificate:
    pair: Pair
    target_cell: Pair
    required_mass: Fraction
    available_mass: Fraction
    max_qbar: JointDist
    max_pbar: JointDist
    qbar_unique: bool
    alt_qbar: JointDist
    alt_qbar_maximal: bool
    alt_regenerates: bool
    alt_conditions_hold: bool

    @property
    def impossible(self) -> bool:
        return self.required_mass > self.available_mass

    @property
    def ok(self) -> bool:
        return (self.impossible and self.qbar_unique and self.alt_regenerates
                and not self.alt_qbar_maximal and self.alt_conditions_hold)


def maximal_class_is_singleton(mu, nu) -> bool:
    """Maximal couplings share the meet on the diagonal; the residual class is a
    single point iff one of the residuals is a point mass (or TV is zero)."""
    h = hahn_jordan(mu, nu)
    if h.upper.total == 0:
        return True
    return len(h.upper.support()) == 1 or len(h.lower.support()) == 1


def certify_nonmax_example(problem: Optional[MhProblem] = None) -> NonmaxCertificate:
    from . import fixtures

    problem = problem or fixtures.nonmax_problem()
    Q, P, a = problem.Q, problem.P, problem.a
    x, y = fixtures.NONMAX_PAIR
    space = Q.space
    max_qbar = build_maximal_coupling(Q[x], Q[y])
    max_pbar = build_maximal_coupling(P[x], P[y])
    unique = maximal_class_is_singleton(Q[x], Q[y]) and maximal_class_is_singleton(P[x], P[y])

    # the only way to reach (X,Y)=(2,3) from (1,2) is to propose and accept (2,3)
    cell = (space.index("2"), space.index("3"))
    required = max_pbar[cell]
    available = max_qbar[cell]

    alt = fixtures.nonmax_alt_qbar()
    i1, i2, i3 = (space.index(s) for s in "123")

    def rule(i, j):
        if (i, j) == (i2, i3):
            return (1, 0, 0, 0)  # both accepted
        if (i, j) == (i3, i1):
            return (0, 0, 1, 0)  # x' = 3 rejected, y' = 1 accepted
        return (1, 0, 0, 0)

    B = AcceptanceCoupling.from_function(space, (x, y), rule)
    regen = regenerate_pbar(alt, B, (x, y))
    conds = check_max_conditions(alt, B, Q, a, P, (x, y), cross_check=True)
    return NonmaxCertificate(
        pair=(x, y), target_cell=cell, required_mass=required, available_mass=available,
        max_qbar=max_qbar, max_pbar=max_pbar, qbar_unique=unique, alt_qbar=alt,
        alt_qbar_maximal=is_maximal_coupling(alt, Q[x], Q[y]).maximal,
        alt_regenerates=regen == max_pbar, alt_conditions_hold=conds.verdict,
    )
