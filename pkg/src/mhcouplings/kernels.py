"""Finite MH-like kernels built from a proposal kernel and an acceptance rate."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from .measure import (
    ONE, ZERO, CouplingReport, Dist, JointDist, StateSpace, SpaceMismatchError,
    as_rational, check_coupling,
)


@dataclass(frozen=True)
class FiniteKernel:
    space: StateSpace
    rows: tuple[Dist, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.space):
            raise ValueError(f"kernel needs {len(self.space)} rows, got {len(self.rows)}")
        for r in self.rows:
            if r.space != self.space:
                raise SpaceMismatchError("kernel row lives on a different state space")

    @classmethod
    def from_rows(cls, space: StateSpace, rows: Sequence[Sequence]) -> "FiniteKernel":
        return cls(space, tuple(Dist(space, tuple(r)) for r in rows))

    @property
    def n(self) -> int:
        return len(self.space)

    def __getitem__(self, ij):
        if isinstance(ij, tuple):
            i, j = ij
            return self.rows[i][j]
        return self.rows[ij]

    def matrix(self) -> list[list[Fraction]]:
        return [list(r) for r in self.rows]

    def is_lazy(self) -> bool:
        return any(self.rows[i][i] > 0 for i in range(self.n))

    def stationary_check(self, pi: Dist) -> bool:
        """True iff ``pi P = pi`` exactly."""
        return all(sum((pi[i] * self.rows[i][j] for i in range(self.n)), ZERO) == pi[j]
                   for j in range(self.n))


@dataclass(frozen=True)
class AcceptanceMatrix:
    space: StateSpace
    a: tuple[tuple[Fraction, ...], ...]
    # pairs whose proposal probability is zero; the stored value is arbitrary
    unreachable: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        n = len(self.space)
        a = tuple(tuple(as_rational(v) for v in row) for row in self.a)
        if len(a) != n or any(len(row) != n for row in a):
            raise ValueError(f"acceptance matrix must be {n}x{n}")
        for i in range(n):
            if a[i][i] != 1:
                raise ValueError(f"a(x,x) must be 1, got {a[i][i]} at {self.space.label(i)}")
            for j in range(n):
                if not 0 <= a[i][j] <= 1:
                    raise ValueError(f"acceptance rate {a[i][j]} outside [0,1]")
        object.__setattr__(self, "a", a)

    @classmethod
    def ones(cls, space: StateSpace) -> "AcceptanceMatrix":
        n = len(space)
        return cls(space, tuple((ONE,) * n for _ in range(n)))

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.a[i][j]


def _ratio_rule(pi: Dist, Q: FiniteKernel, rule) -> AcceptanceMatrix:
    if pi.space != Q.space:
        raise SpaceMismatchError("target and proposal live on different spaces")
    n = Q.n
    for i in range(n):
        if pi[i] <= 0:
            raise ValueError(f"target has zero mass at state {Q.space.label(i)}")
    a = [[ONE] * n for _ in range(n)]
    unreachable = set()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if Q[i, j] == 0:
                unreachable.add((i, j))
                continue
            a[i][j] = rule(pi[i] * Q[i, j], pi[j] * Q[j, i])
    return AcceptanceMatrix(Q.space, tuple(map(tuple, a)), frozenset(unreachable))


def mh_acceptance(pi: Dist, Q: FiniteKernel) -> AcceptanceMatrix:
    return _ratio_rule(pi, Q, lambda fwd, back: min(ONE, back / fwd))


def barker_acceptance(pi: Dist, Q: FiniteKernel) -> AcceptanceMatrix:
    # the diagonal stays at 1; self-proposals end in the same state either way
    return _ratio_rule(pi, Q, lambda fwd, back: back / (back + fwd))


def generate_P(Q: FiniteKernel, a: AcceptanceMatrix) -> FiniteKernel:
    if Q.space != a.space:
        raise SpaceMismatchError("proposal and acceptance matrix live on different spaces")
    n = Q.n
    rows = []
    for i in range(n):
        row = [Q[i, j] * a[i, j] if j != i else ZERO for j in range(n)]
        row[i] = Q[i, i] + sum((Q[i, j] * (1 - a[i, j]) for j in range(n)), ZERO)
        rows.append(row)
    return FiniteKernel.from_rows(Q.space, rows)


@dataclass(frozen=True)
class MhProblem:
    Q: FiniteKernel
    a: AcceptanceMatrix

    @cached_property
    def P(self) -> FiniteKernel:
        return generate_P(self.Q, self.a)

    @property
    def space(self) -> StateSpace:
        return self.Q.space

    @property
    def n(self) -> int:
        return self.Q.n


@dataclass(frozen=True)
class KernelCouplingReport:
    ok: bool
    first_failure: tuple[int, int] | None = None
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def check_joint_kernel_coupling(Pbar: Mapping[tuple[int, int], JointDist], P: FiniteKernel,
                                full: bool = False) -> KernelCouplingReport:
    """Check ``Pbar[(x, y)]`` is a coupling of ``P(x,.)`` and ``P(y,.)`` at every supplied pair."""
    n = P.n
    if full:
        missing = [(x, y) for x in range(n) for y in range(n) if (x, y) not in Pbar]
        if missing:
            lab = P.space.labels
            raise KeyError(f"kernel coupling missing pair ({lab[missing[0][0]]},{lab[missing[0][1]]})")
    for (x, y), gamma in sorted(Pbar.items()):
        rep: CouplingReport = check_coupling(gamma, P[x], P[y])
        if not rep:
            lab = P.space.labels
            msgs = tuple(f"pair ({lab[x]},{lab[y]}): {v}" for v in rep.violations)
            return KernelCouplingReport(False, (x, y), msgs)
    return KernelCouplingReport(True)
