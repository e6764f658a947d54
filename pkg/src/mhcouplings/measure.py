"""Exact finite measures: distributions, couplings, total variation, Hahn sets.

Every quantity here is a :class:`fractions.Fraction`; floats are rejected on
input so that round trips through the decomposition are bit-exact.

Joint measures are indexed ``[i][j]`` with ``i`` the destination of the x-chain
and ``j`` the destination of the y-chain.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Iterator, Sequence, Union

Rational = Fraction
Matrix = list[list[Fraction]]

ZERO = Fraction(0)
ONE = Fraction(1)


class SpaceMismatchError(ValueError):
    pass


class NotACouplingError(ValueError):
    pass


def as_rational(value) -> Fraction:
    """Parse ``value`` as an exact rational; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise ValueError("a state space needs at least one state")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate state labels in {labels}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of_size(cls, n: int) -> "StateSpace":
        """States labelled ``"1"`` .. ``"n"`` as in the worked examples."""
        return cls(tuple(str(k) for k in range(1, n + 1)))

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self._positions[str(label)]
        except KeyError:
            raise KeyError(f"unknown state {label!r}; states are {self.labels}") from None

    def label(self, i: int) -> str:
        return self.labels[i]


def _same_space(*measures) -> StateSpace:
    space = measures[0].space
    for m in measures[1:]:
        if m.space != space:
            raise SpaceMismatchError(f"state spaces differ: {space.labels} vs {m.space.labels}")
    return space


@dataclass(frozen=True)
class SubDist:
    """Non-negative measure on a finite space with total mass at most one."""

    space: StateSpace
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        w = tuple(as_rational(v) for v in self.weights)
        if len(w) != len(self.space):
            raise ValueError(f"expected {len(self.space)} weights, got {len(w)}")
        for i, v in enumerate(w):
            if v < 0:
                raise ValueError(f"negative mass {v} at state {self.space.label(i)}")
        object.__setattr__(self, "weights", w)
        self._check_total(sum(w, ZERO))

    def _check_total(self, total: Fraction) -> None:
        if total > 1:
            raise ValueError(f"sub-probability has total mass {total} > 1")

    @classmethod
    def zeros(cls, space: StateSpace):
        return cls(space, (ZERO,) * len(space))

    @property
    def total(self) -> Fraction:
        return sum(self.weights, ZERO)

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> Fraction:
        return self.weights[i]

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.weights)

    def mass(self, subset: Iterable[int]) -> Fraction:
        return sum((self.weights[i] for i in subset), ZERO)

    def support(self) -> frozenset[int]:
        return frozenset(i for i, v in enumerate(self.weights) if v > 0)


@dataclass(frozen=True)
class Dist(SubDist):
    """Probability distribution: weights sum to exactly one."""

    def _check_total(self, total: Fraction) -> None:
        if total != 1:
            raise ValueError(f"distribution weights sum to {total}, not 1")

    @classmethod
    def point_mass(cls, space: StateSpace, i: int) -> "Dist":
        return cls(space, tuple(ONE if k == i else ZERO for k in range(len(space))))


@dataclass(frozen=True)
class JointDist:
    """Sub-probability on destination pairs; entry ``[i][j]`` is ``(x'=s_i, y'=s_j)``."""

    space: StateSpace
    weights: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        n = len(self.space)
        rows = tuple(tuple(as_rational(v) for v in row) for row in self.weights)
        if len(rows) != n or any(len(row) != n for row in rows):
            raise ValueError(f"joint measure must be {n}x{n}")
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                if v < 0:
                    raise ValueError(f"negative mass {v} at ({self.space.label(i)},{self.space.label(j)})")
        object.__setattr__(self, "weights", rows)
        if self.total > 1:
            raise ValueError(f"joint measure has total mass {self.total} > 1")

    @classmethod
    def zeros(cls, space: StateSpace) -> "JointDist":
        n = len(space)
        return cls(space, tuple((ZERO,) * n for _ in range(n)))

    @classmethod
    def from_entries(cls, space: StateSpace, entries: dict) -> "JointDist":
        """Build from ``{(x_label, y_label): mass}``; missing pairs are zero."""
        n = len(space)
        rows = [[ZERO] * n for _ in range(n)]
        for (xl, yl), v in entries.items():
            rows[space.index(xl)][space.index(yl)] = as_rational(v)
        return cls(space, tuple(map(tuple, rows)))

    @classmethod
    def product(cls, mu: SubDist, nu: SubDist) -> "JointDist":
        space = _same_space(mu, nu)
        return cls(space, tuple(tuple(a * b for b in nu) for a in mu))

    @classmethod
    def diagonal(cls, mu: SubDist) -> "JointDist":
        """Push-forward of ``mu`` onto the diagonal."""
        n = len(mu)
        return cls(mu.space, tuple(tuple(mu[i] if i == j else ZERO for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.space)

    @cached_property
    def total(self) -> Fraction:
        return sum((v for row in self.weights for v in row), ZERO)

    @property
    def is_probability(self) -> bool:
        return self.total == 1

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.weights[i][j]

    def x_marginal(self) -> tuple[Fraction, ...]:
        return tuple(sum(row, ZERO) for row in self.weights)

    def y_marginal(self) -> tuple[Fraction, ...]:
        return tuple(sum((row[j] for row in self.weights), ZERO) for j in range(self.n))

    def diagonal_mass(self) -> Fraction:
        return sum((self.weights[i][i] for i in range(self.n)), ZERO)

    def rectangle(self, xs: Iterable[int], ys: Iterable[int]) -> Fraction:
        ys = list(ys)
        return sum((self.weights[i][j] for i in xs for j in ys), ZERO)

    def items(self) -> Iterator[tuple[tuple[int, int], Fraction]]:
        """Non-zero entries."""
        for i, row in enumerate(self.weights):
            for j, v in enumerate(row):
                if v:
                    yield (i, j), v

    def support(self) -> frozenset[tuple[int, int]]:
        return frozenset(ij for ij, _ in self.items())

    def __add__(self, other: "JointDist") -> "JointDist":
        _same_space(self, other)
        return JointDist(self.space, tuple(
            tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.weights, other.weights)))

    def matrix(self) -> Matrix:
        return [list(row) for row in self.weights]

    def as_label_dict(self, skip_zeros: bool = False) -> dict[tuple[str, str], Fraction]:
        lab = self.space.labels
        return {(lab[i], lab[j]): v for i, row in enumerate(self.weights)
                for j, v in enumerate(row) if v or not skip_zeros}


@dataclass(frozen=True)
class HahnDecomposition:
    positive_set: frozenset[int]
    upper: SubDist
    lower: SubDist
    meet: SubDist


def tv_distance(mu: SubDist, nu: SubDist) -> Fraction:
    _same_space(mu, nu)
    return sum((abs(a - b) for a, b in zip(mu, nu)), ZERO) / 2


def hahn_jordan(mu: SubDist, nu: SubDist) -> HahnDecomposition:
    """Hahn set and Jordan parts of ``mu - nu``; ties go into the positive set."""
    space = _same_space(mu, nu)
    positive = frozenset(i for i in range(len(space)) if mu[i] >= nu[i])
    upper = SubDist(space, tuple(max(a - b, ZERO) for a, b in zip(mu, nu)))
    lower = SubDist(space, tuple(max(b - a, ZERO) for a, b in zip(mu, nu)))
    meet = SubDist(space, tuple(min(a, b) for a, b in zip(mu, nu)))
    return HahnDecomposition(positive, upper, lower, meet)


@dataclass(frozen=True)
class CouplingReport:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def check_coupling(gamma: JointDist, mu: SubDist, nu: SubDist) -> CouplingReport:
    """Exact marginal check of ``gamma`` against ``(mu, nu)``."""
    space = _same_space(gamma, mu, nu)
    lab = space.labels
    violations = []
    for i, (got, want) in enumerate(zip(gamma.x_marginal(), mu)):
        if got != want:
            violations.append(f"x-marginal at {lab[i]}: {format_rational(got)} != {format_rational(want)}")
    for j, (got, want) in enumerate(zip(gamma.y_marginal(), nu)):
        if got != want:
            violations.append(f"y-marginal at {lab[j]}: {format_rational(got)} != {format_rational(want)}")
    return CouplingReport(not violations, tuple(violations))


@dataclass(frozen=True)
class MaximalityVerdict:
    maximal: bool
    witness_set: frozenset[int]
    # gamma((S^c x X) \ Delta) and gamma((X x S) \ Delta)
    mass_outside_upper: Fraction
    mass_outside_lower: Fraction
    diagonal_mass: Fraction
    bound: Fraction

    @property
    def deficit(self) -> Fraction:
        return self.bound - self.diagonal_mass

    def __bool__(self) -> bool:
        return self.maximal


def is_maximal_coupling(gamma: JointDist, mu: Dist, nu: Dist) -> MaximalityVerdict:
    """Hahn maximality condition evaluated with the canonical Hahn set of ``mu - nu``."""
    report = check_coupling(gamma, mu, nu)
    if not report:
        raise NotACouplingError("; ".join(report.violations))
    n = gamma.n
    S = hahn_jordan(mu, nu).positive_set
    upper_leak = sum((gamma[i, j] for i in range(n) if i not in S for j in range(n) if j != i), ZERO)
    lower_leak = sum((gamma[i, j] for j in S for i in range(n) if i != j), ZERO)
    return MaximalityVerdict(
        maximal=upper_leak == 0 and lower_leak == 0,
        witness_set=S,
        mass_outside_upper=upper_leak,
        mass_outside_lower=lower_leak,
        diagonal_mass=gamma.diagonal_mass(),
        bound=1 - tv_distance(mu, nu),
    )


# -- residual couplings ------------------------------------------------------

ResidualStrategy = Union[str, Callable[[SubDist, SubDist], Sequence[Sequence[Fraction]]]]


def _product_residual(upper: SubDist, lower: SubDist) -> Matrix:
    mass = upper.total
    return [[a * b / mass for b in lower] for a in upper]


def _northwest_residual(upper: SubDist, lower: SubDist) -> Matrix:
    """North-west corner rule: a deterministic extreme point of the residual class."""
    n = len(upper)
    out = [[ZERO] * n for _ in range(n)]
    r, c = list(upper), list(lower)
    i = j = 0
    while i < n and j < n:
        m = min(r[i], c[j])
        out[i][j] += m
        r[i] -= m
        c[j] -= m
        if r[i] == 0:
            i += 1
        else:
            j += 1
    return out


RESIDUAL_STRATEGIES: dict[str, Callable[[SubDist, SubDist], Matrix]] = {
    "product": _product_residual,
    "northwest": _northwest_residual,
}


def random_residual(rng: random.Random, rounds: int = 3) -> Callable[[SubDist, SubDist], Matrix]:
    """Residual strategy drawing a random element of the residual Frechet class."""
    def strategy(upper: SubDist, lower: SubDist) -> Matrix:
        return random_frechet_element(list(upper), list(lower), rng, rounds=rounds)
    return strategy


def build_maximal_coupling(mu: Dist, nu: Dist, residual: ResidualStrategy = "product") -> JointDist:
    """Meet measure on the diagonal plus a coupling of the Jordan residuals."""
    space = _same_space(mu, nu)
    hahn = hahn_jordan(mu, nu)
    n = len(space)
    out = [[hahn.meet[i] if i == j else ZERO for j in range(n)] for i in range(n)]
    if hahn.upper.total > 0:
        strategy = RESIDUAL_STRATEGIES[residual] if isinstance(residual, str) else residual
        res = [[as_rational(v) for v in row] for row in strategy(hahn.upper, hahn.lower)]
        res_joint = JointDist(space, tuple(map(tuple, res)))
        if not check_coupling(res_joint, hahn.upper, hahn.lower):
            raise ValueError("residual strategy did not return a coupling of the Jordan residuals")
        for i in range(n):
            for j in range(n):
                out[i][j] += res[i][j]
    return JointDist(space, tuple(map(tuple, out)))


def random_frechet_element(rows: Sequence[Fraction], cols: Sequence[Fraction], rng: random.Random,
                           rounds: int = 3, denominator: int = 12) -> Matrix:
    """Random coupling of two equal-mass measures, exact.

    Starts at the (normalised) product and moves along random directions with
    zero row and column sums, each step scaled to keep every entry
    non-negative. About a quarter of the steps go all the way to the boundary
    so that zeros appear in the support.
    """
    n, m = len(rows), len(cols)
    mass = sum(rows, ZERO)
    if sum(cols, ZERO) != mass:
        raise ValueError("marginals must carry equal mass")
    if mass == 0:
        return [[ZERO] * m for _ in range(n)]
    g = [[r * c / mass for c in cols] for r in rows]
    ri = [i for i in range(n) if rows[i] > 0]
    cj = [j for j in range(m) if cols[j] > 0]
    if len(ri) < 2 or len(cj) < 2:
        return g
    for _ in range(rounds):
        raw = {(i, j): Fraction(rng.randint(-3, 3)) for i in ri for j in cj}
        row_mean = {i: sum(raw[i, j] for j in cj) / len(cj) for i in ri}
        col_mean = {j: sum(raw[i, j] for i in ri) / len(ri) for j in cj}
        grand = sum(row_mean.values()) / len(ri)
        direction = {ij: v - row_mean[ij[0]] - col_mean[ij[1]] + grand for ij, v in raw.items()}
        limits = [g[i][j] / -d for (i, j), d in direction.items() if d < 0]
        if not limits:
            continue
        step = min(limits)
        u = ONE if rng.random() < 0.25 else Fraction(rng.randint(0, denominator), denominator)
        for (i, j), d in direction.items():
            g[i][j] += u * step * d
    return g
