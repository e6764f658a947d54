"""Worked-example problems and couplings, plus a random problem generator.

Couplings are typed in the published display orientation (rows = y
destination, columns = x destination) and transposed on load.
"""
from __future__ import annotations

import random
from fractions import Fraction as F

from .kernels import AcceptanceMatrix, FiniteKernel, MhProblem, barker_acceptance, mh_acceptance
from .measure import Dist, JointDist, StateSpace

EX1_PAIR = (0, 1)
NONMAX_PAIR = (0, 1)


def from_y_rows_display(space: StateSpace, rows_y_cols_x) -> JointDist:
    """Transpose a (y rows, x columns) display into x-first indexing."""
    n = len(space)
    return JointDist(space, tuple(tuple(F(rows_y_cols_x[j][i]) for j in range(n)) for i in range(n)))


def example1_problem() -> MhProblem:
    """Two states, uniform proposals, target (1/3, 2/3)."""
    space = StateSpace.of_size(2)
    Q = FiniteKernel.from_rows(space, [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]])
    pi = Dist(space, (F(1, 3), F(2, 3)))
    return MhProblem(Q, mh_acceptance(pi, Q))


def example1_target() -> Dist:
    return Dist(StateSpace.of_size(2), (F(1, 3), F(2, 3)))


def example1_rho_family(rho) -> JointDist:
    """Every coupling of the two uniform proposal rows; ``rho`` is the (x'=1, y'=1) mass."""
    rho = F(rho)
    return from_y_rows_display(StateSpace.of_size(2), [[rho, F(1, 2) - rho], [F(1, 2) - rho, rho]])


def example1_lambda_family(lam) -> JointDist:
    """Couplings of P(1,.) = (1/2,1/2) and P(2,.) = (1/4,3/4); ``lam`` is the (x'=1, y'=1) mass."""
    lam = F(lam)
    space = StateSpace.of_size(2)
    # rows y, columns x
    return from_y_rows_display(space, [[lam, F(1, 4) - lam], [F(1, 2) - lam, F(1, 4) + lam]])


def run2_pbar() -> JointDist:
    """The non-maximal coupling used in the two-state decomposition examples."""
    return from_y_rows_display(StateSpace.of_size(2), [[0, F(1, 4)], [F(1, 2), F(1, 4)]])


def run2_qbar_independent() -> JointDist:
    return from_y_rows_display(StateSpace.of_size(2), [[F(1, 4)] * 2] * 2)


def example2_family(a, b, c, d, e):
    """The five-parameter family of candidate mechanisms relating the uniform proposal
    coupling to :func:`run2_pbar`. Returns ``(phi11, phi10, phi01, phi00)``."""
    a, b, c, d, e = map(F, (a, b, c, d, e))
    s = StateSpace.of_size(2)
    q = F(1, 4)
    return (
        from_y_rows_display(s, [[0, q], [a, b]]),
        from_y_rows_display(s, [[d, 0], [c, q - b]]),
        from_y_rows_display(s, [[0, 0], [e, 0]]),
        from_y_rows_display(s, [[q - d, 0], [q - a - c - e, 0]]),
    )


def example3_phi11() -> JointDist:
    return from_y_rows_display(StateSpace.of_size(2), [[0, F(1, 4)], [F(1, 3), F(1, 6)]])


def example3_phi10() -> JointDist:
    return from_y_rows_display(StateSpace.of_size(2), [[F(1, 6), F(1, 12)], [0, 0]])


def example3_qbar() -> JointDist:
    return from_y_rows_display(StateSpace.of_size(2), [[F(1, 6), F(1, 3)], [F(1, 3), F(1, 6)]])


def nonmax_target() -> Dist:
    return Dist(StateSpace.of_size(3), (F(2, 5), F(2, 5), F(1, 5)))


def nonmax_problem() -> MhProblem:
    space = StateSpace.of_size(3)
    Q = FiniteKernel.from_rows(space, [
        [0, F(1, 2), F(1, 2)],
        [F(1, 2), 0, F(1, 2)],
        [0, 1, 0],
    ])
    return MhProblem(Q, mh_acceptance(nonmax_target(), Q))


def nonmax_max_qbar() -> JointDist:
    s = StateSpace.of_size(3)
    return from_y_rows_display(s, [[0, F(1, 2), 0], [0, 0, 0], [0, 0, F(1, 2)]])


def nonmax_max_pbar() -> JointDist:
    s = StateSpace.of_size(3)
    return from_y_rows_display(s, [[F(1, 2), 0, 0], [0, 0, 0], [0, F(1, 2), 0]])


def nonmax_alt_qbar() -> JointDist:
    s = StateSpace.of_size(3)
    return from_y_rows_display(s, [[0, 0, F(1, 2)], [0, 0, 0], [0, F(1, 2), 0]])


def redraw_problem() -> MhProblem:
    """Three states; at (1,2) the unique maximal proposal coupling has
    off-diagonal mass and, with deterministic acceptances, generates a maximal
    transition coupling while rejecting with positive probability."""
    space = StateSpace.of_size(3)
    Q = FiniteKernel.from_rows(space, [
        [0, F(1, 2), F(1, 2)],
        [F(1, 3), 0, F(2, 3)],
        [0, 1, 0],
    ])
    pi = Dist(space, (F(2, 5), F(1, 5), F(2, 5)))
    return MhProblem(Q, mh_acceptance(pi, Q))


def redraw_qm() -> JointDist:
    s = StateSpace.of_size(3)
    return JointDist.from_entries(s, {("2", "1"): F(1, 3), ("2", "3"): F(1, 6), ("3", "3"): F(1, 2)})


def redraw_bm():
    """Acceptance law at (1,2): reject x' at (2,1) and (3,3), accept both at (2,3)."""
    from .decomposition import AcceptanceCoupling

    s = StateSpace.of_size(3)
    reject_x = (0, 0, 1, 0)
    table = {(1, 0): reject_x, (1, 2): (1, 0, 0, 0), (2, 2): reject_x}
    return AcceptanceCoupling.from_function(s, (0, 1), lambda i, j: table.get((i, j), (1, 0, 0, 0)))


def nonunique_cam_problem() -> MhProblem:
    """Uniform target on three states; two different mechanisms relate the
    constructive proposal coupling at (1,2) to the independent transition coupling."""
    space = StateSpace.of_size(3)
    Q = FiniteKernel.from_rows(space, [
        [0, 0, 1],
        [F(1, 3), 0, F(2, 3)],
        [F(1, 2), F(1, 2), 0],
    ])
    return MhProblem(Q, mh_acceptance(Dist(space, (F(1, 3),) * 3), Q))


def nonunique_cam_alternative():
    """Second mechanism for :func:`nonunique_cam_problem` (components 11, 10, 01, 00)."""
    s = StateSpace.of_size(3)
    e = lambda d: JointDist.from_entries(s, d)
    return (
        e({("3", "3"): F(1, 4)}),
        e({("3", "1"): F(1, 4)}),
        e({("3", "3"): F(1, 4)}),
        e({("3", "1"): F(1, 12), ("3", "3"): F(1, 6)}),
    )


# -- random problems ---------------------------------------------------------

def random_dist(space: StateSpace, rng: random.Random, zero_prob: float = 0.2, denom: int = 6,
                forbid: int | None = None) -> Dist:
    n = len(space)
    while True:
        w = [0 if (rng.random() < zero_prob or i == forbid) else rng.randint(1, denom) for i in range(n)]
        if sum(w):
            tot = sum(w)
            return Dist(space, tuple(F(v, tot) for v in w))


def random_problem(n: int, rng: random.Random, lazy: bool = True, rule: str = "mh") -> MhProblem:
    """Random target and proposal; ``rule`` is ``"mh"``, ``"barker"`` or ``"random"``."""
    space = StateSpace.of_size(n)
    pi = random_dist(space, rng, zero_prob=0.0)
    rows = [random_dist(space, rng, forbid=None if lazy else i) if n > 1 or lazy
            else Dist.point_mass(space, i) for i in range(n)]
    Q = FiniteKernel(space, tuple(rows))
    if rule == "mh":
        a = mh_acceptance(pi, Q)
    elif rule == "barker":
        a = barker_acceptance(pi, Q)
    else:
        a = AcceptanceMatrix(space, tuple(
            tuple(F(1) if i == j else F(rng.randint(0, 4), 4) for j in range(n)) for i in range(n)))
    return MhProblem(Q, a)


