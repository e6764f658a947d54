"""Coupled MH chains on finite spaces.

Each built-in coupling is first computed exactly (proposal coupling and
acceptance coupling as rationals), so the meeting probability it should
attain is known. Sampling converts those laws to floats once per pair and
draws whole batches of replicates at a time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from ..decomposition import ACCEPT_ALL, AcceptanceCoupling, Pair, decompose, regenerate_pbar
from ..kernels import MhProblem
from ..measure import ZERO, JointDist, _northwest_residual, build_maximal_coupling, tv_distance
from .rng import UniformBuffer

FINITE_PROPOSALS = ("independent", "maximal", "crn")
FINITE_ACCEPTANCES = ("common_uniform", "independent")
MAXIMAL_KERNEL = "maximal_kernel"


def builtin_finite_couplings() -> list[str]:
    return [MAXIMAL_KERNEL] + [f"{p}+{a}" for p in FINITE_PROPOSALS for a in FINITE_ACCEPTANCES]


@dataclass(frozen=True)
class FiniteCouplingSpec:
    name: str = MAXIMAL_KERNEL
    faithful: bool = True

    def __post_init__(self):
        if self.name == MAXIMAL_KERNEL:
            return
        parts = self.name.split("+")
        if len(parts) == 1:
            object.__setattr__(self, "name", f"{parts[0]}+common_uniform")
            parts.append("common_uniform")
        if len(parts) != 2 or parts[0] not in FINITE_PROPOSALS or parts[1] not in FINITE_ACCEPTANCES:
            raise ValueError(f"unknown finite coupling {self.name!r}; choose from {builtin_finite_couplings()}")

    @property
    def proposal(self) -> Optional[str]:
        return None if self.name == MAXIMAL_KERNEL else self.name.split("+")[0]

    @property
    def acceptance(self) -> Optional[str]:
        return None if self.name == MAXIMAL_KERNEL else self.name.split("+")[1]


def proposal_coupling_exact(problem: MhProblem, pair: Pair, kind: str) -> JointDist:
    Q = problem.Q
    x, y = pair
    if kind == "independent":
        return JointDist.product(Q[x], Q[y])
    if kind == "maximal":
        return build_maximal_coupling(Q[x], Q[y])
    if kind == "crn":
        # shared uniform pushed through both quantile functions
        m = _northwest_residual(Q[x], Q[y])
        return JointDist(Q.space, tuple(map(tuple, m)))
    raise ValueError(f"unknown proposal coupling {kind!r}")


def acceptance_coupling_exact(problem: MhProblem, pair: Pair, kind: str) -> AcceptanceCoupling:
    a = problem.a
    x, y = pair

    def cell(i, j):
        ax, ay = a[x, i], a[y, j]
        if kind == "common_uniform":
            return (min(ax, ay), max(ax - ay, ZERO), max(ay - ax, ZERO), 1 - max(ax, ay))
        if kind == "independent":
            return (ax * ay, ax * (1 - ay), (1 - ax) * ay, (1 - ax) * (1 - ay))
        raise ValueError(f"unknown acceptance coupling {kind!r}")

    return AcceptanceCoupling.from_function(problem.space, pair, cell)


def _faithful_law(problem: MhProblem, x: int) -> tuple[JointDist, AcceptanceCoupling]:
    """Both chains at ``x``: one proposal and one acceptance bit, duplicated."""
    Q, a = problem.Q, problem.a
    qbar = JointDist.diagonal(Q[x])

    def cell(i, j):
        return (a[x, i], ZERO, ZERO, 1 - a[x, i]) if i == j else ACCEPT_ALL

    return qbar, AcceptanceCoupling.from_function(problem.space, (x, x), cell)


@dataclass(frozen=True)
class FinitePairLaw:
    pair: Pair
    qbar: JointDist
    acceptance: AcceptanceCoupling
    pbar: JointDist
    cell_cdf: np.ndarray  # (n*n,)
    outcome_cdf: np.ndarray  # (n*n, 4)

    @property
    def meeting_probability(self) -> Fraction:
        return self.pbar.diagonal_mass()


def pair_law(problem: MhProblem, pair: Pair, spec: FiniteCouplingSpec) -> FinitePairLaw:
    x, y = pair
    if spec.faithful and x == y:
        qbar, B = _faithful_law(problem, x)
    elif spec.name == MAXIMAL_KERNEL:
        P = problem.P
        dec = decompose(problem, build_maximal_coupling(P[x], P[y]), pair)
        if not dec.ok:
            raise RuntimeError(f"decomposition of the maximal coupling failed at {pair}")
        qbar, B = dec.qbar, dec.acceptance
    else:
        qbar = proposal_coupling_exact(problem, pair, spec.proposal)
        B = acceptance_coupling_exact(problem, pair, spec.acceptance)
    pbar = regenerate_pbar(qbar, B, pair)
    n = problem.n
    w = np.array([float(qbar[i, j]) for i in range(n) for j in range(n)])
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    oc = np.cumsum(np.array([[float(v) for v in B[i, j]] for i in range(n) for j in range(n)]), axis=1)
    oc[:, -1] = 1.0
    return FinitePairLaw(pair, qbar, B, pbar, cdf, oc)


# outcome k -> (b_x, b_y)
_BX = np.array([1, 1, 0, 0], dtype=bool)
_BY = np.array([1, 0, 1, 0], dtype=bool)


@dataclass
class FiniteStepBatch:
    x: np.ndarray
    y: np.ndarray
    xp: np.ndarray
    yp: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def record(self, r: int = 0) -> dict:
        return {"x": int(self.x[r]), "y": int(self.y[r]), "xp": int(self.xp[r]), "yp": int(self.yp[r]),
                "bx": int(self.bx[r]), "by": int(self.by[r])}


@dataclass
class FiniteCoupledSampler:
    problem: MhProblem
    spec: FiniteCouplingSpec = field(default_factory=FiniteCouplingSpec)
    _laws: dict = field(default_factory=dict, repr=False)

    def law(self, pair: Pair) -> FinitePairLaw:
        if pair not in self._laws:
            self._laws[pair] = pair_law(self.problem, pair, self.spec)
        return self._laws[pair]

    def meeting_bound(self, pair: Pair) -> Fraction:
        P = self.problem.P
        return 1 - tv_distance(P[pair[0]], P[pair[1]])

    def step_batch(self, X: np.ndarray, Y: np.ndarray, rng: np.random.Generator) -> FiniteStepBatch:
        n = self.problem.n
        R = X.shape[0]
        u_cell, u_out = rng.random(R), rng.random(R)
        xp = np.empty(R, dtype=np.int64)
        yp = np.empty(R, dtype=np.int64)
        k = np.empty(R, dtype=np.int64)
        codes = X * n + Y
        for code in np.unique(codes):
            idx = np.flatnonzero(codes == code)
            law = self.law((int(code) // n, int(code) % n))
            c = np.minimum(np.searchsorted(law.cell_cdf, u_cell[idx], side="right"), n * n - 1)
            xp[idx], yp[idx] = c // n, c % n
            k[idx] = np.minimum((u_out[idx, None] >= law.outcome_cdf[c]).sum(axis=1), 3)
        bx, by = _BX[k], _BY[k]
        return FiniteStepBatch(X, Y, xp, yp, bx, by, np.where(bx, xp, X), np.where(by, yp, Y))


def finite_mh_step_batch(problem: MhProblem, X: np.ndarray, rng: np.random.Generator):
    """Uncoupled steps: returns ``(new_state, proposal, accepted)`` arrays."""
    n = problem.n
    Qc = np.cumsum(np.array([[float(v) for v in row] for row in problem.Q.matrix()]), axis=1)
    Qc[:, -1] = 1.0
    A = np.array([[float(problem.a[i, j]) for j in range(n)] for i in range(n)])
    R = X.shape[0]
    xp = np.minimum((rng.random(R)[:, None] >= Qc[X]).sum(axis=1), n - 1)
    b = rng.random(R) < A[X, xp]
    return np.where(b, xp, X), xp, b


# -- Algorithm 1 as a literal rejection loop ---------------------------------

class Algorithm1LoopError(RuntimeError):
    pass


def joint_sampler(J: JointDist) -> Callable[[Callable[[], float]], Pair]:
    """Inverse-CDF sampler for a finite joint law; takes a uniform source."""
    n = J.n
    cells = [(i, j) for i in range(n) for j in range(n)]
    cdf = np.cumsum([float(J[c]) for c in cells])
    cdf /= cdf[-1]

    def draw(u: Callable[[], float]) -> Pair:
        return cells[min(int(np.searchsorted(cdf, u(), side="right")), len(cells) - 1)]

    return draw


def acceptance_sampler(B: AcceptanceCoupling) -> Callable[[Pair, Callable[[], float]], tuple[int, int]]:
    n = len(B.space)
    cdfs = {(i, j): np.cumsum([float(v) for v in B[i, j]]) for i in range(n) for j in range(n)}
    bits = ((1, 1), (1, 0), (0, 1), (0, 0))

    def draw(ij: Pair, u: Callable[[], float]) -> tuple[int, int]:
        v = u()
        c = cdfs[ij]
        for k in range(3):
            if v < c[k]:
                return bits[k]
        return bits[3]

    return draw


def algorithm1_stochastic(Qm_sampler, Bm: Union[AcceptanceCoupling, Callable], pair: Pair,
                          rng: Union[np.random.Generator, Callable[[], float]], max_loop: int = 100_000):
    """One draw ``(x', y', b_x, b_y)``: accepted coordinates keep the proposal,
    rejected ones are redrawn from fresh proposal/acceptance draws that reproduce
    the same acceptance outcome."""
    u = UniformBuffer(rng) if isinstance(rng, np.random.Generator) else rng
    B = acceptance_sampler(Bm) if isinstance(Bm, AcceptanceCoupling) else Bm
    xm, ym = Qm_sampler(u)
    bx, by = B((xm, ym), u)
    out = []
    for keep, z in ((bx, xm), (by, ym)):
        if keep:
            out.append(z)
            continue
        for _ in range(max_loop):
            xt, yt = Qm_sampler(u)
            if B((xt, yt), u) == (bx, by):
                out.append(xt if len(out) == 0 else yt)
                break
        else:
            raise Algorithm1LoopError(
                f"no redraw reproduced outcome {(bx, by)} at pair {pair} in {max_loop} tries; "
                "its probability is at or near zero")
    return out[0], out[1], bx, by


def algorithm1_empirical(Qm: JointDist, Bm: AcceptanceCoupling, pair: Pair, draws: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Counts of proposal-pair outputs over ``draws`` runs, shape ``(n, n)``."""
    n = Qm.n
    sample, bsample = joint_sampler(Qm), acceptance_sampler(Bm)
    u = UniformBuffer(rng)
    counts = np.zeros((n, n), dtype=np.int64)
    for _ in range(draws):
        i, j, _, _ = algorithm1_stochastic(sample, bsample, pair, u)
        counts[i, j] += 1
    return counts
