"""Search small MH problems for a maximal proposal coupling that generates a
maximal transition coupling with positive rejection probability and for which
the rejected-proposal redraw strictly lowers the proposal diagonal mass.

The acceptance law is found by a linear program, rounded to small
denominators and then re-verified exactly.
"""
import argparse
import random
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from mhcouplings import fixtures
from mhcouplings.decomposition import (
    AcceptanceCoupling, algorithm1_resampled_qbar, check_theorem1_conditions, regenerate_pbar,
)
from mhcouplings.maximality import check_max_conditions, hahn_set_for_kernels
from mhcouplings.kernels import FiniteKernel, MhProblem, mh_acceptance
from mhcouplings.measure import StateSpace, build_maximal_coupling, is_maximal_coupling


def solve_acceptance(problem, qm, pair, rng):
    x, y = pair
    n = problem.n
    S = hahn_set_for_kernels(problem.P, x, y)
    cells = sorted(qm.support())
    nv = 4 * len(cells)
    idx = {(c, k): 4 * m + k for m, c in enumerate(cells) for k in range(4)}
    A_eq, b_eq = [], []
    for c in cells:
        row = np.zeros(nv)
        for k in range(4):
            row[idx[c, k]] = 1
        A_eq.append(row); b_eq.append(float(qm[c]))
    for i in range(n):
        if problem.Q[x, i] == 0:
            continue
        row = np.zeros(nv)
        for c in cells:
            if c[0] == i:
                row[idx[c, 0]] = row[idx[c, 1]] = 1
        A_eq.append(row); b_eq.append(float(problem.a[x, i] * problem.Q[x, i]))
    for j in range(n):
        if problem.Q[y, j] == 0:
            continue
        row = np.zeros(nv)
        for c in cells:
            if c[1] == j:
                row[idx[c, 0]] = row[idx[c, 2]] = 1
        A_eq.append(row); b_eq.append(float(problem.a[y, j] * problem.Q[y, j]))
    bounds = []
    for c in cells:
        i, j = c
        for k, (dx, dy) in enumerate(((i, j), (i, y), (x, j), (x, y))):
            bad = dx != dy and (dx not in S or dy in S)
            bounds.append((0, 0) if bad else (0, None))
    cost = rng.normal(size=nv)
    res = linprog(cost, A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None

    def cell_vec(c):
        v = [Fraction(res.x[idx[c, k]]).limit_denominator(48) for k in range(4)]
        tot = sum(v)
        return tuple(p / tot for p in v) if tot else (1, 0, 0, 0)

    table = {c: cell_vec(c) for c in cells}
    return AcceptanceCoupling.from_function(problem.space, pair, lambda i, j: table.get((i, j), (1, 0, 0, 0)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tries", type=int, default=400)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    nrng = np.random.default_rng(args.seed)
    for t in range(args.tries):
        space = StateSpace.of_size(3)
        pi = fixtures.random_dist(space, rng, zero_prob=0.0, denom=4)
        Q = FiniteKernel(space, tuple(fixtures.random_dist(space, rng, forbid=i, denom=3) for i in range(3)))
        pr = MhProblem(Q, mh_acceptance(pi, Q))
        pair = (0, 1)
        x, y = pair
        qm = build_maximal_coupling(pr.Q[x], pr.Q[y])
        if qm.total - qm.diagonal_mass() == 0:
            continue
        B = solve_acceptance(pr, qm, pair, nrng)
        if B is None or not check_theorem1_conditions(qm, B, pr.Q, pr.a, pair):
            continue
        if not check_max_conditions(qm, B, pr.Q, pr.a, pr.P, pair):
            continue
        pbar = regenerate_pbar(qm, B, pair)
        rej = sum(q * (1 - B[c][0]) for c, q in qm.items())
        if rej == 0:
            continue
        q1, _ = algorithm1_resampled_qbar(qm, B, pair, pr)
        if q1.diagonal_mass() < qm.diagonal_mass():
            print("try", t)
            print("pi", [str(v) for v in pi])
            print("Q rows", [[str(v) for v in r] for r in pr.Q.matrix()])
            print("a", [[str(v) for v in r] for r in pr.a.a])
            print("Qm", qm.as_label_dict(skip_zeros=True))
            print("B", {c: B[c] for c in qm.support()})
            print("Pbar", pbar.as_label_dict(skip_zeros=True), is_maximal_coupling(pbar, pr.P[x], pr.P[y]).maximal)
            print("diag", qm.diagonal_mass(), "->", q1.diagonal_mass())
            return
    print("no fixture found")


if __name__ == "__main__":
    main()
