"""Find a (Qbar, Pbar) pair related by two different coupled acceptance mechanisms.

Starts from the constructive mechanism, then pushes a random linear objective
over the polytope of all mechanisms for the same (Qbar, Pbar) and re-verifies
the rounded optimum exactly.
"""
import argparse
import random
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from mhcouplings import fixtures
from mhcouplings.decomposition import CAM, build_cam, compute_helpers, sample_frechet_coupling, verify_cam
from mhcouplings.kernels import FiniteKernel, MhProblem, mh_acceptance
from mhcouplings.measure import JointDist, StateSpace


def mechanism_polytope(qbar, pbar, Q, pair):
    """Equality system ``A v = b`` (v >= 0) describing every mechanism relating qbar and pbar."""
    x, y = pair
    n = qbar.n
    idx = lambda k, i, j: (k * n + i) * n + j
    nv = 4 * n * n
    A, b = [], []

    def eq(coefs, rhs):
        row = np.zeros(nv)
        for k, i, j, c in coefs:
            row[idx(k, i, j)] += c
        A.append(row); b.append(float(rhs))

    for i in range(n):
        for j in range(n):
            eq([(k, i, j, 1) for k in range(4)], qbar[i, j])
            if i != x and j != y:
                eq([(0, i, j, 1)], pbar[i, j])
    for i in range(n):
        if i != x:
            eq([(0, i, y, 1)] + [(1, i, j, 1) for j in range(n)], pbar[i, y])
    for j in range(n):
        if j != y:
            eq([(0, x, j, 1)] + [(2, i, j, 1) for i in range(n)], pbar[x, j])
    eq([(0, x, y, 1)] + [(1, x, j, 1) for j in range(n)] + [(2, i, y, 1) for i in range(n)]
       + [(3, i, j, 1) for i in range(n) for j in range(n)], pbar[x, y])
    eq([(0, x, j, 1) for j in range(n)] + [(1, x, j, 1) for j in range(n)], Q[x, x])
    eq([(0, i, y, 1) for i in range(n)] + [(2, i, y, 1) for i in range(n)], Q[y, y])
    return np.array(A), np.array(b), idx


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tries", type=int, default=200)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    nrng = np.random.default_rng(args.seed)
    for t in range(args.tries):
        space = StateSpace.of_size(3)
        pi = fixtures.random_dist(space, rng, zero_prob=0.0, denom=3)
        Q = FiniteKernel(space, tuple(fixtures.random_dist(space, rng, forbid=i, denom=2) for i in range(3)))
        pr = MhProblem(Q, mh_acceptance(pi, Q))
        pair = (0, 1)
        pbar = sample_frechet_coupling(pr.P, pair, seed=t, rounds=0)
        cam0, qbar = build_cam(pbar, compute_helpers(pr.Q, pr.P), pr.Q, pr.P, pair)
        A, b, idx = mechanism_polytope(qbar, pbar, pr.Q, pair)
        res = linprog(nrng.normal(size=A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if res.status != 0:
            continue
        n = 3
        denom = 1
        for v in list(qbar.x_marginal()) + [w for _, w in qbar.items()] + [w for _, w in pbar.items()]:
            denom = denom * v.denominator // __import__("math").gcd(denom, v.denominator)
        comps = [[[Fraction(res.x[idx(k, i, j)]).limit_denominator(denom) for j in range(n)] for i in range(n)]
                 for k in range(4)]
        try:
            cam1 = CAM(pair, *(JointDist(pr.space, tuple(map(tuple, m))) for m in comps))
        except ValueError:
            continue
        if cam1 != cam0 and verify_cam(cam1, qbar, pbar, pr.Q, pair):
            print("try", t)
            print("pi", [str(v) for v in pi])
            print("Q", [[str(v) for v in r] for r in pr.Q.matrix()])
            print("a", [[str(v) for v in r] for r in pr.a.a])
            print("Pbar", pbar.as_label_dict(skip_zeros=True))
            print("Qbar", qbar.as_label_dict(skip_zeros=True))
            for name, c0, c1 in zip(("11", "10", "01", "00"), cam0.components, cam1.components):
                print(name, c0.as_label_dict(skip_zeros=True), "|", c1.as_label_dict(skip_zeros=True))
            return
    print("none found")


if __name__ == "__main__":
    main()
