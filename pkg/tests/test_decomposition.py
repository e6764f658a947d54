from fractions import Fraction as F
import itertools
import random

import pytest
from hypothesis import given, strategies as st

from mhcouplings import fixtures
from mhcouplings.decomposition import (
    CAM, ACCEPT_ALL, AcceptanceCoupling, DecompositionError, algorithm1_resampled_qbar, build_cam,
    cam_from_generation, check_theorem1_conditions, compute_helpers, decompose, discrete_specialization,
    extract_acceptance_coupling, regenerate_pbar, sample_frechet_coupling, verify_cam,
)
from mhcouplings.measure import JointDist, StateSpace, build_maximal_coupling, check_coupling, is_maximal_coupling

from .strategies import problems

S2 = StateSpace.of_size(2)
PAIR = fixtures.EX1_PAIR


def _entries(g: JointDist):
    return {k: v for k, v in g.as_label_dict().items()}


@pytest.fixture
def ex1():
    return fixtures.example1_problem()


def test_helpers_example1(ex1):
    h = compute_helpers(ex1.Q, ex1.P)
    assert h.beta == (1, F(2, 3))
    assert tuple(h.alpha0[1]) == (F(1, 4), 0)
    assert tuple(h.alpha1[1]) == (F(1, 4), F(1, 2))
    assert tuple(h.mu[1]) == (1, 0)


def test_example3_golden(ex1):
    dec = decompose(ex1, fixtures.run2_pbar(), PAIR)
    assert dec.ok
    assert dec.cam.phi11 == fixtures.example3_phi11()
    assert _entries(dec.cam.phi11) == {("1", "1"): 0, ("2", "1"): F(1, 4), ("1", "2"): F(1, 3), ("2", "2"): F(1, 6)}
    assert _entries(dec.cam.phi10) == {("1", "1"): F(1, 6), ("2", "1"): F(1, 12), ("1", "2"): 0, ("2", "2"): 0}
    assert dec.cam.phi01 == JointDist.zeros(S2) and dec.cam.phi00 == JointDist.zeros(S2)
    assert dec.qbar == fixtures.example3_qbar()


def test_example4_acceptance_tables(ex1):
    B = decompose(ex1, fixtures.run2_pbar(), PAIR).acceptance
    p11 = {(S2.label(i), S2.label(j)): B[i, j][0] for i in range(2) for j in range(2)}
    assert p11 == {("1", "1"): 0, ("2", "1"): F(3, 4), ("1", "2"): 1, ("2", "2"): 1}
    assert B[0, 0][1] == 1 and B[1, 0][1] == F(1, 4)


def test_example1_families_are_couplings(ex1):
    for rho in (0, F(1, 8), F(1, 4), F(1, 2)):
        assert check_coupling(fixtures.example1_rho_family(rho), ex1.Q[0], ex1.Q[1])
    for lam in (0, F(1, 8), F(1, 4)):
        g = fixtures.example1_lambda_family(lam)
        assert check_coupling(g, ex1.P[0], ex1.P[1])
    assert fixtures.example1_lambda_family(0) == fixtures.run2_pbar()
    assert is_maximal_coupling(fixtures.example1_lambda_family(F(1, 4)), ex1.P[0], ex1.P[1]).maximal


def _valid_example2(ex1, params):
    try:
        comps = fixtures.example2_family(*params)
    except ValueError:
        return None
    cam = CAM(PAIR, *comps)
    return verify_cam(cam, fixtures.run2_qbar_independent(), fixtures.run2_pbar(), ex1.Q, PAIR)


def _example2_valid_set(ex1, step=F(1, 24)):
    grid = [k * step for k in range(int(F(1, 4) / step) + 1)]
    return [p for p in itertools.product(grid, repeat=5) if (r := _valid_example2(ex1, p)) is not None and r.ok]


def test_example2_family_has_a_single_valid_mechanism(ex1):
    assert _example2_valid_set(ex1) == [(F(1, 4), F(1, 4), 0, F(1, 4), 0)]


@pytest.mark.xfail(strict=True, reason="the five-parameter family admits exactly one valid mechanism")
def test_example2_family_literal_nonuniqueness(ex1):
    assert len(_example2_valid_set(ex1)) >= 2


def test_example2_condition3_violation(ex1):
    rep = _valid_example2(ex1, (0, F(1, 4), 0, F(1, 4), 0))
    assert rep is not None and not rep.ok


def test_mechanisms_are_not_unique():
    pb = fixtures.nonunique_cam_problem()
    P = pb.P
    pbar = JointDist.product(P[0], P[1])
    dec = decompose(pb, pbar, (0, 1))
    assert dec.ok
    alt = CAM((0, 1), *fixtures.nonunique_cam_alternative())
    assert alt.total() == dec.qbar
    assert alt != dec.cam
    assert verify_cam(alt, dec.qbar, pbar, pb.Q, (0, 1)).ok
    B = extract_acceptance_coupling(alt, dec.qbar)
    assert regenerate_pbar(dec.qbar, B, (0, 1)) == pbar


def test_same_pbar_from_two_proposal_couplings(ex1):
    # Example 3's proposal coupling and the product coupling both generate run2
    dec = decompose(ex1, fixtures.run2_pbar(), PAIR)
    comps = fixtures.example2_family(F(1, 4), F(1, 4), 0, F(1, 4), 0)
    uni = CAM(PAIR, *comps)
    Qu = fixtures.run2_qbar_independent()
    Bu = extract_acceptance_coupling(uni, Qu)
    assert regenerate_pbar(Qu, Bu, PAIR) == fixtures.run2_pbar()
    assert check_theorem1_conditions(Qu, Bu, ex1.Q, ex1.a, PAIR)
    assert Qu != dec.qbar


def test_off_support_cells_accept_both(ex1):
    dec = decompose(ex1, fixtures.run2_pbar(), PAIR)
    for ij in dec.acceptance.off_support:
        assert dec.acceptance[ij] == ACCEPT_ALL


def test_build_cam_rejects_non_coupling(ex1):
    h = compute_helpers(ex1.Q, ex1.P)
    with pytest.raises(ValueError, match="not a coupling"):
        build_cam(JointDist.diagonal(ex1.P[0]), h, ex1.Q, ex1.P, PAIR)


def test_verify_cam_catches_corruption(ex1):
    dec = decompose(ex1, fixtures.run2_pbar(), PAIR)
    c = dec.cam
    moved = JointDist(S2, ((c.phi11[0, 0] + F(1, 12), c.phi11[0, 1]), (c.phi11[1, 0] - F(1, 12), c.phi11[1, 1])))
    bad = CAM(PAIR, moved, c.phi10, c.phi01, c.phi00)
    rep = verify_cam(bad, dec.qbar, dec.pbar, ex1.Q, PAIR)
    assert not rep.ok and rep.condition1


def test_marginal_acceptance_checker_flags_wrong_acceptance(ex1):
    Qu = fixtures.run2_qbar_independent()
    B = AcceptanceCoupling.constant(S2, PAIR)
    rep = check_theorem1_conditions(Qu, B, ex1.Q, ex1.a, PAIR)
    assert not rep.ok and any("y-acceptance" in v for v in rep.violations)


@given(problems(max_n=5), st.integers(0, 10**6))
def test_round_trip_on_random_couplings(pb, seed):
    rng = random.Random(seed)
    x, y = rng.randrange(pb.n), rng.randrange(pb.n)
    pbar = sample_frechet_coupling(pb.P, (x, y), seed)
    dec = decompose(pb, pbar, (x, y))
    assert dec.round_trip_exact
    assert dec.cam_report.ok and dec.marginal_acceptance.ok
    assert check_coupling(dec.qbar, pb.Q[x], pb.Q[y])


@given(problems(max_n=4), st.integers(0, 10**6))
def test_cam_from_generation_is_a_mechanism(pb, seed):
    rng = random.Random(seed)
    x, y = rng.randrange(pb.n), rng.randrange(pb.n)
    dec = decompose(pb, sample_frechet_coupling(pb.P, (x, y), seed), (x, y))
    cam = cam_from_generation(dec.qbar, dec.acceptance, (x, y))
    assert cam == dec.cam


def test_discrete_specialization_matches_general_construction():
    pb = fixtures.nonmax_problem()
    pbar = fixtures.nonmax_max_pbar()
    ds = discrete_specialization(pbar, pb.Q, pb.P, fixtures.NONMAX_PAIR)
    assert ds.MQ == decompose(pb, pbar, fixtures.NONMAX_PAIR).qbar


@given(problems(max_n=5, lazy=False), st.integers(0, 10**6))
def test_discrete_specialization_random(pb, seed):
    rng = random.Random(seed)
    x, y = rng.randrange(pb.n), rng.randrange(pb.n)
    ds = discrete_specialization(sample_frechet_coupling(pb.P, (x, y), seed), pb.Q, pb.P, (x, y))
    assert check_coupling(ds.MQ, pb.Q[x], pb.Q[y])


def test_discrete_specialization_refuses_lazy(ex1):
    with pytest.raises(ValueError, match="self-proposals"):
        discrete_specialization(fixtures.run2_pbar(), ex1.Q, ex1.P, PAIR)


def test_algorithm1_redraw_fixture():
    pb = fixtures.redraw_problem()
    qm, bm = fixtures.redraw_qm(), fixtures.redraw_bm()
    P = pb.P
    assert is_maximal_coupling(qm, pb.Q[0], pb.Q[1]).maximal
    pmax = regenerate_pbar(qm, bm, (0, 1))
    assert is_maximal_coupling(pmax, P[0], P[1]).maximal
    qbar, B = algorithm1_resampled_qbar(qm, bm, (0, 1), pb)
    assert qbar.as_label_dict(skip_zeros=True) == {
        ("2", "1"): F(2, 15), ("2", "3"): F(11, 30), ("3", "1"): F(1, 5), ("3", "3"): F(3, 10)}
    assert qm.diagonal_mass() == F(1, 2) and qbar.diagonal_mass() == F(3, 10)
    assert not is_maximal_coupling(qbar, pb.Q[0], pb.Q[1]).maximal
    assert regenerate_pbar(qbar, B, (0, 1)) == pmax
    assert check_theorem1_conditions(qbar, B, pb.Q, pb.a, (0, 1))


def test_algorithm1_all_accept_is_identity(ex1):
    q = fixtures.example1_rho_family(F(1, 8))
    B = AcceptanceCoupling.constant(S2, PAIR)
    qbar, _ = algorithm1_resampled_qbar(q, B, PAIR)
    assert qbar == q


@given(problems(max_n=4), st.integers(0, 10**6))
def test_algorithm1_preserves_generation(pb, seed):
    rng = random.Random(seed)
    x, y = rng.randrange(pb.n), rng.randrange(pb.n)
    dec = decompose(pb, sample_frechet_coupling(pb.P, (x, y), seed), (x, y))
    qbar, B = algorithm1_resampled_qbar(dec.qbar, dec.acceptance, (x, y), pb)
    assert check_coupling(qbar, pb.Q[x], pb.Q[y])
    assert regenerate_pbar(qbar, B, (x, y)) == dec.pbar


def test_algorithm1_rejects_inconsistent_input(ex1):
    with pytest.raises(ValueError, match="marginal acceptance"):
        algorithm1_resampled_qbar(fixtures.run2_qbar_independent(), AcceptanceCoupling.constant(S2, PAIR), PAIR, ex1)


def test_corner_only_m11_breaks_marginals():
    pb = fixtures.nonmax_problem()
    pbar = fixtures.nonmax_max_pbar()
    x, y = fixtures.NONMAX_PAIR
    ds = discrete_specialization(pbar, pb.Q, pb.P, (x, y))
    n = pb.n
    extra = [[pbar[i, j] if (i == x or j == y) and (i, j) != (x, y) else 0 for j in range(n)] for i in range(n)]
    if all(v == 0 for row in extra for v in row):
        pytest.skip("coupling has no single-move mass")
    total = [[ds.MQ[i, j] + extra[i][j] for j in range(n)] for i in range(n)]
    assert sum(total[x]) != pb.Q[x, x]
