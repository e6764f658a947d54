from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from mhcouplings import fixtures
from mhcouplings.measure import Dist
from mhcouplings.samplers import (
    ContinuousSplit, FiniteSplitSampler, MinorizationError, SplitCouplingSpec, split_coupling_step, split_pbar,
    split_two_step_representation, stream,
)

EX1 = fixtures.example1_problem()
PAIR = fixtures.EX1_PAIR


def _spec(eps=F(1, 2)):
    return SplitCouplingSpec(eps, Dist(EX1.space, (F(1, 2), F(1, 2))), {0, 1})


def test_example1_split_law():
    pbar = split_pbar(_spec(), EX1.P, PAIR)
    assert pbar.x_marginal() == tuple(EX1.P[0]) and pbar.y_marginal() == tuple(EX1.P[1])
    assert pbar.diagonal_mass() == F(3, 4)


def test_example1_split_representation():
    rep = split_two_step_representation(_spec(), EX1.Q, EX1.a, EX1.P, PAIR)
    assert rep.ok
    assert rep.scope == ((1, 0),)
    assert rep.literal_identity_failures == ()


@pytest.mark.parametrize("eps", [0, F(1, 4), F(1, 2)])
def test_split_representation_on_nonmax_fixture(eps):
    pb = fixtures.nonmax_problem()
    P = pb.P
    x, y = fixtures.NONMAX_PAIR
    w = [min(P[x, i], P[y, i]) for i in range(pb.n)]
    nu = Dist(pb.space, tuple(v / sum(w) for v in w))
    eps = min(F(eps), sum(w))
    spec = SplitCouplingSpec(eps, nu, {x, y})
    rep = split_two_step_representation(spec, pb.Q, pb.a, P, (x, y))
    assert rep.ok


def test_minorization_failure():
    spec = SplitCouplingSpec(F(9, 10), Dist.point_mass(EX1.space, 1), {0, 1})
    with pytest.raises(MinorizationError, match="minorization fails"):
        spec.verify(EX1.P)
    with pytest.raises(ValueError):
        SplitCouplingSpec(F(3, 2), Dist(EX1.space, (F(1, 2), F(1, 2))), {0})


def test_finite_split_sampler_coin_and_meeting():
    R = 100_000
    sampler = FiniteSplitSampler(EX1, _spec())
    s = sampler.step_batch(np.zeros(R, np.int64), np.ones(R, np.int64), stream(1))
    assert s.split.all()
    assert abs(s.coin.mean() - 0.5) < 4 * np.sqrt(0.25 / R)
    assert abs(np.mean(s.X == s.Y) - 0.75) < 4 * np.sqrt(0.75 * 0.25 / R)
    assert abs(np.mean(s.X) - float(EX1.P[0, 1])) < 4 * np.sqrt(0.25 / R)


def test_split_step_single():
    rec = split_coupling_step(_spec(), (0, 1), stream(2), problem=EX1)
    assert rec["split"]
    with pytest.raises(ValueError):
        split_coupling_step(_spec(), (0, 1), stream(2))


@pytest.fixture(scope="module")
def cont():
    return ContinuousSplit(sigma=2.0, c=1.0)


def test_continuous_epsilon_and_minorization(cont):
    assert abs(cont.epsilon - 0.333) < 5e-3
    assert cont.check_minorization() >= -1e-12
    assert abs(ContinuousSplit(1.0, 1.0).epsilon - 0.264) < 5e-3


def test_nu_sampler_matches_density(cont):
    from scipy import integrate

    z = cont.sample_nu(20_000, stream(3))
    grid = np.linspace(-12, 12, 20_001)
    cdf = integrate.cumulative_trapezoid(cont.nu_density(grid), grid, initial=0.0)
    assert abs(cdf[-1] - 1) < 1e-6
    assert stats.kstest(z, lambda t: np.interp(t, grid, cdf)).pvalue > 1e-3


def test_continuous_split_marginals_and_meeting(cont):
    R = 20_000
    X, Y = np.full(R, -0.5), np.full(R, 0.8)
    s = cont.step_batch(X, Y, stream(4))
    assert abs(np.mean(s.X == s.Y) - cont.epsilon) < 4 * np.sqrt(cont.epsilon * (1 - cont.epsilon) / R)
    ref = cont.mh_step(np.full(R, -0.5), stream(5))
    assert stats.ks_2samp(s.X, ref).pvalue > 1e-3
    refy = cont.mh_step(np.full(R, 0.8), stream(6))
    assert stats.ks_2samp(s.Y, refy).pvalue > 1e-3


def test_continuous_split_outside_small_set(cont):
    s = cont.step_batch(np.array([3.0]), np.array([0.0]), stream(7))
    assert not s.split[0] and not s.coin[0]
