"""Hypothesis strategies for small exact problems."""
import random

from hypothesis import strategies as st

from mhcouplings import fixtures
from mhcouplings.measure import Dist, StateSpace

from fractions import Fraction as F


@st.composite
def dists(draw, n, allow_zero=True):
    w = draw(st.lists(st.integers(0 if allow_zero else 1, 6), min_size=n, max_size=n).filter(sum))
    tot = sum(w)
    return Dist(StateSpace.of_size(n), tuple(F(v, tot) for v in w))


@st.composite
def dist_pairs(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    return draw(dists(n)), draw(dists(n))


@st.composite
def problems(draw, max_n=5, lazy=None, rule=None):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 2**31))
    lz = draw(st.booleans()) if lazy is None else lazy
    rl = draw(st.sampled_from(["mh", "barker", "random"])) if rule is None else rule
    return fixtures.random_problem(n, random.Random(seed), lazy=lz, rule=rl)
