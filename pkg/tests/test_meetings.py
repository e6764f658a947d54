import json

import numpy as np
import pytest

from mhcouplings import fixtures
from mhcouplings.samplers import (
    CouplingSpec, FiniteCoupledSampler, FiniteCouplingSpec, ProposalSpec, record_trajectory, simulate_finite_meetings,
    simulate_meetings, standard_normal,
)
from mhcouplings.samplers.meetings import NEVER

N1 = standard_normal(1)
RWM = ProposalSpec("rwm", 1.0)


def test_meeting_times_do_not_depend_on_workers():
    args = (N1, RWM, CouplingSpec("maximal"), ([-1.0], [2.0]), 50, 600, 7)
    a = simulate_meetings(*args, workers=1)
    b = simulate_meetings(*args, workers=3)
    assert np.array_equal(a.meeting_times, b.meeting_times)
    assert a.to_csv() == b.to_csv()


def test_seed_changes_paths():
    a = simulate_meetings(N1, RWM, CouplingSpec("maximal"), ([-1.0], [2.0]), 30, 300, 1)
    b = simulate_meetings(N1, RWM, CouplingSpec("maximal"), ([-1.0], [2.0]), 30, 300, 2)
    assert not np.array_equal(a.meeting_times, b.meeting_times)


def test_crn_never_meets_exactly():
    res = simulate_meetings(N1, RWM, CouplingSpec("crn"), ([-1.0], [2.0]), 20, 200, 3)
    assert not res.met.any()
    assert np.all(res.meeting_times == NEVER)


def test_faithful_chains_stay_together():
    res = simulate_meetings(N1, RWM, CouplingSpec("maximal"), ([-1.0], [2.0]), 60, 512, 4)
    assert res.faithful_breaks == 0
    assert res.met.mean() > 0.9


def test_survival_curve():
    res = simulate_meetings(N1, RWM, CouplingSpec("maximal"), ([-1.0], [2.0]), 40, 512, 5)
    s = res.survival()
    assert s[0] == 1.0 and np.all(np.diff(s) <= 0)
    mt = res.meeting_times
    assert s[10] == pytest.approx(np.mean((mt == NEVER) | (mt > 10)))
    assert res.at_risk[0] == 512
    assert res.met_at.sum() == res.met.sum()


def test_start_together():
    res = simulate_meetings(N1, RWM, CouplingSpec("independent"), ([0.5], [0.5]), 5, 10, 6)
    assert np.all(res.meeting_times == 0)


def test_csv_layout():
    res = simulate_meetings(N1, RWM, CouplingSpec("crn"), ([-1.0], [2.0]), 3, 4, 6)
    lines = res.to_csv().splitlines()
    assert lines[0] == "replicate,meeting_time,met,horizon"
    assert lines[1] == "0,,0,3"


def test_finite_meeting_bound_holds():
    pb = fixtures.example1_problem()
    for name in ("maximal_kernel", "independent+independent"):
        res = simulate_finite_meetings(FiniteCoupledSampler(pb, FiniteCouplingSpec(name)), (0, 1), 5, 5000, 8)
        assert res.bound_checked > 0 and res.bound_violations == 0
    res = simulate_finite_meetings(FiniteCoupledSampler(pb, FiniteCouplingSpec()), (0, 1), 1, 20_000, 9)
    assert abs(res.step_frequencies()[0] - 0.75) < 4 * np.sqrt(0.75 * 0.25 / 20_000)


def test_trajectory_records():
    traj = record_trajectory(N1, ([-1.0], [2.0]), 50, 10, RWM, CouplingSpec("maximal"), stop_at_meeting=True)
    assert traj.meeting_time == len(traj.steps)
    rows = [json.loads(line) for line in traj.to_jsonl().splitlines()]
    assert rows[0]["t"] == 1 and set(rows[0]) >= {"x", "y", "xp", "yp", "bx", "by"}
    last = rows[-1]
    nx = last["xp"] if last["bx"] else last["x"]
    ny = last["yp"] if last["by"] else last["y"]
    assert nx == ny


def test_finite_trajectory():
    sampler = FiniteCoupledSampler(fixtures.example1_problem(), FiniteCouplingSpec())
    traj = record_trajectory(sampler, (0, 1), 10, 11)
    assert len(traj.steps) == 10 and all(isinstance(s["xp"], int) for s in traj.steps)


def test_bad_arguments():
    with pytest.raises(ValueError):
        simulate_meetings(N1, RWM, CouplingSpec(), ([0.0], [1.0]), 0, 10, 1)
