"""Meeting-time simulation for coupled chains.

Replicates are advanced in blocks of ``BLOCK`` with one Philox stream per
block, keyed by ``(seed, block)``. A replicate's path depends only on the
seed and its block, so results do not change with the number of workers.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .coupled import CouplingSpec, coupled_step_batch
from .finite import FiniteCoupledSampler
from .proposals import ProposalSpec
from .rng import ROLE_CHAIN, stream
from .targets import TargetModel

BLOCK = 256
NEVER = -1


@dataclass
class CoupledTrajectory:
    """Paired path of one replicate; ``meeting_time`` is ``None`` if no meeting within the horizon."""

    steps: list[dict] = field(default_factory=list)
    meeting_time: Optional[int] = None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s, sort_keys=True) + "\n" for s in self.steps)


@dataclass
class MeetingResult:
    meeting_times: np.ndarray  # NEVER where no meeting
    horizon: int
    # per step t = 1..horizon: pairs apart before the step, and how many met at it
    at_risk: np.ndarray
    met_at: np.ndarray
    faithful_breaks: int = 0
    bound_violations: Optional[int] = None
    bound_checked: int = 0

    @property
    def replicates(self) -> int:
        return self.meeting_times.size

    @property
    def met(self) -> np.ndarray:
        return self.meeting_times != NEVER

    def survival(self) -> np.ndarray:
        """``P(tau > t)`` for ``t = 0..horizon``."""
        t = np.arange(self.horizon + 1)
        mt = np.where(self.met, self.meeting_times, self.horizon + 1)
        return (mt[None, :] > t[:, None]).mean(axis=1)

    def step_frequencies(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.at_risk > 0, self.met_at / np.maximum(self.at_risk, 1), np.nan)

    def summary(self) -> dict:
        met = self.met
        mt = self.meeting_times[met]
        return {
            "replicates": int(self.replicates),
            "horizon": int(self.horizon),
            "fraction_met": float(met.mean()),
            "mean_meeting_time": float(mt.mean()) if mt.size else None,
            "median_meeting_time": float(np.median(mt)) if mt.size else None,
            "faithful_breaks": int(self.faithful_breaks),
            "bound_violations": self.bound_violations,
            "bound_checks": int(self.bound_checked),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "meeting_time", "met", "horizon"])
        for r, t in enumerate(self.meeting_times):
            w.writerow([r, int(t) if t != NEVER else "", int(t != NEVER), self.horizon])
        return buf.getvalue()


def _blocks(replicates: int):
    for b, start in enumerate(range(0, replicates, BLOCK)):
        yield b, start, min(BLOCK, replicates - start)


def _run_block(step, init, size, horizon, rng, check_bound=None):
    X = np.repeat(np.asarray(init[0])[None, ...], size, axis=0)
    Y = np.repeat(np.asarray(init[1])[None, ...], size, axis=0)
    same = (lambda A, B: np.all(A == B, axis=1)) if X.ndim == 2 else (lambda A, B: A == B)
    times = np.full(size, NEVER, dtype=np.int64)
    together = same(X, Y)
    times[together] = 0
    at_risk = np.zeros(horizon, dtype=np.int64)
    met_at = np.zeros(horizon, dtype=np.int64)
    breaks = 0
    groups = {}
    for t in range(1, horizon + 1):
        apart = ~together
        Xa, Ya = X[apart], Y[apart]
        X, Y = step(X, Y, rng)
        now = same(X, Y)
        if check_bound is not None:
            check_bound(t, Xa, Ya, now[apart], groups)
        breaks += int(np.sum(together & ~now))
        new = apart & now
        at_risk[t - 1] = apart.sum()
        met_at[t - 1] = new.sum()
        times[new] = t
        together = together | now
        if together.all() and check_bound is None:
            at_risk[t:] = 0
            break
    return times, at_risk, met_at, breaks, groups


def _collect(parts, replicates, horizon) -> MeetingResult:
    times = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, np.int64)
    at_risk = sum((p[1] for p in parts), np.zeros(horizon, np.int64))
    met_at = sum((p[2] for p in parts), np.zeros(horizon, np.int64))
    return MeetingResult(times, horizon, at_risk, met_at, sum(p[3] for p in parts))


def _map_blocks(fn, replicates, workers):
    jobs = list(_blocks(replicates))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def simulate_meetings(target: TargetModel, proposal: ProposalSpec, coupling: CouplingSpec, init,
                      horizon: int, replicates: int, seed: int, workers: int = 1) -> MeetingResult:
    """Continuous-state chains; meeting means exact equality of all coordinates."""
    if horizon < 1 or replicates < 1:
        raise ValueError("horizon and replicates must be positive")
    coupling.validate(proposal)
    x0 = np.atleast_1d(np.asarray(init[0], float))
    y0 = np.atleast_1d(np.asarray(init[1], float))

    def step(X, Y, rng):
        s = coupled_step_batch(target, proposal, coupling, X, Y, rng)
        return s.X, s.Y

    def block(b, start, size):
        return _run_block(step, (x0, y0), size, horizon, stream(seed, b, ROLE_CHAIN))

    return _collect(_map_blocks(block, replicates, workers), replicates, horizon)


def simulate_finite_meetings(sampler: FiniteCoupledSampler, init, horizon: int, replicates: int, seed: int,
                             workers: int = 1, min_group: int = 100) -> MeetingResult:
    """Finite-state chains. Each step's meeting frequency is compared, per current
    pair with at least ``min_group`` replicates, with the exact bound ``1 - TV`` plus 4 SE."""
    if horizon < 1 or replicates < 1:
        raise ValueError("horizon and replicates must be positive")
    n = sampler.problem.n
    bounds = {}

    def bound(pair):
        if pair not in bounds:
            bounds[pair] = float(sampler.meeting_bound(pair))
        return bounds[pair]

    def step(X, Y, rng):
        s = sampler.step_batch(X, Y, rng)
        return s.X, s.Y

    def check(t, Xa, Ya, met, groups):
        codes = Xa * n + Ya
        for code in np.unique(codes):
            sel = codes == code
            groups[(int(code) // n, int(code) % n, t)] = (int(sel.sum()), int(met[sel].sum()))

    def block(b, start, size):
        return _run_block(step, (int(init[0]), int(init[1])), size, horizon, stream(seed, b, ROLE_CHAIN), check)

    parts = _map_blocks(block, replicates, workers)
    result = _collect(parts, replicates, horizon)
    # merge (pair, step) counts over blocks, then test
    merged: dict = {}
    for p in parts:
        for key, (c, h) in p[4].items():
            c0, h0 = merged.get(key, (0, 0))
            merged[key] = (c0 + c, h0 + h)
    violations = checked = 0
    for (x, y, _t), (c, h) in merged.items():
        if c < min_group:
            continue
        b = bound((x, y))
        checked += 1
        se = np.sqrt(max(b * (1 - b), 1e-12) / c)
        if h / c > b + 4 * se:
            violations += 1
    result.bound_violations = violations
    result.bound_checked = checked
    return result


def record_trajectory(target_or_sampler: Union[FiniteCoupledSampler, TargetModel], init, horizon: int, seed: int,
                      proposal: Optional[ProposalSpec] = None, coupling: Optional[CouplingSpec] = None,
                      stop_at_meeting: bool = False) -> CoupledTrajectory:
    """Single-replicate path with full step records."""
    rng = stream(seed, 0, ROLE_CHAIN)
    traj = CoupledTrajectory()
    if isinstance(target_or_sampler, FiniteCoupledSampler):
        X, Y = np.array([int(init[0])]), np.array([int(init[1])])
        stepper = lambda X, Y: target_or_sampler.step_batch(X, Y, rng)
    else:
        X = np.atleast_2d(np.asarray(init[0], float))
        Y = np.atleast_2d(np.asarray(init[1], float))
        stepper = lambda X, Y: coupled_step_batch(target_or_sampler, proposal, coupling, X, Y, rng)
    for t in range(1, horizon + 1):
        s = stepper(X, Y)
        rec = s.record(0)
        rec["t"] = t
        traj.steps.append(rec)
        X, Y = s.X, s.Y
        if traj.meeting_time is None and np.array_equal(X[0], Y[0]):
            traj.meeting_time = t
            if stop_at_meeting:
                break
    return traj
