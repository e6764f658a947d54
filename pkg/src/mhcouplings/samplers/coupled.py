"""Marginal and coupled MH steps on R^d, vectorised over replicates.

Arrays of states have shape ``(R, d)``. The single-state functions
:func:`mh_step` and :func:`coupled_step` wrap the batch versions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .proposals import ProposalSpec, log_accept_ratio
from .targets import TargetModel

PROPOSAL_COUPLINGS = ("independent", "crn", "reflection", "maximal")
ACCEPTANCE_COUPLINGS = ("common_uniform", "independent")


class CouplingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CouplingSpec:
    proposal_coupling: str = "maximal"
    acceptance_coupling: str = "common_uniform"
    faithful: bool = True

    def __post_init__(self):
        if self.proposal_coupling not in PROPOSAL_COUPLINGS:
            raise CouplingConfigError(f"unknown proposal coupling {self.proposal_coupling!r}")
        if self.acceptance_coupling not in ACCEPTANCE_COUPLINGS:
            raise CouplingConfigError(f"unknown acceptance coupling {self.acceptance_coupling!r}")

    def validate(self, proposal: ProposalSpec) -> None:
        if self.proposal_coupling == "reflection" and proposal.kind != "rwm":
            raise CouplingConfigError("reflection coupling needs a spherically symmetric proposal (rwm)")

    @classmethod
    def parse(cls, text: str) -> "CouplingSpec":
        """``"maximal"``, ``"crn+independent"``, ``"reflection+common_uniform+unfaithful"``..."""
        parts = [p for p in text.replace(",", "+").split("+") if p]
        if not parts:
            raise CouplingConfigError("empty coupling spec")
        faithful = True
        if parts[-1] in ("faithful", "unfaithful"):
            faithful = parts.pop() == "faithful"
        acc = parts[1] if len(parts) > 1 else "common_uniform"
        if len(parts) > 2:
            raise CouplingConfigError(f"cannot parse coupling spec {text!r}")
        return cls(parts[0], acc, faithful)

    def label(self) -> str:
        return f"{self.proposal_coupling}+{self.acceptance_coupling}"


@dataclass(frozen=True)
class StepBatch:
    x: np.ndarray
    y: np.ndarray
    xp: np.ndarray
    yp: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    flagged: np.ndarray  # non-finite log density at a proposal

    def record(self, r: int = 0) -> dict:
        return {"x": self.x[r].tolist(), "y": self.y[r].tolist(), "xp": self.xp[r].tolist(),
                "yp": self.yp[r].tolist(), "bx": int(self.bx[r]), "by": int(self.by[r])}


@dataclass(frozen=True)
class MhStep:
    new_state: np.ndarray
    proposal: np.ndarray
    accepted: np.ndarray
    flagged: np.ndarray


def _accept(target, prop, X, Xp, logu):
    lr = log_accept_ratio(target, prop, X, Xp)
    flagged = ~np.isfinite(target.log_density(Xp))
    return logu <= np.minimum(lr, 0.0), flagged


def mh_step_batch(target: TargetModel, prop: ProposalSpec, X: np.ndarray, rng: np.random.Generator) -> MhStep:
    Xp = prop.sample(target, X, rng)
    b, flagged = _accept(target, prop, X, Xp, np.log(rng.random(X.shape[0])))
    return MhStep(np.where(b[:, None], Xp, X), Xp, b, flagged)


def mh_step(target: TargetModel, prop: ProposalSpec, state, rng: np.random.Generator):
    """One MH transition; returns ``(new_state, proposal, accepted)``."""
    X = np.atleast_2d(np.asarray(state, dtype=float))
    s = mh_step_batch(target, prop, X, rng)
    return s.new_state[0], s.proposal[0], bool(s.accepted[0])


def _maximal_proposals(target, prop, X, Y, rng):
    """Coupled rejection sampler for the two Gaussian proposal laws."""
    mx, my = prop.mean(target, X), prop.mean(target, Y)
    sd = prop.sd
    Xp = mx + sd * rng.standard_normal(X.shape)

    def logq(m, Z):
        D = (Z - m) / sd
        return -0.5 * np.sum(D * D, axis=-1)

    Yp = Xp.copy()
    todo = np.log(rng.random(X.shape[0])) + logq(mx, Xp) > logq(my, Xp)
    while np.any(todo):
        idx = np.flatnonzero(todo)
        cand = my[idx] + sd * rng.standard_normal((idx.size, X.shape[1]))
        keep = np.log(rng.random(idx.size)) + logq(my[idx], cand) > logq(mx[idx], cand)
        Yp[idx[keep]] = cand[keep]
        todo[idx[keep]] = False
    return Xp, Yp


def coupled_proposals(target, prop, coupling: CouplingSpec, X, Y, rng):
    kind = coupling.proposal_coupling
    if kind == "maximal":
        return _maximal_proposals(target, prop, X, Y, rng)
    Z = rng.standard_normal(X.shape)
    if kind == "independent":
        Zy = rng.standard_normal(X.shape)
    elif kind == "crn":
        Zy = Z
    else:  # reflection
        diff = X - Y
        norm = np.linalg.norm(diff, axis=1, keepdims=True)
        e = np.divide(diff, norm, out=np.zeros_like(diff), where=norm > 0)
        Zy = Z - 2 * np.sum(e * Z, axis=1, keepdims=True) * e
    sd = prop.sd
    return prop.mean(target, X) + sd * Z, prop.mean(target, Y) + sd * Zy


def coupled_step_batch(target: TargetModel, prop: ProposalSpec, coupling: CouplingSpec, X: np.ndarray,
                       Y: np.ndarray, rng: np.random.Generator) -> StepBatch:
    coupling.validate(prop)
    R = X.shape[0]
    Xp, Yp = coupled_proposals(target, prop, coupling, X, Y, rng)
    ux = np.log(rng.random(R))
    uy = ux if coupling.acceptance_coupling == "common_uniform" else np.log(rng.random(R))
    bx, fx = _accept(target, prop, X, Xp, ux)
    by, fy = _accept(target, prop, Y, Yp, uy)
    if coupling.faithful:
        same = np.all(X == Y, axis=1)
        if np.any(same):
            Yp = np.where(same[:, None], Xp, Yp)
            by = np.where(same, bx, by)
            fy = np.where(same, fx, fy)
    Xn = np.where(bx[:, None], Xp, X)
    Yn = np.where(by[:, None], Yp, Y)
    return StepBatch(X, Y, Xp, Yp, bx, by, Xn, Yn, fx | fy)


def coupled_step(target: TargetModel, prop: ProposalSpec, coupling: CouplingSpec, pair,
                 rng: np.random.Generator) -> dict:
    x, y = pair
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    s = coupled_step_batch(target, prop, coupling, X, Y, rng)
    rec = s.record(0)
    rec.update(X=s.X[0].tolist(), Y=s.Y[0].tolist())
    return rec
