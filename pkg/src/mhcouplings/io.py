"""JSON encodings for problems and couplings. Rationals travel as strings."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from .decomposition import AcceptanceCoupling, CAM
from .kernels import AcceptanceMatrix, FiniteKernel, MhProblem, barker_acceptance, mh_acceptance
from .measure import Dist, JointDist, StateSpace, as_rational, format_rational


class ProblemFormatError(ValueError):
    pass


def _parse(v, where: str) -> Fraction:
    if isinstance(v, float):
        raise ProblemFormatError(f"{where}: floats are not accepted, write rationals as strings")
    try:
        return as_rational(v)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{where}: {exc}") from exc


def _matrix(rows, n: int, where: str) -> list[list[Fraction]]:
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise ProblemFormatError(f"{where}: expected an {n}x{n} array")
    return [[_parse(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(rows)]


@dataclass(frozen=True)
class ProblemFile:
    problem: MhProblem
    target: Optional[Dist]
    rule: str


def parse_problem(doc: dict) -> ProblemFile:
    try:
        space = StateSpace(tuple(doc["states"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"states: {exc}") from exc
    n = len(space)
    rows = _matrix(doc.get("proposal"), n, "proposal")
    for i, r in enumerate(rows):
        if sum(r) != 1:
            raise ProblemFormatError(f"proposal row {space.label(i)} sums to {sum(r)}, not 1")
    try:
        Q = FiniteKernel.from_rows(space, rows)
    except ValueError as exc:
        raise ProblemFormatError(f"proposal: {exc}") from exc
    target = None
    if doc.get("target") is not None:
        t = doc["target"]
        if not isinstance(t, list) or len(t) != n:
            raise ProblemFormatError(f"target: expected {n} entries")
        try:
            target = Dist(space, tuple(_parse(v, "target") for v in t))
        except ValueError as exc:
            raise ProblemFormatError(f"target: {exc}") from exc
    acc = doc.get("acceptance") or {"rule": "mh"}
    rule = acc.get("rule", "mh")
    try:
        if rule in ("mh", "barker"):
            if target is None:
                raise ProblemFormatError(f"acceptance rule {rule!r} needs a target")
            a = (mh_acceptance if rule == "mh" else barker_acceptance)(target, Q)
        elif rule == "explicit":
            a = AcceptanceMatrix(space, tuple(map(tuple, _matrix(acc.get("matrix"), n, "acceptance.matrix"))))
        else:
            raise ProblemFormatError(f"unknown acceptance rule {rule!r}")
    except ProblemFormatError:
        raise
    except ValueError as exc:
        raise ProblemFormatError(f"acceptance: {exc}") from exc
    return ProblemFile(MhProblem(Q, a), target, rule)


def dump_problem(pf: ProblemFile) -> dict:
    space = pf.problem.space
    doc: dict[str, Any] = {
        "states": list(space.labels),
        "proposal": [[format_rational(v) for v in r] for r in pf.problem.Q.matrix()],
        "target": [format_rational(v) for v in pf.target] if pf.target is not None else None,
        "acceptance": {"rule": pf.rule},
    }
    if pf.rule == "explicit":
        doc["acceptance"]["matrix"] = [[format_rational(v) for v in r] for r in pf.problem.a.a]
    return doc


@dataclass(frozen=True)
class CouplingFile:
    pair: tuple[int, int]
    coupling: JointDist


def parse_coupling(doc: dict, space: StateSpace) -> CouplingFile:
    try:
        xl, yl = doc["pair"]
        pair = (space.index(xl), space.index(yl))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"pair: {exc}") from exc
    n = len(space)
    m = _matrix(doc.get("matrix"), n, "matrix")
    orientation = doc.get("orientation", "x-rows")
    if orientation == "paper":
        m = [[m[j][i] for j in range(n)] for i in range(n)]
    elif orientation != "x-rows":
        raise ProblemFormatError(f"unknown orientation {orientation!r}")
    try:
        return CouplingFile(pair, JointDist(space, tuple(map(tuple, m))))
    except ValueError as exc:
        raise ProblemFormatError(f"matrix: {exc}") from exc


def entries_dict(gamma: JointDist) -> dict[str, str]:
    lab = gamma.space.labels
    return {f"({lab[i]},{lab[j]})": format_rational(gamma[i, j])
            for j in range(gamma.n) for i in range(gamma.n)}


def dump_coupling(gamma: JointDist, pair: tuple[int, int]) -> dict:
    lab = gamma.space.labels
    return {
        "pair": [lab[pair[0]], lab[pair[1]]],
        "states": list(lab),
        "orientation": "x-rows",
        "matrix": [[format_rational(v) for v in row] for row in gamma.weights],
        "entries": entries_dict(gamma),
    }


def dump_acceptance(B: AcceptanceCoupling) -> dict:
    lab = B.space.labels
    cells = {}
    for i in range(len(lab)):
        for j in range(len(lab)):
            cells[f"({lab[i]},{lab[j]})"] = {
                "p11": format_rational(B[i, j][0]), "p10": format_rational(B[i, j][1]),
                "p01": format_rational(B[i, j][2]), "p00": format_rational(B[i, j][3]),
                "off_support": (i, j) in B.off_support,
            }
    return {"pair": [lab[B.pair[0]], lab[B.pair[1]]], "states": list(lab), "cells": cells}


def write_json(path: Path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFormatError(f"{path}: {exc}") from exc


def dump_cam(cam: CAM) -> dict[str, dict]:
    return {name: dump_coupling(c, cam.pair)
            for name, c in zip(("phi11", "phi10", "phi01", "phi00"), cam.components)}
