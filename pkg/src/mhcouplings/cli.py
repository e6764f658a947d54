"""``mhcouple`` command-line interface.

Exit codes: 0 success, 2 input/parse error, 3 marginal violation,
4 internal check failure, 5 disagreement between two verification routes.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import fixtures
from .decomposition import decompose
from .io import (
    ProblemFile, ProblemFormatError, dump_acceptance, dump_cam, dump_coupling, dump_problem, entries_dict,
    parse_coupling, parse_problem, read_json, write_json,
)
from .maximality import RouteDisagreement, certify_nonmax_example, check_max_conditions
from .measure import build_maximal_coupling, check_coupling, format_rational, is_maximal_coupling

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_MARGINAL = 3
EXIT_INTERNAL = 4
EXIT_DISAGREE = 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class Output:
    def __init__(self, args):
        self.quiet = getattr(args, "quiet", False)
        self.json = getattr(args, "json", False)

    def line(self, text: str = "") -> None:
        if not (self.quiet or self.json):
            print(text)

    def doc(self, doc: dict) -> None:
        if self.json and not self.quiet:
            print(json.dumps(doc, indent=2, sort_keys=True))


def _load_problem(path) -> ProblemFile:
    try:
        return parse_problem(read_json(path))
    except ProblemFormatError as exc:
        raise CliError(EXIT_PARSE, f"problem file: {exc}") from exc


def _load_coupling(path, pf: ProblemFile):
    try:
        cf = parse_coupling(read_json(path), pf.problem.space)
    except ProblemFormatError as exc:
        raise CliError(EXIT_PARSE, f"coupling file: {exc}") from exc
    P = pf.problem.P
    x, y = cf.pair
    rep = check_coupling(cf.coupling, P[x], P[y])
    if not rep:
        raise CliError(EXIT_MARGINAL, "coupling is not in the Frechet class of (P(x,.), P(y,.)): "
                       + "; ".join(rep.violations))
    return cf


def _pair(text: str, pf: ProblemFile):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise CliError(EXIT_PARSE, f"--pair expects 'x,y', got {text!r}")
    try:
        return tuple(pf.problem.space.index(p) for p in parts)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"--pair: {exc}") from exc


# -- decompose ----------------------------------------------------------------

def cmd_decompose(args, out: Output) -> int:
    pf = _load_problem(args.problem)
    cf = _load_coupling(args.coupling, pf)
    dec = decompose(pf.problem, cf.coupling, cf.pair, exhaustive=args.check_exhaustive)
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    for name, doc in dump_cam(dec.cam).items():
        write_json(dest / f"{name}.json", doc)
    write_json(dest / "qbar.json", dump_coupling(dec.qbar, cf.pair))
    write_json(dest / "acceptance.json", dump_acceptance(dec.acceptance))
    report = {
        "pair": [pf.problem.space.label(i) for i in cf.pair],
        "verify_cam": dec.cam_report.as_dict(),
        "marginal_acceptance": {"ok": dec.marginal_acceptance.ok, "violations": dec.marginal_acceptance.violations},
        "round_trip": "exact" if dec.round_trip_exact else "mismatch",
        "ok": dec.ok,
    }
    write_json(dest / "report.json", report)
    out.doc(report | {"qbar": entries_dict(dec.qbar)})
    out.line(f"decomposition at ({report['pair'][0]},{report['pair'][1]}): "
             f"mechanism {'ok' if dec.cam_report.ok else 'FAILED'}, "
             f"marginal acceptance {'ok' if dec.marginal_acceptance.ok else 'FAILED'}, round trip {report['round_trip']}")
    for k, v in entries_dict(dec.qbar).items():
        out.line(f"  Qbar{k} = {v}")
    if not dec.ok:
        for msg in dec.cam_report.condition1 + dec.cam_report.condition2 + dec.cam_report.condition3:
            print(f"error: {msg}", file=sys.stderr)
        for msg in dec.marginal_acceptance.violations:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


# -- verify-maximal -------------------------------------------------------------

def cmd_verify_maximal(args, out: Output) -> int:
    pf = _load_problem(args.problem)
    cf = _load_coupling(args.coupling, pf)
    problem, (x, y) = pf.problem, cf.pair
    lab = problem.space.labels
    doc: dict = {"pair": [lab[x], lab[y]]}
    verdicts = {}
    if args.via in ("hahn", "both"):
        v = is_maximal_coupling(cf.coupling, problem.P[x], problem.P[y])
        verdicts["hahn"] = v.maximal
        doc["hahn"] = {
            "maximal": v.maximal, "witness_set": sorted(lab[i] for i in v.witness_set),
            "diagonal_mass": format_rational(v.diagonal_mass), "bound": format_rational(v.bound),
            "diagonal_deficit": format_rational(v.deficit),
            "mass_outside_upper": format_rational(v.mass_outside_upper),
            "mass_outside_lower": format_rational(v.mass_outside_lower),
        }
    if args.via in ("conditions", "both"):
        dec = decompose(problem, cf.coupling, cf.pair)
        if not dec.ok:
            raise CliError(EXIT_INTERNAL, "decomposition of the input coupling failed its own checks")
        rep = check_max_conditions(dec.qbar, dec.acceptance, problem.Q, problem.a, problem.P, cf.pair,
                                   cross_check=False)
        verdicts["conditions"] = rep.verdict
        doc["conditions"] = {
            "maximal": rep.verdict, "S_xy": sorted(lab[i] for i in rep.S_xy),
            "results": list(rep.condition_results),
            "violations": [{"condition": v.condition, "proposal": [lab[v.proposal[0]], lab[v.proposal[1]]],
                            "mass": format_rational(v.mass)} for v in rep.violations],
        }
    maximal = next(iter(verdicts.values()))
    doc["verdict"] = "maximal" if maximal else "not maximal"
    out.doc(doc)
    out.line(doc["verdict"])
    if "hahn" in doc:
        h = doc["hahn"]
        out.line(f"  diagonal mass {h['diagonal_mass']} vs bound {h['bound']} "
                 f"(deficit {h['diagonal_deficit']}), Hahn set {{{','.join(h['witness_set'])}}}")
    if "conditions" in doc:
        for v in doc["conditions"]["violations"]:
            out.line(f"  condition {v['condition']} fails at proposal ({v['proposal'][0]},{v['proposal'][1]})"
                     f" with mass {v['mass']}")
    if len(set(verdicts.values())) > 1:
        print(f"error: routes disagree: {verdicts}", file=sys.stderr)
        return EXIT_DISAGREE
    return EXIT_OK


# -- build-maximal ----------------------------------------------------------------

def cmd_build_maximal(args, out: Output) -> int:
    pf = _load_problem(args.problem)
    x, y = _pair(args.pair, pf)
    P = pf.problem.P
    gamma = build_maximal_coupling(P[x], P[y], args.residual)
    if not is_maximal_coupling(gamma, P[x], P[y]).maximal:
        raise CliError(EXIT_INTERNAL, "constructed coupling failed the maximality check")
    doc = dump_coupling(gamma, (x, y))
    if args.out:
        write_json(Path(args.out), doc)
    out.doc(doc)
    for k, v in entries_dict(gamma).items():
        if Fraction(v) != 0:
            out.line(f"{k}: {v}")
    return EXIT_OK


# -- certify-nonmax ---------------------------------------------------------------

def cmd_certify_nonmax(args, out: Output) -> int:
    cert = certify_nonmax_example()
    lab = fixtures.nonmax_problem().space.labels
    reproduced = cert.ok and cert.required_mass == Fraction(1, 2) and cert.available_mass == 0
    doc = {
        "pair": [lab[cert.pair[0]], lab[cert.pair[1]]],
        "target_cell": [lab[cert.target_cell[0]], lab[cert.target_cell[1]]],
        "required_mass": format_rational(cert.required_mass),
        "available_mass": format_rational(cert.available_mass),
        "maximal_proposal_coupling_unique": cert.qbar_unique,
        "extreme_points": 1 if cert.qbar_unique else None,
        "alternative_is_maximal": cert.alt_qbar_maximal,
        "alternative_regenerates": cert.alt_regenerates,
        "alternative_conditions_hold": cert.alt_conditions_hold,
        "reproduced": reproduced,
    }
    out.doc(doc)
    out.line(f"required vs available mass at ({doc['target_cell'][0]},{doc['target_cell'][1]}): "
             f"{doc['required_mass']} vs {doc['available_mass']}")
    out.line(f"maximal proposal coupling unique: {cert.qbar_unique} (1 extreme point)"
             if cert.qbar_unique else "maximal proposal coupling not unique")
    out.line(f"alternative proposal coupling regeneration: {'pass' if cert.alt_regenerates else 'fail'}"
             f" (alternative maximal: {cert.alt_qbar_maximal})")
    out.line("certificate: " + ("reproduced" if reproduced else "MISMATCH"))
    return EXIT_OK if reproduced else EXIT_INTERNAL


# -- simulate -------------------------------------------------------------------

def _parse_target(text: str):
    from .samplers import targets

    name, _, params = text.partition(":")
    kw = {}
    for item in filter(None, params.split(";")):
        k, _, v = item.partition("=")
        kw[k.strip()] = v.strip()
    try:
        if name == "normal":
            return targets.standard_normal(int(kw.get("d", 1)))
        if name == "funnel":
            return targets.funnel(int(kw.get("d", 2)), float(kw.get("scale", 3.0)))
        if name == "gaussian":
            mean = [float(v) for v in kw.get("mean", "0").split(",")]
            var = [float(v) for v in kw.get("var", "1").split(",")]
            if len(var) == 1:
                var = var * len(mean)
            return targets.gaussian(mean, var)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"--target: {exc}") from exc
    raise CliError(EXIT_PARSE, f"unknown target {text!r}; use normal, funnel, gaussian:mean=..;var=.. or finite")


def _parse_point(text: str, dim: int) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"bad point {text!r}") from exc
    if v.size == 1:
        v = np.repeat(v, dim)
    if v.size != dim:
        raise CliError(EXIT_PARSE, f"point {text!r} has {v.size} coordinates, target has {dim}")
    return v


def cmd_simulate(args, out: Output) -> int:
    from .samplers import (
        CouplingConfigError, CouplingSpec, FiniteCoupledSampler, FiniteCouplingSpec, ProposalSpec, check_gradient,
        default_seed, record_trajectory, simulate_finite_meetings, simulate_meetings, stream,
    )
    from .samplers.rng import ROLE_REFERENCE

    seed = args.seed if args.seed is not None else default_seed()
    if args.steps < 1 or args.replicates < 1:
        raise CliError(EXIT_PARSE, "--steps and --replicates must be positive")
    if args.target == "finite":
        if not args.problem:
            raise CliError(EXIT_PARSE, "--target finite needs --problem")
        pf = _load_problem(args.problem)
        try:
            spec = FiniteCouplingSpec(args.coupling, faithful=not args.unfaithful)
        except ValueError as exc:
            raise CliError(EXIT_PARSE, str(exc)) from exc
        space = pf.problem.space
        init = _pair(args.init, pf) if args.init else (0, 1 % len(space))
        sampler = FiniteCoupledSampler(pf.problem, spec)
        result = simulate_finite_meetings(sampler, init, args.steps, args.replicates, seed, workers=args.workers)
        first = result.met_at[0] / max(result.at_risk[0], 1)
        extra = {"init": [space.label(init[0]), space.label(init[1])],
                 "first_step_meeting_frequency": float(first),
                 "first_step_exact": format_rational(sampler.law(init).meeting_probability),
                 "first_step_bound": format_rational(sampler.meeting_bound(init))}
        traj_source = sampler
        traj_kw = {}
    else:
        target = _parse_target(args.target)
        try:
            proposal = ProposalSpec(args.algorithm, args.scale)
            coupling = CouplingSpec.parse(args.coupling)
            if args.unfaithful:
                coupling = CouplingSpec(coupling.proposal_coupling, coupling.acceptance_coupling, False)
            coupling.validate(proposal)
        except (CouplingConfigError, ValueError) as exc:
            raise CliError(EXIT_PARSE, str(exc)) from exc
        if args.algorithm == "mala":
            ok, worst = check_gradient(target, stream(seed, 0, ROLE_REFERENCE))
            if not ok:
                raise CliError(EXIT_INTERNAL, f"gradient check failed (worst relative error {worst:.3g})")
        if args.init:
            x0s, _, y0s = args.init.partition(";")
            init = (_parse_point(x0s, target.dim), _parse_point(y0s, target.dim))
        else:
            init = (np.full(target.dim, -1.0), np.full(target.dim, 2.0))
        result = simulate_meetings(target, proposal, coupling, init, args.steps, args.replicates, seed,
                                   workers=args.workers)
        extra = {"init": [init[0].tolist(), init[1].tolist()]}
        traj_source = target
        traj_kw = {"proposal": proposal, "coupling": coupling}
    if args.out:
        Path(args.out).write_text(result.to_csv())
    if args.trajectory:
        traj = record_trajectory(traj_source, init, args.steps, seed, **traj_kw)
        Path(args.trajectory).write_text(traj.to_jsonl())
    summary = result.summary() | extra
    out.doc(summary)
    mean = summary["mean_meeting_time"]
    med = summary["median_meeting_time"]
    out.line(f"replicates {summary['replicates']}, horizon {summary['horizon']}, "
             f"met {summary['fraction_met']:.4f}")
    out.line(f"meeting time mean {mean if mean is None else f'{mean:.4f}'}, median {med}")
    if summary["bound_violations"] is None:
        out.line("per-step bound violations: n/a (continuous state)")
    else:
        out.line(f"per-step bound violations: {summary['bound_violations']} of {summary['bound_checks']} checks")
    if "first_step_exact" in summary:
        out.line(f"first-step meeting frequency {summary['first_step_meeting_frequency']:.4f} "
                 f"(exact {summary['first_step_exact']}, bound {summary['first_step_bound']})")
    return EXIT_OK


# -- export-fixture -------------------------------------------------------------

def _fixture_docs(name: str) -> dict:
    from .kernels import MhProblem

    def problem_doc(problem: MhProblem, target):
        return dump_problem(ProblemFile(problem, target, "mh"))

    if name == "example1":
        pb = fixtures.example1_problem()
        return {"problem.json": problem_doc(pb, fixtures.example1_target()),
                "coupling.json": dump_coupling(fixtures.run2_pbar(), fixtures.EX1_PAIR)}
    if name == "nonmax":
        pb = fixtures.nonmax_problem()
        return {"problem.json": problem_doc(pb, fixtures.nonmax_target()),
                "coupling.json": dump_coupling(fixtures.nonmax_max_pbar(), fixtures.NONMAX_PAIR)}
    raise CliError(EXIT_PARSE, f"unknown fixture {name!r}")


def cmd_export_fixture(args, out: Output) -> int:
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    for fname, doc in _fixture_docs(args.name).items():
        write_json(dest / fname, doc)
        out.line(str(dest / fname))
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mhcouple", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--quiet", action="store_true", help="print nothing on success")
    mode.add_argument("--json", action="store_true", help="print a JSON document instead of text")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common], help="proposal coupling and acceptance coupling of a kernel coupling")
    p.add_argument("--problem", required=True)
    p.add_argument("--coupling", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--check-exhaustive", action="store_true", help="enumerate every subset in the mechanism check")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify-maximal", parents=[common], help="test whether a kernel coupling is maximal")
    p.add_argument("--problem", required=True)
    p.add_argument("--coupling", required=True)
    p.add_argument("--via", choices=("conditions", "hahn", "both"), default="both")
    p.set_defaults(func=cmd_verify_maximal)

    p = sub.add_parser("build-maximal", parents=[common], help="construct a maximal coupling of P(x,.) and P(y,.)")
    p.add_argument("--problem", required=True)
    p.add_argument("--pair", required=True, help="x,y state labels")
    p.add_argument("--out")
    p.add_argument("--residual", choices=("product", "northwest"), default="product")
    p.set_defaults(func=cmd_build_maximal)

    p = sub.add_parser("simulate", parents=[common], help="meeting times of coupled chains")
    p.add_argument("--target", default="normal", help="normal[:d=..], funnel[:d=..;scale=..], "
                   "gaussian:mean=..;var=.., or finite (with --problem)")
    p.add_argument("--problem", help="problem file for --target finite")
    p.add_argument("--algorithm", choices=("rwm", "mala"), default="rwm")
    p.add_argument("--scale", type=float, default=1.0, help="RWM sigma or MALA tau")
    p.add_argument("--coupling", default="maximal",
                   help="continuous: proposal[+acceptance], e.g. maximal, crn+independent; "
                        "finite: maximal_kernel or proposal+acceptance")
    p.add_argument("--unfaithful", action="store_true", help="do not force chains together after meeting")
    p.add_argument("--init", help="continuous: 'x0;y0' with comma-separated coordinates; finite: 'x,y'")
    p.add_argument("--steps", type=int, default=100, help="horizon")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="defaults to $MHCOUPLINGS_SEED")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV of meeting times")
    p.add_argument("--trajectory", help="JSON-lines dump of replicate 0's path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify-nonmax", parents=[common],
                       help="maximal kernel coupling not generated by a maximal proposal coupling")
    p.set_defaults(func=cmd_certify_nonmax)

    p = sub.add_parser("export-fixture", parents=[common], help="write a built-in problem and coupling as JSON")
    p.add_argument("name", choices=("example1", "nonmax"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_fixture)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    out = Output(args)
    try:
        return args.func(args, out)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except RouteDisagreement as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISAGREE
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
