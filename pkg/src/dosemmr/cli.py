"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 inconsistent evidence,
refuted restriction, or a failed illustration check.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .decision import (
    DecisionError,
    allocation_mmr,
    clinical_mmr,
)
from .identification import (
    Consistent,
    IdentificationError,
    InconsistentEvidence,
    Restrictions,
    RestrictionRefuted,
    bound_net_welfare,
    bound_outcome_prob,
    build_constraints,
    check_consistency,
    check_factorization,
    independence_bounds,
)
from .illustration import WELFARE, run_illustration
from .model import CELLS, ModelError
from .problem import RESULT_SCHEMA, ProblemError, dumps_result, load_problem
from .trial import IngestionError, ingest, read_records, repair_evidence, simulate_regret

EXIT_OK, EXIT_USAGE, EXIT_INCONSISTENT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _iv(iv):
    return [float(iv.lo), float(iv.hi)]


def _document(command, problem_echo):
    return {"schema": RESULT_SCHEMA, "command": command, "input": problem_echo, "diagnostics": {}}


def _evidence_or_usage(problem):
    if problem.evidence is None:
        raise UsageError("problem has no trial arms or records")
    return problem.evidence


def _system(problem):
    evidence = _evidence_or_usage(problem)
    linear = Restrictions(
        no_ae_at_zero=problem.restrictions.no_ae_at_zero,
        concurrent_thresholds=problem.restrictions.concurrent_thresholds,
    )
    cs = build_constraints(evidence, linear, problem.grid)
    if not cs.feasible and problem.options["repair"]:
        cs = build_constraints(repair_evidence(evidence, problem.grid, linear), linear, problem.grid)
    return cs


# --------------------------------------------------------------------------
# Commands: each returns (document, exit code)
# --------------------------------------------------------------------------


def cmd_check(problem):
    doc = _document("check", problem.echo)
    evidence = _evidence_or_usage(problem)
    block = {}
    if problem.restrictions.independence:
        try:
            check_factorization(evidence)
            block["independence"] = "not refuted"
        except RestrictionRefuted as exc:
            block.update(consistent=False, refuted=str(exc), violations=[])
            doc["consistency"] = block
            return doc, EXIT_INCONSISTENT
    linear = Restrictions(
        no_ae_at_zero=problem.restrictions.no_ae_at_zero,
        concurrent_thresholds=problem.restrictions.concurrent_thresholds,
    )
    verdict = check_consistency(evidence, linear, problem.grid)
    if isinstance(verdict, Consistent):
        block.update(consistent=True, witness=verdict.witness.mass.tolist())
        code = EXIT_OK
    else:
        block.update(
            consistent=False,
            certificate=None if verdict.certificate is None else verdict.certificate.tolist(),
            violations=list(verdict.violated_necessary_conditions),
        )
        code = EXIT_INCONSISTENT
    doc["consistency"] = block
    doc["diagnostics"]["rank"] = build_constraints(evidence, linear, problem.grid).rank
    return doc, code


def _doses(problem, dose):
    if dose in (None, "all"):
        return list(problem.grid.doses)
    try:
        return [problem.grid.check_dose(int(dose))]
    except (ValueError, ModelError) as exc:
        raise UsageError(f"bad dose {dose!r}: {exc}") from None


def cmd_bounds(problem, dose=None):
    doc = _document("bounds", problem.echo)
    doses = _doses(problem, dose)
    evidence = _evidence_or_usage(problem)
    if problem.restrictions.independence:
        rows = []
        for t in doses:
            b = independence_bounds(evidence, problem.grid, t, problem.welfare, problem.cost)
            rows.append(
                {
                    "dose": t,
                    "disease": _iv(b.disease),
                    "adverse": _iv(b.adverse),
                    "net_welfare": _iv(b.welfare),
                }
            )
        doc["independence_bounds"] = rows
        doc["diagnostics"]["lp_solves"] = 0
    else:
        cs = _system(problem)
        rows = []
        for t in doses:
            cells = [
                {"cell": list(cell), "interval": _iv(bound_outcome_prob(cs, t, cell))}
                for cell in CELLS
            ]
            rows.append(
                {
                    "dose": t,
                    "cells": cells,
                    "net_welfare": _iv(bound_net_welfare(cs, t, problem.welfare, problem.cost)),
                }
            )
        doc["bounds"] = rows
        doc["diagnostics"].update(lp_solves=10 * len(doses), rank=cs.rank, rows=int(cs.matrix.shape[0]))
    return doc, EXIT_OK


def cmd_decide(problem, mode="clinical"):
    doc = _document("decide", problem.echo)
    if problem.restrictions.independence:
        raise UsageError("minimax-regret decisions under independence are not supported")
    cs = _system(problem)
    w, g = problem.welfare, problem.cost
    omega = [_iv(bound_net_welfare(cs, t, w, g)) for t in problem.grid.doses]
    if mode == "clinical":
        dec = clinical_mmr(cs, w, g)
        block = {
            "mode": "clinical",
            "chosen_dose": dec.chosen_dose,
            "mmr_value": dec.mmr_value,
            "per_dose_max_regret": dec.per_dose_max_regret.tolist(),
            "per_pair_worst_case": dec.per_pair_worst_case.tolist(),
            "raw_per_dose_max_regret": dec.raw_per_dose.tolist(),
        }
    elif mode in ("allocate", "allocation"):
        dec = allocation_mmr(
            cs, w, g,
            resolution=int(problem.options["grid"]),
            refine=bool(problem.options["refine"]),
            budget=int(problem.options["budget"]),
        )
        span = max(hi for _, hi in omega) - min(lo for lo, _ in omega)
        block = {
            "mode": "allocate",
            "method": dec.method,
            "allocation": dec.allocation.delta.tolist(),
            "mmr_value": dec.mmr_value,
            "raw_mmr_value": dec.raw_value,
            "grid_step": dec.grid_step,
            "value_tolerance": span * dec.grid_step,
            "grid_points": dec.grid_points,
        }
    else:
        raise UsageError(f"unknown mode {mode!r}")
    block["net_welfare_bounds"] = omega
    doc["decision"] = block
    doc["diagnostics"].update(lp_solves=dec.lp_solves + 2 * len(omega), rank=cs.rank)
    return doc, EXIT_OK


def cmd_simulate(problem, mode="clinical", replications=None, seed=None):
    doc = _document("simulate", problem.echo)
    if problem.true_q is None or problem.design is None:
        raise UsageError("simulate needs true_q and design in the problem file")
    if problem.restrictions.independence:
        raise UsageError("minimax-regret decisions under independence are not supported")
    R = replications or problem.replications or 100
    seed = problem.options["seed"] if seed is None else seed
    report = simulate_regret(
        problem.true_q,
        problem.design,
        problem.welfare,
        problem.cost,
        problem.restrictions,
        mode,
        R,
        int(seed),
        resolution=int(problem.options["grid"]),
        refine=bool(problem.options["refine"]),
        repair=bool(problem.options["repair"]),
    )
    doc["simulation"] = report.to_dict()
    return doc, EXIT_OK


def cmd_illustrate(welfare=WELFARE):
    checks = run_illustration(welfare)
    doc = _document("illustrate", {"embedded": "T=2, arms at doses 0 and 2", "welfare": list(welfare)})
    doc["checks"] = [c.to_dict() for c in checks]
    doc["passed"] = all(c.passed for c in checks)
    return doc, EXIT_OK if doc["passed"] else EXIT_INCONSISTENT


# --------------------------------------------------------------------------
# Text rendering (display rounding lives only here)
# --------------------------------------------------------------------------


def _fmt_iv(iv, digits=4):
    return f"[{iv[0]:.{digits}f}, {iv[1]:.{digits}f}]"


def render_text(doc) -> str:
    lines = [f"dosemmr {doc['command']}"]
    if "consistency" in doc:
        c = doc["consistency"]
        if c["consistent"]:
            lines.append("consistent")
        else:
            lines.append("INCONSISTENT")
            if c.get("refuted"):
                lines.append(f"  {c['refuted']}")
            for v in c.get("violations", []):
                lines.append(f"  violated: {v}")
    for row in doc.get("bounds", []):
        lines.append(f"dose {row['dose']}:")
        for cell in row["cells"]:
            d, e = cell["cell"]
            lines.append(f"  p[d={d}, e={e}] in {_fmt_iv(cell['interval'])}")
        lines.append(f"  net welfare in {_fmt_iv(row['net_welfare'])}")
    for row in doc.get("independence_bounds", []):
        lines.append(f"dose {row['dose']} (independent thresholds):")
        lines.append(f"  p[d=1] in {_fmt_iv(row['disease'])}")
        lines.append(f"  p[e=1] in {_fmt_iv(row['adverse'])}")
        lines.append(f"  net welfare in {_fmt_iv(row['net_welfare'])}")
    if "decision" in doc:
        d = doc["decision"]
        for t, iv in enumerate(d["net_welfare_bounds"]):
            lines.append(f"  omega_{t} in {_fmt_iv(iv)}")
        if d["mode"] == "clinical":
            lines.append(f"MMR clinical dose: {d['chosen_dose']}  (MMR value {d['mmr_value']:.3f})")
            regrets = ", ".join(f"{r:.3f}" for r in d["per_dose_max_regret"])
            lines.append(f"  max regret by dose: {regrets}")
        else:
            alloc = ", ".join(f"{a:.4f}" for a in d["allocation"])
            lines.append(f"MMR allocation: ({alloc})  (MMR value {d['mmr_value']:.3f}, {d['method']})")
            if d["method"] == "grid":
                lines.append(f"  grid step {d['grid_step']:g}, value tolerance {d['value_tolerance']:.3g}")
    if "simulation" in doc:
        s = doc["simulation"]
        lines.append(f"replications {s['replications']} (seed {s['seed']}), inconsistent {s['inconsistent']}")
        for k, v in s["summary"].items():
            lines.append(f"  regret {k}: {v:.3f}")
        for k, v in s["frequencies"].items():
            lines.append(f"  decision {k}: {v:.3f}")
    if "checks" in doc:
        for c in doc["checks"]:
            status = "PASS" if c["passed"] else "FAIL"
            lines.append(
                f"{status}  {c['name']}: expected {c['expected']:.4f}, got {c['actual']:.4f} "
                f"(tol {c['tolerance']:g})"
            )
        lines.append("ALL PASS" if doc["passed"] else "SOME CHECKS FAILED")
    if "seconds" in doc.get("diagnostics", {}):
        lines.append(f"({doc['diagnostics']['seconds']:.3f} s)")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dosemmr", description="Dose choice under monotone dose response.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--output", "-o", help="also write the JSON result document here")
    common.add_argument("--no-timings", action="store_true", help="omit wall-clock timings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="consistency of evidence and restrictions")
    p.add_argument("problem")
    p = sub.add_parser("bounds", parents=[common], help="sharp bounds at one or all doses")
    p.add_argument("problem")
    p.add_argument("--dose", default="all")
    p = sub.add_parser("decide", parents=[common], help="minimax-regret dose or allocation")
    p.add_argument("problem")
    p.add_argument("--mode", choices=("clinical", "allocate"), default="clinical")
    p.add_argument("--grid", type=int, help="allocation grid resolution M")
    p.add_argument("--refine", action="store_true", help="coarse-to-fine allocation grid")
    p.add_argument("--records", help="subject records (dose,d,e[,id]) replacing the arms")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo regret of as-if decisions")
    p.add_argument("problem")
    p.add_argument("--mode", choices=("clinical", "allocate"), default="clinical")
    p.add_argument("--replications", "-R", type=int)
    p.add_argument("--seed", type=int)
    p = sub.add_parser("illustrate", parents=[common], help="reproduce the worked example")
    p.add_argument("--perturb-welfare", type=float, nargs=4, help=argparse.SUPPRESS)
    return parser


def _load(args):
    problem = load_problem(args.problem)
    if getattr(args, "grid", None):
        problem.options["grid"] = args.grid
        problem.echo["options"]["grid"] = args.grid
    if getattr(args, "refine", False):
        problem.options["refine"] = True
        problem.echo["options"]["refine"] = True
    if getattr(args, "records", None):
        problem.evidence = ingest(read_records(args.records), problem.grid)
        problem.echo["records"] = str(args.records)
        problem.echo["arms"] = [
            {"dose": a.dose, "counts": [int(round(v * a.n)) for v in a.outcomes.p]}
            for a in problem.evidence.arms
        ]
    return problem


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        if args.command == "illustrate":
            welfare = tuple(args.perturb_welfare) if args.perturb_welfare else WELFARE
            doc, code = cmd_illustrate(welfare)
        else:
            problem = _load(args)
            if args.command == "check":
                doc, code = cmd_check(problem)
            elif args.command == "bounds":
                doc, code = cmd_bounds(problem, args.dose)
            elif args.command == "decide":
                doc, code = cmd_decide(problem, args.mode)
            else:
                doc, code = cmd_simulate(problem, args.mode, args.replications, args.seed)
    except (UsageError, ProblemError, IngestionError, ModelError, DecisionError) as exc:
        print(f"dosemmr: error: {exc}", file=stderr)
        return EXIT_USAGE
    except InconsistentEvidence as exc:
        print(f"dosemmr: inconsistent evidence: {exc}", file=stderr)
        for v in exc.violations:
            print(f"  violated: {v}", file=stderr)
        return EXIT_INCONSISTENT
    except RestrictionRefuted as exc:
        print(f"dosemmr: {exc}", file=stderr)
        return EXIT_INCONSISTENT
    except IdentificationError as exc:
        print(f"dosemmr: error: {exc}", file=stderr)
        return EXIT_USAGE
    if not args.no_timings:
        doc["diagnostics"]["seconds"] = round(time.perf_counter() - started, 6)
    text = dumps_result(doc)
    if args.output:
        Path(args.output).write_text(text)
    stdout.write(text if args.format == "json" else render_text(doc))
    return code


def main() -> None:
    sys.exit(run())
