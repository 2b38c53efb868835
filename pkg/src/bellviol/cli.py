"""``bellviol`` command line.

Every subcommand writes ``{"manifest": ..., "result": ...}`` JSON (or a CSV
table plus a ``<output>.manifest.json`` sidecar). Exit codes: 0 success,
2 invalid input, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bounds_lab import (
    BOUNDS,
    ghz_state,
    ghz_violation_experiment,
    matrix_unit_family,
    rc_norm,
    rc_terms,
    sqrt_d_envelope,
)
from .classical_value import classical_value_exact, classical_value_heuristic
from .comm_game import (
    binarize,
    classical_spec,
    exact_success,
    quantum_spec_from_report,
    ratio_check,
    simulate_game,
)
from .functionals import builtin_functional
from .noise_robustness import noisy_violation
from .quantum_value import SeesawConfig, ViolationReport, seesaw, verify_report
from .random_states import UnitaryFamily, chevet_montecarlo, tripartite_state
from .tensor_core import BellFunctional, QuantumState, ValidationError, reduced_density

logger = logging.getLogger("bellviol")

SUBCOMMANDS = ("classical", "quantum", "randstate", "chevet", "ghz-bound", "rc-check", "noise", "ccgame", "builtin")


def to_builtin(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj: Any) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(to_builtin(obj), indent=1, sort_keys=True)


def payload_digest(result: Any) -> str:
    return hashlib.sha256(json.dumps(to_builtin(result), sort_keys=True).encode("utf-8")).hexdigest()


def _load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from exc


def _unwrap(doc: Any, key: str | None = None) -> Any:
    """Accept either a bare object or one of our ``{"manifest", "result"}`` documents."""
    if isinstance(doc, dict) and "result" in doc and "manifest" in doc:
        doc = doc["result"]
    if key is not None and isinstance(doc, dict) and key in doc:
        doc = doc[key]
    return doc


def load_functional(args: argparse.Namespace) -> BellFunctional:
    if getattr(args, "builtin", None):
        return builtin_functional(args.builtin)
    if not getattr(args, "input", None):
        raise ValidationError("provide --input T.json or --builtin NAME")
    return BellFunctional.from_json(_unwrap(_load_json(args.input), "functional"))


def load_report(path: str) -> ViolationReport:
    return ViolationReport.from_json(_unwrap(_load_json(path)))


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"--dims must be comma-separated integers, got {text!r}") from exc
    return dims


def _threads(args: argparse.Namespace) -> int:
    return args.threads if args.threads and args.threads > 0 else (os.cpu_count() or 1)


# subcommand implementations return (result, csv_rows or None, summary line)

def cmd_builtin(args):
    T = builtin_functional(args.name)
    return T.to_json(), None, f"{args.name}: settings {list(T.settings)}"


def cmd_classical(args):
    T = load_functional(args)
    if args.heuristic:
        res = classical_value_heuristic(T, restarts=args.restarts, seed=args.seed, workers=_threads(args))
    else:
        res = classical_value_exact(T, workers=_threads(args))
    out = res.to_json()
    out["functional"] = T.to_json()
    return out, None, f"classical value = {res.value!r} ({res.method})"


def cmd_quantum(args):
    T = load_functional(args)
    dims = _parse_dims(args.dims)
    fixed = None
    if args.fixed_state:
        if args.fixed_state == "ghz":
            if len(set(dims)) != 1:
                raise ValidationError("--fixed-state ghz needs equal local dimensions")
            fixed = ghz_state(dims[0], len(dims))
        else:
            fixed = QuantumState.from_json(_unwrap(_load_json(args.fixed_state), "state"))
    cfg = SeesawConfig(dims=dims, restarts=args.restarts, max_iters=args.max_iters,
                       rel_tol=args.rel_tol, seed=args.seed, workers=_threads(args))
    report = seesaw(T, cfg, fixed_state=fixed)
    if not verify_report(report):
        raise RuntimeError("stored state and observables do not reproduce the reported value")
    out = report.to_json()
    if len(dims) == 3:
        out["sqrt_d_envelope"] = sqrt_d_envelope(report, args.envelope_constant).to_json()
    return out, None, f"quantum value = {report.quantum_value!r}, classical = {report.classical_value!r}, ratio = {report.ratio!r}"


def cmd_randstate(args):
    family = UnitaryFamily.haar(args.n, args.N, args.seed)
    state = tripartite_state(family)
    red = reduced_density(state, [0])
    out = {
        "n": args.n, "N": args.N, "seed": args.seed,
        "norm_squared": float(np.vdot(state.vector, state.vector).real),
        "party1_reduced_deviation": float(np.max(np.abs(red - np.eye(args.n) / args.n))),
        # only the diagonal of party 1's marginal is fixed; parties 2 and 3 are exactly 1/N
        "party1_diagonal_deviation": float(np.max(np.abs(np.diag(red) - 1 / args.n))),
        "party23_reduced_deviation": max(
            float(np.max(np.abs(reduced_density(state, [k]) - np.eye(args.N) / args.N))) for k in (1, 2)
        ),
        "state": state.to_json(),
    }
    return out, None, f"state on C^{args.n} x C^{args.N} x C^{args.N}, <psi|psi> = {out['norm_squared']!r}"


def cmd_chevet(args):
    summary = chevet_montecarlo(args.n, args.N, args.samples, args.seed, restarts=args.eps_restarts,
                                workers=_threads(args))
    out = summary.to_json()
    out["mean_within_bound"] = summary.mean <= summary.bound
    out["max_within_bound"] = summary.max <= summary.bound
    return out, list(summary.rows()), (
        f"eps_norm mean = {summary.mean:.6g}, max = {summary.max:.6g}, bound = {summary.bound:.6g}"
    )


def cmd_ghz_bound(args):
    rep = ghz_violation_experiment(args.n, args.M, args.trials, args.seed, parties=args.parties,
                                   restarts=args.restarts, workers=_threads(args))
    out = rep.to_json()
    rows = [{"trial": t.label, "classical": t.classical_value, "quantum": t.quantum_value, "ratio": t.ratio}
            for t in rep.trials]
    return out, rows, f"max GHZ ratio = {rep.max_ratio:.6g} (bound {rep.bound:.6g}, within: {rep.within_bound})"


def cmd_rc_check(args):
    fam = matrix_unit_family(args.N)
    value = rc_norm(fam, flatten=True)
    terms = rc_terms(fam)
    expected = math.sqrt(args.N)
    out = {
        "N": args.N,
        "rc_norm": value,
        "expected": expected,
        "passed": abs(value - expected) <= 1e-9,
        "rc2_terms": list(terms),
        "rc2_norm": rc_norm(fam),
    }
    return out, None, repr(value)


def cmd_noise(args):
    report = load_report(args.report)
    res = noisy_violation(report.functional, report.best_state, report.best_observables, args.p,
                          classical_value=report.classical_value)
    return res.to_json(), None, f"noisy value = {res.noisy_value!r} at p = {args.p} (critical p = {res.critical_p!r})"


def cmd_ccgame(args):
    T = load_functional(args)
    c_spec = classical_spec(T)
    out: dict[str, Any] = {"functional": T.to_json(), "strategy": args.strategy}
    if args.strategy == "classical":
        spec = c_spec
    else:
        if not args.report:
            raise ValidationError("--strategy quantum requires --report report.json")
        report = load_report(args.report)
        if report.functional != T:
            raise ValidationError("report was produced for a different functional")
        report.best_observables = binarize(report.best_observables)
        spec = quantum_spec_from_report(report)
        out["ratio"] = ratio_check(c_spec, spec)
        out["classical_exact"] = exact_success(c_spec).to_json()
    exact = exact_success(spec)
    out["exact"] = exact.to_json()
    if args.rounds:
        sim = simulate_game(spec, args.rounds, args.seed)
        out["simulated"] = sim.to_json()
        out["within_4_se"] = abs(sim.success_probability - exact.success_probability) <= 4 * math.sqrt(
            exact.success_probability * (1 - exact.success_probability) / args.rounds) + 1e-15
    return out, None, f"P = {exact.success_probability!r}"


HANDLERS = {
    "builtin": cmd_builtin,
    "classical": cmd_classical,
    "quantum": cmd_quantum,
    "randstate": cmd_randstate,
    "chevet": cmd_chevet,
    "ghz-bound": cmd_ghz_bound,
    "rc-check": cmd_rc_check,
    "noise": cmd_noise,
    "ccgame": cmd_ccgame,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=0, help="worker threads (default: all cores)")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    functional = argparse.ArgumentParser(add_help=False)
    functional.add_argument("--input", help="Bell functional JSON")
    functional.add_argument("--builtin", help="chsh | mermin3 | mermin4 | random(N,M,seed)")

    parser = argparse.ArgumentParser(prog="bellviol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bellviol {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("builtin", parents=[common], help="emit a named Bell functional")
    p.add_argument("--name", required=True)

    p = sub.add_parser("classical", parents=[common, functional], help="local-hidden-variable value ||T||")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="exhaustive enumeration (default)")
    g.add_argument("--heuristic", action="store_true", help="multi-start sign flipping")
    p.add_argument("--restarts", type=int, default=64)

    p = sub.add_parser("quantum", parents=[common, functional], help="see-saw quantum lower bound")
    p.add_argument("--dims", required=True, help="local dimensions, e.g. 2,2,2")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--fixed-state", help="'ghz' or a state JSON file")
    p.add_argument("--envelope-constant", type=float, default=10.0)

    p = sub.add_parser("randstate", parents=[common], help="random-unitary tripartite state")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)

    p = sub.add_parser("chevet", parents=[common], help="Monte Carlo of sup ||sum lambda_i U_i||")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--eps-restarts", type=int, default=16)

    p = sub.add_parser("ghz-bound", parents=[common], help="GHZ-fixed see-saw over random functionals")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--restarts", type=int, default=4)

    p = sub.add_parser("rc-check", parents=[common], help="RC norm of the matrix-unit family")
    p.add_argument("--N", type=int, required=True)

    p = sub.add_parser("noise", parents=[common], help="white-noise visibility law on a quantum report")
    p.add_argument("--report", required=True)
    p.add_argument("--p", type=float, required=True)

    p = sub.add_parser("ccgame", parents=[common, functional], help="communication-complexity game")
    p.add_argument("--strategy", choices=("classical", "quantum"), default="classical")
    p.add_argument("--report", help="quantum report JSON (for --strategy quantum)")
    p.add_argument("--rounds", type=int, default=100000)
    return parser


def _write_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})
    return buf.getvalue()


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fmt = args.format or ("csv" if args.command == "chevet" else "json")
    start = time.perf_counter()
    try:
        result, rows, summary = HANDLERS[args.command](args)
        manifest = {
            "subcommand": args.command,
            "argv": argv,
            "seed": args.seed,
            "version": __version__,
            "started": datetime.now(timezone.utc).isoformat(),
            "wall_clock_seconds": time.perf_counter() - start,
            "result_sha256": payload_digest(result),
        }
        if fmt == "csv":
            if rows is None:
                raise ValidationError(f"subcommand {args.command!r} has no tabular output; use --format json")
            text = _write_csv(rows)
        else:
            text = dumps({"manifest": manifest, "result": result}) + "\n"
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
            if fmt == "csv":
                Path(args.output + ".manifest.json").write_text(dumps(manifest) + "\n", encoding="utf-8")
            print(summary)
        else:
            sys.stdout.write(text)
    except ValidationError as exc:
        print(f"bellviol: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"bellviol: internal error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
