"""Command-line front end.

Subcommands: ``gen`` (write a benchmark model file), ``solve`` (run one
selection method on a model), ``verify`` (re-check a solve report's gain
against the model), ``bench`` (run all methods and emit the report files
and figures).

Exit codes: 0 success, 1 usage or I/O error, 2 proven infeasible, 3 the
solver could not reach a definite verdict.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import ExperimentReport, MassSpringSpec, mass_spring, run_experiment
from .conic import BACKEND_ENV_VAR, SolverTolerances
from .exceptions import SaaselError, SolverUnknownError
from .misdp import BigMConstants, MisdpStatus, build_misdp, confirm_selection, solve_misdp
from .model import DynamicNetwork, LogisticConstraint, Selection
from .search import bsa_pbh_solve, bsa_solve
from .synthesis import verify_closed_loop
from . import plots

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="saasel",
                     description="Minimum sensor/actuator selection for static "
                                 "output feedback stabilization")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a benchmark model file")
    gen_sub = gen.add_subparsers(dest="family", required=True)
    ms = gen_sub.add_parser("mass-spring", help="mass-spring chain")
    ms.add_argument("--n", type=int, default=10, help="number of masses")
    ms.add_argument("--mass", type=float, default=1.0)
    ms.add_argument("--stiffness", type=float, default=1.0)
    ms.add_argument("--damping", type=float, default=0.0)
    ms.add_argument("-o", "--output", required=True, help="model JSON path")

    solve = sub.add_parser("solve", help="run one selection method")
    solve.add_argument("--method", required=True,
                       choices=["misdp", "bsa-sdp", "bsa-pbh"])
    solve.add_argument("--model", required=True)
    solve.add_argument("--logistic", help="logistic constraint JSON {Phi, phi}")
    solve.add_argument("--output", "-o", help="report JSON path")
    solve.add_argument("--trace", help="write the sigma trace CSV (+ figure)")
    solve.add_argument("--L1", type=float, default=1e5)
    solve.add_argument("--L2", type=float, default=1e5)
    solve.add_argument("--L3", type=float, default=1e5)
    solve.add_argument("--eps1", type=float, default=1e-9,
                       help="strictness shift for the stability LMI")
    solve.add_argument("--eps2", type=float, default=1e-6,
                       help="positive-definiteness floor for P")
    solve.add_argument("--feas-tol", type=float, default=1e-8)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--max-candidates", type=int, default=1 << 24,
                       help="cap on the raw enumeration size 2^(2N)")
    solve.add_argument("--backend", help=f"conic backend (or ${BACKEND_ENV_VAR})")

    verify = sub.add_parser("verify", help="re-check a solve report")
    verify.add_argument("--model", required=True)
    verify.add_argument("--report", required=True,
                        help="report JSON from `saasel solve` (selection + gain)")

    bench = sub.add_parser("bench", help="run all methods on the mass-spring benchmark")
    bench.add_argument("--n", type=int, default=10)
    bench.add_argument("--damping", type=float, default=0.0)
    bench.add_argument("--min-sensors", type=int, default=2)
    bench.add_argument("--min-actuators", type=int, default=2)
    bench.add_argument("--methods", nargs="+",
                       default=["misdp", "bsa-sdp", "bsa-pbh"],
                       choices=["misdp", "bsa-sdp", "bsa-pbh"])
    bench.add_argument("--outdir", required=True)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--no-figures", action="store_true",
                       help="skip rendering the PNG figures")
    bench.add_argument("--backend")
    return parser


def _load_model(path: str) -> DynamicNetwork:
    try:
        return DynamicNetwork.load(path)
    except FileNotFoundError as exc:
        raise _UsageError(f"model file not found: {exc}")
    except (json.JSONDecodeError, KeyError) as exc:
        raise _UsageError(f"malformed model file {path}: {exc}")


def _load_logistic(path: str | None, node_count: int) -> LogisticConstraint | None:
    if path is None:
        return None
    try:
        lc = LogisticConstraint.load(path)
    except FileNotFoundError as exc:
        raise _UsageError(f"logistic file not found: {exc}")
    except (json.JSONDecodeError, KeyError) as exc:
        raise _UsageError(f"malformed logistic file {path}: {exc}")
    if lc.num_rows and lc.Phi.shape[1] != 2 * node_count:
        raise _UsageError(
            f"logistic constraint has {lc.Phi.shape[1]} columns, expected {2 * node_count}"
        )
    return lc


class _UsageError(SaaselError):
    pass


def cmd_gen(args) -> int:
    spec = MassSpringSpec(node_count=args.n, mass=args.mass,
                          stiffness=args.stiffness, damping=args.damping)
    net = mass_spring(spec)
    net.save(args.output)
    print(f"wrote mass-spring model (N={args.n}, n_x={net.n_x}) to {args.output}")
    return EXIT_OK


def _solve_report_dict(args, net, selection, gain, spectrum, iterations,
                       lmi_solves) -> dict:
    return {
        "method": args.method,
        "model": str(args.model),
        "seed": args.seed,
        "status": "ok",
        "selection": {"pi": list(selection.pi), "gamma": list(selection.gamma)},
        "cardinality": selection.cardinality(),
        "spectral_abscissa": spectrum.spectral_abscissa,
        "eigenvalues": [[v.real, v.imag] for v in spectrum.eigenvalues],
        "gain": gain.F_full.tolist(),
        "iterations": iterations,
        "lmi_solves": lmi_solves,
        "tolerances": {"eps_lmi": args.eps1, "eps_pd": args.eps2,
                       "feas_tol": args.feas_tol},
        "big_m": {"L1": args.L1, "L2": args.L2, "L3": args.L3},
    }


def cmd_solve(args) -> int:
    net = _load_model(args.model)
    lc = _load_logistic(args.logistic, net.node_count)
    tol = SolverTolerances(eps_lmi=args.eps1, eps_pd=args.eps2,
                           feas_tol=args.feas_tol)
    bit_cap = max(1, int(np.ceil(np.log2(max(2, args.max_candidates)))))
    trace = None
    try:
        if args.method == "misdp":
            model = build_misdp(net, lc, consts=BigMConstants(args.L1, args.L2, args.L3),
                                tol=tol)
            result = solve_misdp(model, tol, backend=args.backend)
            if result.status is MisdpStatus.INFEASIBLE:
                return _report_infeasible(args)
            selection = result.selection
            confirm = confirm_selection(net, selection, tol, backend=args.backend)
            if not confirm.feasible:
                print(json.dumps({"status": "error",
                                  "reason": f"confirmation failed: {confirm.status.value}"}),
                      file=sys.stderr)
                return EXIT_NUMERICAL
            gain = confirm.solution
            iterations = result.state.nodes_visited
            lmi_solves = result.state.relaxations_solved
        else:
            runner = bsa_solve if args.method == "bsa-sdp" else bsa_pbh_solve
            res = runner(net, lc, tol, backend=args.backend, bit_cap=bit_cap)
            trace = res.trace
            if res.best is None:
                return _report_infeasible(args, res.detail)
            selection, gain = res.best, res.gain
            iterations, lmi_solves = res.iterations, res.lmi_solves
    except SolverUnknownError as exc:
        print(json.dumps({"status": "unknown", "reason": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL

    # final certification before reporting success
    spectrum = verify_closed_loop(net, selection, gain.F_full)
    if not spectrum.is_stable:
        print(json.dumps({"status": "error",
                          "reason": "closed loop failed final verification"}),
              file=sys.stderr)
        return EXIT_NUMERICAL
    report = _solve_report_dict(args, net, selection, gain, spectrum,
                                iterations, lmi_solves)
    payload = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).write_text(payload + "\n")
    print(payload)
    if args.trace and trace is not None:
        trace.write_csv(args.trace)
        figure_path = str(Path(args.trace).with_suffix(".png"))
        plots.render_sigma_trace({args.method: trace.sigmas()}, figure_path)
    return EXIT_OK


def _report_infeasible(args, detail: str = "") -> int:
    payload = json.dumps({
        "method": args.method,
        "status": "infeasible",
        "reason": detail or "no selection satisfying the logistic constraint "
                            "admits a stabilizing static output feedback",
    }, indent=2)
    if args.output:
        Path(args.output).write_text(payload + "\n")
    print(payload)
    return EXIT_INFEASIBLE


def cmd_verify(args) -> int:
    net = _load_model(args.model)
    try:
        report = json.loads(Path(args.report).read_text())
        sel = Selection(tuple(report["selection"]["pi"]),
                        tuple(report["selection"]["gamma"]))
        F = np.asarray(report["gain"], dtype=float)
    except FileNotFoundError as exc:
        raise _UsageError(f"report file not found: {exc}")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise _UsageError(f"malformed report file {args.report}: {exc}")
    if F.shape != (net.n_u, net.n_y):
        print(f"gain shape {F.shape} does not match model ({net.n_u}, {net.n_y})",
              file=sys.stderr)
        return EXIT_USAGE
    from .model import selection_to_matrices

    masks = selection_to_matrices(sel, net)
    projected = masks.Pi @ F @ masks.Gamma
    if not np.allclose(projected, F, atol=1e-12):
        print("warning: gain touches inactive channels; projecting onto "
              "Pi F Gamma", file=sys.stderr)
        F = projected
    spectrum = verify_closed_loop(net, sel, F)
    print(f"spectral abscissa: {spectrum.spectral_abscissa!r}")
    return EXIT_OK if spectrum.is_stable else EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    net = mass_spring(MassSpringSpec(node_count=args.n, damping=args.damping))
    lc = LogisticConstraint.minimum_counts(
        args.n, min_actuators=args.min_actuators, min_sensors=args.min_sensors
    )
    report = run_experiment(net, lc, methods=tuple(args.methods),
                            backend=args.backend)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report.write_json(outdir / "report.json")
    report.write_table_csv(outdir / "table.csv")
    report.write_sigma_csv(outdir / "sigma_trace.csv")
    if not args.no_figures:
        plots.render_sigma_trace(
            {m: t.sigmas() for m, t in report.traces.items()},
            outdir / "sigma_trace.png",
        )
        plots.render_method_summary(report.rows, outdir / "summary.png")
    for row in report.rows:
        marker = "ok " if row.status == "ok" else row.status
        print(f"[{marker}] {row.method}: cardinality={row.cardinality} "
              f"abscissa={row.spectral_abscissa} time={row.wall_time_s:.2f}s "
              f"iterations={row.iterations}")
    if all(r.status == "ok" for r in report.rows):
        return EXIT_OK
    if any(r.status == "error" for r in report.rows):
        return EXIT_NUMERICAL
    return EXIT_INFEASIBLE


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "bench":
            return cmd_bench(args)
        raise _UsageError(f"unknown command {args.command}")
    except _UsageError as exc:
        print(f"saasel: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"saasel: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverUnknownError as exc:
        print(f"saasel: solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SaaselError as exc:
        print(f"saasel: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
