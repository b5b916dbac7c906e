"""Benchmark generators and the three-method experiment harness.

``mass_spring`` builds the standard chain of point masses coupled by
springs between fixed walls: one force actuator per mass, full observation
(C = I). States are ordered per node as (position, velocity) so that B and
C carry the per-node block structure; this is a permutation of the usual
[positions; velocities] stacking and leaves the spectrum unchanged.

``run_experiment`` runs any subset of the three selection methods on one
network, confirms every returned selection through the synthesis LMIs,
and collects a table row per method plus the candidate-set shrinkage trace
of the search methods.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import SolverTolerances
from .exceptions import DimensionError, SaaselError
from .misdp import BigMConstants, MisdpStatus, build_misdp, confirm_selection, solve_misdp
from .model import DynamicNetwork, LogisticConstraint, Selection
from .search import SearchTrace, bsa_pbh_solve, bsa_solve
from .synthesis import SofSolution, verify_closed_loop

__all__ = [
    "MassSpringSpec",
    "mass_spring",
    "random_network",
    "MethodRow",
    "ExperimentReport",
    "run_experiment",
    "METHODS",
]

logger = logging.getLogger(__name__)

METHODS = ("misdp", "bsa-sdp", "bsa-pbh")


@dataclass(frozen=True)
class MassSpringSpec:
    """Chain parameters. ``mass`` and ``damping`` are per node (scalar =
    uniform), ``stiffness`` per spring: a fixed-fixed chain of N masses has
    N + 1 springs."""

    node_count: int
    mass: float | tuple[float, ...] = 1.0
    stiffness: float | tuple[float, ...] = 1.0
    damping: float | tuple[float, ...] = 0.0

    def masses(self) -> np.ndarray:
        return _per_item(self.mass, self.node_count, "mass")

    def stiffnesses(self) -> np.ndarray:
        return _per_item(self.stiffness, self.node_count + 1, "stiffness")

    def dampings(self) -> np.ndarray:
        return _per_item(self.damping, self.node_count, "damping")

    def __post_init__(self):
        if self.node_count < 2:
            raise DimensionError("mass-spring chain needs at least 2 masses")
        if np.any(self.masses() <= 0):
            raise DimensionError("masses must be positive")
        if np.any(self.stiffnesses() <= 0):
            raise DimensionError("spring stiffnesses must be positive")
        if np.any(self.dampings() < 0):
            raise DimensionError("dampings must be nonnegative")


def _per_item(value, count: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(count, float(arr))
    if arr.shape != (count,):
        raise DimensionError(f"{name} must be scalar or length {count}")
    return arr


def mass_spring(spec: MassSpringSpec) -> DynamicNetwork:
    """Mass-spring chain as a dynamic network: per node two states
    (position, velocity), one force input into the velocity equation, and
    identity observation of both states."""
    N = spec.node_count
    m = spec.masses()
    k = spec.stiffnesses()
    d = spec.dampings()
    K = np.zeros((N, N))
    for i in range(N):
        K[i, i] = k[i] + k[i + 1]
        if i + 1 < N:
            K[i, i + 1] = -k[i + 1]
            K[i + 1, i] = -k[i + 1]
    nx = 2 * N
    A = np.zeros((nx, nx))
    B = np.zeros((nx, N))
    for i in range(N):
        A[2 * i, 2 * i + 1] = 1.0
        for j in range(N):
            A[2 * i + 1, 2 * j] = -K[i, j] / m[i]
        A[2 * i + 1, 2 * i + 1] = -d[i] / m[i]
        B[2 * i + 1, i] = 1.0 / m[i]
    return DynamicNetwork(
        node_count=N,
        nx_i=(2,) * N,
        nu_i=(1,) * N,
        ny_i=(2,) * N,
        A=A,
        B=B,
        C=np.eye(nx),
    )


def random_network(
    seed: int,
    node_count: int,
    state_dims: tuple[int, ...] | None = None,
    abscissa_margin: float = 0.25,
) -> DynamicNetwork:
    """Seeded random node-partitioned network for property tests: one input
    and one output channel per node, dense random coupling, resampled until
    the open-loop abscissa is at least ``abscissa_margin`` away from zero so
    feasibility verdicts are numerically crisp."""
    rng = np.random.default_rng(seed)
    if state_dims is None:
        state_dims = tuple(int(rng.integers(1, 3)) for _ in range(node_count))
    if len(state_dims) != node_count:
        raise DimensionError("state_dims must list one dim per node")
    nx = int(sum(state_dims))
    for _ in range(200):
        A = rng.normal(size=(nx, nx))
        alpha = float(np.max(np.linalg.eigvals(A).real))
        if abs(alpha) >= abscissa_margin:
            break
    edges = np.concatenate([[0], np.cumsum(state_dims)])
    B = np.zeros((nx, node_count))
    C = np.zeros((node_count, nx))
    for i in range(node_count):
        sl = slice(int(edges[i]), int(edges[i + 1]))
        while True:
            col = rng.normal(size=int(state_dims[i]))
            if np.linalg.norm(col) > 0.3:
                break
        B[sl, i] = col
        while True:
            row = rng.normal(size=int(state_dims[i]))
            if np.linalg.norm(row) > 0.3:
                break
        C[i, sl] = row
    return DynamicNetwork(
        node_count=node_count,
        nx_i=tuple(int(d) for d in state_dims),
        nu_i=(1,) * node_count,
        ny_i=(1,) * node_count,
        A=A,
        B=B,
        C=C,
    )


@dataclass
class MethodRow:
    """One table row: what a method selected and how it performed."""

    method: str
    status: str                      # ok | infeasible | error
    selection: Selection | None = None
    cardinality: int | None = None
    spectral_abscissa: float | None = None
    wall_time_s: float = 0.0
    iterations: int = 0
    lmi_solves: int = 0
    error: str = ""

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "pi": list(self.selection.pi) if self.selection else None,
            "gamma": list(self.selection.gamma) if self.selection else None,
            "cardinality": self.cardinality,
            "spectral_abscissa": self.spectral_abscissa,
            "wall_time_s": self.wall_time_s,
            "iterations": self.iterations,
            "lmi_solves": self.lmi_solves,
            "error": self.error,
        }


@dataclass
class ExperimentReport:
    rows: list[MethodRow] = field(default_factory=list)
    traces: dict[str, SearchTrace] = field(default_factory=dict)

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "traces": {
                method: [list(rec.as_row()) for rec in trace.records]
                for method, trace in self.traces.items()
            },
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def write_table_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "method", "status", "spectral_abscissa", "cardinality",
                "wall_time_s", "iterations", "lmi_solves", "pi", "gamma",
            ])
            for r in self.rows:
                writer.writerow([
                    r.method, r.status,
                    "" if r.spectral_abscissa is None else repr(r.spectral_abscissa),
                    "" if r.cardinality is None else r.cardinality,
                    f"{r.wall_time_s:.3f}", r.iterations, r.lmi_solves,
                    "".join(map(str, r.selection.pi)) if r.selection else "",
                    "".join(map(str, r.selection.gamma)) if r.selection else "",
                ])

    def write_sigma_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "iteration", "q", "selection_bits",
                             "verdict", "sigma"])
            for method, trace in self.traces.items():
                for rec in trace.records:
                    writer.writerow([method, *rec.as_row()])


def run_experiment(
    net: DynamicNetwork,
    lc: LogisticConstraint | None = None,
    methods: tuple[str, ...] = METHODS,
    tol: SolverTolerances | None = None,
    consts: BigMConstants | None = None,
    backend: str | None = None,
) -> ExperimentReport:
    """Run the requested methods sequentially on one network. Wall time is
    measured around the method call only; each returned selection is
    confirmed through the synthesis LMIs and certified by the closed-loop
    spectrum. A method failure is recorded in its row and the run goes on.
    """
    tol = tol or SolverTolerances()
    report = ExperimentReport()
    for method in methods:
        if method not in METHODS:
            raise SaaselError(f"unknown method {method!r}; expected one of {METHODS}")
        row = MethodRow(method=method, status="error")
        report.rows.append(row)
        try:
            start = time.perf_counter()
            selection: Selection | None
            gain: SofSolution | None = None
            if method == "misdp":
                model = build_misdp(net, lc, consts=consts, tol=tol)
                result = solve_misdp(model, tol, backend=backend)
                row.iterations = result.state.nodes_visited
                row.lmi_solves = result.state.relaxations_solved
                selection = result.selection if result.status is MisdpStatus.OPTIMAL else None
            elif method == "bsa-sdp":
                res = bsa_solve(net, lc, tol, backend=backend)
                row.iterations = res.iterations
                row.lmi_solves = res.lmi_solves
                selection = res.best
                gain = res.gain
                report.traces[method] = res.trace
            else:
                res = bsa_pbh_solve(net, lc, tol, backend=backend)
                row.iterations = res.iterations
                row.lmi_solves = res.lmi_solves
                selection = res.best
                gain = res.gain
                report.traces[method] = res.trace
            row.wall_time_s = time.perf_counter() - start

            if selection is None:
                row.status = "infeasible"
                row.error = "no stabilizing selection under the logistic constraint"
                continue
            if gain is None:
                confirm = confirm_selection(net, selection, tol, backend=backend)
                if not confirm.feasible:
                    row.status = "error"
                    row.error = (
                        f"selection {selection.bit_string()} failed confirmation: "
                        f"{confirm.status.value}"
                    )
                    continue
                gain = confirm.solution
            spectrum = verify_closed_loop(net, selection, gain.F_full)
            row.selection = selection
            row.cardinality = selection.cardinality()
            row.spectral_abscissa = spectrum.spectral_abscissa
            row.status = "ok" if spectrum.is_stable else "error"
            if not spectrum.is_stable:
                row.error = "closed loop not stable at verification"
        except SaaselError as exc:
            row.status = "error"
            row.error = str(exc)
            logger.warning("method %s failed: %s", method, exc)
    return report
