"""Mixed-integer SDP route: big-M disjunctive model and branch-and-bound.

The selection problem's bilinear terms (the masked gain ``Pi N Gamma`` and
the coupling ``B Pi M = P B Pi``) are linearized with auxiliary variables

    theta  (n_u x n_y)  masked gain, equals N on active channel pairs and 0
                        elsewhere,
    omega  (n_u x n_u)  = B^+ P B, the in-range part of the coupling,
    xi     (n_x x n_u)  = (I - B B^+) P B, the range-complement part,

tied to the per-node binaries through three families of big-M inequalities
(absolute values split into +/- pairs):

    family 1, (i,j) in [n_u] x [n_y]:
        |theta_ij| <= L1 pi(i),  |theta_ij| <= L1 gam(j),
        |theta_ij - N_ij| <= L1 (2 - pi(i) - gam(j))
    family 2, (i,j) in [n_u] x [n_u]:
        |M_ij| <= L2 (1 - pi(i) + pi(j)),
        |omega_ij| <= L2 (1 + pi(i) - pi(j)),
        |M_ij - omega_ij| <= L2 (2 - pi(i) - pi(j))
    family 3, (i,j) in [n_x] x [n_u]:
        |xi_ij| <= L3 (1 - pi(j))

where pi(i)/gam(j) is the binary of the node owning channel i/j. With the
binaries fixed, feasibility of this system matches feasibility of the
reduced synthesis LMIs, which branch-and-bound exploits: binaries are
relaxed to [0,1], nodes bound the cardinality objective from below, and
integral relaxations are confirmed against the exact reduced synthesis
before becoming incumbents (big-M slack at the integrality tolerance is of
order L * int_tol and cannot be trusted on its own).
"""

from __future__ import annotations

import csv
import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import conic
from .conic import ConicProblem, SolveStatus, SolverTolerances
from .exceptions import SaaselError, SolverUnknownError
from .model import DynamicNetwork, LogisticConstraint, Selection
from .numerics import pseudo_inverse_left
from .synthesis import SofResult, SofStatus, solve_sof

__all__ = [
    "BigMConstants",
    "MisdpModel",
    "MisdpStatus",
    "MisdpResult",
    "BnbState",
    "build_misdp",
    "solve_misdp",
    "confirm_selection",
    "DEFAULT_INT_TOL",
]

logger = logging.getLogger(__name__)

DEFAULT_INT_TOL = 1e-5
NODE_LOG_FIELDS = ("node_id", "depth", "fixings", "bound", "action")


@dataclass(frozen=True)
class BigMConstants:
    """Disjunction constants; "sufficiently large" for the problem data.
    Too-small values silently cut off feasible couplings, which is why every
    incumbent is re-confirmed against the reduced synthesis LMIs."""

    L1: float = 1e5
    L2: float = 1e5
    L3: float = 1e5

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0 and self.L3 > 0):
            raise ValueError("big-M constants must be positive")


@dataclass
class MisdpModel:
    """Assembled big-M selection model plus the bookkeeping needed to fix
    binaries per branch-and-bound node."""

    net: DynamicNetwork
    lc: LogisticConstraint | None
    consts: BigMConstants
    tol: SolverTolerances
    problem: ConicProblem
    binary_offsets: list[int]          # decision-vector column per bit (pi then gamma)
    family_counts: tuple[int, int, int]
    input_node: list[int]              # channel -> owning node
    output_node: list[int]

    @property
    def num_binaries(self) -> int:
        return len(self.binary_offsets)

    def relaxation(self, fixings: dict[int, int] | None = None) -> ConicProblem:
        """The continuous relaxation, optionally with some binaries pinned
        to exact 0/1 values via equality rows."""
        prob = self.problem.shallow_copy()
        for k, v in sorted((fixings or {}).items()):
            prob.add_equality([self.binary_offsets[k]], [1.0], float(v))
        return prob

    def selection_from_values(self, pi_vals: np.ndarray, gam_vals: np.ndarray) -> Selection:
        bits = np.concatenate([pi_vals.ravel(), gam_vals.ravel()])
        return Selection.from_bits(tuple(int(round(b)) for b in bits), self.net.node_count)


def build_misdp(
    net: DynamicNetwork,
    lc: LogisticConstraint | None = None,
    consts: BigMConstants | None = None,
    tol: SolverTolerances | None = None,
) -> MisdpModel:
    """Assemble the big-M selection problem over (P, theta, N, M, omega, xi)
    and the relaxed per-node binaries."""
    consts = consts or BigMConstants()
    tol = tol or SolverTolerances()
    A, B, C = net.A, net.B, net.C
    nx, nu, ny, N = net.n_x, net.n_u, net.n_y, net.node_count
    B_pinv = pseudo_inverse_left(B)
    range_complement = np.eye(nx) - B @ B_pinv

    prob = ConicProblem()
    P = prob.add_symmetric("P", nx)
    theta = prob.add_free("theta", (nu, ny))
    N_mat = prob.add_free("N", (nu, ny))
    M = prob.add_free("M", (nu, nu))
    omega = prob.add_free("omega", (nu, nu))
    xi = prob.add_free("xi", (nx, nu))
    pi = prob.add_nonneg("pi", N)
    gam = prob.add_nonneg("gamma", N)

    bin_offsets = [pi.offset + k for k in range(N)] + [gam.offset + k for k in range(N)]
    prob.set_objective(bin_offsets, [1.0] * (2 * N))

    # stability LMI with the masked gain
    stab = prob.mat_expr(nx, nx)
    stab.add_const(-tol.eps_lmi * np.eye(nx))
    stab.add_sym_product(-A.T, P, np.eye(nx))
    stab.add_sym_product(-B, theta, C)
    prob.add_lmi(stab)

    # omega = B^+ P B and xi = (I - B B^+) P B
    om_eq = prob.mat_expr(nu, nu)
    om_eq.add_var(omega)
    om_eq.add_product(-B_pinv, P, B)
    prob.add_matrix_equality(om_eq)
    xi_eq = prob.mat_expr(nx, nu)
    xi_eq.add_var(xi)
    xi_eq.add_product(-range_complement, P, B)
    prob.add_matrix_equality(xi_eq)

    input_node = [net.input_channel_node(i) for i in range(nu)]
    output_node = [net.output_channel_node(j) for j in range(ny)]
    L1, L2, L3 = consts.L1, consts.L2, consts.L3

    n1 = 0
    for i in range(nu):
        p_i = pi.offset + input_node[i]
        for j in range(ny):
            g_j = gam.offset + output_node[j]
            t_ij = theta.entry_index(i, j)
            n_ij = N_mat.entry_index(i, j)
            for s in (1.0, -1.0):
                prob.add_inequality([t_ij, p_i], [s, -L1], 0.0)
                prob.add_inequality([t_ij, g_j], [s, -L1], 0.0)
                prob.add_inequality([t_ij, n_ij, p_i, g_j], [s, -s, L1, L1], 2.0 * L1)
                n1 += 3
    n2 = 0
    for i in range(nu):
        p_i = pi.offset + input_node[i]
        for j in range(nu):
            p_j = pi.offset + input_node[j]
            m_ij = M.entry_index(i, j)
            o_ij = omega.entry_index(i, j)
            for s in (1.0, -1.0):
                prob.add_inequality([m_ij, p_i, p_j], [s, L2, -L2], L2)
                prob.add_inequality([o_ij, p_i, p_j], [s, -L2, L2], L2)
                prob.add_inequality([m_ij, o_ij, p_i, p_j], [s, -s, L2, L2], 2.0 * L2)
                n2 += 3
    n3 = 0
    for r in range(nx):
        for j in range(nu):
            x_ij = xi.entry_index(r, j)
            p_j = pi.offset + input_node[j]
            for s in (1.0, -1.0):
                prob.add_inequality([x_ij, p_j], [s, L3], L3)
                n3 += 1

    if lc is not None and lc.num_rows:
        if lc.Phi.shape[1] != 2 * N:
            raise SaaselError(
                f"logistic constraint expects {lc.Phi.shape[1]} bits, network has {2 * N}"
            )
        for r in range(lc.num_rows):
            cols = [bin_offsets[k] for k in range(2 * N) if lc.Phi[r, k] != 0.0]
            vals = [float(lc.Phi[r, k]) for k in range(2 * N) if lc.Phi[r, k] != 0.0]
            prob.add_inequality(cols, vals, float(lc.phi[r]))

    for off in bin_offsets:  # box b <= 1 (b >= 0 comes from the nonneg kind)
        prob.add_inequality([off], [1.0], 1.0)

    floor = prob.mat_expr(nx, nx)
    floor.add_const(-tol.eps_pd * np.eye(nx))
    floor.add_var(P)
    prob.add_lmi(floor)

    return MisdpModel(
        net=net, lc=lc, consts=consts, tol=tol, problem=prob,
        binary_offsets=bin_offsets, family_counts=(n1, n2, n3),
        input_node=input_node, output_node=output_node,
    )


class MisdpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass
class _Node:
    fixings: dict[int, int]
    bound: float
    depth: int
    retries: int = 0


@dataclass
class BnbState:
    """Branch-and-bound bookkeeping: best-bound node heap with deterministic
    first-in-first-out tie-breaking (the cardinality objective is integral,
    so bounds are rounded up to the next integer for ordering), incumbent,
    counters."""

    int_tol: float
    heap: list = field(default_factory=list)
    seq: int = 0
    incumbent_selection: Selection | None = None
    incumbent_objective: float = math.inf
    nodes_visited: int = 0
    relaxations_solved: int = 0
    incumbent_updates: int = 0
    bigm_inconsistent: bool = False

    def push(self, node: _Node) -> None:
        key = math.ceil(node.bound - self.int_tol)
        heapq.heappush(self.heap, (key, self.seq, node))
        self.seq += 1

    def pop(self) -> _Node:
        return heapq.heappop(self.heap)[2]


@dataclass
class MisdpResult:
    status: MisdpStatus
    selection: Selection | None
    objective: int | None
    state: BnbState
    node_log: list[tuple] = field(default_factory=list)

    def write_node_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(NODE_LOG_FIELDS)
            writer.writerows(self.node_log)


def _fixings_str(fixings: dict[int, int]) -> str:
    return ";".join(f"b{k}={v}" for k, v in sorted(fixings.items()))


def solve_misdp(
    model: MisdpModel,
    tol: SolverTolerances | None = None,
    int_tol: float = DEFAULT_INT_TOL,
    backend: str | None = None,
    max_nodes: int | None = None,
) -> MisdpResult:
    """Branch-and-bound over the relaxed binaries.

    Node selection is best bound first with insertion-order tie-breaking;
    branching picks the most fractional binary (ties: lowest index). A node
    is pruned when its bound exceeds ``incumbent - 1 + int_tol`` (the
    objective is integral). An integral relaxation only becomes the
    incumbent after the rounded selection is confirmed by the exact reduced
    synthesis; a rejected integral point is branched further until binaries
    are exactly fixed.

    An undecided relaxation is never pruned as infeasible: the node is
    re-queued once, and if it stays undecided it is either resolved through
    the equivalent reduced synthesis (when every binary is fixed) or split
    on its lowest free binary, which is always sound and terminates because
    fixings grow along every path.
    """
    tol = tol or model.tol
    nb = model.num_binaries
    limit = max_nodes if max_nodes is not None else 2 ** (nb + 1) - 1
    state = BnbState(int_tol=int_tol)
    state.push(_Node(fixings={}, bound=0.0, depth=0))
    node_log: list[tuple] = []
    next_id = 0
    relax_attempts = [(a, o) for a, o in conic.default_attempts(backend)
                      if a != "cvxopt"]  # dense conelp is too slow at node scale

    def log(node_id, node, bound, action):
        node_log.append((node_id, node.depth, _fixings_str(node.fixings),
                         f"{bound:.6f}", action))

    def branch(node_id, node, branch_k):
        for value in (0, 1):  # down-branch first, in insertion order
            child = dict(node.fixings)
            child[branch_k] = value
            state.push(_Node(fixings=child, bound=node.bound, depth=node.depth + 1))
        log(node_id, node, node.bound, "branch")

    def confirm_integer_point(node_id, node, selection) -> bool:
        """Exact reduced-synthesis check of a fully fixed node; returns True
        when the node is closed (logged), False to keep processing."""
        check = solve_sof(model.net, selection, tol, backend=backend)
        if check.status is SofStatus.UNKNOWN:
            raise SolverUnknownError(
                f"integer point {selection.bit_string()} undecided: {check.detail}"
            )
        if check.feasible:
            objective = selection.cardinality()
            if objective < state.incumbent_objective:
                state.incumbent_selection = selection
                state.incumbent_objective = objective
                state.incumbent_updates += 1
            log(node_id, node, node.bound, "incumbent")
        else:
            log(node_id, node, math.inf, "prune")
        return True

    while state.heap:
        if state.nodes_visited >= limit:
            raise SaaselError(f"branch-and-bound exceeded {limit} nodes")
        node = state.pop()
        node_id = next_id
        next_id += 1
        state.nodes_visited += 1
        if node.bound > state.incumbent_objective - 1.0 + int_tol:
            log(node_id, node, node.bound, "prune")
            continue
        free = [k for k in range(nb) if k not in node.fixings]

        relax = model.relaxation(node.fixings)
        sol, _ = conic.solve_robust(relax, tol, attempts=relax_attempts)
        state.relaxations_solved += 1
        if sol.status is SolveStatus.UNKNOWN:
            if node.retries == 0:
                node.retries = 1
                state.push(node)
                log(node_id, node, node.bound, "requeue")
                continue
            if not free:
                selection = Selection.from_bits(
                    tuple(node.fixings[k] for k in range(nb)), model.net.node_count
                )
                confirm_integer_point(node_id, node, selection)
                continue
            # sound degradation: cannot bound, so subdivide instead
            branch(node_id, node, free[0])
            continue
        if sol.status is SolveStatus.INFEASIBLE:
            log(node_id, node, math.inf, "prune")
            continue

        bound = float(sol.objective)
        node.bound = max(node.bound, bound)
        if node.bound > state.incumbent_objective - 1.0 + int_tol:
            log(node_id, node, node.bound, "prune")
            continue

        b_vals = np.concatenate([sol.values["pi"].ravel(),
                                 sol.values["gamma"].ravel()]).astype(float)
        frac = np.minimum(np.abs(b_vals), np.abs(1.0 - b_vals))

        if np.all(frac <= int_tol):
            selection = model.selection_from_values(
                sol.values["pi"], sol.values["gamma"]
            )
            check = solve_sof(model.net, selection, tol, backend=backend)
            if check.status is SofStatus.UNKNOWN:
                if node.retries == 0:
                    node.retries = 1
                    state.push(node)
                    log(node_id, node, node.bound, "requeue")
                    continue
                raise SolverUnknownError(
                    f"incumbent confirmation undecided for {selection.bit_string()}: "
                    f"{check.detail}"
                )
            if check.feasible:
                objective = selection.cardinality()
                if objective < state.incumbent_objective:
                    state.incumbent_selection = selection
                    state.incumbent_objective = objective
                    state.incumbent_updates += 1
                log(node_id, node, node.bound, "incumbent")
                continue
            if not free:
                # exact integer point: relaxation feasible, synthesis not.
                state.bigm_inconsistent = True
                logger.warning(
                    "big-M model accepted integer point %s rejected by the "
                    "reduced synthesis; constants may be too small",
                    selection.bit_string(),
                )
                log(node_id, node, node.bound, "prune")
                continue
        branch_k = max(free, key=lambda k: (frac[k], -k))
        branch(node_id, node, branch_k)

    if state.incumbent_selection is None:
        return MisdpResult(MisdpStatus.INFEASIBLE, None, None, state, node_log)
    return MisdpResult(
        MisdpStatus.OPTIMAL,
        state.incumbent_selection,
        int(state.incumbent_objective),
        state,
        node_log,
    )


def confirm_selection(
    net: DynamicNetwork,
    selection: Selection,
    tol: SolverTolerances | None = None,
    backend: str | None = None,
) -> SofResult:
    """Re-derive the deliverable gain for a selection found by the MISDP
    route: the reduced synthesis LMIs are solved with the binaries fixed, so
    no big-M slack pollutes (P, M, N)."""
    return solve_sof(net, selection, tol, backend=backend)
