"""Median-probing search over the candidate set, with two feasibility
oracles.

``bsa_solve`` probes the median of the ordered candidate set: a feasible
probe becomes the incumbent and discards everything at least as expensive;
an infeasible probe discards itself and every candidate contained in it.
Each iteration strictly shrinks the set, and with the exact LMI oracle the
final incumbent has minimum cardinality over the candidate set.

``bsa_pbh_solve`` replaces the LMI oracle by fast stabilizability and
detectability rank tests (necessary, not sufficient, for output feedback
stabilization), saves every probe that passes, and afterwards replays the
saved probes through the LMI synthesis in cardinality order until one is
confirmed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .candidates import (
    CandidateSet,
    DEFAULT_BIT_CAP,
    enumerate_candidates,
    pick_median,
    prune_on_feasible,
    prune_on_infeasible,
)
from .conic import SolverTolerances
from .exceptions import SaaselError, SolverUnknownError
from .model import DynamicNetwork, LogisticConstraint, Selection, reduced_bc
from .numerics import numerical_rank
from .synthesis import SofResult, SofSolution, SofStatus, solve_sof

__all__ = [
    "TraceRecord",
    "SearchTrace",
    "SearchResult",
    "bsa_solve",
    "bsa_pbh_solve",
    "pbh_stabilizable",
    "pbh_detectable",
    "STABILITY_MARGIN",
    "CONDITION_SWITCH",
]

logger = logging.getLogger(__name__)

# Eigenvalues with real part >= -STABILITY_MARGIN count as unstable-side in
# the rank tests; marginal (imaginary-axis) modes must be testable.
STABILITY_MARGIN = 1e-9
# Beyond this condition number the rank test hands over to the eigenvector
# test, which is better behaved on ill-conditioned pencils.
CONDITION_SWITCH = 1e10

TRACE_FIELDS = ("iteration", "q", "selection_bits", "verdict", "sigma")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    q: int
    selection: Selection
    feasible: bool
    sigma_after: int

    def as_row(self) -> tuple:
        return (
            self.iteration,
            self.q,
            self.selection.bit_string(),
            "feasible" if self.feasible else "infeasible",
            self.sigma_after,
        )


@dataclass
class SearchTrace:
    """Per-iteration probe log; sigma is strictly decreasing and reaches 0."""

    records: list[TraceRecord] = field(default_factory=list)

    def sigmas(self) -> list[int]:
        return [r.sigma_after for r in self.records]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_FIELDS)
            for rec in self.records:
                writer.writerow(rec.as_row())


@dataclass
class SearchResult:
    """Outcome of a search run. ``best`` is None when no candidate passed;
    ``gain`` carries the synthesis certificate when the oracle produced one.
    ``lmi_solves`` counts LMI feasibility solves (probes for the SDP oracle,
    replay confirmations for the PBH variant)."""

    best: Selection | None
    gain: SofSolution | None
    trace: SearchTrace
    iterations: int
    lmi_solves: int = 0
    detail: str = ""


Oracle = Callable[[Selection], tuple[bool, SofSolution | None]]


def _lmi_oracle(net: DynamicNetwork, tol: SolverTolerances,
                backend: str | None, counter: dict) -> Oracle:
    def oracle(s: Selection) -> tuple[bool, SofSolution | None]:
        counter["lmi_solves"] += 1
        res = solve_sof(net, s, tol, backend=backend)
        if res.status is SofStatus.UNKNOWN:
            raise SolverUnknownError(
                f"no definite verdict for {s.bit_string()}: {res.detail}"
            )
        if res.status is SofStatus.GAIN_FAILURE:
            # Feasible LMI with unusable M: treated as infeasible for the
            # search, but logged distinctly (see solve_sof).
            return False, None
        return res.feasible, res.solution
    return oracle


def _run_pruning_loop(cs: CandidateSet, oracle: Oracle) -> tuple[
        Selection | None, SofSolution | None, SearchTrace, list[Selection]]:
    """Core loop shared by both variants; returns the incumbent, its
    payload, the trace, and every probe that the oracle accepted."""
    best: Selection | None = None
    payload: SofSolution | None = None
    passing: list[Selection] = []
    trace = SearchTrace()
    p = 0
    while not cs.is_empty():
        p += 1
        sigma_before = cs.size
        q, s_q = pick_median(cs)
        feasible, sol = oracle(s_q)
        if feasible:
            best = s_q
            payload = sol
            passing.append(s_q)
            cs = prune_on_feasible(cs, s_q)
        else:
            cs = prune_on_infeasible(cs, s_q)
        if cs.size >= sigma_before:
            raise SaaselError("pruning failed to shrink the candidate set")
        trace.records.append(TraceRecord(p, q, s_q, feasible, cs.size))
    return best, payload, trace, passing


def bsa_solve(
    net: DynamicNetwork,
    lc: LogisticConstraint | None = None,
    tol: SolverTolerances | None = None,
    oracle: Oracle | None = None,
    backend: str | None = None,
    bit_cap: int = DEFAULT_BIT_CAP,
) -> SearchResult:
    """Minimum-cardinality feasible selection by median probing with the
    exact LMI oracle (or an injected one).

    Raises :class:`SolverUnknownError` if the oracle cannot reach a definite
    verdict: the pruning rules are only sound for definite answers.
    """
    tol = tol or SolverTolerances()
    counter = {"lmi_solves": 0}
    if oracle is None:
        oracle = _lmi_oracle(net, tol, backend, counter)
    cs = enumerate_candidates(net.node_count, lc, bit_cap=bit_cap)
    best, payload, trace, _ = _run_pruning_loop(cs, oracle)
    return SearchResult(
        best=best,
        gain=payload,
        trace=trace,
        iterations=len(trace.records),
        lmi_solves=counter["lmi_solves"],
        detail="" if best is not None else "no candidate passed the oracle",
    )


# ---------------------------------------------------------------------------
# PBH (Hautus) tests
# ---------------------------------------------------------------------------


def _unstable_eigenvalues(A: np.ndarray, margin: float) -> np.ndarray:
    vals = np.linalg.eigvals(A)
    unstable = vals[vals.real >= -margin]
    # conjugate pairs give identical rank tests; keep one representative
    keep: list[complex] = []
    for lam in unstable:
        if not any(abs(lam - mu) <= 1e-12 * max(1.0, abs(mu)) for mu in keep):
            keep.append(complex(lam))
    return np.asarray(keep)


def _mode_reachable(A: np.ndarray, B_cols: np.ndarray, lam: complex,
                    rank_tol: float, method: str) -> bool:
    """True iff no left eigenvector of A at ``lam`` is orthogonal to every
    column of ``B_cols`` (equivalently rank [A - lam I, B] = n)."""
    n = A.shape[0]
    pencil = A - lam * np.eye(n)
    stacked = np.hstack([pencil, B_cols]) if B_cols.size else pencil
    use_eigvec = method == "eigenvector"
    if method == "auto":
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[-1] > 0 and sv[0] / sv[-1] > CONDITION_SWITCH or sv[-1] == 0:
            use_eigvec = True
        else:
            return numerical_rank(stacked, rank_tol) == n
    if not use_eigvec:
        return numerical_rank(stacked, rank_tol) == n
    # eigenvector test: left null space of the pencil against B
    u, sv, _ = np.linalg.svd(pencil)
    eps = max(n, 2) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    tol_null = max(rank_tol, eps)
    null_dim = int(np.count_nonzero(sv <= tol_null))
    if null_dim == 0:
        return True
    W = u[:, n - null_dim:]
    if B_cols.size == 0:
        return False
    return numerical_rank(W.conj().T @ B_cols, rank_tol) == null_dim


def pbh_stabilizable(A, B_q, tol: float = 0.0, margin: float = STABILITY_MARGIN,
                     method: str = "auto") -> bool:
    """Hautus stabilizability test of the pair (A, B_q).

    For every eigenvalue of A with real part >= -margin the pencil
    ``[A - lam I, B_q]`` must have full row rank. ``method`` is "rank",
    "eigenvector", or "auto" (rank test, switching to the eigenvector test
    on ill-conditioned pencils).
    """
    A = np.asarray(A, dtype=float)
    B_q = np.asarray(B_q, dtype=float).reshape(A.shape[0], -1)
    for lam in _unstable_eigenvalues(A, margin):
        if not _mode_reachable(A, B_q, lam, tol, method):
            return False
    return True


def pbh_detectable(A, C_q, tol: float = 0.0, margin: float = STABILITY_MARGIN,
                   method: str = "auto") -> bool:
    """Hautus detectability test of the pair (A, C_q): the dual of
    :func:`pbh_stabilizable` using ``[A - lam I; C_q]``."""
    A = np.asarray(A, dtype=float)
    C_q = np.asarray(C_q, dtype=float).reshape(-1, A.shape[1])
    return pbh_stabilizable(A.T, C_q.T, tol=tol, margin=margin, method=method)


def bsa_pbh_solve(
    net: DynamicNetwork,
    lc: LogisticConstraint | None = None,
    tol: SolverTolerances | None = None,
    backend: str | None = None,
    bit_cap: int = DEFAULT_BIT_CAP,
    rank_tol: float = 0.0,
    replay_limit: int | None = None,
) -> SearchResult:
    """Search variant whose probe verdict is the pair of PBH tests.

    Every probe passing both tests is stored; after the pruning loop the
    stored probes are replayed through the LMI synthesis in ascending
    cardinality (then canonical) order and the first confirmed one is
    returned. ``replay_limit`` bounds the number of replays (default: all).
    Because the rank tests are only necessary conditions, the result can
    have higher cardinality than the exact-oracle search; it is never an
    unverified selection.
    """
    tol = tol or SolverTolerances()

    def pbh_oracle(s: Selection) -> tuple[bool, SofSolution | None]:
        B_q, C_q = reduced_bc(s, net)
        ok = pbh_stabilizable(net.A, B_q, tol=rank_tol) and \
            pbh_detectable(net.A, C_q, tol=rank_tol)
        return ok, None

    cs = enumerate_candidates(net.node_count, lc, bit_cap=bit_cap)
    _, _, trace, passing = _run_pruning_loop(cs, pbh_oracle)

    ordered = sorted(set(passing), key=lambda s: (s.cardinality(), -s.to_word()))
    if replay_limit is not None:
        ordered = ordered[:replay_limit]
    lmi_solves = 0
    for s in ordered:
        lmi_solves += 1
        res: SofResult = solve_sof(net, s, tol, backend=backend)
        if res.status is SofStatus.UNKNOWN:
            raise SolverUnknownError(
                f"no definite verdict for {s.bit_string()}: {res.detail}"
            )
        if res.feasible:
            return SearchResult(
                best=s,
                gain=res.solution,
                trace=trace,
                iterations=len(trace.records),
                lmi_solves=lmi_solves,
            )
        logger.info("PBH-passing selection %s rejected by LMI synthesis (%s)",
                    s.bit_string(), res.status.value)
    detail = (
        "no candidate passed the PBH tests" if not ordered
        else "PBH tests passed but LMI synthesis failed for every stored selection"
    )
    return SearchResult(
        best=None, gain=None, trace=trace,
        iterations=len(trace.records), lmi_solves=lmi_solves, detail=detail,
    )
