"""Conic feasibility/optimization problems and solver backends.

A :class:`ConicProblem` is a linear objective over a flat decision vector
assembled from named variable blocks (symmetric matrices stored as packed
upper triangles, free matrices, nonnegative vectors), subject to affine
equalities, scalar linear inequalities, and LMI (positive-semidefinite)
constraints.

Strict matrix inequalities are never modelled directly: every "< 0" of the
underlying synthesis conditions is shifted to "<= -eps_lmi * I" and every
"P > 0" to "P >= eps_pd * I" by the callers; this module only ever sees
closed cones.

Two interchangeable backends are provided: Clarabel (interior point,
default) and CVXOPT's conelp. The backend is picked per call, via the
``SAASEL_BACKEND`` environment variable, or defaults to Clarabel. A backend
verdict of "solved" is only ever reported as ``FEASIBLE`` after this module
re-checks the constraint residuals itself; anything not certified feasible
or infeasible is reported as ``UNKNOWN`` and callers must treat that as a
failure, never as infeasibility.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError

__all__ = [
    "SolveStatus",
    "SolverTolerances",
    "VarBlock",
    "MatAffine",
    "ConicProblem",
    "ConicSolution",
    "solve",
    "available_backends",
    "DEFAULT_BACKEND",
]

BACKEND_ENV_VAR = "SAASEL_BACKEND"
DEFAULT_BACKEND = "clarabel"


class SolveStatus(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SolverTolerances:
    """Numerical tolerances shared by all LMI-based modules.

    eps_lmi   strictness shift: "X < 0" is encoded as X <= -eps_lmi * I.
    eps_pd    positive-definiteness floor: "P > 0" becomes P >= eps_pd * I.
    feas_tol  residual acceptance threshold for declaring a returned point
              feasible, applied relative to the scale of each constraint.
    """

    eps_lmi: float = 1e-9
    eps_pd: float = 1e-6
    feas_tol: float = 1e-8

    def __post_init__(self):
        if not (self.eps_lmi > 0 and self.eps_pd > 0 and self.feas_tol > 0):
            raise ValueError("all tolerances must be positive")


def _packed_size(n: int) -> int:
    return n * (n + 1) // 2


def _packed_pairs(n: int) -> list[tuple[int, int]]:
    """(row, col) pairs of the packed upper triangle, column-major."""
    return [(i, j) for j in range(n) for i in range(j + 1)]


@dataclass(frozen=True)
class VarBlock:
    """A named block of the decision vector.

    kind "symmetric": shape (n, n), stored as the n(n+1)/2 packed upper
    triangle; "free" and "nonneg": stored row-major with size rows*cols.
    """

    name: str
    kind: str
    shape: tuple[int, int]
    offset: int

    @property
    def size(self) -> int:
        r, c = self.shape
        if self.kind == "symmetric":
            return _packed_size(r)
        return r * c

    def entry_index(self, i: int, j: int = 0) -> int:
        """Global decision-vector index of entry (i, j) of this block."""
        r, c = self.shape
        if not (0 <= i < r and 0 <= j < c):
            raise DimensionError(f"index ({i},{j}) out of range for {self.shape}")
        if self.kind == "symmetric":
            lo, hi = (i, j) if i <= j else (j, i)
            return self.offset + hi * (hi + 1) // 2 + lo
        return self.offset + i * c + j

    def unpack(self, x: np.ndarray) -> np.ndarray:
        """Reconstruct this block's matrix value from the decision vector."""
        r, c = self.shape
        vals = x[self.offset : self.offset + self.size]
        if self.kind == "symmetric":
            out = np.zeros((r, r))
            for k, (i, j) in enumerate(_packed_pairs(r)):
                out[i, j] = vals[k]
                out[j, i] = vals[k]
            return out
        return vals.reshape(r, c)


class MatAffine:
    """Affine matrix-valued expression ``const + sum_k x_k * Coef_k`` over a
    problem's decision vector, stored as a dense (rows*cols, nvar) matrix of
    per-entry coefficients (row-major entry order)."""

    def __init__(self, problem: "ConicProblem", rows: int, cols: int):
        self._problem = problem
        self.rows = rows
        self.cols = cols
        self.const = np.zeros((rows, cols))
        self.coef = np.zeros((rows * cols, problem.num_scalars))

    def add_const(self, c) -> "MatAffine":
        c = np.asarray(c, dtype=float)
        if c.shape != (self.rows, self.cols):
            raise DimensionError(f"constant shape {c.shape} != {(self.rows, self.cols)}")
        self.const += c
        return self

    def add_product(self, left, var: VarBlock, right, transpose: bool = False) -> "MatAffine":
        """Add ``left @ X @ right`` (or its transpose) where X is ``var``."""
        r, c = var.shape
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        if left.shape[1] != r or right.shape[0] != c:
            raise DimensionError("product dimensions do not match variable shape")
        out_shape = (left.shape[0], right.shape[1])
        if transpose:
            out_shape = out_shape[::-1]
        if out_shape != (self.rows, self.cols):
            raise DimensionError(f"term shape {out_shape} != {(self.rows, self.cols)}")
        if var.kind == "symmetric":
            for k, (i, j) in enumerate(_packed_pairs(r)):
                term = np.outer(left[:, i], right[j, :])
                if i != j:
                    term = term + np.outer(left[:, j], right[i, :])
                if transpose:
                    term = term.T
                self.coef[:, var.offset + k] += term.ravel()
        else:
            for i in range(r):
                li = left[:, i]
                for j in range(c):
                    term = np.outer(li, right[j, :])
                    if transpose:
                        term = term.T
                    self.coef[:, var.offset + i * c + j] += term.ravel()
        return self

    def add_sym_product(self, left, var: VarBlock, right) -> "MatAffine":
        """Add ``T + T^T`` for ``T = left @ X @ right`` (square result)."""
        self.add_product(left, var, right)
        self.add_product(left, var, right, transpose=True)
        return self

    def add_var(self, var: VarBlock, scale: float = 1.0) -> "MatAffine":
        """Add ``scale * X`` where X is ``var`` itself."""
        r, c = var.shape
        if (r, c) != (self.rows, self.cols):
            raise DimensionError(f"variable shape {(r, c)} != {(self.rows, self.cols)}")
        if var.kind == "symmetric":
            for k, (i, j) in enumerate(_packed_pairs(r)):
                self.coef[i * c + j, var.offset + k] += scale
                if i != j:
                    self.coef[j * c + i, var.offset + k] += scale
        else:
            for i in range(r):
                for j in range(c):
                    self.coef[i * c + j, var.offset + i * c + j] += scale
        return self

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.const + (self.coef @ x).reshape(self.rows, self.cols)


class ConicProblem:
    """Builder for a conic problem. Declare every variable block first; the
    variable section freezes as soon as the first constraint is added."""

    def __init__(self):
        self.blocks: list[VarBlock] = []
        self._by_name: dict[str, VarBlock] = {}
        self.num_scalars = 0
        self._frozen = False
        self.objective: np.ndarray | None = None
        self.equalities: list[tuple[list[int], list[float], float]] = []
        self.matrix_equalities: list[MatAffine] = []
        self.inequalities: list[tuple[list[int], list[float], float]] = []
        self.lmis: list[MatAffine] = []
        self._assembled = None

    def shallow_copy(self) -> "ConicProblem":
        """Copy sharing the (immutable once built) constraint expressions;
        extra scalar constraints may be added to the copy independently."""
        other = ConicProblem()
        other.blocks = list(self.blocks)
        other._by_name = dict(self._by_name)
        other.num_scalars = self.num_scalars
        other._frozen = self._frozen
        other.objective = None if self.objective is None else self.objective.copy()
        other.equalities = list(self.equalities)
        other.matrix_equalities = list(self.matrix_equalities)
        other.inequalities = list(self.inequalities)
        other.lmis = list(self.lmis)
        return other

    # -- variables ---------------------------------------------------------

    def _add_block(self, name: str, kind: str, shape: tuple[int, int]) -> VarBlock:
        if self._frozen:
            raise DimensionError("cannot declare variables after constraints")
        if name in self._by_name:
            raise DimensionError(f"duplicate variable name {name!r}")
        blk = VarBlock(name, kind, shape, self.num_scalars)
        self.blocks.append(blk)
        self._by_name[name] = blk
        self.num_scalars += blk.size
        return blk

    def add_symmetric(self, name: str, n: int) -> VarBlock:
        return self._add_block(name, "symmetric", (n, n))

    def add_free(self, name: str, shape: tuple[int, int]) -> VarBlock:
        return self._add_block(name, "free", tuple(shape))

    def add_nonneg(self, name: str, size: int) -> VarBlock:
        return self._add_block(name, "nonneg", (size, 1))

    def block(self, name: str) -> VarBlock:
        return self._by_name[name]

    # -- constraints -------------------------------------------------------

    def mat_expr(self, rows: int, cols: int) -> MatAffine:
        self._frozen = True
        return MatAffine(self, rows, cols)

    def add_lmi(self, expr: MatAffine) -> None:
        """Require ``expr >= 0`` in the positive-semidefinite sense."""
        if expr.rows != expr.cols:
            raise DimensionError("LMI expressions must be square")
        self._frozen = True
        self._assembled = None
        self.lmis.append(expr)

    def add_matrix_equality(self, expr: MatAffine) -> None:
        """Require ``expr == 0`` entrywise."""
        self._frozen = True
        self._assembled = None
        self.matrix_equalities.append(expr)

    def add_equality(self, cols: list[int], vals: list[float], rhs: float) -> None:
        """Scalar equality ``sum(vals * x[cols]) == rhs``."""
        self._frozen = True
        self._assembled = None
        self.equalities.append((list(cols), [float(v) for v in vals], float(rhs)))

    def add_inequality(self, cols: list[int], vals: list[float], rhs: float) -> None:
        """Scalar inequality ``sum(vals * x[cols]) <= rhs``."""
        self._frozen = True
        self._assembled = None
        self.inequalities.append((list(cols), [float(v) for v in vals], float(rhs)))

    def set_objective(self, cols: list[int], vals: list[float]) -> None:
        """Minimize ``sum(vals * x[cols])`` (default: zero objective)."""
        c = np.zeros(self.num_scalars)
        c[list(cols)] = vals
        self._frozen = True
        self._assembled = None
        self.objective = c

    # -- assembly ----------------------------------------------------------

    def _scalar_rows(self, triples) -> tuple[sp.csr_matrix, np.ndarray]:
        rows, cols, vals, rhs = [], [], [], []
        for r, (cidx, cval, b) in enumerate(triples):
            rows.extend([r] * len(cidx))
            cols.extend(cidx)
            vals.extend(cval)
            rhs.append(b)
        mat = sp.csr_matrix(
            (vals, (rows, cols)), shape=(len(triples), self.num_scalars)
        )
        return mat, np.asarray(rhs, dtype=float)

    def assemble(self):
        """Stack all constraints into (c, A_eq, b_eq, G, h, lmis) form with
        ``A_eq x = b_eq``, ``G x <= h`` and each LMI as a MatAffine. Cached
        until the problem is mutated."""
        if self._assembled is not None:
            return self._assembled
        c = self.objective if self.objective is not None else np.zeros(self.num_scalars)
        eq_rows = list(self.equalities)
        A_list, b_list = [], []
        if eq_rows:
            m, r = self._scalar_rows(eq_rows)
            A_list.append(m)
            b_list.append(r)
        for expr in self.matrix_equalities:
            A_list.append(sp.csr_matrix(expr.coef))
            b_list.append(-expr.const.ravel())
        A_eq = sp.vstack(A_list, format="csr") if A_list else sp.csr_matrix((0, self.num_scalars))
        b_eq = np.concatenate(b_list) if b_list else np.zeros(0)

        ineq_rows = list(self.inequalities)
        for blk in self.blocks:
            if blk.kind == "nonneg":
                for k in range(blk.size):
                    ineq_rows.append(([blk.offset + k], [-1.0], 0.0))
        G, h = self._scalar_rows(ineq_rows)
        self._assembled = (c, A_eq, b_eq, G, h, list(self.lmis))
        return self._assembled

    # -- residuals ---------------------------------------------------------

    def residual_check(self, x: np.ndarray, feas_tol: float) -> tuple[bool, dict[str, float]]:
        """Evaluate constraint violations at ``x`` and accept or reject them.

        Acceptance is scale-relative: each violation is compared against
        ``feas_tol`` times the magnitude of the quantities involved (the
        feasibility systems are homogeneous in the matrix variables, so the
        solution scale is solver-chosen and absolute thresholds would be
        arbitrary). Returns (ok, residuals) with residuals reporting the max
        equality violation, min LMI eigenvalue and min inequality slack.
        """
        _, A_eq, b_eq, G, h, lmis = self.assemble()
        res = {"max_equality_violation": 0.0, "min_lmi_eigenvalue": float("inf"),
               "min_inequality_slack": float("inf")}
        ok = True
        scale = 1.0 + (float(np.max(np.abs(x))) if x.size else 0.0)
        if A_eq.shape[0]:
            res["max_equality_violation"] = float(np.max(np.abs(A_eq @ x - b_eq)))
            ok &= res["max_equality_violation"] <= feas_tol * scale
        if G.shape[0]:
            res["min_inequality_slack"] = float(np.min(h - G @ x))
            ok &= res["min_inequality_slack"] >= -feas_tol * scale
        for expr in lmis:
            S = expr.value(x)
            lam = float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])
            res["min_lmi_eigenvalue"] = min(res["min_lmi_eigenvalue"], lam)
            ok &= lam >= -feas_tol * (1.0 + float(np.max(np.abs(S))))
        return bool(ok), res

    def residuals(self, x: np.ndarray) -> dict[str, float]:
        """Constraint violations at ``x`` (see :meth:`residual_check`)."""
        return self.residual_check(x, feas_tol=np.inf)[1]

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        """Debug dump of the full problem (documented schema: variable
        blocks, dense constraint matrices as nested arrays)."""

        def dump_expr(e: MatAffine) -> dict:
            return {"rows": e.rows, "cols": e.cols,
                    "const": e.const.tolist(), "coef": e.coef.tolist()}

        return {
            "blocks": [
                {"name": b.name, "kind": b.kind, "shape": list(b.shape)}
                for b in self.blocks
            ],
            "objective": (self.objective.tolist() if self.objective is not None else None),
            "equalities": [
                {"cols": c, "vals": v, "rhs": r} for (c, v, r) in self.equalities
            ],
            "matrix_equalities": [dump_expr(e) for e in self.matrix_equalities],
            "inequalities": [
                {"cols": c, "vals": v, "rhs": r} for (c, v, r) in self.inequalities
            ],
            "lmis": [dump_expr(e) for e in self.lmis],
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConicProblem":
        prob = cls()
        for b in data["blocks"]:
            prob._add_block(b["name"], b["kind"], tuple(b["shape"]))

        def load_expr(d: dict) -> MatAffine:
            e = prob.mat_expr(d["rows"], d["cols"])
            e.const = np.asarray(d["const"], dtype=float).reshape(d["rows"], d["cols"])
            e.coef = np.asarray(d["coef"], dtype=float).reshape(
                d["rows"] * d["cols"], prob.num_scalars
            )
            return e

        if data.get("objective") is not None:
            c = np.asarray(data["objective"], dtype=float)
            prob.set_objective(list(range(len(c))), list(c))
        for row in data["equalities"]:
            prob.add_equality(row["cols"], row["vals"], row["rhs"])
        for d in data["matrix_equalities"]:
            prob.add_matrix_equality(load_expr(d))
        for row in data["inequalities"]:
            prob.add_inequality(row["cols"], row["vals"], row["rhs"])
        for d in data["lmis"]:
            prob.add_lmi(load_expr(d))
        return prob

    @classmethod
    def load_json(cls, path) -> "ConicProblem":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class ConicSolution:
    """Outcome of a conic solve. ``values`` maps block names to matrix
    values and is only populated when the status is FEASIBLE."""

    status: SolveStatus
    values: dict[str, np.ndarray] = field(default_factory=dict)
    residuals: dict[str, float] = field(default_factory=dict)
    objective: float = float("nan")
    diagnostics: str = ""
    iterations: int = 0
    solve_time: float = 0.0


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


def _clarabel_solve(problem: ConicProblem, tol: SolverTolerances, options=None):
    import clarabel

    c, A_eq, b_eq, G, h, lmis = problem.assemble()
    n = problem.num_scalars
    mats, rhs, cones = [], [], []
    if A_eq.shape[0]:
        mats.append(A_eq)
        rhs.append(b_eq)
        cones.append(clarabel.ZeroConeT(A_eq.shape[0]))
    if G.shape[0]:
        mats.append(G)
        rhs.append(h)
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    root2 = np.sqrt(2.0)
    for expr in lmis:
        m = expr.rows
        pairs = _packed_pairs(m)
        # Clarabel PSD cone: packed upper triangle, column-major, off-diagonal
        # entries scaled by sqrt(2). Constraint form A x + s = b with
        # s = svec(const + coef x), hence A = -svec(coef), b = svec(const).
        idx = np.array([i * m + j for (i, j) in pairs])
        scal = np.array([1.0 if i == j else root2 for (i, j) in pairs])
        mats.append(sp.csr_matrix(-(expr.coef[idx] * scal[:, None])))
        rhs.append(expr.const.ravel()[idx] * scal)
        cones.append(clarabel.PSDTriangleConeT(m))
    A = sp.vstack(mats, format="csc") if mats else sp.csc_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    for key, val in (options or {}).items():
        setattr(settings, key, val)
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), c, A, b, cones, settings)
    res = solver.solve()
    status = str(res.status)
    x = np.asarray(res.x, dtype=float)
    if status == "PrimalInfeasible":
        verdict = SolveStatus.INFEASIBLE
    elif status in ("Solved", "AlmostSolved"):
        verdict = SolveStatus.FEASIBLE  # subject to residual re-check
    else:
        # AlmostPrimalInfeasible can fire on feasible problems near the
        # boundary; it is never trusted as an infeasibility certificate.
        verdict = SolveStatus.UNKNOWN
    return verdict, x, float(res.obj_val), status, int(res.iterations), float(res.solve_time)


def _cvxopt_solve(problem: ConicProblem, tol: SolverTolerances, options=None):
    import cvxopt
    from cvxopt import solvers

    c, A_eq, b_eq, G, h, lmis = problem.assemble()
    n = problem.num_scalars
    G_parts = [np.asarray(G.todense())] if G.shape[0] else []
    h_parts = [h] if G.shape[0] else []
    dims = {"l": int(G.shape[0]), "q": [], "s": []}
    for expr in lmis:
        m = expr.rows
        # conelp PSD blocks use the full m*m matrix, column-major, no scaling.
        order = np.array([i * m + j for j in range(m) for i in range(m)])
        G_parts.append(-expr.coef[order])
        h_parts.append(expr.const.ravel()[order])
        dims["s"].append(m)
    Gm = np.vstack(G_parts) if G_parts else np.zeros((0, n))
    hm = np.concatenate(h_parts) if h_parts else np.zeros(0)

    kwargs = {}
    if A_eq.shape[0]:
        kwargs["A"] = cvxopt.matrix(np.asarray(A_eq.todense()))
        kwargs["b"] = cvxopt.matrix(b_eq)
    opts = {"show_progress": False}
    opts.update(options or {})
    try:
        res = solvers.conelp(
            cvxopt.matrix(c), cvxopt.matrix(Gm), cvxopt.matrix(hm), dims,
            options=opts, **kwargs,
        )
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        return SolveStatus.UNKNOWN, np.zeros(n), float("nan"), f"conelp error: {exc}", 0, 0.0
    status = res["status"]
    x = np.asarray(res["x"]).ravel() if res["x"] is not None else np.zeros(n)
    if status == "primal infeasible":
        verdict = SolveStatus.INFEASIBLE
    elif status == "optimal":
        verdict = SolveStatus.FEASIBLE
    else:
        verdict = SolveStatus.UNKNOWN
    obj = float(c @ x) if x.size else 0.0
    return verdict, x, obj, status, int(res.get("iterations", 0)), 0.0


_BACKENDS = {
    "clarabel": _clarabel_solve,
    "cvxopt": _cvxopt_solve,
}


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def resolve_backend(backend: str | None = None) -> str:
    """Backend name from the argument, the environment, or the default."""
    name = (backend or os.environ.get(BACKEND_ENV_VAR) or DEFAULT_BACKEND).lower()
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    return name


def default_attempts(backend: str | None = None) -> list[tuple[str, dict | None]]:
    """Deterministic escalation ladder: the selected backend first, then a
    settings variant that helps on degenerate feasibility systems, then the
    other solver family."""
    primary = resolve_backend(backend)
    if primary == "clarabel":
        return [("clarabel", None),
                ("clarabel", {"equilibrate_enable": False}),
                ("cvxopt", None)]
    return [("cvxopt", None),
            ("clarabel", None),
            ("clarabel", {"equilibrate_enable": False})]


def solve_robust(
    problem: ConicProblem,
    tolerances: SolverTolerances | None = None,
    backend: str | None = None,
    attempts: list[tuple[str, dict | None]] | None = None,
) -> tuple["ConicSolution", list["ConicSolution"]]:
    """Walk an escalation ladder until some pass reaches a definite verdict.

    Returns (solution, undecided_attempts); when every pass stays UNKNOWN
    the returned solution is the last attempt and the list holds them all
    (their ``values`` can feed caller-side post-certification).
    """
    tol = tolerances or SolverTolerances()
    unknowns: list[ConicSolution] = []
    sol = None
    for be, opts in attempts if attempts is not None else default_attempts(backend):
        sol = solve(problem, tol, backend=be, options=opts)
        if sol.status is not SolveStatus.UNKNOWN:
            return sol, unknowns
        unknowns.append(sol)
    assert sol is not None
    return sol, unknowns


def solve(
    problem: ConicProblem,
    tolerances: SolverTolerances | None = None,
    backend: str | None = None,
    options: dict | None = None,
) -> ConicSolution:
    """Solve a conic problem and return a certified solution.

    FEASIBLE is only reported when the backend's point passes this module's
    own residual check at ``feas_tol`` (scale-relative); INFEASIBLE only when
    the backend declared primal infeasibility. Everything else is UNKNOWN,
    with diagnostics, and must be treated by callers as a failure. An
    UNKNOWN solution still exposes the backend's last iterate in ``values``
    (with its residuals) for callers that can post-certify a point by
    other means; those values carry no feasibility guarantee.

    ``options`` passes backend-specific solver settings through unchanged.
    """
    tol = tolerances or SolverTolerances()
    name = backend or os.environ.get(BACKEND_ENV_VAR) or DEFAULT_BACKEND
    name = name.lower()
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    verdict, x, obj, raw_status, iters, solve_time = _BACKENDS[name](problem, tol, options)

    if verdict is SolveStatus.INFEASIBLE:
        return ConicSolution(SolveStatus.INFEASIBLE, diagnostics=raw_status,
                             iterations=iters, solve_time=solve_time)

    has_point = x.size == problem.num_scalars and bool(np.all(np.isfinite(x)))
    if verdict is SolveStatus.UNKNOWN:
        values = {blk.name: blk.unpack(x) for blk in problem.blocks} if has_point else {}
        return ConicSolution(SolveStatus.UNKNOWN,
                             values=values,
                             residuals=problem.residuals(x) if has_point else {},
                             diagnostics=f"backend {name}: {raw_status}",
                             iterations=iters, solve_time=solve_time)

    ok, residuals = problem.residual_check(x, tol.feas_tol)
    if not ok:
        return ConicSolution(
            SolveStatus.UNKNOWN,
            values={blk.name: blk.unpack(x) for blk in problem.blocks},
            residuals=residuals,
            diagnostics=f"backend {name} reported {raw_status} but residuals "
                        f"exceed feas_tol={tol.feas_tol}",
            iterations=iters, solve_time=solve_time,
        )
    values = {blk.name: blk.unpack(x) for blk in problem.blocks}
    return ConicSolution(
        SolveStatus.FEASIBLE,
        values=values,
        residuals=residuals,
        objective=obj,
        iterations=iters,
        solve_time=solve_time,
        diagnostics=raw_status,
    )
