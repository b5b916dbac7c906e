"""Dense linear-algebra primitives shared by every other module.

All routines are pure functions on numpy arrays (real or complex), use
LAPACK-backed numpy/scipy kernels, and are deterministic for fixed input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, NumericalError, RankError

__all__ = [
    "SpectrumReport",
    "eigenvalues",
    "spectral_abscissa",
    "numerical_rank",
    "pseudo_inverse_left",
]


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues of a square matrix together with the spectral abscissa
    (maximum real part). Stability of a continuous-time system corresponds
    to ``spectral_abscissa < 0``."""

    eigenvalues: tuple[complex, ...]
    spectral_abscissa: float

    @property
    def is_stable(self) -> bool:
        return self.spectral_abscissa < 0.0


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} contains non-finite entries")
    return a


def eigenvalues(m) -> SpectrumReport:
    """Eigenvalues and spectral abscissa of a square matrix.

    Eigenvalues are sorted by descending real part (ties by descending
    imaginary part) so the report is deterministic for a fixed input.

    Raises
    ------
    DimensionError
        If ``m`` is not a finite square matrix.
    NumericalError
        If the eigenvalue iteration fails to converge.
    """
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    if a.shape[0] == 0:
        return SpectrumReport((), float("-inf"))
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    order = np.lexsort((-vals.imag, -vals.real))
    ordered = tuple(complex(v) for v in vals[order])
    return SpectrumReport(ordered, float(np.max(vals.real)))


def spectral_abscissa(m) -> float:
    """Maximum real part over the eigenvalues of ``m``."""
    return eigenvalues(m).spectral_abscissa


def numerical_rank(m, tol: float = 0.0) -> int:
    """Rank of ``m`` as the number of singular values above ``tol``.

    With ``tol == 0`` the usual SVD default
    ``max(rows, cols) * eps * sigma_max`` is applied, which is far more
    robust than naive determinant/rank heuristics on ill-conditioned input.
    """
    a = _as_matrix(m)
    if tol < 0:
        raise DimensionError("tolerance must be nonnegative")
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if tol == 0.0:
        tol = max(a.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    return int(np.count_nonzero(sv > tol))


def pseudo_inverse_left(b) -> np.ndarray:
    """Left Moore-Penrose pseudo-inverse ``(B^T B)^{-1} B^T`` of a
    full-column-rank matrix, so that ``pinv @ B == I``.

    Raises
    ------
    RankError
        If ``b`` is column-rank deficient.
    """
    a = _as_matrix(np.asarray(b, dtype=float))
    n, k = a.shape
    if k == 0:
        return np.zeros((0, n))
    if numerical_rank(a) < k:
        raise RankError(f"matrix of shape {a.shape} is not full column rank")
    return np.linalg.solve(a.T @ a, a.T)
