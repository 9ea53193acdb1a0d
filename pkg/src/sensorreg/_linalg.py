"""Small linear-algebra helpers used throughout the package."""

from __future__ import annotations

import numpy as np

from .errors import SingularMatrixError


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Return (M + M.T) / 2."""
    return 0.5 * (mat + mat.T)


def is_pd(mat: np.ndarray) -> bool:
    """True when the symmetric part of ``mat`` admits a Cholesky factor."""
    try:
        np.linalg.cholesky(symmetrize(mat))
        return True
    except np.linalg.LinAlgError:
        return False


def inv_sym(mat: np.ndarray, context: str = "matrix") -> np.ndarray:
    """Invert a symmetric matrix, raising :class:`SingularMatrixError` with a
    condition-number diagnostic on failure."""
    try:
        out = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{context} is singular") from exc
    # A single reduction flags any inf/nan the factorization let through.
    if not np.isfinite(out.sum()):
        raise SingularMatrixError(f"{context} inverse is not finite")
    return out


def solve_psd(mat: np.ndarray, rhs: np.ndarray, context: str = "matrix") -> np.ndarray:
    """Solve ``mat @ x = rhs``; raise with a condition diagnostic on failure."""
    try:
        return np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        cond = sym_cond(mat)
        raise SingularMatrixError(f"{context} is singular (cond ~ {cond:.3e})") from exc


def sym_cond(mat: np.ndarray) -> float:
    """Spectral condition number of a symmetric matrix (inf when singular)."""
    w = np.abs(np.linalg.eigvalsh(symmetrize(mat)))
    wmax = w.max(initial=0.0)
    wmin = w.min(initial=0.0)
    if wmin == 0.0:
        return np.inf
    return float(wmax / wmin)


def psd_pinv(mat: np.ndarray, rtol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Pseudo-inverse of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below ``rtol`` times the largest one are treated as zero, so
    rank-deficient information matrices (e.g. position-only updates) invert
    cleanly on their observable subspace.

    Returns the pseudo-inverse and the numerical rank.
    """
    w, v = np.linalg.eigh(symmetrize(mat))
    wmax = np.abs(w).max(initial=0.0)
    keep = w > rtol * wmax
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        return np.zeros_like(mat), 0
    vk = v[:, keep]
    return (vk / w[keep]) @ vk.T, rank
