"""Equivalent measurements (tracklets) from pairs of track snapshots.

A tracklet condenses the information a local track accumulated between two
reported frames into a single synthetic measurement ``u`` with covariance
``U``, so a fusion center can treat intermittent track reports as ordinary
measurements.  Two variants are provided: the inverse-filter construction,
which requires the covariance difference between prediction and update to be
invertible, and the decorrelated (information-difference) construction that
also covers the single-step case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import inv_sym, symmetrize
from .dynamics import MultiStepModel
from .errors import NumericalError, TrackletSingularError
from .trackers import GaussianEstimate

__all__ = [
    "Tracklet",
    "tracklet_inverse_kf",
    "tracklet_decorrelated",
    "compute_tracklet",
]

# Condition-number limit on the prediction/update covariance difference above
# which the inverse-filter form is numerically untrustworthy.
COND_LIMIT = 1e12

# Relative eigenvalue cutoff separating genuine information from rounding
# noise in the decorrelated form.
INFO_RTOL = 1e-10


@dataclass
class Tracklet:
    """Equivalent measurement ``u`` with covariance ``U`` over (k', k].

    ``info`` is the (pseudo-)inverse of ``U``: the information the local
    track gained over the interval.  For the decorrelated form ``U`` is the
    pseudo-inverse of a possibly rank-deficient information difference, so
    only its observable subspace (positions, in the single-step case) is
    meaningful.  ``A`` and ``D`` are the weighting and covariance-difference
    matrices of the inverse-filter form (None for the decorrelated form).
    ``pred_cov`` is the L-step predicted covariance used to build the
    tracklet; gain reconstruction reuses it.
    """

    u: np.ndarray
    U: np.ndarray
    info: np.ndarray
    pred_cov: np.ndarray
    from_frame: int
    to_frame: int
    A: np.ndarray | None = None
    D: np.ndarray | None = None
    method: str = "inverse_kf"


def _predict(prev: GaussianEstimate, model: MultiStepModel):
    x_pred = model.F @ prev.mean
    P_pred = model.F @ prev.cov @ model.F.T + model.Q
    return x_pred, P_pred


def _pinv_psd_pair(Lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse and PSD-clipped form of an information difference.

    Contributions at rounding-noise level (below ``INFO_RTOL`` of the largest
    one) are zeroed so the observable subspace inverts cleanly.  The common
    case of an axis-aligned deficiency (position-only updates leave whole
    rows/columns near zero) short-circuits to a block inversion; anything
    else goes through an eigendecomposition.

    Raises :class:`NumericalError` for an indefinite or empty difference.
    """
    n = Lam.shape[0]
    d = Lam.ravel()[:: n + 1]
    dmax = d.max(initial=0.0)
    if dmax > 0.0 and d.min() >= -1e-8 * dmax:
        tol = INFO_RTOL * dmax
        if n == 4 and d[0] > tol and d[2] > tol and d[1] <= tol and d[3] <= tol:
            # Position-only information: whole velocity rows/columns sit at
            # rounding level, so invert the 2x2 position block in place.
            if np.abs(Lam[::2, 1::2]).max() <= tol and max(d[1], d[3], 0.0) <= tol:
                a, b, c = Lam[0, 0], Lam[0, 2], Lam[2, 2]
                det = a * c - b * b
                if a > 0.0 and det > 0.0:
                    U = np.zeros((4, 4))
                    info = np.zeros((4, 4))
                    U[0, 0], U[2, 2] = c / det, a / det
                    U[0, 2] = U[2, 0] = -b / det
                    info[0, 0], info[2, 2] = a, c
                    info[0, 2] = info[2, 0] = b
                    return U, info
        else:
            keep = d > tol
            idx = np.flatnonzero(keep)
            drop = np.flatnonzero(~keep)
            off_small = (
                drop.size == 0
                or np.abs(Lam[idx[:, None], drop]).max(initial=0.0) <= tol
            )
            if off_small:
                sub = Lam[idx[:, None], idx]
                try:
                    np.linalg.cholesky(sub)
                    sub_inv = np.linalg.inv(sub)
                except np.linalg.LinAlgError:
                    sub_inv = None
                if sub_inv is not None:
                    U = np.zeros((n, n))
                    info = np.zeros((n, n))
                    U[idx[:, None], idx] = sub_inv
                    info[idx[:, None], idx] = sub
                    return U, info
    w, v = np.linalg.eigh(Lam)
    wmax = np.abs(w).max()
    if wmax == 0.0:
        raise NumericalError("track carried no new information over the interval")
    if w.min() < -1e-8 * wmax:
        raise NumericalError(
            "information difference indefinite; snapshots are inconsistent"
        )
    keep = w > INFO_RTOL * wmax
    if not np.any(keep):
        raise NumericalError("track carried no new information over the interval")
    vk = v[:, keep]
    wk = w[keep]
    return symmetrize((vk / wk) @ vk.T), symmetrize((vk * wk) @ vk.T)


def tracklet_inverse_kf(
    prev: GaussianEstimate, curr: GaussianEstimate, model: MultiStepModel
) -> Tracklet:
    """Invert the filter update between two snapshots of the same track.

    Raises :class:`TrackletSingularError` when the covariance difference
    D = P(k|k') - P(k|k) is singular or nearly so (e.g. single-step lags with
    position-only updates), signalling the caller to use the decorrelated
    fallback.
    """
    x_pred, P_pred = _predict(prev, model)
    D = symmetrize(P_pred - curr.cov)
    w = np.linalg.eigvalsh(D)
    if w.min() <= 0.0 or w.max() / w.min() > COND_LIMIT:
        raise TrackletSingularError(
            f"covariance difference near-singular (eig range [{w.min():.3e}, {w.max():.3e}])"
        )
    A = np.linalg.solve(D.T, P_pred.T).T
    u = x_pred + A @ (curr.mean - x_pred)
    U = symmetrize(A @ curr.cov)
    info = inv_sym(U, context="tracklet covariance")
    return Tracklet(
        u=u,
        U=U,
        info=symmetrize(info),
        pred_cov=P_pred,
        from_frame=prev.frame,
        to_frame=curr.frame,
        A=A,
        D=D,
        method="inverse_kf",
    )


def tracklet_decorrelated(
    prev: GaussianEstimate, curr: GaussianEstimate, model: MultiStepModel
) -> Tracklet:
    """Build the tracklet from the information difference of the snapshots.

    U^-1 = P(k|k)^-1 - P(k|k')^-1 is the information the track gained over
    the interval; it may be rank-deficient (a single position update informs
    only two state directions), in which case the pseudo-inverse restricts
    ``u`` and ``U`` to the observable subspace.

    Raises :class:`NumericalError` when the difference has a genuinely
    negative eigenvalue or carries no information at all.
    """
    x_pred, P_pred = _predict(prev, model)
    try:
        J_curr, J_pred = np.linalg.inv(np.stack([curr.cov, P_pred]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("track covariance not invertible") from exc
    if not np.isfinite(J_curr.sum() + J_pred.sum()):
        raise NumericalError("track covariance inverse not finite")
    Lam = symmetrize(J_curr - J_pred)
    U, info = _pinv_psd_pair(Lam)
    info_vec = J_curr @ curr.mean - J_pred @ x_pred
    u = U @ info_vec
    return Tracklet(
        u=u,
        U=U,
        info=info,
        pred_cov=P_pred,
        from_frame=prev.frame,
        to_frame=curr.frame,
        method="decorrelated",
    )


def compute_tracklet(
    prev: GaussianEstimate,
    curr: GaussianEstimate,
    model: MultiStepModel,
    method: str = "auto",
) -> Tracklet:
    """Tracklet with automatic fallback to the decorrelated form.

    ``method`` may pin one variant ("inverse_kf" / "decorrelated"); "auto"
    tries the inverse-filter form first and falls back when its covariance
    difference is near-singular.
    """
    if method == "inverse_kf":
        return tracklet_inverse_kf(prev, curr, model)
    if method == "decorrelated":
        return tracklet_decorrelated(prev, curr, model)
    if method != "auto":
        raise ValueError(f"unknown tracklet method {method!r}")
    try:
        return tracklet_inverse_kf(prev, curr, model)
    except TrackletSingularError:
        return tracklet_decorrelated(prev, curr, model)
