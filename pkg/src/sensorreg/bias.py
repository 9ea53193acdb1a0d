"""Bias observations and the recursive estimators that consume them.

A bias pseudo-measurement is obtained by deconvolving a track update with the
(reconstructed or true) filter gain, which isolates the bias contribution plus
measurement noise, and differencing the result against a reference that is
free of the bias under estimation.  The recursive least-squares estimator
handles constant biases; the MMSE variant adds a time update for slowly
varying ones.  Covariance updates use the Joseph form, which preserves
positive definiteness under ill-conditioned observation matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import symmetrize, sym_cond
from .coords import BiasJacobians
from .dynamics import MultiStepModel
from .errors import SingularMatrixError
from .trackers import GaussianEstimate, position_selector

__all__ = [
    "PseudoMeasurement",
    "BiasEstimate",
    "BiasDynamics",
    "sensor_pseudo_obs",
    "difference_pseudo_measurement",
    "rlsb_update",
    "omb_step",
]


# H H^+ for the full-row-rank position-selection matrix: the identity, kept
# as an explicit constant so the reference-projection step stays visible.
_H_POS = position_selector(4)
_HHDAG = _H_POS @ _H_POS.T @ np.linalg.inv(_H_POS @ _H_POS.T)


@dataclass
class PseudoMeasurement:
    """Linear observation ``z = H b + w`` of a bias vector, cov(w) = R."""

    z: np.ndarray
    H: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        self.z = np.asarray(self.z, dtype=float).reshape(-1)
        self.H = np.asarray(self.H, dtype=float)
        self.R = np.asarray(self.R, dtype=float)


@dataclass
class BiasEstimate:
    """Bias estimate and covariance; 2 parameters for offsets only, 4 with
    scale factors."""

    b: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self) -> None:
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        d = self.b.shape[0]
        self.Sigma = np.asarray(self.Sigma, dtype=float).reshape(d, d)

    @property
    def dim(self) -> int:
        return self.b.shape[0]


@dataclass
class BiasDynamics:
    """Transition and process noise for a time-varying bias model."""

    F: np.ndarray
    Q: np.ndarray


def sensor_pseudo_obs(
    curr: GaussianEstimate,
    prev: GaussianEstimate,
    gain: np.ndarray,
    model: MultiStepModel,
) -> np.ndarray:
    """Deconvolve a track update into measurement space.

    Applies the left pseudo-inverse of the gain to the difference between the
    updated state and its measurement-free propagation, recovering the
    (position-level) equivalent measurement the update responded to:
    ``W^+ [x(k|k) - (I - W H) F_L x(k'|k')]``.

    Raises :class:`SingularMatrixError` for a rank-deficient gain.
    """
    W = np.asarray(gain, dtype=float)
    G = W.T @ W
    x_pred = model.F @ prev.mean
    # Positions sit at indices 0 and dim/2, so H x is a strided slice.
    resid = curr.mean - x_pred + W @ x_pred[:: curr.dim // 2]
    try:
        return np.linalg.solve(G, W.T @ resid)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"gain is rank deficient (cond ~ {sym_cond(G):.3e})"
        ) from exc


def difference_pseudo_measurement(
    z1: np.ndarray,
    z2: np.ndarray,
    jac: BiasJacobians,
    R1: np.ndarray,
    R2: np.ndarray,
    offset_only: bool = True,
) -> PseudoMeasurement:
    """Difference two deconvolved observations into a bias pseudo-measurement.

    ``z1`` comes from the bias-free reference and ``z2`` from the sensor
    under estimation, whose Jacobians evaluate the observation matrix
    ``H = -B C`` (restricted to the offset columns when ``offset_only``).
    The noise covariance is the sum of both sources' covariances.

    The reference term is passed through H H^+ with the position-selection
    measurement matrix; for that full-row-rank matrix the product is the
    identity, so the result reduces to a plain difference.
    """
    z = np.asarray(z1, dtype=float) - _HHDAG @ np.asarray(z2, dtype=float)
    cols = 2 if offset_only else 4
    Hcal = -jac.K[:, :cols]
    return PseudoMeasurement(z=z, H=Hcal, R=np.asarray(R1) + np.asarray(R2))


def rlsb_update(est: BiasEstimate, pm: PseudoMeasurement) -> BiasEstimate:
    """Recursive least-squares measurement update with Joseph-form covariance.

    Raises :class:`SingularMatrixError` when the innovation covariance
    ``H Sigma H' + R`` cannot be inverted.
    """
    H = pm.H
    S = H @ est.Sigma @ H.T + pm.R
    try:
        G = np.linalg.solve(S.T, (est.Sigma @ H.T).T).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"pseudo-measurement innovation covariance singular (cond ~ {sym_cond(S):.3e})"
        ) from exc
    b = est.b + G @ (pm.z - H @ est.b)
    M = np.eye(est.dim) - G @ H
    Sigma = symmetrize(M @ est.Sigma @ M.T + G @ pm.R @ G.T)
    return BiasEstimate(b=b, Sigma=Sigma)


def omb_step(
    est: BiasEstimate, pms: list[PseudoMeasurement], dyn: BiasDynamics
) -> BiasEstimate:
    """Measurement updates for every pseudo-measurement of the frame, then a
    time update through the bias dynamics."""
    for pm in pms:
        est = rlsb_update(est, pm)
    b = dyn.F @ est.b
    Sigma = symmetrize(dyn.F @ est.Sigma @ dyn.F.T + dyn.Q)
    return BiasEstimate(b=b, Sigma=Sigma)
