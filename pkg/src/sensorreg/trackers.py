"""Local trackers: linear Kalman filter and a two-model IMM estimator.

Trackers consume converted Cartesian position measurements and are
bias-ignorant: they model the measurement as position plus white noise.  The
Kalman update also exposes its gain and innovation so that an oracle
comparison path can consume the true gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._linalg import symmetrize, sym_cond
from .coords import CartesianMeasurement
from .dynamics import MotionModel, MultiStepModel
from .errors import SingularMatrixError

__all__ = [
    "GaussianEstimate",
    "KfStepRecord",
    "ImmState",
    "position_selector",
    "kf_predict",
    "kf_update",
    "imm_step",
    "init_track",
    "marginal_position_velocity",
]

# Initial track uncertainty used when a track is started from a single
# converted measurement with zero velocity.
INIT_POS_SIGMA = 200.0
INIT_VEL_SIGMA = 20.0


def position_selector(dim: int) -> np.ndarray:
    """Measurement matrix selecting (x, y) from a 4- or 6-dim state."""
    if dim == 4:
        idx = (0, 2)
    elif dim == 6:
        idx = (0, 3)
    else:
        raise ValueError(f"unsupported state dimension {dim}")
    H = np.zeros((2, dim))
    H[0, idx[0]] = 1.0
    H[1, idx[1]] = 1.0
    return H


def _position_indices(dim: int) -> tuple[int, int]:
    return (0, 2) if dim == 4 else (0, 3)


@dataclass
class GaussianEstimate:
    """State mean and covariance at an integer frame index."""

    mean: np.ndarray
    cov: np.ndarray
    frame: int = 0

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        n = self.mean.shape[0]
        self.cov = np.asarray(self.cov, dtype=float).reshape(n, n)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def position(self) -> np.ndarray:
        i, j = _position_indices(self.dim)
        return self.mean[[i, j]]


@dataclass
class KfStepRecord:
    """Gain, innovation and predicted measurement of one Kalman update."""

    gain: np.ndarray
    innovation: np.ndarray
    predicted_meas: np.ndarray


def init_track(
    z: CartesianMeasurement,
    frame: int = 0,
    pos_sigma: float = INIT_POS_SIGMA,
    vel_sigma: float = INIT_VEL_SIGMA,
) -> GaussianEstimate:
    """Start a track from a converted measurement with zero velocity."""
    mean = np.array([z.z[0], 0.0, z.z[1], 0.0])
    cov = np.diag([pos_sigma**2, vel_sigma**2, pos_sigma**2, vel_sigma**2])
    return GaussianEstimate(mean=mean, cov=cov, frame=frame)


def kf_predict(est: GaussianEstimate, model: MotionModel | MultiStepModel) -> GaussianEstimate:
    """Propagate mean and covariance through the model."""
    steps = model.steps if isinstance(model, MultiStepModel) else 1
    mean = model.F @ est.mean
    cov = symmetrize(model.F @ est.cov @ model.F.T + model.Q)
    return GaussianEstimate(mean=mean, cov=cov, frame=est.frame + steps)


def kf_update(
    est: GaussianEstimate, z: CartesianMeasurement
) -> tuple[GaussianEstimate, KfStepRecord]:
    """Kalman position update with a Joseph-form covariance step."""
    n = est.dim
    H = position_selector(n)
    i, j = _position_indices(n)
    z_pred = est.mean[[i, j]]
    nu = z.z - z_pred
    S = est.cov[np.ix_((i, j), (i, j))] + z.R
    try:
        W = np.linalg.solve(S.T, est.cov[:, (i, j)].T).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"innovation covariance singular (cond ~ {sym_cond(S):.3e})"
        ) from exc
    mean = est.mean + W @ nu
    M = np.eye(n) - W @ H
    cov = symmetrize(M @ est.cov @ M.T + W @ z.R @ W.T)
    rec = KfStepRecord(gain=W, innovation=nu, predicted_meas=z_pred)
    return GaussianEstimate(mean=mean, cov=cov, frame=est.frame), rec


def marginal_position_velocity(est: GaussianEstimate) -> GaussianEstimate:
    """Marginalize a 6-dim (with accelerations) estimate to [x, xdot, y, ydot]."""
    if est.dim == 4:
        return est
    idx = np.array([0, 1, 3, 4])
    return GaussianEstimate(
        mean=est.mean[idx], cov=est.cov[np.ix_(idx, idx)], frame=est.frame
    )


def _embed(est_mean, est_cov, from_dim: int, to_dim: int, accel_var: float):
    """Map a mode estimate between 4- and 6-dim state spaces."""
    if from_dim == to_dim:
        return est_mean, est_cov
    if from_dim == 6 and to_dim == 4:
        idx = np.array([0, 1, 3, 4])
        return est_mean[idx], est_cov[np.ix_(idx, idx)]
    if from_dim == 4 and to_dim == 6:
        idx = np.array([0, 1, 3, 4])
        mean = np.zeros(6)
        mean[idx] = est_mean
        cov = np.zeros((6, 6))
        cov[np.ix_(idx, idx)] = est_cov
        cov[2, 2] = accel_var
        cov[5, 5] = accel_var
        return mean, cov
    raise ValueError(f"cannot map dimension {from_dim} to {to_dim}")


@dataclass
class ImmState:
    """Bank of mode-matched filters with Markov mode switching.

    ``models[i]`` propagates ``modes[i]``; the transition matrix rows are the
    switching probabilities out of each mode.  Modes of different state
    dimension (e.g. an accelerating mode) are mixed by embedding the smaller
    state with ``accel_prior_var`` on the unmodeled acceleration components.
    """

    modes: list[GaussianEstimate]
    models: list[MotionModel]
    mode_probs: np.ndarray
    transition: np.ndarray
    accel_prior_var: float = 100.0

    def __post_init__(self) -> None:
        self.mode_probs = np.asarray(self.mode_probs, dtype=float).reshape(-1)
        n = len(self.modes)
        self.transition = np.asarray(self.transition, dtype=float).reshape(n, n)
        if len(self.models) != n or self.mode_probs.shape[0] != n:
            raise ValueError("modes, models and mode_probs must have equal length")
        if np.any(self.mode_probs < 0) or not math.isclose(
            self.mode_probs.sum(), 1.0, rel_tol=0, abs_tol=1e-9
        ):
            raise ValueError("mode probabilities must form a simplex vector")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition matrix rows must sum to 1")


def _gauss_loglik(nu: np.ndarray, S: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise SingularMatrixError("innovation covariance not positive definite")
    maha = float(nu @ np.linalg.solve(S, nu))
    return -0.5 * (maha + logdet + nu.shape[0] * math.log(2.0 * math.pi))


def imm_step(
    state: ImmState, z: CartesianMeasurement
) -> tuple[ImmState, GaussianEstimate]:
    """One IMM cycle: mix, mode-matched predict/update, reweight, combine.

    Returns the new bank state and the moment-matched combined estimate on
    the 4-dim position/velocity interface.
    """
    n_modes = len(state.modes)
    mu = state.mode_probs
    Pi = state.transition
    c_bar = Pi.T @ mu
    if np.any(c_bar <= 0):
        raise SingularMatrixError("unreachable mode in IMM transition matrix")

    # Mixed initial conditions per destination mode.
    mixed: list[GaussianEstimate] = []
    for j in range(n_modes):
        dim_j = state.models[j].dim
        w = Pi[:, j] * mu / c_bar[j]
        means = []
        covs = []
        for i in range(n_modes):
            m, P = _embed(
                state.modes[i].mean,
                state.modes[i].cov,
                state.modes[i].dim,
                dim_j,
                state.accel_prior_var,
            )
            means.append(m)
            covs.append(P)
        x0 = sum(w[i] * means[i] for i in range(n_modes))
        P0 = sum(
            w[i] * (covs[i] + np.outer(means[i] - x0, means[i] - x0))
            for i in range(n_modes)
        )
        mixed.append(
            GaussianEstimate(mean=x0, cov=symmetrize(P0), frame=state.modes[j].frame)
        )

    # Mode-matched predict and update.
    new_modes: list[GaussianEstimate] = []
    logliks = np.empty(n_modes)
    for j in range(n_modes):
        pred = kf_predict(mixed[j], state.models[j])
        i, k = _position_indices(pred.dim)
        S = pred.cov[np.ix_((i, k), (i, k))] + z.R
        nu = z.z - pred.mean[[i, k]]
        logliks[j] = _gauss_loglik(nu, S)
        upd, _ = kf_update(pred, z)
        new_modes.append(upd)

    # Mode probability update (log-domain for underflow safety).
    log_mu = np.log(c_bar) + logliks
    log_mu -= log_mu.max()
    mu_new = np.exp(log_mu)
    mu_new /= mu_new.sum()

    new_state = ImmState(
        modes=new_modes,
        models=state.models,
        mode_probs=mu_new,
        transition=Pi,
        accel_prior_var=state.accel_prior_var,
    )

    # Moment-matched combined output on the 4-dim interface.
    outs = [marginal_position_velocity(m) for m in new_modes]
    x = sum(mu_new[j] * outs[j].mean for j in range(n_modes))
    P = sum(
        mu_new[j] * (outs[j].cov + np.outer(outs[j].mean - x, outs[j].mean - x))
        for j in range(n_modes)
    )
    combined = GaussianEstimate(mean=x, cov=symmetrize(P), frame=outs[0].frame)
    return new_state, combined
