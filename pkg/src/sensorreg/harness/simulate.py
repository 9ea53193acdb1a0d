"""Ground-truth simulation, local tracking, and Monte Carlo estimation runs.

Three estimation methods are supported:

* ``fbe``     -- per-sensor bias estimation against leave-one-out fused
                 references built from reconstructed gains (any sensor count).
* ``ex``      -- stacked two-sensor estimator fed with the local trackers'
                 true gains (oracle path).
* ``exl``     -- the same stacked estimator with gains reconstructed from
                 single-step tracklets.
* ``baseline``-- no biases injected and no estimation; plain tracklet fusion
                 (best-case reference for track accuracy).

All randomness derives from counter-based streams keyed by
(seed, purpose, run, sensor, target), so runs are reproducible and
independent of execution order.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..bias import BiasEstimate, PseudoMeasurement, rlsb_update, sensor_pseudo_obs
from ..coords import (
    CONVERSION_VALIDITY_LIMIT,
    BiasVector,
    CartesianMeasurement,
    _apply_bias_arrays,
    _converted_covariance_arrays,
    conversion_gain,
    jacobians_at,
)
from ..dynamics import MotionModel, compose_steps, ncv_model, nca_model, turn_model
from ..errors import NumericalError, ScenarioError
from ..fusion import (
    FusedTrack,
    SensorModel,
    bias_correct,
    fbe_step,
    reconstruct_local_gain,
    sfa,
)
from ..trackers import (
    GaussianEstimate,
    ImmState,
    imm_step,
    init_track,
    kf_predict,
    kf_update,
)
from ..tracklets import compute_tracklet, tracklet_decorrelated
from .metrics import RunMetrics, aggregate_runs
from .scenario import Scenario

__all__ = [
    "TruthData",
    "LocalTracks",
    "SingleRun",
    "simulate_truth",
    "nominal_geometry",
    "run_local_tracks",
    "run_single",
    "run_monte_carlo",
    "benchmark_gain_paths",
]

# Default IMM switching prior: sticky diagonal with equal initial weights.
IMM_TRANSITION = np.array([[0.95, 0.05], [0.05, 0.95]])
IMM_INITIAL_PROBS = np.array([0.5, 0.5])

METHODS = ("fbe", "ex", "exl", "baseline")


def _stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class TruthData:
    """Trajectories and measurements of one Monte Carlo run."""

    states: np.ndarray      # (n_targets, K+1, 4)
    polar_true: np.ndarray  # (n_sensors, n_targets, K+1, 2)
    polar_meas: np.ndarray  # (n_sensors, n_targets, K+1, 2)
    cart_z: np.ndarray      # (n_sensors, n_targets, K+1, 2) in the common frame
    cart_R: np.ndarray      # (n_sensors, n_targets, K+1, 2, 2)


@dataclass
class LocalTracks:
    """Per-(sensor, target, frame) local estimates; gains only for the
    plain Kalman tracker."""

    mean: np.ndarray            # (n_sensors, n_targets, K+1, 4)
    cov: np.ndarray             # (n_sensors, n_targets, K+1, 4, 4)
    gain: np.ndarray | None     # (n_sensors, n_targets, K+1, 4, 2)

    def estimate(self, s: int, t: int, k: int) -> GaussianEstimate:
        return GaussianEstimate(mean=self.mean[s, t, k], cov=self.cov[s, t, k], frame=k)


@dataclass
class SingleRun:
    """Per-run estimation outputs prior to Monte Carlo aggregation."""

    b_series: np.ndarray | None        # (K+1, n_groups, d)
    sigma_series: np.ndarray | None    # (K+1, n_groups, d, d)
    local_sqerr: np.ndarray            # (K+1,) mean over targets, first sensor
    fused_sqerr: np.ndarray | None     # (K+1,) NaN between fusion epochs


def _segment_sequence(scenario: Scenario, target_idx: int) -> list[MotionModel]:
    """Single-step truth models for frames 0..K-1; the last segment extends."""
    spec = scenario.targets[target_idx]
    q = scenario.process_noise_q
    out: list[MotionModel] = []
    for seg in spec.segments:
        if seg.model == "ncv":
            m = ncv_model(scenario.dt, q)
        else:
            m = turn_model(scenario.dt, seg.omega, q)
        out.extend([m] * seg.frames)
    if len(out) < scenario.frames:
        out.extend([out[-1]] * (scenario.frames - len(out)))
    return out[: scenario.frames]


def simulate_truth(scenario: Scenario, run_index: int, zero_bias: bool = False) -> TruthData:
    """Generate target trajectories and per-sensor measurements for one run.

    Deterministic in (rng_seed, run_index); ``zero_bias`` replaces every
    sensor's bias with zero while keeping the same noise draws, which gives
    paired biased/unbiased comparisons.
    """
    K = scenario.frames
    n_t = len(scenario.targets)
    n_s = len(scenario.sensors)
    states = np.empty((n_t, K + 1, 4))

    for t in range(n_t):
        models = _segment_sequence(scenario, t)
        rng = _stream(scenario.rng_seed, 0, run_index, t)
        noise = rng.standard_normal((K, 4))
        chols: dict[int, np.ndarray] = {}
        x = scenario.targets[t].initial_state.copy()
        states[t, 0] = x
        for k in range(K):
            m = models[k]
            key = id(m)
            if key not in chols:
                chols[key] = (
                    np.linalg.cholesky(m.Q) if np.any(m.Q) else np.zeros_like(m.Q)
                )
            x = m.F @ x + chols[key] @ noise[k]
            states[t, k + 1] = x

    polar_true = np.empty((n_s, n_t, K + 1, 2))
    polar_meas = np.empty_like(polar_true)
    cart_z = np.empty((n_s, n_t, K + 1, 2))
    cart_R = np.empty((n_s, n_t, K + 1, 2, 2))
    for s, sensor in enumerate(scenario.sensors):
        dx = states[:, :, 0] - sensor.position[0]
        dy = states[:, :, 2] - sensor.position[1]
        r = np.hypot(dx, dy)
        theta = np.arctan2(dy, dx)
        polar_true[s, :, :, 0] = r
        polar_true[s, :, :, 1] = theta
        bias = BiasVector() if zero_bias else sensor.bias
        ratio = float(r.max()) * sensor.sigma_theta**2 / sensor.sigma_r
        if ratio >= CONVERSION_VALIDITY_LIMIT:
            warnings.warn(
                f"sensor {s}: conversion validity ratio {ratio:.3g} exceeds "
                f"{CONVERSION_VALIDITY_LIMIT}",
                RuntimeWarning,
                stacklevel=2,
            )
        for t in range(n_t):
            rng = _stream(scenario.rng_seed, 1, run_index, s, t)
            wn = rng.standard_normal((K + 1, 2))
            r_m, t_m = _apply_bias_arrays(
                r[t], theta[t], bias, sensor.sigma_r * wn[:, 0], sensor.sigma_theta * wn[:, 1]
            )
            t_m = np.remainder(t_m + np.pi, 2.0 * np.pi) - np.pi
            if np.any(r_m <= 0):
                raise NumericalError(
                    f"run {run_index}: non-positive biased range for sensor {s}, target {t}"
                )
            polar_meas[s, t, :, 0] = r_m
            polar_meas[s, t, :, 1] = t_m
            lam = conversion_gain(sensor.sigma_theta)
            cart_z[s, t, :, 0] = sensor.position[0] + lam * r_m * np.cos(t_m)
            cart_z[s, t, :, 1] = sensor.position[1] + lam * r_m * np.sin(t_m)
            cart_R[s, t] = _converted_covariance_arrays(
                r_m, t_m, sensor.sigma_r, sensor.sigma_theta
            )
    return TruthData(
        states=states,
        polar_true=polar_true,
        polar_meas=polar_meas,
        cart_z=cart_z,
        cart_R=cart_R,
    )


def nominal_geometry(scenario: Scenario) -> np.ndarray:
    """Noise-free trajectories (n_targets, K+1, 4) used by the bound path."""
    K = scenario.frames
    n_t = len(scenario.targets)
    states = np.empty((n_t, K + 1, 4))
    for t in range(n_t):
        models = _segment_sequence(scenario, t)
        x = scenario.targets[t].initial_state.copy()
        states[t, 0] = x
        for k in range(K):
            x = models[k].F @ x
            states[t, k + 1] = x
    return states


def _local_model(scenario: Scenario):
    lf = scenario.local_filter
    if lf.type == "kf":
        return ncv_model(scenario.dt, lf.q)
    if lf.type == "imm_ncv_ncv":
        return [ncv_model(scenario.dt, lf.q1), ncv_model(scenario.dt, lf.q2)]
    return [nca_model(scenario.dt, lf.q1), ncv_model(scenario.dt, lf.q2)]


def run_local_tracks(scenario: Scenario, truth: TruthData) -> LocalTracks:
    """Run the configured local tracker on every (sensor, target) stream."""
    K = scenario.frames
    n_s = len(scenario.sensors)
    n_t = len(scenario.targets)
    mean = np.empty((n_s, n_t, K + 1, 4))
    cov = np.empty((n_s, n_t, K + 1, 4, 4))
    is_kf = scenario.local_filter.type == "kf"
    gain = np.full((n_s, n_t, K + 1, 4, 2), np.nan) if is_kf else None
    models = _local_model(scenario)

    for s in range(n_s):
        for t in range(n_t):
            z0 = CartesianMeasurement(z=truth.cart_z[s, t, 0], R=truth.cart_R[s, t, 0])
            est = init_track(z0, frame=0)
            mean[s, t, 0] = est.mean
            cov[s, t, 0] = est.cov
            if is_kf:
                for k in range(1, K + 1):
                    est = kf_predict(est, models)
                    meas = CartesianMeasurement(
                        z=truth.cart_z[s, t, k], R=truth.cart_R[s, t, k]
                    )
                    est, rec = kf_update(est, meas)
                    mean[s, t, k] = est.mean
                    cov[s, t, k] = est.cov
                    gain[s, t, k] = rec.gain
            else:
                state = _init_imm(est, models)
                for k in range(1, K + 1):
                    meas = CartesianMeasurement(
                        z=truth.cart_z[s, t, k], R=truth.cart_R[s, t, k]
                    )
                    state, combined = imm_step(state, meas)
                    mean[s, t, k] = combined.mean
                    cov[s, t, k] = combined.cov
    return LocalTracks(mean=mean, cov=cov, gain=gain)


def _init_imm(est: GaussianEstimate, models: list[MotionModel]) -> ImmState:
    modes = []
    for m in models:
        if m.dim == 6:
            mean6 = np.zeros(6)
            cov6 = np.zeros((6, 6))
            idx = np.array([0, 1, 3, 4])
            mean6[idx] = est.mean
            cov6[np.ix_(idx, idx)] = est.cov
            cov6[2, 2] = cov6[5, 5] = 100.0
            modes.append(GaussianEstimate(mean=mean6, cov=cov6, frame=est.frame))
        else:
            modes.append(GaussianEstimate(mean=est.mean.copy(), cov=est.cov.copy(), frame=est.frame))
    return ImmState(
        modes=modes,
        models=models,
        mode_probs=IMM_INITIAL_PROBS.copy(),
        transition=IMM_TRANSITION.copy(),
    )


def _sensor_models(scenario: Scenario) -> dict[int, SensorModel]:
    return {
        i: SensorModel(
            sensor_id=i,
            position=s.position,
            sigma_r=s.sigma_r,
            sigma_theta=s.sigma_theta,
        )
        for i, s in enumerate(scenario.sensors)
    }


def _initial_bias_states(scenario: Scenario) -> dict[int, BiasEstimate]:
    sig = scenario.bias_prior_sigma()
    prior = np.diag(sig**2)
    return {
        i: BiasEstimate(b=np.zeros(scenario.bias_dim), Sigma=prior.copy())
        for i in range(len(scenario.sensors))
    }


def _position_sqerr(track_mean: np.ndarray, states: np.ndarray, k: int) -> float:
    """Mean over targets of squared position error at frame k."""
    dx = track_mean[:, k, 0] - states[:, k, 0]
    dy = track_mean[:, k, 2] - states[:, k, 2]
    return float(np.mean(dx**2 + dy**2))


def _run_fbe(scenario: Scenario, truth: TruthData, tracks: LocalTracks) -> SingleRun:
    K = scenario.frames
    n_s = len(scenario.sensors)
    n_t = len(scenario.targets)
    d = scenario.bias_dim
    fusion_model = ncv_model(scenario.dt, scenario.fusion_q)
    sensors = _sensor_models(scenario)
    bias_states = _initial_bias_states(scenario)

    fused_prev: dict[int, dict[int, FusedTrack]] = {}
    for s in range(n_s):
        ref = min(i for i in range(n_s) if i != s)
        fused_prev[s] = {
            t: FusedTrack(state=tracks.estimate(ref, t, 0), sensors=(ref,))
            for t in range(n_t)
        }
    fused_all = {
        t: FusedTrack(state=tracks.estimate(0, t, 0), sensors=(0,)) for t in range(n_t)
    }
    last_report = {s: 0 for s in range(n_s)}

    b_series = np.empty((K + 1, n_s, d))
    sigma_series = np.empty((K + 1, n_s, d, d))
    fused_sqerr = np.full(K + 1, np.nan)
    for s in range(n_s):
        b_series[0, s] = bias_states[s].b
        sigma_series[0, s] = bias_states[s].Sigma
    fused_sqerr[0] = _position_sqerr(
        np.stack([fused_all[t].state.mean for t in range(n_t)])[:, None],
        truth.states,
        0,
    )

    for k in range(1, K + 1):
        reporters = scenario.reporters_at(k)
        if len(reporters) >= 2:
            track_map = {
                s: {
                    t: (tracks.estimate(s, t, last_report[s]), tracks.estimate(s, t, k))
                    for t in range(n_t)
                }
                for s in reporters
            }
            res = fbe_step(track_map, bias_states, fused_prev, fusion_model, sensors)
            bias_states = res.bias_states
            for s in res.fused:
                fused_prev[s].update(res.fused[s])
            # All-sensor fused track with the freshly updated biases.
            for t in range(n_t):
                corrected = []
                ids = []
                for s in reporters:
                    if t not in res.tracklets.get(s, {}):
                        continue
                    c = bias_correct(
                        res.tracklets[s][t],
                        bias_states[s],
                        (sensors[s].sigma_r, sensors[s].sigma_theta),
                        origin=sensors[s].position,
                    )
                    corrected.append((c.y, c.R))
                    ids.append(s)
                lag_f = k - fused_all[t].state.frame
                msf = compose_steps(fusion_model, lag_f)
                fused_all[t] = sfa(fused_all[t], msf, corrected, sensor_ids=tuple(ids))
            for s in reporters:
                last_report[s] = k
            fused_mean = np.stack([fused_all[t].state.mean for t in range(n_t)])
            dxy = fused_mean[:, [0, 2]] - truth.states[:, k][:, [0, 2]]
            fused_sqerr[k] = float(np.mean(np.sum(dxy**2, axis=1)))
        for s in range(n_s):
            b_series[k, s] = bias_states[s].b
            sigma_series[k, s] = bias_states[s].Sigma

    local_sqerr = np.array(
        [_position_sqerr(tracks.mean[0], truth.states, k) for k in range(K + 1)]
    )
    return SingleRun(
        b_series=b_series,
        sigma_series=sigma_series,
        local_sqerr=local_sqerr,
        fused_sqerr=fused_sqerr,
    )


def _exl_gain_frame(tracks: LocalTracks, k: int, ms1) -> tuple:
    """Single-step tracklet inversion and gain reconstruction for every
    (sensor, target) pair at frame ``k``, batched over the pair axes.

    Exploits the structure of per-frame position updates: the information
    gained over one step lives in the position block, so the pseudo-inverse
    reduces to a closed-form 2x2 inversion.  Pairs that violate that
    structure fall back to the general scalar routine.

    Returns (W, R, u) with shapes (S, T, 4, 2), (S, T, 2, 2), (S, T, 4).
    """
    mean_prev = tracks.mean[:, :, k - 1]
    cov_prev = tracks.cov[:, :, k - 1]
    mean_curr = tracks.mean[:, :, k]
    cov_curr = tracks.cov[:, :, k]
    F, Q = ms1.F, ms1.Q
    x_pred = mean_prev @ F.T
    P_pred = F @ cov_prev @ F.T + Q
    J = np.linalg.inv(np.stack([cov_curr, P_pred]))
    Lam = J[0] - J[1]
    Lam = 0.5 * (Lam + np.swapaxes(Lam, -1, -2))

    with np.errstate(divide="ignore", invalid="ignore"):
        a = Lam[..., 0, 0]
        b = Lam[..., 0, 2]
        c = Lam[..., 2, 2]
        det = a * c - b * b
        dmax = np.abs(Lam).max(axis=(-1, -2))
        leak = np.abs(Lam[..., :, 1::2]).max(axis=(-1, -2))
        ok = (a > 0) & (det > 0) & (leak <= 1e-10 * dmax)

        U = np.zeros_like(Lam)
        U[..., 0, 0] = c / det
        U[..., 2, 2] = a / det
        U[..., 0, 2] = U[..., 2, 0] = -b / det
        info_vec = (
            np.einsum("stij,stj->sti", J[0], mean_curr)
            - np.einsum("stij,stj->sti", J[1], x_pred)
        )
        u = np.einsum("stij,stj->sti", U, info_vec)
        R = U[..., ::2, ::2].copy()
        S_ = P_pred[..., ::2, ::2] + R
        det_s = S_[..., 0, 0] * S_[..., 1, 1] - S_[..., 0, 1] * S_[..., 1, 0]
        S_inv = np.empty_like(S_)
        S_inv[..., 0, 0] = S_[..., 1, 1]
        S_inv[..., 1, 1] = S_[..., 0, 0]
        S_inv[..., 0, 1] = -S_[..., 0, 1]
        S_inv[..., 1, 0] = -S_[..., 1, 0]
        S_inv /= det_s[..., None, None]
        W = P_pred[..., :, ::2] @ S_inv

    if not np.all(ok):
        for s, t in zip(*np.nonzero(~ok)):
            trk = tracklet_decorrelated(
                GaussianEstimate(mean=mean_prev[s, t], cov=cov_prev[s, t], frame=k - 1),
                GaussianEstimate(mean=mean_curr[s, t], cov=cov_curr[s, t], frame=k),
                ms1,
            )
            g = reconstruct_local_gain(trk, trk.pred_cov)
            W[s, t] = g.W
            R[s, t] = g.R
            u[s, t] = trk.u
    return W, R, u


def _run_stacked(
    scenario: Scenario, truth: TruthData, tracks: LocalTracks, reconstructed: bool
) -> SingleRun:
    """Two-sensor stacked-bias estimator with true or reconstructed gains."""
    if len(scenario.sensors) != 2:
        raise ScenarioError("the stacked estimator is defined for two sensors")
    if any(s.lag != 1 for s in scenario.sensors):
        raise ScenarioError("the stacked estimator expects per-frame reporting")
    if not reconstructed and tracks.gain is None:
        raise ScenarioError("true-gain path requires the plain Kalman local tracker")

    K = scenario.frames
    n_t = len(scenario.targets)
    model = ncv_model(scenario.dt, scenario.fusion_q)
    ms1 = compose_steps(model, 1)
    sig = scenario.bias_prior_sigma()
    prior = np.diag(np.concatenate([sig**2, sig**2]))
    est = BiasEstimate(b=np.zeros(4), Sigma=prior)

    b_series = np.empty((K + 1, 1, 4))
    sigma_series = np.empty((K + 1, 1, 4, 4))
    b_series[0, 0] = est.b
    sigma_series[0, 0] = est.Sigma

    for k in range(1, K + 1):
        if reconstructed:
            W_all, R_all, u_all = _exl_gain_frame(tracks, k, ms1)
        for t in range(n_t):
            zb = []
            B = []
            R = []
            for s in (0, 1):
                prev = tracks.estimate(s, t, k - 1)
                curr = tracks.estimate(s, t, k)
                if reconstructed:
                    W, R_s = W_all[s, t], R_all[s, t]
                    pos = scenario.sensors[s].position
                    ux, uy = u_all[s, t, 0] - pos[0], u_all[s, t, 2] - pos[1]
                    r_m, t_m = math.hypot(ux, uy), math.atan2(uy, ux)
                else:
                    W = tracks.gain[s, t, k]
                    R_s = truth.cart_R[s, t, k]
                    r_m, t_m = truth.polar_meas[s, t, k]
                zb.append(sensor_pseudo_obs(curr, prev, W, ms1))
                B.append(jacobians_at(r_m, t_m).B)
                R.append(R_s)
            pm = PseudoMeasurement(
                z=zb[0] - zb[1], H=np.hstack([B[0], -B[1]]), R=R[0] + R[1]
            )
            est = rlsb_update(est, pm)
        b_series[k, 0] = est.b
        sigma_series[k, 0] = est.Sigma

    local_sqerr = np.array(
        [_position_sqerr(tracks.mean[0], truth.states, k) for k in range(K + 1)]
    )
    return SingleRun(
        b_series=b_series,
        sigma_series=sigma_series,
        local_sqerr=local_sqerr,
        fused_sqerr=None,
    )


def _run_baseline(scenario: Scenario, truth: TruthData, tracks: LocalTracks) -> SingleRun:
    """Plain tracklet fusion on an unbiased world; no bias estimation."""
    K = scenario.frames
    n_t = len(scenario.targets)
    fusion_model = ncv_model(scenario.dt, scenario.fusion_q)
    fused_all = {
        t: FusedTrack(state=tracks.estimate(0, t, 0), sensors=(0,)) for t in range(n_t)
    }
    last_report = {s: 0 for s in range(len(scenario.sensors))}
    fused_sqerr = np.full(K + 1, np.nan)
    fused_sqerr[0] = _position_sqerr(
        np.stack([fused_all[t].state.mean for t in range(n_t)])[:, None],
        truth.states,
        0,
    )
    for k in range(1, K + 1):
        reporters = scenario.reporters_at(k)
        if len(reporters) < 2:
            continue
        for t in range(n_t):
            meas = []
            ids = []
            for s in reporters:
                ms = compose_steps(fusion_model, k - last_report[s])
                trk = compute_tracklet(
                    tracks.estimate(s, t, last_report[s]),
                    tracks.estimate(s, t, k),
                    ms,
                )
                g = reconstruct_local_gain(trk, trk.pred_cov)
                meas.append((g.y, g.R))
                ids.append(s)
            msf = compose_steps(fusion_model, k - fused_all[t].state.frame)
            fused_all[t] = sfa(fused_all[t], msf, meas, sensor_ids=tuple(ids))
        for s in reporters:
            last_report[s] = k
        fused_mean = np.stack([fused_all[t].state.mean for t in range(n_t)])
        dxy = fused_mean[:, [0, 2]] - truth.states[:, k][:, [0, 2]]
        fused_sqerr[k] = float(np.mean(np.sum(dxy**2, axis=1)))
    local_sqerr = np.array(
        [_position_sqerr(tracks.mean[0], truth.states, k) for k in range(K + 1)]
    )
    return SingleRun(
        b_series=None, sigma_series=None, local_sqerr=local_sqerr, fused_sqerr=fused_sqerr
    )


def run_single(scenario: Scenario, run_index: int, method: str) -> SingleRun:
    """Simulate and estimate one Monte Carlo run."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    truth = simulate_truth(scenario, run_index, zero_bias=(method == "baseline"))
    tracks = run_local_tracks(scenario, truth)
    try:
        if method == "fbe":
            out = _run_fbe(scenario, truth, tracks)
        elif method in ("ex", "exl"):
            out = _run_stacked(scenario, truth, tracks, reconstructed=(method == "exl"))
        else:
            out = _run_baseline(scenario, truth, tracks)
    except NumericalError as exc:
        raise NumericalError(f"run {run_index}: {exc}") from exc
    _check_finite(out, run_index)
    return out


def _check_finite(run: SingleRun, run_index: int) -> None:
    if run.b_series is not None and not np.all(np.isfinite(run.b_series)):
        k, g = np.argwhere(~np.isfinite(run.b_series))[0][:2]
        raise NumericalError(
            f"run {run_index}: non-finite bias estimate at frame {k}, group {g}"
        )
    if not np.all(np.isfinite(run.local_sqerr)):
        k = int(np.argwhere(~np.isfinite(run.local_sqerr))[0][0])
        raise NumericalError(f"run {run_index}: non-finite local track error at frame {k}")


def _true_bias_groups(scenario: Scenario, method: str) -> np.ndarray:
    biases = [s.bias.as_array(scenario.estimate_scale_bias) for s in scenario.sensors]
    if method in ("ex", "exl"):
        return np.concatenate(biases)[None, :]
    return np.stack(biases)


def _run_task(args):
    scenario, run_index, method = args
    return run_single(scenario, run_index, method)


def run_monte_carlo(
    scenario: Scenario,
    method: str = "fbe",
    mc_runs: int | None = None,
    workers: int = 1,
) -> RunMetrics:
    """Execute the scenario's Monte Carlo runs and aggregate metrics.

    ``workers`` > 1 distributes runs over processes; per-run noise streams
    make the aggregate independent of scheduling.
    """
    runs = scenario.mc_runs if mc_runs is None else int(mc_runs)
    if runs < 1:
        raise ScenarioError("mc_runs must be at least 1")
    if method == "baseline":
        true_bias = None
    else:
        true_bias = _true_bias_groups(scenario, method)
    tasks = [(scenario, i, method) for i in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_task, tasks))
    else:
        outs = [run_single(scenario, i, method) for i in range(runs)]
    return aggregate_runs(scenario, method, outs, true_bias)


def benchmark_gain_paths(
    scenario: Scenario, iterations: int = 200, trials: int = 5
) -> tuple[float, float]:
    """Median per-iteration time of the bias update with true gains (oracle)
    versus reconstructed gains, on identical inputs.

    One iteration covers one frame's pseudo-measurement construction and
    recursive update for every target and both sensors of a two-sensor
    scenario.
    """
    truth = simulate_truth(scenario, 0)
    tracks = run_local_tracks(scenario, truth)
    if tracks.gain is None:
        raise ScenarioError("benchmark requires the plain Kalman local tracker")
    n_t = len(scenario.targets)
    model = ncv_model(scenario.dt, scenario.fusion_q)
    ms1 = compose_steps(model, 1)
    sig = scenario.bias_prior_sigma()
    prior = np.diag(np.concatenate([sig**2, sig**2]))
    k = scenario.frames // 2

    def one_frame(reconstructed: bool) -> None:
        est = BiasEstimate(b=np.zeros(4), Sigma=prior.copy())
        if reconstructed:
            W_all, R_all, u_all = _exl_gain_frame(tracks, k, ms1)
        for t in range(n_t):
            zb, B, R = [], [], []
            for s in (0, 1):
                prev = tracks.estimate(s, t, k - 1)
                curr = tracks.estimate(s, t, k)
                if reconstructed:
                    W, R_s = W_all[s, t], R_all[s, t]
                    pos = scenario.sensors[s].position
                    ux, uy = u_all[s, t, 0] - pos[0], u_all[s, t, 2] - pos[1]
                    r_m, t_m = math.hypot(ux, uy), math.atan2(uy, ux)
                else:
                    W = tracks.gain[s, t, k]
                    R_s = truth.cart_R[s, t, k]
                    r_m, t_m = truth.polar_meas[s, t, k]
                zb.append(sensor_pseudo_obs(curr, prev, W, ms1))
                B.append(jacobians_at(r_m, t_m).B)
                R.append(R_s)
            pm = PseudoMeasurement(
                z=zb[0] - zb[1], H=np.hstack([B[0], -B[1]]), R=R[0] + R[1]
            )
            est = rlsb_update(est, pm)

    def timed(reconstructed: bool) -> float:
        best = []
        for _ in range(trials):
            start = time.perf_counter()
            for _ in range(iterations):
                one_frame(reconstructed)
            best.append((time.perf_counter() - start) / iterations)
        return float(np.median(best))

    one_frame(False)
    one_frame(True)
    return timed(False), timed(True)
