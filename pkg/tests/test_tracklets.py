"""Equivalent measurements: inverse-filter identity, decorrelated form,
single-step equivalence with the raw measurement."""

import numpy as np
import pytest

from sensorreg.coords import CartesianMeasurement
from sensorreg.dynamics import MultiStepModel, compose_steps, ncv_model
from sensorreg.errors import NumericalError, TrackletSingularError
from sensorreg.trackers import GaussianEstimate, kf_predict, kf_update
from sensorreg.tracklets import (
    compute_tracklet,
    tracklet_decorrelated,
    tracklet_inverse_kf,
)


def _random_spd(rng, n, lo=0.5, hi=50.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(rng.uniform(lo, hi, n)) @ q.T


def _random_pair(rng):
    """Random (prev, curr, model) with full-rank information gain."""
    model = compose_steps(ncv_model(1.0, rng.uniform(0.05, 2.0)), rng.integers(1, 6))
    prev = GaussianEstimate(
        mean=rng.standard_normal(4) * 100.0, cov=_random_spd(rng, 4), frame=0
    )
    P_pred = model.F @ prev.cov @ model.F.T + model.Q
    # Full-state update with random noise keeps the covariance difference
    # invertible.
    R = _random_spd(rng, 4)
    P_curr = np.linalg.inv(np.linalg.inv(P_pred) + np.linalg.inv(R))
    curr = GaussianEstimate(
        mean=rng.standard_normal(4) * 100.0,
        cov=0.5 * (P_curr + P_curr.T),
        frame=model.steps,
    )
    return prev, curr, model


def test_no_innovation_returns_prediction():
    rng = np.random.default_rng(0)
    prev, curr, model = _random_pair(rng)
    x_pred = model.F @ prev.mean
    curr.mean = x_pred.copy()
    t = tracklet_inverse_kf(prev, curr, model)
    np.testing.assert_allclose(t.u, x_pred, rtol=1e-9)


def test_weighting_identity_on_random_inputs():
    # A P(k|k) and (A - I) P(k|k') are two expressions for the same
    # covariance; they must agree to near machine precision.
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        prev, curr, model = _random_pair(rng)
        t = tracklet_inverse_kf(prev, curr, model)
        P_pred = t.pred_cov
        lhs = t.A @ curr.cov
        rhs = (t.A - np.eye(4)) @ P_pred
        rel = np.linalg.norm(lhs - rhs) / np.linalg.norm(t.U)
        worst = max(worst, rel)
    assert worst <= 1e-9


def test_transpose_identity():
    rng = np.random.default_rng(1)
    prev, curr, model = _random_pair(rng)
    t = tracklet_inverse_kf(prev, curr, model)
    lhs = t.A @ curr.cov
    np.testing.assert_allclose(lhs, lhs.T, atol=1e-10 * np.abs(lhs).max())


def test_covariance_symmetrized():
    rng = np.random.default_rng(2)
    prev, curr, model = _random_pair(rng)
    t = tracklet_inverse_kf(prev, curr, model)
    np.testing.assert_allclose(t.U, t.U.T)


def test_monte_carlo_error_covariance_matches_U():
    # Over many noise realizations of the same filtering problem, the sample
    # covariance of (u - x_true) must match the reported U.  The filter is
    # linear with fixed R, so gains are shared and runs vectorize.
    rng = np.random.default_rng(3)
    model = ncv_model(1.0, 0.2)
    steps = 4
    R = np.diag([25.0, 16.0])
    n = 100_000
    cholQ = np.linalg.cholesky(model.Q + 1e-15 * np.eye(4))
    cholR = np.linalg.cholesky(R)

    P = np.diag([50.0, 4.0, 50.0, 4.0])
    truth = np.zeros((n, 4))
    est = truth + rng.standard_normal((n, 4)) @ np.linalg.cholesky(P).T
    H = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])

    prev_cov = P.copy()
    prev_est = est.copy()
    for _ in range(steps):
        truth = truth @ model.F.T + rng.standard_normal((n, 4)) @ cholQ.T
        est = est @ model.F.T
        P = model.F @ P @ model.F.T + model.Q
        z = truth @ H.T + rng.standard_normal((n, 2)) @ cholR.T
        S = H @ P @ H.T + R
        W = np.linalg.solve(S.T, (P @ H.T).T).T
        est = est + (z - est @ H.T) @ W.T
        P = (np.eye(4) - W @ H) @ P
        P = 0.5 * (P + P.T)

    ms = compose_steps(model, steps)
    us = np.empty((n, 4))
    prev0 = GaussianEstimate(mean=prev_est[0], cov=prev_cov, frame=0)
    t0 = tracklet_inverse_kf(
        prev0, GaussianEstimate(mean=est[0], cov=P, frame=steps), ms
    )
    # A depends only on covariances, so apply it across all runs at once.
    x_pred = prev_est @ ms.F.T
    us = x_pred + (est - x_pred) @ t0.A.T
    err = us - truth
    sample = np.cov(err.T)
    np.testing.assert_allclose(sample, t0.U, rtol=5e-2, atol=5e-2 * np.abs(t0.U).max())


def test_inverse_kf_rejects_singular_difference():
    # A single-step position-only update leaves the covariance difference
    # rank deficient; the inverse-filter form must signal the fallback.
    model = compose_steps(ncv_model(1.0, 0.1), 1)
    prev = GaussianEstimate(mean=np.zeros(4), cov=np.diag([100.0, 4.0, 100.0, 4.0]), frame=0)
    pred = kf_predict(prev, ncv_model(1.0, 0.1))
    curr, _ = kf_update(pred, CartesianMeasurement(z=[1.0, 1.0], R=np.eye(2)))
    with pytest.raises(TrackletSingularError):
        tracklet_inverse_kf(prev, curr, model)
    # The automatic dispatcher falls back instead of failing.
    t = compute_tracklet(prev, curr, model)
    assert t.method == "decorrelated"


def test_decorrelated_scalar_case():
    model = MultiStepModel(F=np.eye(1), Q=np.zeros((1, 1)), steps=1)
    prev = GaussianEstimate(mean=[1.0], cov=[[1.0]], frame=0)
    curr = GaussianEstimate(mean=[2.0], cov=[[0.5]], frame=1)
    t = tracklet_decorrelated(prev, curr, model)
    assert t.U[0, 0] == pytest.approx(1.0, rel=1e-12)
    assert t.u[0] == pytest.approx(2 * 2.0 - 1.0, rel=1e-12)


def test_decorrelated_no_update_is_prediction_fixed_point():
    model = MultiStepModel(F=np.eye(1), Q=np.zeros((1, 1)), steps=1)
    prev = GaussianEstimate(mean=[3.0], cov=[[1.0]], frame=0)
    curr = GaussianEstimate(mean=[3.0], cov=[[0.5]], frame=1)
    t = tracklet_decorrelated(prev, curr, model)
    assert t.u[0] == pytest.approx(3.0)


def test_decorrelated_single_step_recovers_measurement():
    # Running a position-updating filter for one step and inverting it must
    # reproduce the measurement and its covariance on the position block.
    rng = np.random.default_rng(9)
    model = ncv_model(1.0, 0.3)
    prev = GaussianEstimate(
        mean=rng.standard_normal(4) * 10,
        cov=np.diag([40000.0, 400.0, 40000.0, 400.0]),
        frame=0,
    )
    z = CartesianMeasurement(z=rng.standard_normal(2) * 100, R=np.diag([100.0, 421.0]))
    pred = kf_predict(prev, model)
    curr, _ = kf_update(pred, z)
    t = tracklet_decorrelated(prev, curr, compose_steps(model, 1))
    np.testing.assert_allclose(t.u[[0, 2]], z.z, rtol=1e-8)
    np.testing.assert_allclose(t.U[np.ix_((0, 2), (0, 2))], z.R, rtol=1e-8)


def test_decorrelated_rejects_information_loss():
    model = MultiStepModel(F=np.eye(4), Q=np.zeros((4, 4)), steps=1)
    prev = GaussianEstimate(mean=np.zeros(4), cov=np.eye(4), frame=0)
    curr = GaussianEstimate(mean=np.zeros(4), cov=2.0 * np.eye(4), frame=1)
    with pytest.raises(NumericalError):
        tracklet_decorrelated(prev, curr, model)


def test_fused_decorrelated_tracklets_match_centralized_filter():
    # Two unbiased sensors, matched linear models: fusing their single-step
    # tracklets must reproduce the centralized filter that sees both raw
    # measurements.
    rng = np.random.default_rng(33)
    model = ncv_model(1.0, 0.4)
    P0 = np.diag([400.0, 25.0, 400.0, 25.0])
    x0 = np.array([10.0, 1.0, -5.0, 2.0])
    locals_ = [
        GaussianEstimate(mean=x0.copy(), cov=P0.copy(), frame=0) for _ in range(2)
    ]
    central = GaussianEstimate(mean=x0.copy(), cov=P0.copy(), frame=0)
    Rs = [np.diag([100.0, 150.0]), np.diag([80.0, 120.0])]
    ms1 = compose_steps(model, 1)

    for k in range(6):
        zs = [
            CartesianMeasurement(z=rng.standard_normal(2) * 50, R=Rs[i])
            for i in range(2)
        ]
        new_locals = []
        tl = []
        for i in range(2):
            pred = kf_predict(locals_[i], model)
            upd, _ = kf_update(pred, zs[i])
            tl.append(tracklet_decorrelated(locals_[i], upd, ms1))
            new_locals.append(upd)
        locals_ = new_locals

        central = kf_predict(central, model)
        for i in range(2):
            y = CartesianMeasurement(z=tl[i].u[[0, 2]], R=tl[i].U[np.ix_((0, 2), (0, 2))])
            central, _ = kf_update(central, y)

    reference = GaussianEstimate(mean=x0.copy(), cov=P0.copy(), frame=0)
    rng2 = np.random.default_rng(33)
    for k in range(6):
        zs = [
            CartesianMeasurement(z=rng2.standard_normal(2) * 50, R=Rs[i])
            for i in range(2)
        ]
        reference = kf_predict(reference, model)
        for i in range(2):
            reference, _ = kf_update(reference, zs[i])

    np.testing.assert_allclose(central.cov, reference.cov, rtol=1e-6)
    np.testing.assert_allclose(central.mean, reference.mean, rtol=1e-6, atol=1e-8)
