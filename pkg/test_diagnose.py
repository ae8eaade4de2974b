# -*- coding: utf-8 -*-
"""
测试增长报告、极分解、Gram 矩阵、见证控制与反驳
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from overtake_lq.core import LqProblem
from overtake_lq.diagnose import (APPLIES, ETA_DRIFT, FAILS, GRID, GRID_TRACKING, LIMIT_DIRECTION,
                                  SMOOTH, THETA_TRACKING, gramian_threshold, growth_report,
                                  polar_decompose, refute, steering_gramian, witness_eta_control,
                                  witness_theta_tracking, witness_weak_direction)
from overtake_lq.errors import (DegenerateSignalError, NotApplicableError, RangeConditionError,
                                SingularGramianError)
from overtake_lq.overtake import INCONCLUSIVE, REFUTED
from overtake_lq.signals import Atom, Signal
from overtake_lq.sim import EXACT, propagate


@pytest.fixture
def damped_identity():
    """A = -I, B = I, q = 0"""
    return LqProblem(A=-np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                     standard_form=True)


def test_polar_decompose():
    q = Signal.closed_form([Atom([3.0, 0.0], 0, 0.0, 0.0, 0.0, 0.0, 1.0),
                            Atom([0.0, 2.0], 0, 0.0, 0.0, 0.0, 2.0, math.inf)], dim=2)
    polar = polar_decompose(q, 0.0, 4.0, step=0.25)
    mag, theta = polar.at(np.array([0.5, 3.0]))
    assert_allclose(mag, [3.0, 2.0])
    assert_allclose(theta, [[1.0, 0.0], [0.0, 1.0]])
    # [1, 2) 上 q = 0，方向由最近的非零节点延拓
    assert polar.flagged
    assert np.all((polar.grid[polar.continued] >= 1.0) & (polar.grid[polar.continued] < 2.0))
    assert polar.to_dict()["continued_nodes"] == int(np.sum(polar.continued))


def test_polar_decompose_rejects_zero():
    with pytest.raises(DegenerateSignalError):
        polar_decompose(Signal.zero(2))
    with pytest.raises(DegenerateSignalError):
        polar_decompose(Signal.constant([1.0, 0.0], lo=10.0, hi=11.0), 0.0, 5.0)


def test_growth_report_exponential(exp_forcing):
    report = growth_report(exp_forcing.q, exp_forcing)
    assert report.globally_integrable is False
    assert report.cesaro_divergent is True
    assert report.ratio_vanishes is False
    assert report.exp_weighted_integrable is True
    assert report.flags["ratio_vanishes"].method == "closed_form"
    assert report.status(THETA_TRACKING) == FAILS
    assert report.applicability[THETA_TRACKING]["failed_premise"] == "ratio_vanishes"
    assert report.flag("satisfies_H") is True
    assert_allclose(report.direction, [1.0, 0.0])
    # 窗口积分之比趋于 e^{αδ} - 1，δ = 1
    ratio = report.flags["ratio_vanishes"]
    assert ratio.params["limit"] == pytest.approx(math.e - 1.0, abs=1e-6)
    assert ratio.margin == pytest.approx(math.e - 1.0, abs=1e-6)


def test_ratio_limit_of_exponential_signal():
    """q = e^s·e₁ 时比值极限为 e^δ - 1，多项式增长时为 0"""
    q = Signal.closed_form([Atom([1.0, 0.0], rate=1.0)])
    report = growth_report(q, delta=1.0)
    assert report.ratio_vanishes is False
    assert report.flags["ratio_vanishes"].params["limit"] == pytest.approx(math.e - 1.0, abs=1e-6)

    half = growth_report(q, delta=0.5).flags["ratio_vanishes"]
    assert half.params["limit"] == pytest.approx(math.expm1(0.5), abs=1e-6)

    poly = growth_report(Signal.closed_form([Atom([1.0, 0.0], power=2)]), delta=1.0)
    assert poly.ratio_vanishes is True
    assert poly.flags["ratio_vanishes"].params["limit"] == 0.0


def test_growth_report_linear_drift(drift_problem):
    report = growth_report(drift_problem.q, drift_problem, eta=[1.0, 0.0])
    assert report.ratio_vanishes is True
    assert report.cesaro_divergent is True
    assert report.G_epsilon_mass is True
    assert report.flag("direction_limit") is True
    assert report.flag("range_condition") is True
    assert_allclose(report.direction, [1.0, 0.0])
    assert report.applies(ETA_DRIFT)
    assert report.to_dict()["theorem_applicability"][ETA_DRIFT]["status"] == APPLIES


def test_growth_report_without_problem():
    report = growth_report(Signal.exp_poly([1.0], rate=-1.0))
    assert report.globally_integrable is True
    assert report.flags["G_epsilon_mass"].status == "unknown"
    assert report.hypotheses is None
    assert report.status(GRID_TRACKING) in (FAILS, "unknown")


def test_growth_report_trend_on_sampled_signal():
    """|q| ≡ 1 的采样信号按时域趋势判定"""
    grid = np.linspace(0.0, 300.0, 3001)
    q = Signal.sampled(grid, np.ones(grid.size))
    report = growth_report(q)
    assert report.flags["globally_integrable"].method == "trend"
    assert report.globally_integrable is False
    assert report.cesaro_divergent is False
    assert report.ratio_vanishes is True
    assert report.exp_weighted_integrable is True


def test_steering_gramian():
    """A = -I：W(δ) = (1 - e^{-2δ})/2·I"""
    W = steering_gramian(-np.eye(2), np.eye(2), 0.1)
    assert_allclose(W, (1.0 - math.exp(-0.2)) / 2.0 * np.eye(2), rtol=1e-12)
    assert np.linalg.norm(np.linalg.inv(W), 2) <= 20.0
    with pytest.raises(ValueError):
        steering_gramian(-np.eye(2), np.eye(2), 0.0)
    with pytest.raises(SingularGramianError):
        steering_gramian(np.zeros((2, 2)), np.array([[1.0], [0.0]]), 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_gramian_inverse_bound_below_threshold(seed):
    """δ 不超过阈值时 W(δ) ≥ δ/2·I，即 ‖W(δ)⁻¹‖ ≤ 2/δ"""
    rng = np.random.default_rng(seed)
    n = 2 + seed % 3
    G = rng.standard_normal((n, n))
    A = -(0.5 * np.eye(n) + 0.3 * G @ G.T) + 0.4 * (G - G.T)
    threshold = gramian_threshold(A)
    for delta in (0.9 * threshold, 0.25 * threshold):
        W = steering_gramian(A, np.eye(n), delta)
        assert np.linalg.norm(np.linalg.inv(W), 2) <= 2.0 / delta


def test_grid_tracking_hits_nodes(damped_identity):
    """ξ(t_k) = θ，ξ(T) = 0"""
    p = damped_identity
    theta = Signal.constant([1.0, 0.0])
    w = witness_theta_tracking(p, 0.0, theta, 0.5, 2.0, mode=GRID)
    assert w.params["cells"] == 4
    nodes = np.array([0.5, 1.0, 1.5, 2.0])
    traj = propagate(p.A, w.perturbation.transform(p.B), 0.0, np.zeros(2), 2.0, 1e-2, EXACT,
                     breakpoints=nodes)
    idx = [int(np.argmin(np.abs(traj.grid - s))) for s in nodes]
    assert_allclose(traj.states[idx[:3]], np.tile([1.0, 0.0], (3, 1)), atol=1e-6)
    assert_allclose(traj.states[idx[3]], [0.0, 0.0], atol=1e-6)
    assert w.xi_discrepancy(p) <= 1e-6


def test_grid_tracking_errors(unstable_pair, damped_identity):
    with pytest.raises(NotApplicableError):
        witness_theta_tracking(unstable_pair, 0.0, Signal.constant([1.0, 0.0]), 0.5, 2.0, mode=GRID)
    with pytest.raises(ValueError):
        witness_theta_tracking(damped_identity, 0.0, Signal.constant([1.0, 0.0]), 2.5, 2.0,
                               mode=GRID)
    with pytest.raises(ValueError):
        witness_theta_tracking(damped_identity, 0.0, Signal.constant([1.0, 0.0]), 0.5, 2.0,
                               mode="spline")


def test_smooth_tracking_returns_to_zero(damped_identity):
    """θ 为常向量时 v = θ，[T, T+δ) 上的校正把 ξ 拉回零"""
    p = damped_identity
    theta = Signal.constant([0.0, 1.0])
    w = witness_theta_tracking(p, 0.0, theta, 0.5, 3.0, mode=SMOOTH, r0=10.0)
    assert w.end == pytest.approx(3.5)
    assert w.xi_discrepancy(p) <= 1e-6
    traj = propagate(p.A, w.perturbation.transform(p.B), 0.0, np.zeros(2), 3.5, 1e-2, EXACT,
                     breakpoints=[3.0])
    assert_allclose(traj.endpoint, [0.0, 0.0], atol=1e-6)
    assert_allclose(w.reference_xi(np.array([3.0]))[0], [0.0, 1.0 - math.exp(-3.0)], atol=1e-12)
    with pytest.raises(RangeConditionError):
        witness_theta_tracking(p, 0.0, theta, 0.5, 3.0, mode=SMOOTH, r0=0.5)


@pytest.fixture
def quadratic_forcing():
    """A = -I, B = I, q = (s², s)：方向随时间转动，比值条件成立"""
    q = Signal.closed_form([Atom([1.0, 0.0], power=2), Atom([0.0, 1.0], power=1)])
    return LqProblem(A=-np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                     q=q, standard_form=True, name="quadratic_forcing")


def test_smooth_tracking_sampled_direction(quadratic_forcing):
    """采样方向用三次样条求导，扰动为采样信号且 ξ 在 T+δ 处回到零"""
    p = quadratic_forcing
    theta = polar_decompose(p.q, 0.0, 6.0).direction
    assert not theta.is_analytic
    w = witness_theta_tracking(p, 0.0, -theta, 0.5, 4.0, mode=SMOOTH)
    assert w.end == pytest.approx(4.5)
    assert w.perturbation.is_sampled
    assert np.isfinite(w.predicted)
    assert w.params["v_max"] < 3.0
    assert w.xi_discrepancy(p) <= 1e-3
    traj = propagate(p.A, w.perturbation.transform(p.B), 0.0, np.zeros(2), 4.5, 1e-2, EXACT,
                     breakpoints=[4.0])
    assert_allclose(traj.endpoint, [0.0, 0.0], atol=1e-3)

    # 采样区间不覆盖 [t, T] 时无法构造
    with pytest.raises(NotApplicableError):
        witness_theta_tracking(p, 0.0, -theta, 0.5, 8.0, mode=SMOOTH)


@pytest.mark.parametrize("theorem_id", [THETA_TRACKING, GRID_TRACKING])
def test_refute_tracking_rotating_direction(quadratic_forcing, theorem_id):
    p = quadratic_forcing
    report = growth_report(p.q, p)
    assert report.status(theorem_id) != FAILS
    trace = refute(p, 0.0, [0.0, 0.0], Signal.zero(2), theorem_id, report=report)
    assert trace.verdict == REFUTED
    assert trace.predicted is not None
    tail = trace.horizons >= 16.0
    assert np.any(tail)
    assert np.all(trace.deltas[tail] >= trace.predicted[tail])


def test_eta_control_witness(drift_problem):
    """Θ = 0：ξ(s) = -(1 - e^{-2s})η"""
    u_star = Signal.zero(2)
    w = witness_eta_control(drift_problem, 0.0, [0.0, 0.0], u_star, [1.0, 0.0], 4.0)
    assert_allclose(w.params["Theta"], np.zeros((2, 2)))
    assert_allclose(w.params["v0"], [-2.0, 0.0])
    s = np.array([1.0, 4.0])
    assert_allclose(w.reference_xi(s)[:, 0], -(1.0 - np.exp(-2.0 * s)), rtol=1e-12)
    assert w.xi_discrepancy(drift_problem) <= 1e-6
    assert w.predicted is not None


def test_weak_direction_witness(exp_forcing):
    w = witness_weak_direction(exp_forcing, 0.0, Signal.zero(2), [3.0, 4.0], 2.0, 4.0)
    assert_allclose(w.params["theta0"], [0.6, 0.8])
    # ‖η‖₂ = δ
    amp = w.params["amplitude"]
    assert amp * amp * 4.0 == pytest.approx(4.0)
    assert_allclose(w.perturbation(np.array([1.0]))[0], [-0.6, -0.8])
    assert_allclose(w.perturbation(np.array([4.0]))[0], [0.0, 0.0])
    with pytest.raises(ValueError):
        witness_weak_direction(exp_forcing, 0.0, Signal.zero(2), [1.0], 1.0, 4.0)


def test_refute_eta_drift(scalar_drift):
    trace = refute(scalar_drift, 0.0, [0.0], Signal.zero(1), ETA_DRIFT, {"eta": [1.0]})
    assert trace.verdict == REFUTED
    assert np.all(np.diff(trace.deltas) > 0)
    assert trace.predicted is not None
    assert np.all(trace.deltas >= trace.predicted)
    assert trace.meta["theorem"] == ETA_DRIFT


def test_refute_drift_problem(drift_problem):
    trace = refute(drift_problem, 0.0, [0.0, 0.0], Signal.zero(2), ETA_DRIFT, {"eta": [1.0, 0.0]})
    assert trace.verdict == REFUTED
    assert trace.to_dict()["trace_verdict"] == REFUTED


def test_refute_by_premise(scalar_drift):
    """⟨θ₀, η⟩ < ε 时 G_ε 条件不成立"""
    trace = refute(scalar_drift, 0.0, [0.0], Signal.zero(1), ETA_DRIFT, {"eta": [-1.0]})
    assert trace.verdict == INCONCLUSIVE
    assert trace.deltas.size == 0
    assert trace.meta["reason"] == "inconclusive-by-premise"
    assert trace.meta["premises"]["failed_premise"] == "G_epsilon_mass"


def test_refute_limit_direction(drift_problem):
    trace = refute(drift_problem, 0.0, [0.0, 0.0], Signal.zero(2), LIMIT_DIRECTION)
    assert trace.verdict == REFUTED
    assert_allclose(trace.meta["witness"]["eta"], [1.0, 0.0])


def test_refute_unknown_theorem(scalar_drift):
    with pytest.raises(ValueError):
        refute(scalar_drift, 0.0, [0.0], Signal.zero(1), "bang_bang")
