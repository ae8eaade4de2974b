# -*- coding: utf-8 -*-
"""
测试变分核 F₀/F₁、L² 界、时域序列、判定规则与代价差轨迹
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from overtake_lq.core import LqProblem
from overtake_lq.errors import HypothesisViolationError
from overtake_lq.overtake import (INCONCLUSIVE, OVERTAKING, REFUTED, WEAKLY_OVERTAKING,
                                  comparison_trace, corollary_bound, decide, f0_l2_squared,
                                  f1_discrepancy, horizon_schedule, kernel_F0, kernel_F1,
                                  l2_norm_squared, lyapunov_tail, random_controls,
                                  require_standard_form, variational_gap, variational_kernels)
from overtake_lq.riccati import solve_are, solve_eta, synthesize_optimal
from overtake_lq.signals import Atom, Signal
from overtake_lq.sim import cost_JT

X = np.array([1.0, -2.0])
PULSE = Signal.constant([1.0, 0.0], lo=0.0, hi=1.0)


@pytest.fixture
def scalar_optimum():
    """A=-1, B=1, Q=1, q=0，最优控制 ū = -(√2-1)·2e^{-√2 s}"""
    p = LqProblem(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], S=[[0.0]], R=[[1.0]])
    ric = solve_are(p.A, p.B, p.Q, p.S, p.R)
    eta = solve_eta(p, ric)
    syn = synthesize_optimal(p, ric, eta, 0.0, [2.0])
    return p, syn.control


def test_standard_form_required(unstable_pair):
    with pytest.raises(HypothesisViolationError):
        require_standard_form(unstable_pair)
    with pytest.raises(HypothesisViolationError):
        kernel_F0(unstable_pair, 0.0, [1.0, 0.0], 1.0)


def test_lyapunov_tail(exp_forcing):
    assert_allclose(lyapunov_tail(exp_forcing.A, exp_forcing.Q), 0.25 * np.eye(2), atol=1e-14)


def test_kernel_F0(exp_forcing):
    """F₀(s)x = e^{-2(s-t)}x/4"""
    s = np.array([0.5, 1.0, 3.0])
    F0 = kernel_F0(exp_forcing, 0.5, X, s)
    assert F0.shape == (3, 2)
    assert_allclose(F0, np.exp(-2.0 * (s - 0.5))[:, None] * X[None, :] / 4.0, rtol=1e-12)
    assert kernel_F0(exp_forcing, 0.5, X, 0.5).shape == (2,)
    # ∫|F₀x|² = |x|²/64
    assert f0_l2_squared(exp_forcing, X) == pytest.approx(float(X @ X) / 64.0, rel=1e-10)


@pytest.mark.parametrize("path", ["kernel", "direct"])
def test_kernel_F1_pulse(exp_forcing, path):
    """F₁[1_[0,1)e₁](2) = ((e^{-2} - e^{-4})/8, 0)"""
    value = kernel_F1(exp_forcing, 0.0, PULSE, 2.0, path=path)
    assert_allclose(value, [(math.exp(-2.0) - math.exp(-4.0)) / 8.0, 0.0], atol=1e-10)


def test_kernel_F1_paths_agree(exp_forcing):
    u = Signal.exp_poly([1.0, 0.5], rate=-1.0, lo=0.0)
    diff = f1_discrepancy(exp_forcing, 0.0, u, [0.0, 0.7, 2.0, 5.0])
    assert diff <= 1e-8


def test_kernel_F1_errors(exp_forcing):
    with pytest.raises(ValueError):
        kernel_F1(exp_forcing, 1.0, PULSE, 0.5)
    with pytest.raises(ValueError):
        kernel_F1(exp_forcing, 0.0, PULSE, 1.0, path="fft")


def test_l2_norm_squared():
    assert l2_norm_squared(Signal.constant([1.0], lo=0.0, hi=2.0), 0.0) == pytest.approx(2.0)
    # ∫_0^∞ e^{-2s} ds = 1/2
    assert l2_norm_squared(Signal.exp_poly([1.0], rate=-1.0), 0.0) == pytest.approx(0.5, rel=1e-8)
    assert l2_norm_squared(Signal.zero(3), 0.0) == 0.0


def test_variational_kernels_bounds(exp_forcing):
    kernels = variational_kernels(exp_forcing, 0.0, X, PULSE)
    assert kernels.bounds_hold
    assert kernels.u_l2 == pytest.approx(1.0)
    assert kernels.f0_l2 == pytest.approx(float(X @ X) / 64.0, rel=1e-10)
    assert kernels.kappa > 0
    assert kernels.C0 > 0
    rows = kernels.bound_rows()
    assert [r[0] for r in rows] == ["F0x", "F1u"]
    assert all(r[3] for r in rows)
    assert kernels.to_dict()["bounds_hold"]


def test_variational_gap_vanishes_at_optimum(scalar_optimum):
    """q = 0 时最优控制满足驻点方程，有限时域间隙趋于零"""
    p, u_star = scalar_optimum
    u = u_star + Signal.constant([1.0], lo=0.0, hi=1.0)
    gap = variational_gap(p, 0.0, [2.0], u_star, u, 12.0)
    assert abs(gap) <= 1e-6
    assert abs(gap) <= corollary_bound(p, 0.0, [2.0], u_star)
    assert variational_gap(p, 0.0, [2.0], u_star, u_star, 12.0) == 0.0


def _random_stable(rng, n, m):
    """对称部分负定的 A，故 ‖e^{As}‖ ≤ e^{-s}"""
    G = rng.standard_normal((n, n))
    K = rng.standard_normal((n, n))
    A = -(np.eye(n) + 0.5 * G @ G.T) + 0.5 * (K - K.T)
    H = rng.standard_normal((n, n))
    Q = H @ H.T + 0.1 * np.eye(n)
    return LqProblem(A=A, B=rng.standard_normal((n, m)), Q=0.5 * (Q + Q.T),
                     S=0.3 * rng.standard_normal((m, n)), R=np.eye(m), standard_form=True)


@pytest.mark.parametrize("seed", range(10))
def test_l2_bounds_on_random_fixtures(seed):
    rng = np.random.default_rng(seed)
    n, m = (int(k) for k in rng.integers(1, 5, size=2))
    p = _random_stable(rng, n, m)
    x = rng.standard_normal(n)
    u = random_controls(m, 0.0, 1, seed=seed)[0]
    kernels = variational_kernels(p, 0.0, x, u)
    assert kernels.f0_l2 <= kernels.f0_bound * (1.0 + 1e-6)
    assert kernels.f1_l2 <= kernels.f1_bound * (1.0 + 1e-6)
    assert kernels.bounds_hold


def _gateaux_fixtures():
    decaying = Signal.closed_form([Atom([0.5], rate=-1.0)])
    yield (LqProblem(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], S=[[0.0]], R=[[1.0]], standard_form=True),
           [2.0], decaying, Signal.constant([1.0], lo=0.0, hi=1.0))
    yield (LqProblem(A=-2.0 * np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                     q=Signal.closed_form([Atom([1.0, 0.0], rate=1.0), Atom([0.0, 1.0], rate=-1.0)]),
                     standard_form=True),
           X, Signal.zero(2), Signal.constant([1.0, -0.5], lo=0.0, hi=1.0))
    yield (LqProblem(A=-2.0 * np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                     q=Signal.closed_form([Atom([1.0, 0.0]), Atom([1.0, 0.0], power=1)]),
                     standard_form=True),
           [0.0, 0.0], Signal.zero(2), Signal.constant([0.5, 1.0], lo=0.0, hi=1.5))
    yield (LqProblem(A=[[-1.0, 1.0], [0.0, -2.0]], B=[[0.0], [1.0]], Q=np.eye(2), S=[[0.5, 0.0]],
                     R=[[1.0]], q=Signal.closed_form([Atom([1.0, 0.0], freq=1.0)]),
                     standard_form=True),
           [1.0, 1.0], Signal.closed_form([Atom([1.0], rate=-2.0)]),
           Signal.constant([1.0], lo=0.0, hi=0.5) + Signal.constant([-2.0], lo=0.5, hi=1.0))
    yield (LqProblem(A=[[-3.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -2.0]],
                     B=[[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]], Q=np.diag([1.0, 2.0, 1.0]),
                     S=np.zeros((2, 3)), R=np.eye(2), standard_form=True),
           [1.0, 0.0, -1.0], Signal.closed_form([Atom([1.0, 0.0], rate=-1.5)]),
           Signal.constant([0.0, 1.0], lo=0.0, hi=1.0))


@pytest.mark.parametrize("index", range(5))
def test_variational_gap_is_gateaux_derivative(index):
    """d/dε J_T(ū + εw)|₀ = 2·间隙；w 支撑在 [0, 1.5] 内，T 足够大使尾项可忽略"""
    p, x, u_star, w = list(_gateaux_fixtures())[index]
    T, eps = 16.0, 0.5
    plus = cost_JT(p, 0.0, x, u_star + w.scale(eps), T)
    minus = cost_JT(p, 0.0, x, u_star + w.scale(-eps), T)
    derivative = (plus - minus) / (2.0 * eps)
    gap = variational_gap(p, 0.0, x, u_star, u_star + w, T)
    assert abs(gap) > 1e-3
    assert derivative == pytest.approx(2.0 * gap, rel=1e-4)


def test_horizon_schedule():
    assert_allclose(horizon_schedule(0.0, "geom", 3), [1.0, 2.0, 4.0, 8.0])
    assert_allclose(horizon_schedule(1.0, "linear", 3, step=0.5), [1.5, 2.0, 2.5])
    assert_allclose(horizon_schedule(0.0, "geom", 5, horizon_max=10.0), [1.0, 2.0, 4.0, 8.0])
    with pytest.raises(ValueError):
        horizon_schedule(0.0, "harmonic", 3)
    with pytest.raises(ValueError):
        horizon_schedule(0.0, "geom", 3, horizon_max=0.5)


def test_decide_overtaking():
    rules = decide(np.full(8, -1.0), window=3)
    assert rules["verdict"] == OVERTAKING
    assert rules["drift"] == 0.0


def test_decide_refuted():
    assert decide(np.arange(1.0, 9.0), window=3)["verdict"] == REFUTED


def test_decide_weakly_overtaking():
    deltas = np.array([(-1.0) ** (k + 1) for k in range(11)])
    rules = decide(deltas, window=5)
    assert rules["verdict"] == WEAKLY_OVERTAKING
    assert rules["limsup"] == 1.0 and rules["liminf"] == -1.0


def test_decide_inconclusive():
    assert decide(np.array([]))["verdict"] == INCONCLUSIVE
    assert decide(np.array([1.0]))["verdict"] == INCONCLUSIVE
    # 尾部为正但在减小
    assert decide(np.array([5.0, 4.0, 3.0, 2.0]), window=3)["verdict"] == INCONCLUSIVE


def test_decide_truncated():
    assert decide(np.array([1.0, 2.0, 3.0]), truncated=True)["verdict"] == REFUTED
    assert decide(np.array([-1.0, -2.0, -3.0]), truncated=True)["verdict"] == OVERTAKING
    assert decide(np.array([1.0, 3.0, 2.0]), truncated=True)["verdict"] == INCONCLUSIVE


def test_trace_against_itself(exp_forcing):
    u = Signal.zero(2)
    trace = comparison_trace(exp_forcing, 0.0, X, u, u, horizon_schedule(0.0, "geom", 4))
    assert_allclose(trace.deltas, 0.0)
    assert trace.verdict == OVERTAKING
    assert not trace.truncated


def test_trace_optimal_overtakes_perturbation(scalar_optimum):
    p, u_star = scalar_optimum
    u = u_star + Signal.constant([1.0], lo=0.0, hi=1.0)
    trace = comparison_trace(p, 0.0, [2.0], u_star, u, horizon_schedule(0.0, "geom", 6), window=3)
    assert trace.verdict == OVERTAKING
    assert np.all(trace.deltas < 0)
    assert trace.horizons.size == 7
    rows = trace.to_rows()
    assert len(rows) == 7 and len(rows[0]) == 4
    assert trace.to_dict()["verdict"] == OVERTAKING


def test_trace_ignores_phi(scalar_optimum):
    """加上 φ 不改变代价差"""
    p, u_star = scalar_optimum
    u = u_star + Signal.constant([0.5], lo=0.0, hi=2.0)
    schedule = horizon_schedule(0.0, "linear", 4, step=1.0)
    plain = comparison_trace(p, 0.0, [2.0], u_star, u, schedule)
    shifted = comparison_trace(p.with_phi(Signal.exp_poly([3.0], rate=1.0)), 0.0, [2.0],
                               u_star, u, schedule)
    assert np.array_equal(plain.deltas, shifted.deltas)


def test_trace_with_control_family(scalar_optimum):
    """逐时域构造的控制：u_T = ū + 1_[0,1) 与固定控制一致"""
    p, u_star = scalar_optimum
    u = u_star + Signal.constant([1.0], lo=0.0, hi=1.0)
    schedule = horizon_schedule(0.0, "linear", 3, step=1.0)
    fixed = comparison_trace(p, 0.0, [2.0], u_star, u, schedule)
    family = comparison_trace(p, 0.0, [2.0], u_star, lambda T: u, schedule)
    assert_allclose(family.deltas, fixed.deltas, rtol=1e-6, atol=1e-9)


def test_trace_rejects_empty_schedule(exp_forcing):
    u = Signal.zero(2)
    with pytest.raises(ValueError):
        comparison_trace(exp_forcing, 5.0, X, u, u, [1.0, 2.0])


def test_random_controls():
    a = random_controls(2, 0.0, 3, seed=7)
    b = random_controls(2, 0.0, 3, seed=7)
    s = np.linspace(0.0, 3.9, 40)
    assert len(a) == 3
    for ua, ub in zip(a, b):
        assert_allclose(ua(s), ub(s))
        assert ua.square_integrable()
        assert_allclose(ua(np.array([4.5])), 0.0)
    bounded = random_controls(2, 0.0, 5, seed=1, lower=[0.0, -np.inf])
    for u in bounded:
        assert np.all(u(s)[:, 0] >= 0.0)
