# -*- coding: utf-8 -*-
"""
测试代数Riccati方程、η 方程、最优控制综合与值函数
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import solve_continuous_are

from overtake_lq.core import LqProblem
from overtake_lq.decomp import decompose
from overtake_lq.errors import DivergentTailError, NotApplicableError, RiccatiError
from overtake_lq.riccati import (are_residual, solve_are, solve_eta, synthesize_optimal,
                                 value_function)
from overtake_lq.signals import Signal
from overtake_lq.sim import cost_JT

ROOT2 = math.sqrt(2.0)


def _scalar(q: Signal = None) -> LqProblem:
    """A=-1, B=1, Q=1：P = √2 - 1，A_cl = -√2"""
    return LqProblem(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], S=[[0.0]], R=[[1.0]], q=q)


def test_are_matches_scipy():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    Q = np.eye(2)
    R = np.array([[1.0]])
    ric = solve_are(A, B, Q, np.zeros((1, 2)), R)
    assert_allclose(ric.P, solve_continuous_are(A, B, Q, R), atol=1e-10)
    assert ric.residual <= 1e-9 * (1 + np.linalg.norm(ric.P))
    assert ric.closed_loop_decay > 0


def test_are_with_cross_term():
    """2⟨SX,u⟩ 对应 scipy 的 s = Sᵀ"""
    A = np.array([[0.5, 1.0], [0.0, -1.0]])
    B = np.array([[0.0], [1.0]])
    Q = np.diag([2.0, 1.0])
    S = np.array([[0.3, 0.1]])
    R = np.array([[1.5]])
    ric = solve_are(A, B, Q, S, R)
    assert_allclose(ric.P, solve_continuous_are(A, B, Q, R, s=S.T), atol=1e-9)
    assert_allclose(ric.theta_bar, -np.linalg.solve(R, S + B.T @ ric.P), atol=1e-12)
    assert are_residual(ric.P, A, B, Q, S, R) <= 1e-9


def test_are_rejects_indefinite_R():
    with pytest.raises(RiccatiError):
        solve_are([[1.0]], [[1.0]], [[1.0]], [[0.0]], [[-1.0]])


def test_projected_riccati_on_controllable_part(unstable_pair):
    """ℍ₀ 上 P = (1+√3)/2，闭环衰减率 √3，V = (1+√3)/4"""
    dp = decompose(unstable_pair, t=0.0, x=np.array([1.0, 0.0]))
    pp = dp.projected_problem()
    ric = solve_are(pp.A, pp.B, pp.Q, pp.S, pp.R)
    assert ric.P[0, 0] == pytest.approx((1 + math.sqrt(3)) / 2, abs=1e-10)
    assert ric.closed_loop_decay == pytest.approx(math.sqrt(3), abs=1e-9)

    eta = solve_eta(pp, ric, 0.0)
    assert eta.square_integrable
    V = value_function(pp, ric, eta, 0.0, dp.initial_coords)
    assert V == pytest.approx((1 + math.sqrt(3)) / 4, abs=1e-10)


def test_eta_constant_forcing():
    """q ≡ 1：η = 1/√2，v̄ = -1/√2"""
    p = _scalar(Signal.constant([1.0]))
    ric = solve_are(p.A, p.B, p.Q, p.S, p.R)
    assert ric.P[0, 0] == pytest.approx(ROOT2 - 1, abs=1e-12)
    eta = solve_eta(p, ric)
    assert eta.method == "closed_form"
    s = np.array([0.0, 3.0, 10.0])
    assert_allclose(eta.eta(s)[:, 0], 1 / ROOT2, rtol=1e-10)
    assert_allclose(eta.vbar(s)[:, 0], -1 / ROOT2, rtol=1e-10)
    # 常值 η 不衰减
    assert not eta.decays
    assert not eta.square_integrable


def test_eta_growing_forcing():
    """q = e^s：η = e^s/(√2-1)，不平方可积，值函数不适用"""
    p = _scalar(Signal.exp_poly([1.0], rate=1.0))
    ric = solve_are(p.A, p.B, p.Q, p.S, p.R)
    eta = solve_eta(p, ric)
    assert eta.eta(1.0)[0] == pytest.approx(math.e / (ROOT2 - 1), rel=1e-10)
    assert not eta.square_integrable
    with pytest.raises(NotApplicableError):
        value_function(p, ric, eta, 0.0, [1.0])


def test_eta_divergent_forcing():
    """增长率 2 ≥ √2"""
    p = _scalar(Signal.exp_poly([1.0], rate=2.0))
    ric = solve_are(p.A, p.B, p.Q, p.S, p.R)
    with pytest.raises(DivergentTailError):
        solve_eta(p, ric)


def test_eta_decaying_forcing():
    """q = e^{-s}：η = e^{-s}/(√2+1)"""
    p = _scalar(Signal.exp_poly([1.0], rate=-1.0))
    ric = solve_are(p.A, p.B, p.Q, p.S, p.R)
    eta = solve_eta(p, ric)
    assert eta.decays and eta.square_integrable
    assert eta.eta(2.0)[0] == pytest.approx(math.exp(-2.0) / (ROOT2 + 1), rel=1e-10)


def test_synthesis_closed_form():
    """q = 0：X̄ = e^{-√2 s}x，ū = -(√2-1)X̄"""
    p = _scalar()
    ric = solve_are(p.A, p.B, p.Q, p.S, p.R)
    eta = solve_eta(p, ric)
    syn = synthesize_optimal(p, ric, eta, 0.0, [2.0])
    assert syn.method == "closed_form"
    s = np.array([0.0, 0.5, 3.0])
    assert_allclose(syn.trajectory(s)[:, 0], 2.0 * np.exp(-ROOT2 * s), rtol=1e-10)
    assert_allclose(syn.control(s)[:, 0], -(ROOT2 - 1) * 2.0 * np.exp(-ROOT2 * s), rtol=1e-10)
    assert value_function(p, ric, eta, 0.0, [2.0]) == pytest.approx(4.0 * (ROOT2 - 1), rel=1e-12)


@pytest.mark.parametrize("problem", [
    _scalar(Signal.exp_poly([1.0], rate=-1.0)),
    LqProblem(A=[[-1.0, 1.0], [0.0, -2.0]], B=[[0.0], [1.0]], Q=np.eye(2), S=[[0.2, 0.0]],
              R=[[2.0]], q=Signal.exp_poly([1.0, 0.5], rate=-1.0)),
])
def test_value_function_dynamic_programming(problem):
    """V(0,x) = J_T(ū) + V(T, X̄(T))"""
    ric = solve_are(problem.A, problem.B, problem.Q, problem.S, problem.R)
    eta = solve_eta(problem, ric)
    x = np.ones(problem.n)
    syn = synthesize_optimal(problem, ric, eta, 0.0, x)
    for T in (1.0, 3.0):
        head = cost_JT(problem, 0.0, x, syn.control, T)
        tail = value_function(problem, ric, eta, T, syn.trajectory(T))
        assert head + tail == pytest.approx(value_function(problem, ric, eta, 0.0, x), rel=1e-7)
