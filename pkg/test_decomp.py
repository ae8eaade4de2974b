# -*- coding: utf-8 -*-
"""
测试可控子空间分解、投影问题与标准形约化
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from overtake_lq.core import LqProblem, spectral_abscissa
from overtake_lq.decomp import (check_compatibility, controllable_subspace, decompose,
                                reduce_to_standard_form, stabilizer, target_spectrum)
from overtake_lq.errors import StabilizerRequiredError
from overtake_lq.signals import Signal
from overtake_lq.sim import EXACT, integrate_state


def test_subspace_of_uncontrollable_pair(unstable_pair):
    sub = controllable_subspace(unstable_pair.A, unstable_pair.B)
    assert sub.dim == 1
    assert not sub.is_full
    assert_allclose(np.abs(sub.basis[:, 0]), [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)
    assert sub.basis[0, 0] * sub.basis[1, 0] < 0
    assert_allclose(np.abs(sub.complement[:, 0]), [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)


def test_projection_identities(unstable_pair):
    sub = controllable_subspace(unstable_pair.A, unstable_pair.B)
    Pi, Pp = sub.Pi, sub.PiPerp
    assert_allclose(Pi @ Pi, Pi, atol=1e-14)
    assert_allclose(Pi + Pp, np.eye(2), atol=1e-14)
    assert_allclose(Pi @ Pp, np.zeros((2, 2)), atol=1e-14)
    # ℍ₀ 是 A 不变的且包含 R(B)
    assert_allclose(Pp @ unstable_pair.A @ Pi, np.zeros((2, 2)), atol=1e-12)
    assert_allclose(Pp @ unstable_pair.B, np.zeros((2, 1)), atol=1e-12)

    x = np.array([0.3, -1.7])
    assert_allclose(sub.lift(sub.coords(x)), Pi @ x, atol=1e-14)


def test_full_subspace(exp_forcing):
    sub = controllable_subspace(exp_forcing.A, exp_forcing.B)
    assert sub.is_full and sub.dim == 2
    assert_allclose(sub.PiPerp, np.zeros((2, 2)), atol=1e-14)


def test_target_spectrum():
    assert_allclose(target_spectrum(3, 1.0), [-1.0, -2.0, -3.0])
    assert_allclose(target_spectrum(2, 0.5), [-0.5, -1.5])


def test_stabilizer_places_poles():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    B = np.array([[0.0], [1.0], [0.0]])
    sub = controllable_subspace(A, B)
    theta = stabilizer(A, B, mu_star=1.0, sub=sub)
    assert theta.shape == (1, 3)
    A_cl = A + B @ theta
    assert spectral_abscissa(A_cl) < 0
    V = sub.basis
    assert_allclose(np.sort(np.linalg.eigvals(V.T @ A_cl @ V).real), [-2.0, -1.0], atol=1e-8)


def test_stabilizer_rejects_unstable_complement(unstable_pair):
    with pytest.raises(StabilizerRequiredError):
        stabilizer(unstable_pair.A, unstable_pair.B)


def test_decompose_uncontrollable_pair(unstable_pair):
    """ℍ₀ 坐标下 A=1, B=√2；X_Π⊥ = e^{2s}(1,1)/2"""
    x = np.array([1.0, 0.0])
    dp = decompose(unstable_pair, t=0.0, x=x)
    assert dp.dim == 1
    assert_allclose(dp.initial_coords, [1 / math.sqrt(2)], atol=1e-14)
    for s in (0.0, 0.5, 1.0):
        assert_allclose(dp.X_PiPerp(s), 0.5 * math.exp(2 * s) * np.ones(2), rtol=1e-10)

    pp = dp.projected_problem()
    assert_allclose(pp.A, [[1.0]], atol=1e-12)
    assert_allclose(pp.B, [[math.sqrt(2)]], atol=1e-12)
    assert_allclose(pp.Q, [[1.0]], atol=1e-12)
    assert pp.q.is_zero or np.allclose(pp.q(np.array([0.0, 2.0])), 0.0, atol=1e-9)
    # 稳定化后的控制变量 v
    assert spectral_abscissa(dp.projected_problem(use_theta=True).A) < 0

    flags = dp.compatibility
    assert flags.cost_decoupled
    assert not flags.coupling_integrable
    assert check_compatibility(dp).to_dict() == flags.to_dict()


def test_decomposed_trajectories_match_full_state(unstable_pair):
    """ΠX 等于 ℍ₀ 坐标问题(含耦合)的轨迹，Π⊥X 等于 X_Π⊥，且与控制无关"""
    x = np.array([1.0, 0.0])
    dp = decompose(unstable_pair, t=0.0, x=x)
    pp = dp.projected_problem(include_coupling=True)
    V = dp.sub.basis
    for u in (Signal.zero(1), Signal.constant([1.0], lo=0.0, hi=1.0)):
        full = integrate_state(unstable_pair, 0.0, x, u, 3.0, method=EXACT)
        proj = integrate_state(pp, 0.0, dp.initial_coords, u, 3.0, method=EXACT)
        assert_allclose(proj.grid, full.grid)
        scale = np.max(np.abs(full.states))
        assert_allclose(full.states @ dp.sub.Pi.T, proj.states @ V.T, atol=1e-9 * scale)
        assert_allclose(full.states @ dp.sub.PiPerp.T, dp.X_PiPerp(full.grid), atol=1e-9 * scale)


def test_decompose_theta_zero_requires_stable(unstable_pair):
    with pytest.raises(StabilizerRequiredError):
        decompose(unstable_pair, theta_choice="zero", x=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        decompose(unstable_pair, theta_choice="lqr")


@pytest.fixture
def general_problem():
    return LqProblem(
        A=np.array([[0.0, 1.0], [-1.0, 0.5]]),
        B=np.array([[0.0], [1.0]]),
        Q=np.diag([2.0, 1.0]),
        S=np.array([[0.5, 0.2]]),
        R=np.array([[2.0]]),
        b=Signal.constant([0.0, 1.0]),
        q=Signal.exp_poly([1.0, 0.0], rate=0.5),
        rho=Signal.constant([0.3]),
    )


def test_standard_form_cost_identity(general_problem):
    """配方后的代价率与原代价率逐点相等(含 φ)"""
    p = general_problem
    red = reduce_to_standard_form(p, t=0.0)
    r = red.reduced
    assert r.standard_form
    assert_allclose(r.R, np.eye(1))
    assert r.b.is_zero and r.rho.is_zero
    assert spectral_abscissa(r.A) < 0

    rng = np.random.default_rng(3)
    s = np.array([0.5, 1.0, 2.0])
    X = rng.standard_normal((3, 2))
    u = rng.standard_normal((3, 1))
    X0 = red.X0(s)
    X_tilde = X - X0
    R_mhalf = red.R_mhalf
    u_tilde = (u @ red.R_half.T + (X @ p.S.T + p.rho(s)) @ R_mhalf.T
               - X_tilde @ (R_mhalf @ red.theta).T)
    assert_allclose(r.running_cost(s, X_tilde, u_tilde), p.running_cost(s, X, u), rtol=1e-10)


def test_standard_form_dynamics(general_problem):
    """X₀ 满足 Ẋ₀ = (A - BR⁻¹S)X₀ + b - BR⁻¹ρ, X₀(0) = 0"""
    p = general_problem
    red = reduce_to_standard_form(p, t=0.0)
    R_inv = np.linalg.inv(p.R)
    A0 = p.A - p.B @ R_inv @ p.S
    s = np.array([0.3, 1.1, 2.4])
    lhs = red.X0.derivative()(s)
    rhs = red.X0(s) @ A0.T + p.b(s) - p.rho(s) @ (p.B @ R_inv).T
    assert_allclose(lhs, rhs, atol=1e-9)
    assert_allclose(red.X0(0.0), [0.0, 0.0], atol=1e-14)
