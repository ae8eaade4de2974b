# -*- coding: utf-8 -*-
"""
测试 ρ̂、核 Φ、Fredholm 求解与盒约束存在性证书
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from overtake_lq.core import LqProblem
from overtake_lq.errors import ContractionViolatedError
from overtake_lq.fredholm import (BoxControlSet, FredholmSetup, certify_existence,
                                  contraction_kappa, kernel_phi, phi_blocks, rho_hat,
                                  rho_hat_on_grid, solve_fredholm)

X = np.array([1.0, -1.0])


def test_box_control_set():
    U = BoxControlSet.from_dict({"lower": [0.0, None], "upper": [None, 2.0]}, 2)
    assert U.m == 2
    assert not U.is_full
    assert_allclose(U.project(np.array([[-1.0, 3.0], [0.5, -7.0]])), [[0.0, 2.0], [0.5, -7.0]])
    assert U.contains(np.array([[0.0, 2.0]]))
    assert not U.contains(np.array([[-0.1, 0.0]]))
    assert U.to_dict() == {"lower": [0.0, None], "upper": [None, 2.0]}
    assert BoxControlSet.full(3).is_full
    assert BoxControlSet.from_dict({}, 2).is_full

    with pytest.raises(ValueError):
        BoxControlSet([1.0], [0.0])
    with pytest.raises(ValueError):
        BoxControlSet([0.0, 0.0], [1.0])


def test_rho_hat(exp_forcing):
    """ρ̂(s) = (e^s, e^{-s}/3)"""
    s = np.array([0.0, 1.0, 2.5])
    expected = np.column_stack([np.exp(s), np.exp(-s) / 3.0])
    assert_allclose(rho_hat(exp_forcing, s), expected, rtol=1e-8)
    assert_allclose(rho_hat_on_grid(exp_forcing, s), expected, rtol=1e-10)
    assert rho_hat(exp_forcing, 1.0).shape == (2,)


def test_kernel_phi(exp_forcing):
    """Φ(s,τ) = e^{-2|s-τ|}/4·I"""
    for s, tau in ((1.0, 0.3), (0.3, 1.0), (0.7, 0.7)):
        assert_allclose(kernel_phi(exp_forcing, s, tau),
                        math.exp(-2.0 * abs(s - tau)) / 4.0 * np.eye(2), atol=1e-14)


def test_phi_blocks_match_kernel(exp_forcing):
    grid = np.linspace(0.0, 2.0, 5)
    blocks = phi_blocks(exp_forcing, grid)
    assert blocks.shape == (5, 5, 2, 2)
    for i in (0, 2, 4):
        for j in (1, 3):
            assert_allclose(blocks[i, j], kernel_phi(exp_forcing, grid[i], grid[j]), atol=1e-14)
    # 非均匀网格走逐对计算
    uneven = np.array([0.0, 0.1, 0.5, 0.6, 2.0])
    blocks = phi_blocks(exp_forcing, uneven)
    assert_allclose(blocks[4, 1], kernel_phi(exp_forcing, 2.0, 0.1), atol=1e-14)


def test_contraction_kappa(exp_forcing):
    assert contraction_kappa(exp_forcing, decay=(1.0, 2.0)) == pytest.approx(3.0 / 16.0)


def test_solve_fredholm_constant_kernel():
    """u + 0.25∫_0^1 u = -1 的解为 u ≡ -0.8"""
    grid = np.linspace(0.0, 1.0, 21)
    setup = FredholmSetup.from_kernel(grid, lambda s, tau: 0.25, np.ones(grid.size))
    assert setup.kappa_empirical == pytest.approx(0.0625, rel=1e-8)
    sol = solve_fredholm(setup, tol=1e-12)
    assert_allclose(sol.u[:, 0], -0.8, atol=1e-10)
    assert sol.residual <= 1e-10
    assert sol.direct_difference <= 1e-9
    assert 0.0 <= sol.rate < 1.0


def test_solve_fredholm_with_fixed_entries():
    grid = np.linspace(0.0, 1.0, 11)
    setup = FredholmSetup.from_kernel(grid, lambda s, tau: 0.1 * np.eye(2), np.ones((grid.size, 2)))
    fixed = np.full((grid.size, 2), np.nan)
    fixed[:, 0] = 0.0
    sol = solve_fredholm(setup, fixed=fixed)
    assert_allclose(sol.u[:, 0], 0.0)
    # 第二个分量: u + 0.1∫u = -1
    assert_allclose(sol.u[:, 1], -1.0 / 1.1, atol=1e-9)


def test_solve_fredholm_rejects_expansive_kernel():
    grid = np.linspace(0.0, 1.0, 11)
    setup = FredholmSetup.from_kernel(grid, lambda s, tau: 2.0, np.ones(grid.size))
    with pytest.raises(ContractionViolatedError):
        solve_fredholm(setup)


def test_unconstrained_solution_matches_riccati():
    """q = 0, A = -2I：ū = -(√5-2)e^{-√5 s}x"""
    p = LqProblem(A=-2.0 * np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                  standard_form=True)
    cert = certify_existence(p, 0.0, X, n_nodes=801, gap_controls=0)
    assert cert.inner_normal_ok
    assert cert.interior
    assert cert.residual <= 1e-8
    expected = -(math.sqrt(5) - 2) * np.exp(-math.sqrt(5) * cert.grid)[:, None] * X[None, :]
    assert_allclose(cert.u_bar, expected, atol=2e-3)
    assert_allclose(cert.rho1, 0.0)


def test_certificate_with_lower_bound(exp_forcing):
    """ρ̂₁ = e^s 不平方可积，分量 1 被推到下界 0"""
    U = BoxControlSet.from_dict({"lower": [0.0, None]}, 2)
    cert = certify_existence(exp_forcing, 0.0, X, U, gap_controls=2, seed=3)
    assert cert.inner_normal_ok
    assert not cert.interior
    assert cert.residual <= 1e-8
    assert_allclose(cert.u_bar[:, 0], 0.0)
    assert np.all(cert.rho1[:, 0] > 0)
    assert_allclose(cert.rho1[:, 1], 0.0)
    assert cert.boundary_active[0]["coordinate"] == 0
    assert cert.boundary_active[0]["side"] == "lower"
    assert cert.gap_trace["ok"]

    rows = cert.to_rows()
    assert len(rows) == cert.grid.size
    assert cert.header() == ["s", "u_bar_1", "u_bar_2", "rho1_1", "rho1_2"]
    assert cert.control(cert.grid[10]).shape == (2,)


def test_nystrom_second_order_convergence():
    """核在 s = τ 处有折点，Simpson-Nyström 误差按 h² 收敛"""
    p = LqProblem(A=-2.0 * np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                  standard_form=True)
    errors = []
    for nodes in (101, 201, 401, 801):
        cert = certify_existence(p, 0.0, X, n_nodes=nodes, gap_controls=0)
        exact = -(math.sqrt(5) - 2) * np.exp(-math.sqrt(5) * cert.grid)[:, None] * X[None, :]
        errors.append(float(np.max(np.abs(cert.u_bar - exact))))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all(ratios > 3.2)
    assert np.all(ratios < 4.5)
    assert errors[-1] < 2e-3


def test_certificate_lower_bound_gap_on_twenty_controls(exp_forcing):
    """U = {u₁ ≥ 0}，x = (1, 1)：20 个可行扰动上的变分间隙都非负"""
    U = BoxControlSet.from_dict({"lower": [0.0, None]}, 2)
    cert = certify_existence(exp_forcing, 0.0, [1.0, 1.0], U, gap_controls=20, seed=0)
    assert cert.inner_normal_ok
    assert cert.residual <= 1e-8
    assert cert.gap_trace["controls"] == 20
    assert cert.gap_trace["ok"]
    assert min(cert.gap_trace["min_gap"]) >= -1e-8
    assert len(cert.gap_trace["horizons"]) >= 2


def test_certificate_without_feasible_split(exp_forcing):
    cert = certify_existence(exp_forcing, 0.0, X, gap_controls=0)
    assert not cert.inner_normal_ok
    assert cert.reason


def test_certificate_projected_rule(exp_forcing):
    U = BoxControlSet.from_dict({"lower": [0.0, -2.0], "upper": [None, 2.0]}, 2)
    cert = certify_existence(exp_forcing, 0.0, X, U, split_rule="projected", gap_controls=0)
    assert cert.inner_normal_ok
    assert U.contains(cert.u_bar)
    assert cert.split_rule == "projected"


def test_certificate_rejects_unknown_rule(exp_forcing):
    with pytest.raises(ValueError):
        certify_existence(exp_forcing, 0.0, X, split_rule="greedy")
    with pytest.raises(ValueError):
        certify_existence(exp_forcing, 0.0, X, BoxControlSet.full(3))
