# -*- coding: utf-8 -*-
"""
测试问题数据、矩阵指数、可控性与假设检查
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from overtake_lq.core import (LqProblem, decay_constants, is_controllable, is_stabilizable,
                              kalman_matrix, matrix_exp, matrix_exp_batch, numerical_rank,
                              q_local_integrability,
                              spectral_abscissa, validate_problem, weighted_tail_integral)
from overtake_lq.errors import StateOverflowError
from overtake_lq.signals import Atom, Signal


def test_matrix_exp_closed_form(unstable_pair):
    """e^{A} = [[e, 0], [e²-e, e²]]"""
    e = math.e
    assert_allclose(matrix_exp(unstable_pair.A, 1.0), [[e, 0.0], [e * e - e, e * e]], rtol=1e-13)


def test_matrix_exp_batch_agrees_with_expm():
    A = np.array([[-1.0, 5.0], [0.0, -2.0]])
    times = np.array([0.0, 0.3, 2.0, 7.5])
    E = matrix_exp_batch(A, times)
    assert E.shape == (4, 2, 2)
    for Ei, t in zip(E, times):
        assert_allclose(Ei, expm(A * t), atol=1e-12)

    # Jordan 块走逐个 expm 的路径
    J = np.array([[-1.0, 1.0], [0.0, -1.0]])
    assert_allclose(matrix_exp_batch(J, [1.5])[0], expm(J * 1.5), atol=1e-12)


def test_matrix_exp_overflow():
    with pytest.raises(StateOverflowError):
        matrix_exp(np.array([[400.0]]), 10.0)


def test_running_cost_sign_convention():
    """g = ⟨QX,X⟩ + 2⟨SX,u⟩ + ⟨Ru,u⟩ + 2⟨q,X⟩ + 2⟨ρ,u⟩ + φ"""
    p = LqProblem(
        A=np.zeros((2, 2)), B=np.array([[1.0], [0.0]]),
        Q=np.diag([1.0, 2.0]), S=np.array([[0.5, 0.0]]), R=np.array([[3.0]]),
        q=Signal.constant([1.0, -1.0]), rho=Signal.constant([2.0]),
        phi=Signal.constant([0.25]),
    )
    X = np.array([[1.0, 2.0]])
    u = np.array([[-1.0]])
    expected = (1.0 + 8.0) + 2 * (0.5 * -1.0) + 3.0 + 2 * (1.0 - 2.0) + 2 * (2.0 * -1.0) + 0.25
    assert p.running_cost(np.array([0.0]), X, u)[0] == pytest.approx(expected)
    assert p.running_cost(np.array([0.0]), X, u, include_phi=False)[0] == pytest.approx(expected - 0.25)


def test_problem_validation_errors():
    with pytest.raises(ValueError):
        LqProblem(A=np.eye(2), B=np.ones((3, 1)), Q=np.eye(2), S=np.zeros((1, 2)), R=np.eye(1))
    with pytest.raises(ValueError):
        LqProblem(A=np.eye(1), B=np.eye(1), Q=np.eye(1), S=np.zeros((1, 1)), R=2.0 * np.eye(1),
                  standard_form=True)
    with pytest.raises(ValueError):
        LqProblem(A=np.eye(2), B=np.eye(2), Q=np.array([[1.0, 1.0], [0.0, 1.0]]),
                  S=np.zeros((2, 2)), R=np.eye(2))


def test_controllability(unstable_pair):
    K = kalman_matrix(unstable_pair.A, unstable_pair.B)
    assert K.shape == (2, 2)
    assert numerical_rank(K) == 1
    assert not is_controllable(unstable_pair.A, unstable_pair.B)
    # 不可控模态的特征值为 2
    assert not is_stabilizable(unstable_pair.A, unstable_pair.B)
    assert is_stabilizable(-np.eye(2), np.array([[1.0], [0.0]]))
    assert spectral_abscissa(unstable_pair.A) == pytest.approx(2.0)


def test_decay_constants_bound():
    """‖e^{As}‖ ≤ M e^{-μs}"""
    for A in (-2.0 * np.eye(2), np.array([[-1.0, 5.0], [0.0, -2.0]])):
        M, mu = decay_constants(A)
        assert 0.0 < mu <= -spectral_abscissa(A)
        assert M >= 1.0
        for s in np.linspace(0.0, 15.0, 61):
            assert np.linalg.norm(expm(A * s), 2) <= M * math.exp(-mu * s) + 1e-12
    M, mu = decay_constants(-2.0 * np.eye(2))
    assert M == pytest.approx(1.1)
    assert mu == pytest.approx(2.0, abs=1e-5)


def test_weighted_tail_integral():
    """e^{2s}∫_s^∞ e^{-2τ}e^{τ}dτ = e^{s}"""
    A = np.array([[-2.0]])
    val = weighted_tail_integral(A, Signal.exp_poly([1.0], rate=1.0), 1.0, tol=1e-12, anchor=1.0)
    assert val[0] == pytest.approx(math.e, rel=1e-9)


def test_validate_uncontrollable(unstable_pair):
    report = validate_problem(unstable_pair)
    assert not report.controllable
    assert not report.stabilizable
    assert not report.stable_A
    assert report.decay_constants is None
    assert report.controllable_rank == 1
    assert report.satisfies_QSR
    assert not report.satisfies_H
    assert "controllable" in report.to_dict()


def test_validate_standard_form(exp_forcing):
    report = validate_problem(exp_forcing)
    assert report.controllable and report.stable_A
    assert report.q_locally_integrable
    assert not report.q_globally_integrable
    assert report.satisfies_H
    M, mu = report.decay_constants
    assert mu == pytest.approx(2.0, abs=1e-5)


def test_q_local_integrability():
    assert q_local_integrability(Signal.zero(2)) == (True, None)
    assert q_local_integrability(Signal.closed_form([Atom([1.0], rate=3.0)]))[0] is True

    ok, note = q_local_integrability(Signal.sampled([0.0, 1.0, 2.0], [[1.0], [2.0], [3.0]]))
    assert ok is True
    assert "[0, 2]" in note
    # 单元上的积分溢出
    huge = Signal.sampled([0.0, 10.0], [[1e308], [1e308]])
    assert q_local_integrability(huge)[0] is False


def test_validate_sampled_forcing():
    """采样 q 的局部可积性按网格判定，全局可积性按不可积处理"""
    grid = np.linspace(0.0, 4.0, 41)
    q = Signal.sampled(grid, np.column_stack([1.0 + grid, np.zeros_like(grid)]))
    p = LqProblem(A=-np.eye(2), B=np.eye(2), Q=np.eye(2), S=np.zeros((2, 2)), R=np.eye(2),
                  q=q, standard_form=True)
    report = validate_problem(p)
    assert report.q_locally_integrable is True
    assert report.q_globally_integrable is False
    assert report.satisfies_H
    assert "q_locally_integrable" in report.notes

    scalar = LqProblem(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], S=[[0.0]], R=[[1.0]],
                       q=Signal.sampled([0.0, 10.0], [[1e308], [1e308]]), standard_form=True)
    report = validate_problem(scalar)
    assert report.q_locally_integrable is False
    assert not report.satisfies_H
