# -*- coding: utf-8 -*-
"""
测试信号表示：闭式原子求值、区间端点、代数运算、矩阵指数展开与尾积分
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from overtake_lq.errors import DivergentTailError, SignalDomainError
from overtake_lq.signals import (Atom, Signal, exp_forward_signal, exp_tail_signal,
                                 matrix_exp_signal, signal_from_dict)


def test_exp_poly_evaluation():
    """c·s^k·e^{as}·cos(ωs+φ)"""
    sig = Signal.exp_poly([2.0], power=1, rate=-1.0)
    s = np.array([0.0, 1.0, 2.5])
    assert_allclose(sig(s)[:, 0], 2.0 * s * np.exp(-s), rtol=1e-14)

    wave = Signal.exp_poly([1.0, -1.0], rate=0.5, freq=3.0, phase=0.2)
    expected = np.exp(0.5 * 1.3) * np.cos(3.0 * 1.3 + 0.2) * np.array([1.0, -1.0])
    assert_allclose(wave(1.3), expected, rtol=1e-13)


def test_scalar_and_array_shapes():
    sig = Signal.constant([1.0, 2.0, 3.0])
    assert sig(0.5).shape == (3,)
    assert sig(np.linspace(0, 1, 7)).shape == (7, 3)
    assert Signal.zero(2)(np.arange(4.0)).shape == (4, 2)


def test_indicator_sides():
    """右极限取 [lo,hi)，左极限取 (lo,hi]"""
    box = Signal.constant([1.0], lo=0.0, hi=1.0)
    assert box(0.0)[0] == 1.0
    assert box(1.0)[0] == 0.0
    assert box(0.0, side="left")[0] == 0.0
    assert box(1.0, side="left")[0] == 1.0
    assert box(-0.5)[0] == 0.0 and box(0.5)[0] == 1.0


def test_algebra():
    a = Signal.exp_poly([1.0], rate=2.0)
    b = Signal.constant([3.0], lo=0.0, hi=1.0)
    s = np.array([0.25, 0.75, 1.5])

    assert_allclose((a + b)(s)[:, 0], np.exp(2 * s) + 3.0 * (s < 1.0))
    assert_allclose((a - a)(s), np.zeros((3, 1)), atol=1e-12)
    assert_allclose(a.scale(-0.5)(s)[:, 0], -0.5 * np.exp(2 * s))
    assert_allclose(a.derivative()(s)[:, 0], 2.0 * np.exp(2 * s))

    v = Signal.exp_poly([1.0, 2.0], rate=-1.0)
    M = np.array([[1.0, 1.0], [0.0, 2.0], [1.0, -1.0]])
    assert v.transform(M).dim == 3
    assert_allclose(v.transform(M)(s), v(s) @ M.T)
    assert_allclose(v.component(1)(s)[:, 0], 2.0 * np.exp(-s))

    with pytest.raises(ValueError):
        v.transform(np.eye(3))
    with pytest.raises(ValueError):
        _ = v + Signal.zero(3)


def test_breakpoints_and_rates():
    sig = Signal.closed_form([
        Atom([1.0], rate=1.0),
        Atom([1.0], power=2, rate=1.0),
        Atom([1.0], rate=5.0, lo=0.0, hi=1.0),
        Atom([1.0], lo=2.0, hi=3.0),
    ])
    assert_allclose(sig.breakpoints(0.5, 10.0), [1.0, 2.0, 3.0])
    assert sig.dominant_rate() == (1.0, 2)
    assert sig.growth_rate == 1.0
    assert not sig.square_integrable()

    assert Signal.exp_poly([1.0], rate=-0.1).square_integrable()
    assert Signal.exp_poly([1.0], rate=3.0, lo=0.0, hi=2.0).square_integrable()
    assert not Signal.constant([1.0]).square_integrable()


def test_declared_growth_rate_must_dominate():
    with pytest.raises(ValueError):
        Signal.closed_form([Atom([1.0], rate=2.0)], growth_rate=1.0)


def test_envelope():
    sig = Signal.exp_poly([3.0], rate=1.0)
    assert sig.envelope(1.0) == pytest.approx(3.0)
    assert Signal.zero(1).envelope(0.0) == 0.0


def test_sampled_signal():
    grid = np.linspace(0.0, 2.0, 5)
    sig = Signal.sampled(grid, np.column_stack([grid, grid ** 2]))
    assert sig.domain() == (0.0, 2.0)
    assert_allclose(sig(0.25), [0.25, 0.125])
    assert_allclose(sig.breakpoints(0.2, 1.9), [0.5, 1.0, 1.5])
    with pytest.raises(SignalDomainError):
        sig(2.5)
    with pytest.raises(ValueError):
        Signal.sampled([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])


def test_matrix_exp_signal_matches_expm():
    """复共轭特征值展开为两个相位原子"""
    M = np.array([[-0.1, 1.0], [-1.0, -0.1]])
    z = np.array([1.0, 0.5])
    sig = matrix_exp_signal(M, z, anchor=0.5, lo=0.5)
    assert sig is not None
    for s in (0.5, 1.0, 3.7):
        assert_allclose(sig(s), expm(M * (s - 0.5)) @ z, atol=1e-12)
    assert_allclose(sig(0.25), [0.0, 0.0])


def test_matrix_exp_signal_rejects_defective():
    """Jordan 块的特征向量矩阵病态"""
    J = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert matrix_exp_signal(J, np.array([0.0, 1.0]), anchor=0.0) is None


def test_exp_tail_signal():
    """∫_s^∞ e^{-2(τ-s)}e^{τ}dτ = e^s"""
    tail = exp_tail_signal(np.array([[-2.0]]), Signal.exp_poly([1.0], rate=1.0))
    s = np.array([0.0, 1.0, 4.0])
    assert_allclose(tail(s)[:, 0], np.exp(s), rtol=1e-12)

    # 有界支撑: ∫_s^1 e^{-(τ-s)}dτ = 1 - e^{-(1-s)}
    box = exp_tail_signal(np.array([[-1.0]]), Signal.constant([1.0], lo=0.0, hi=1.0))
    assert box(0.5)[0] == pytest.approx(1.0 - np.exp(-0.5), abs=1e-12)
    assert box(2.0)[0] == pytest.approx(0.0, abs=1e-12)

    with pytest.raises(DivergentTailError):
        exp_tail_signal(np.array([[-2.0]]), Signal.exp_poly([1.0], rate=3.0))


def test_exp_forward_signal():
    """∫_0^s e^{-(s-τ)}dτ = 1 - e^{-s}，s < 0 时为零"""
    fwd = exp_forward_signal(np.array([[-1.0]]), Signal.constant([1.0]), 0.0)
    s = np.array([-1.0, 0.0, 0.7, 5.0])
    expected = np.where(s >= 0, 1.0 - np.exp(-np.maximum(s, 0.0)), 0.0)
    assert_allclose(fwd(s)[:, 0], expected, atol=1e-12)


def test_signal_from_dict():
    sig = signal_from_dict({"closed_form": {"atoms": [
        {"coeff": [1.0, 0.0], "rate": 1.0},
        {"coeff": [0.0, 2.0], "power": 1, "window": [0.0, 2.0]},
    ]}})
    assert sig.dim == 2
    assert_allclose(sig(1.0), [np.e, 2.0])
    assert_allclose(sig(3.0), [np.exp(3.0), 0.0])

    again = signal_from_dict(sig.to_dict())
    assert_allclose(again(np.array([0.5, 1.5, 2.5])), sig(np.array([0.5, 1.5, 2.5])))

    assert signal_from_dict({"zero": 3}).is_zero
    sampled = signal_from_dict({"sampled": {"grid": [0, 1], "values": [[0.0], [2.0]]}})
    assert sampled(0.5)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        signal_from_dict({"spline": {}})
