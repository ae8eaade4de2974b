# -*- coding: utf-8 -*-
"""
测试共用的问题数据
"""

import numpy as np
import pytest

from overtake_lq.core import LqProblem
from overtake_lq.signals import Atom, Signal


@pytest.fixture
def unstable_pair():
    """A=[[1,0],[1,2]], B=(1,-1)ᵀ，ℍ₀ = span{(1,-1)}，ℍ₀⊥ 上指数增长"""
    return LqProblem(
        A=np.array([[1.0, 0.0], [1.0, 2.0]]),
        B=np.array([[1.0], [-1.0]]),
        Q=np.eye(2),
        S=np.zeros((1, 2)),
        R=np.eye(1),
        name="unstable_pair",
    )


@pytest.fixture
def exp_forcing():
    """μ = 2 的标准形问题，q = (e^s, e^{-s})"""
    q = Signal.closed_form([Atom([1.0, 0.0], rate=1.0), Atom([0.0, 1.0], rate=-1.0)])
    return LqProblem(
        A=-2.0 * np.eye(2),
        B=np.eye(2),
        Q=np.eye(2),
        S=np.zeros((2, 2)),
        R=np.eye(2),
        q=q,
        standard_form=True,
        name="exp_forcing",
    )


@pytest.fixture
def drift_problem():
    """A=-2I, B=I, q=(1+s)e₁：零控制不是超越最优的"""
    q = Signal.closed_form([Atom([1.0, 0.0]), Atom([1.0, 0.0], power=1)])
    return LqProblem(
        A=-2.0 * np.eye(2),
        B=np.eye(2),
        Q=np.eye(2),
        S=np.zeros((2, 2)),
        R=np.eye(2),
        q=q,
        standard_form=True,
        name="drift",
    )


@pytest.fixture
def scalar_drift():
    """A=-1, B=1, q=1+s"""
    q = Signal.closed_form([Atom([1.0]), Atom([1.0], power=1)])
    return LqProblem(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], S=[[0.0]], R=[[1.0]], q=q,
                     standard_form=True, name="scalar_drift")
