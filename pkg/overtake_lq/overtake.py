"""
超越最优性判定
变分核 F₀/F₁、有限时域变分间隙、代价差轨迹 ΔJ(T) 及其尾部窗口判定
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .core import (TAIL_CAP, LqProblem, backward_tail_profile, decay_constants,
                   matrix_exp_batch, spectral_abscissa, weighted_tail_integral)
from .errors import (HypothesisViolationError, NotSquareIntegrableError,
                     NumericalInconsistencyError, StateOverflowError)
from .quadrature import adaptive_gauss_legendre
from .signals import INF, Atom, Signal, exp_forward_signal, exp_tail_signal, matrix_exp_signal
from .sim import EXACT, EXACT_STEP, build_grid, integrate_state, propagate

logger = logging.getLogger(__name__)

OVERTAKING = "overtaking-evidence"
WEAKLY_OVERTAKING = "weakly-overtaking-evidence"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"
VERDICTS = (OVERTAKING, WEAKLY_OVERTAKING, REFUTED, INCONCLUSIVE)

GEOMETRIC = "geom"
LINEAR = "linear"
SCHEDULE_KINDS = (GEOMETRIC, LINEAR)

DEFAULT_K = 8
DEFAULT_WINDOW = 5
EPS_V_FACTOR = 1e-6
EPS_D_FACTOR = 1e-8
F1_AGREEMENT = 1e-8
DEFAULT_HORIZON = 40.0

TRACE_HEADER = ["T", "deltaJ", "running_limsup", "running_liminf"]

ControlFamily = Union[Signal, Callable[[float], Signal]]


# ------------------------------------------------------------------ 标准形假设

def require_standard_form(p: LqProblem, tol: float = 1e-12):
    """
    检查 R = I, b = ρ = 0 且 A 稳定

    Raises:
        HypothesisViolationError: 任一条件不成立
    """
    if not np.allclose(p.R, np.eye(p.m), atol=tol):
        raise HypothesisViolationError("变分核要求标准形 R = I，请先调用 reduce_to_standard_form")
    if not (p.b.is_zero and p.rho.is_zero):
        raise HypothesisViolationError("变分核要求标准形 b ≡ 0, ρ ≡ 0")
    abscissa = spectral_abscissa(p.A)
    if abscissa >= 0.0:
        raise HypothesisViolationError(f"A 不稳定: 谱横坐标 {abscissa:.6g} ≥ 0")


def lyapunov_tail(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """L = ∫_0^∞ e^{Aᵀr} Q e^{Ar} dr，即 AᵀL + LA = -Q 的解(A 稳定)"""
    L = linalg.solve_continuous_lyapunov(np.asarray(A, dtype=float).T, -np.asarray(Q, dtype=float))
    return 0.5 * (L + L.T)


def bound_constants(p: LqProblem, decay: Optional[Tuple[float, float]] = None) -> Dict[str, float]:
    """
    F₀、F₁ 的 L² 界常数

    f0_coeff = ‖S‖M + ‖B‖M²‖Q‖/(2μ)，使 ‖F₀x‖₂² ≤ f0_coeff²·|x|²/(2μ)；
    kappa = (3‖B‖²M²/μ²)(‖B‖²M²‖Q‖²/μ² + 2‖S‖²)，使 ‖F₁u‖₂² ≤ κ‖u‖₂²。

    Args:
        p: 问题数据
        decay: (M, μ)，缺省时由 decay_constants 拟合
    """
    M, mu = decay if decay is not None else decay_constants(p.A)
    if mu <= 0:
        raise HypothesisViolationError(f"衰减率 μ={mu:.6g} 不为正")
    nB = float(np.linalg.norm(p.B, 2))
    nQ = float(np.linalg.norm(p.Q, 2))
    nS = float(np.linalg.norm(p.S, 2))
    f0_coeff = nS * M + nB * M ** 2 * nQ / (2.0 * mu)
    kappa = 3.0 * nB ** 2 * M ** 2 / mu ** 2 * (nB ** 2 * M ** 2 * nQ ** 2 / mu ** 2 + 2.0 * nS ** 2)
    return {"M": float(M), "mu": float(mu), "norm_B": nB, "norm_Q": nQ, "norm_S": nS,
            "f0_coeff": f0_coeff, "kappa": kappa}


# ------------------------------------------------------------------ F₀

def kernel_F0(p: LqProblem, t: float, x, s, L: Optional[np.ndarray] = None) -> np.ndarray:
    """
    F₀(s)x = Se^{A(s-t)}x + ∫_s^∞ Bᵀe^{Aᵀ(τ-s)}Qe^{A(τ-t)}x dτ = (S + BᵀL)e^{A(s-t)}x

    Args:
        s: 标量或数组 (s ≥ t)

    Returns:
        标量 s 返回 (m,)，数组返回 (N, m)
    """
    require_standard_form(p)
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    x = np.asarray(x, dtype=float).ravel()
    K = p.S + p.B.T @ L
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    E = matrix_exp_batch(p.A, ss - t)
    out = np.einsum("ij,tjk,k->ti", K, E, x)
    return out[0] if np.ndim(s) == 0 else out


def f0_signal(p: LqProblem, t: float, x, L: Optional[np.ndarray] = None) -> Signal:
    """F₀(·)x 的闭式信号，支撑 [t, ∞)"""
    require_standard_form(p)
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    x = np.asarray(x, dtype=float).ravel()
    sig = matrix_exp_signal(p.A, x, anchor=t, lo=t, C=p.S + p.B.T @ L)
    if sig is None:
        grid = build_grid(t, t + DEFAULT_HORIZON, EXACT_STEP)
        logger.warning("F₀x 的特征分解病态，改用采样表示")
        sig = Signal.sampled(grid, kernel_F0(p, t, x, grid, L), growth_rate=spectral_abscissa(p.A))
    return sig


def f0_l2_squared(p: LqProblem, x, L: Optional[np.ndarray] = None) -> float:
    """∫_t^∞|F₀(s)x|²ds = xᵀGx，G 解 AᵀG + GA = -KᵀK"""
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    K = p.S + p.B.T @ L
    x = np.asarray(x, dtype=float).ravel()
    G = lyapunov_tail(p.A, K.T @ K)
    return float(x @ G @ x)


# ------------------------------------------------------------------ F₁

def _require_l2(u: Signal):
    if not u.square_integrable():
        rate, power = u.dominant_rate()
        raise NotSquareIntegrableError(f"控制不是平方可积的: 增长率 {rate:.6g} (幂次 {power})")


def _f1_by_kernel(p: LqProblem, L: np.ndarray, t: float, u: Signal, s: float,
                  tol: float) -> np.ndarray:
    """∫_t^∞ Φ(s,τ)u(τ)dτ，以 τ = s 为界分两段直接求积"""
    K_fwd = p.S + p.B.T @ L
    K_bwd = p.S.T + L @ p.B
    lo_u, hi_u = u.domain()
    a, b = max(t, lo_u), min(s, hi_u)
    head = np.zeros(p.n)
    if b > a:
        def forward(tau):
            E = matrix_exp_batch(p.A, s - tau)
            return np.einsum("tij,jk,tk->ti", E, p.B, u(tau))

        head, _ = adaptive_gauss_legendre(forward, a, b, tol, breakpoints=u.breakpoints(a, b))
    w = u.transform(K_bwd)
    if u.is_sampled:
        a2, b2 = max(s, lo_u), hi_u
        tail = np.zeros(p.n)
        if b2 > a2:
            At = p.A.T

            def backward(tau):
                E = matrix_exp_batch(At, tau - s)
                return np.einsum("tij,tj->ti", E, w(tau))

            tail, _ = adaptive_gauss_legendre(backward, a2, b2, tol, breakpoints=w.breakpoints(a2, b2))
    else:
        tail = weighted_tail_integral(p.A, w, s, tol, anchor=s)
    return K_fwd @ head + p.B.T @ tail


def f1_signal(p: LqProblem, t: float, u: Signal, L: Optional[np.ndarray] = None,
              tol: float = 1e-10, horizon: float = DEFAULT_HORIZON,
              step: Optional[float] = None) -> Signal:
    """
    F₁[u](s) = SX₀(s) + ∫_s^∞ Bᵀe^{Aᵀ(τ-s)}[QX₀(τ) + Sᵀu(τ)]dτ，X₀(s) = ∫_t^s e^{A(s-τ)}Bu dτ

    闭式控制给出闭式结果；采样控制在其区间之外视为零，末端尾项为 L·X₀(T)。
    """
    require_standard_form(p)
    _require_l2(u)
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    if u.is_zero:
        return Signal.zero(p.m)
    if u.is_closed_form:
        X0 = exp_forward_signal(p.A, u.transform(p.B), t)
        if X0 is not None:
            g = X0.transform(p.Q) + u.transform(p.S.T)
            tail = exp_tail_signal(p.A.T, g)
            if tail is not None:
                return X0.transform(p.S) + tail.transform(p.B.T)
        T_end = t + horizon
        logger.warning(f"F₁ 无法闭式表示，控制在 T={T_end:g} 之后按零截断")
    else:
        lo_u, T_end = u.domain()
        if lo_u > t + 1e-12:
            raise ValueError(f"采样控制的起点 {lo_u:g} 晚于 t={t:g}")
    traj = propagate(p.A, u.transform(p.B), t, np.zeros(p.n), T_end, step, method=EXACT)
    grid = traj.grid
    g = Signal.sampled(grid, traj.states @ p.Q + u(grid) @ p.S)
    profile = backward_tail_profile(p.A, g, grid, tol, terminal=L @ traj.endpoint)
    return Signal.sampled(grid, traj.states @ p.S.T + profile @ p.B)


def kernel_F1(p: LqProblem, t: float, u: Signal, s, path: str = "kernel",
              tol: float = 1e-10, L: Optional[np.ndarray] = None) -> np.ndarray:
    """
    F₁[u](s)

    Args:
        path: "kernel" 为核 Φ(s,τ) 的直接求积；"direct" 为 X₀ 与伴随尾积分的闭式路径

    Returns:
        标量 s 返回 (m,)，数组返回 (N, m)

    Raises:
        NotSquareIntegrableError: u 不平方可积
    """
    require_standard_form(p)
    _require_l2(u)
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(ss < t):
        raise ValueError(f"F₁ 只在 s ≥ t={t:g} 上有定义")
    if path == "kernel":
        out = np.stack([_f1_by_kernel(p, L, t, u, float(si), tol) for si in ss])
    elif path == "direct":
        out = f1_signal(p, t, u, L, tol)(ss)
    else:
        raise ValueError(f"未知的 F₁ 计算路径: {path}. 可用路径: ['kernel', 'direct']")
    return out[0] if np.ndim(s) == 0 else out


def f1_discrepancy(p: LqProblem, t: float, u: Signal, points: Sequence[float],
                   tol: float = 1e-10, check: bool = True) -> float:
    """
    两条 F₁ 路径在给定点上的最大差

    Raises:
        NumericalInconsistencyError: check 为真且差超过 F1_AGREEMENT·(1 + |F₁|)
    """
    L = lyapunov_tail(p.A, p.Q)
    by_kernel = kernel_F1(p, t, u, points, "kernel", tol, L)
    direct = kernel_F1(p, t, u, points, "direct", tol, L)
    diff = float(np.max(np.abs(by_kernel - direct)))
    scale = 1.0 + float(np.max(np.abs(direct)))
    if check and diff > F1_AGREEMENT * scale:
        raise NumericalInconsistencyError(f"F₁ 两条计算路径不一致: {diff:.3e}")
    return diff


def l2_norm_squared(sig: Signal, t: float, tol: float = 1e-10) -> float:
    """∫_t^∞|sig(s)|²ds；采样信号在其区间之外视为零"""
    if sig.is_zero:
        return 0.0

    def integrand(tau):
        v = sig(tau)
        return np.einsum("ij,ij->i", v, v)[:, None]

    if sig.is_sampled:
        lo, hi = sig.domain()
        a = max(lo, t)
        if hi <= a:
            return 0.0
        value, _ = adaptive_gauss_legendre(integrand, a, hi, tol, breakpoints=sig.grid)
        return float(value[0])
    _require_l2(sig)
    alpha, power = sig.dominant_rate()
    ends = [a.hi for a in sig.atoms if a.bounded_support]
    T_end = max([t] + ends)
    if alpha > -INF:
        a_eff = alpha / 2.0 if power > 0 else alpha
        C = sig.envelope(a_eff, t)
        gap = -2.0 * a_eff
        if C > 0:
            T_end = max(T_end, math.log(max(C * C / (gap * tol), 1.0)) / gap)
        T_end = min(T_end, t + TAIL_CAP)
    value, _ = adaptive_gauss_legendre(integrand, t, T_end, tol, breakpoints=sig.breakpoints(t, T_end))
    return float(value[0])


@dataclass
class VariationalKernels:
    """F₀x、F₁u 及其 L² 界"""
    F0x: Signal
    F1u: Signal
    t: float
    x: np.ndarray
    constants: Dict[str, float]
    f0_l2: float
    f0_bound: float
    f1_l2: float
    u_l2: float
    f1_bound: float
    C0: float

    @property
    def kappa(self) -> float:
        return self.constants["kappa"]

    @property
    def bounds_hold(self) -> bool:
        slack = 1.0 + 1e-6
        return (self.f0_l2 <= self.f0_bound * slack + 1e-12
                and self.f1_l2 <= self.f1_bound * slack + 1e-12)

    def bound_rows(self) -> List[List]:
        return [["F0x", self.f0_l2, self.f0_bound, self.f0_l2 <= self.f0_bound * (1 + 1e-6) + 1e-12],
                ["F1u", self.f1_l2, self.f1_bound, self.f1_l2 <= self.f1_bound * (1 + 1e-6) + 1e-12]]

    def to_dict(self) -> Dict:
        return {
            "t": self.t,
            "x": self.x.tolist(),
            "constants": dict(self.constants),
            "f0_l2_squared": self.f0_l2,
            "f0_bound": self.f0_bound,
            "f1_l2_squared": self.f1_l2,
            "u_l2_squared": self.u_l2,
            "f1_bound": self.f1_bound,
            "C0": self.C0,
            "bounds_hold": self.bounds_hold,
        }

    def __repr__(self):
        return (f"VariationalKernels(κ={self.kappa:.4g}, C0={self.C0:.4g}, "
                f"bounds_hold={self.bounds_hold})")


def variational_kernels(p: LqProblem, t: float, x, u: Signal, tol: float = 1e-10,
                        decay: Optional[Tuple[float, float]] = None) -> VariationalKernels:
    """给定 (t, x, u) 组装 F₀x、F₁u、两个 L² 界与 C₀"""
    require_standard_form(p)
    x = np.asarray(x, dtype=float).ravel()
    L = lyapunov_tail(p.A, p.Q)
    consts = bound_constants(p, decay)
    F0x = f0_signal(p, t, x, L)
    F1u = f1_signal(p, t, u, L, tol)
    f0_l2 = f0_l2_squared(p, x, L)
    f0_bound = consts["f0_coeff"] ** 2 * float(x @ x) / (2.0 * consts["mu"])
    u_l2 = l2_norm_squared(u, t, tol)
    f1_l2 = l2_norm_squared(F1u, t, tol)
    C0 = _c0(consts, float(np.linalg.norm(x)), math.sqrt(u_l2))
    kernels = VariationalKernels(F0x, F1u, float(t), x, consts, f0_l2, f0_bound,
                                 f1_l2, u_l2, consts["kappa"] * u_l2, C0)
    if not kernels.bounds_hold:
        logger.warning(f"L² 界未满足: {kernels}")
    return kernels


def _c0(consts: Dict[str, float], x_norm: float, u_norm: float) -> float:
    mu = consts["mu"]
    return (consts["f0_coeff"] * x_norm / math.sqrt(2.0 * mu)
            + (math.sqrt(consts["kappa"]) + 1.0) * u_norm)


def corollary_bound(p: LqProblem, t: float, x, u_star: Signal,
                    decay: Optional[Tuple[float, float]] = None, tol: float = 1e-10) -> float:
    """
    C₀ = (‖S‖M + ‖B‖M²‖Q‖/(2μ))|x|/√(2μ) + [√3‖B‖M/μ·(‖B‖²M²‖Q‖²/μ² + 2‖S‖²)^{1/2} + 1]‖ū‖₂

    使最优控制的有限时域变分间隙满足 |∫_t^T⟨F₀x + ū + F₁ū, u - ū⟩| ≤ C₀‖u - ū‖₂。
    """
    consts = bound_constants(p, decay)
    x_norm = float(np.linalg.norm(np.asarray(x, dtype=float)))
    u_norm = math.sqrt(l2_norm_squared(u_star, t, tol))
    return _c0(consts, x_norm, u_norm)


# ------------------------------------------------------------------ 变分间隙

def _node_sides(grid: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return grid[0:-2:2], grid[1:-1:2], grid[2::2]


def _cellwise_simpson(grid: np.ndarray, rate: Callable[[np.ndarray, slice, str], np.ndarray]) -> np.ndarray:
    """每个单元上的 Simpson 积分，左端取右极限、右端取左极限"""
    left, mid, right = _node_sides(grid)
    f0 = rate(left, slice(0, -2, 2), "right")
    f1 = rate(mid, slice(1, -1, 2), "right")
    f2 = rate(right, slice(2, None, 2), "left")
    return (right - left) / 6.0 * (f0 + 4.0 * f1 + f2)


def variational_gap(p: LqProblem, t: float, x, u_star: Signal, u: Signal, T: float,
                    tol: float = 1e-10, step: Optional[float] = None,
                    F1u_star: Optional[Signal] = None) -> float:
    """
    ∫_t^T⟨∫_s^T Bᵀe^{Aᵀ(τ-s)}q(τ)dτ + F₀(s)x + ū(s) + F₁[ū](s), u(s) - ū(s)⟩ds

    q 项按有限上限 T 计算。ū 的 F₁ 可由调用方预先给出以便在多个 T 上复用。
    """
    require_standard_form(p)
    if T <= t:
        return 0.0
    if u is u_star:
        return 0.0
    x = np.asarray(x, dtype=float).ravel()
    step = EXACT_STEP if step is None else step
    L = lyapunov_tail(p.A, p.Q)
    if F1u_star is None:
        F1u_star = f1_signal(p, t, u_star, L, tol)
    bps = set(u.breakpoints(t, T)) | set(u_star.breakpoints(t, T)) | set(p.q.breakpoints(t, T))
    grid = build_grid(t, T, step, bps)
    r = backward_tail_profile(p.A, p.q, grid, tol, terminal=np.zeros(p.n)) @ p.B
    F0 = kernel_F0(p, t, x, grid, L)
    F1 = F1u_star(grid)
    base = r + F0 + F1

    def rate(nodes, sl, side):
        us = u_star(nodes, side=side)
        w = u(nodes, side=side) - us
        return np.einsum("ij,ij->i", base[sl] + us, w)

    return float(np.sum(_cellwise_simpson(grid, rate)))


# ------------------------------------------------------------------ 代价差轨迹

def horizon_schedule(t: float = 0.0, kind: str = GEOMETRIC, K: int = DEFAULT_K,
                     step: float = 1.0, horizon_max: Optional[float] = None) -> np.ndarray:
    """
    时域序列

    geom: T_k = t + 2^k, k = 0..K；linear: T_k = t + k·step, k = 1..K

    Raises:
        ValueError: 未知的序列类型或截断后为空
    """
    if kind == GEOMETRIC:
        horizons = t + 2.0 ** np.arange(K + 1)
    elif kind == LINEAR:
        horizons = t + step * np.arange(1, K + 1)
    else:
        raise ValueError(f"未知的时域序列类型: {kind}. 可用类型: {list(SCHEDULE_KINDS)}")
    if horizon_max is not None:
        horizons = horizons[horizons <= horizon_max + 1e-12]
        if horizons.size == 0:
            raise ValueError(f"horizon_max={horizon_max:g} 小于首个时域")
    return horizons.astype(float)


@dataclass
class ComparisonTrace:
    """ΔJ(T_k) = J_{T_k}(u*) - J_{T_k}(u) 与尾部窗口估计"""
    horizons: np.ndarray
    deltas: np.ndarray
    limsup_estimate: float
    liminf_estimate: float
    drift: float
    verdict: str
    window: int
    eps_v: float
    eps_d: float
    truncated: bool = False
    label: str = ""
    predicted: Optional[np.ndarray] = None
    meta: Dict = field(default_factory=dict)

    @property
    def running_limsup(self) -> np.ndarray:
        return np.array([np.max(self.deltas[max(0, k - self.window + 1):k + 1])
                         for k in range(self.deltas.size)])

    @property
    def running_liminf(self) -> np.ndarray:
        return np.array([np.min(self.deltas[max(0, k - self.window + 1):k + 1])
                         for k in range(self.deltas.size)])

    def to_rows(self) -> List[List[float]]:
        return [[float(T), float(d), float(hi), float(lo)]
                for T, d, hi, lo in zip(self.horizons, self.deltas,
                                        self.running_limsup, self.running_liminf)]

    def to_dict(self) -> Dict:
        out = {
            "label": self.label,
            "horizons": [float(T) for T in self.horizons],
            "deltas": [float(d) for d in self.deltas],
            "limsup_estimate": self.limsup_estimate,
            "liminf_estimate": self.liminf_estimate,
            "drift": self.drift,
            "verdict": self.verdict,
            "window": self.window,
            "eps_v": self.eps_v,
            "eps_d": self.eps_d,
            "truncated": self.truncated,
        }
        if self.predicted is not None:
            out["predicted"] = [float(v) for v in self.predicted]
        out.update(self.meta)
        return out

    def __repr__(self):
        return (f"ComparisonTrace({self.label or 'u'}: verdict={self.verdict}, "
                f"points={self.deltas.size}, limsup≈{self.limsup_estimate:.4g}, "
                f"liminf≈{self.liminf_estimate:.4g})")


def decide(deltas: np.ndarray, window: int = DEFAULT_WINDOW,
           eps_v_factor: float = EPS_V_FACTOR, eps_d_factor: float = EPS_D_FACTOR,
           truncated: bool = False) -> Dict:
    """
    尾部窗口判定

    窗口取最后 W 个点；scale = 1 + 窗口内 max|ΔJ|；漂移为相邻两个窗口均值之差。
    overtaking-evidence: limsup ≤ ε_v 且漂移 ≤ ε_d；refuted: liminf ≥ ε_v 且漂移 > 0；
    weakly-overtaking-evidence: liminf ≤ ε_v < limsup 且漂移 ≤ ε_d；其余 inconclusive。
    截断轨迹只在窗口严格单调时给出确定结论。
    """
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        return {"verdict": INCONCLUSIVE, "limsup": math.nan, "liminf": math.nan,
                "drift": math.nan, "eps_v": math.nan, "eps_d": math.nan}
    tail = d[-window:]
    limsup, liminf = float(np.max(tail)), float(np.min(tail))
    scale = 1.0 + float(np.max(np.abs(tail)))
    eps_v, eps_d = eps_v_factor * scale, eps_d_factor * scale
    drift = float(np.mean(tail) - np.mean(d[-window - 1:-1])) if d.size >= 2 else 0.0

    if d.size < 2:
        verdict = INCONCLUSIVE
    elif truncated:
        steps = np.diff(tail)
        if tail.size >= 2 and np.all(steps > 0) and liminf >= eps_v:
            verdict = REFUTED
        elif tail.size >= 2 and np.all(steps < 0) and limsup <= eps_v:
            verdict = OVERTAKING
        else:
            verdict = INCONCLUSIVE
    elif limsup <= eps_v and drift <= eps_d:
        verdict = OVERTAKING
    elif liminf >= eps_v and drift > 0:
        verdict = REFUTED
    elif liminf <= eps_v < limsup and drift <= eps_d:
        verdict = WEAKLY_OVERTAKING
    else:
        verdict = INCONCLUSIVE
    return {"verdict": verdict, "limsup": limsup, "liminf": liminf, "drift": drift,
            "eps_v": eps_v, "eps_d": eps_d}


def _difference_cells(p: LqProblem, grid: np.ndarray, X: np.ndarray, xi: np.ndarray,
                      u_star: Signal, du: Signal) -> np.ndarray:
    """g(X* + ξ, u* + δu) - g(X*, u*) 的逐单元积分，φ 相消不参与计算"""

    def rate(nodes, sl, side):
        Xn, Zn = X[sl], xi[sl]
        U = u_star(nodes, side=side)
        D = du(nodes, side=side)
        val = (np.einsum("ij,jk,ik->i", 2.0 * Xn + Zn, p.Q, Zn)
               + 2.0 * np.einsum("ij,jk,ik->i", U + D, p.S, Zn)
               + 2.0 * np.einsum("ij,jk,ik->i", D, p.S, Xn)
               + np.einsum("ij,jk,ik->i", 2.0 * U + D, p.R, D))
        if not p.q.is_zero:
            val += 2.0 * np.einsum("ij,ij->i", p.q(nodes, side=side), Zn)
        if not p.rho.is_zero:
            val += 2.0 * np.einsum("ij,ij->i", p.rho(nodes, side=side), D)
        return val

    return _cellwise_simpson(grid, rate)


def _delta_values(p: LqProblem, t: float, x: np.ndarray, u_star: Signal, u: Signal,
                  horizons: np.ndarray, step: Optional[float], method: str) -> np.ndarray:
    T = float(horizons[-1])
    du = u - u_star
    bps = set(float(h) for h in horizons)
    for sig in (u_star, u, p.b, p.q, p.rho):
        bps |= set(sig.breakpoints(t, T))
    base = integrate_state(p, t, x, u_star, T, step, method, breakpoints=bps)
    resp = propagate(p.A, du.transform(p.B), t, np.zeros(p.n), T, step, method, breakpoints=bps)
    if resp.grid.size != base.grid.size:
        raise NumericalInconsistencyError("两条轨迹的积分网格不一致")
    with np.errstate(over="ignore", invalid="ignore"):
        cells = _difference_cells(p, base.grid, base.states, resp.states, u_star, du)
        cum = np.concatenate([[0.0], np.cumsum(cells)])
    edges = base.grid[0::2]
    idx = np.clip(np.searchsorted(edges, horizons), 0, edges.size - 1)
    return -cum[idx]


def _delta_profile(p: LqProblem, t: float, x: np.ndarray, u_star: Signal, u: Signal,
                   horizons: np.ndarray, step: Optional[float],
                   method: str) -> Tuple[np.ndarray, np.ndarray, bool]:
    """带溢出截断的 ΔJ 序列"""
    truncated = False
    for _ in range(3):
        if horizons.size == 0:
            return horizons, np.zeros(0), True
        try:
            deltas = _delta_values(p, t, x, u_star, u, horizons, step, method)
        except StateOverflowError as e:
            limit = e.first_bad_time if e.first_bad_time is not None else horizons[-1]
        else:
            finite = np.isfinite(deltas)
            if np.all(finite):
                return horizons, deltas, truncated
            limit = float(horizons[int(np.argmin(finite))])
        logger.warning(f"代价差在 s≈{limit:g} 处溢出，轨迹截断")
        horizons = horizons[horizons < limit]
        truncated = True
    raise NumericalInconsistencyError("代价差轨迹截断后仍然溢出")


def comparison_trace(p: LqProblem, t: float, x, u_star: Signal, u: ControlFamily,
                     schedule: Optional[Sequence[float]] = None,
                     window: int = DEFAULT_WINDOW, eps_v_factor: float = EPS_V_FACTOR,
                     eps_d_factor: float = EPS_D_FACTOR, step: Optional[float] = None,
                     method: str = EXACT, label: str = "") -> ComparisonTrace:
    """
    比较 u* 与 u 的有限时域代价差

    ΔJ(T) 沿 u* 的轨迹与扰动响应 ξ(ξ(t) = 0, ξ̇ = Aξ + B(u - u*))作为一个
    代价差积分计算。u 可以是一个信号，也可以是 T ↦ 信号 的函数(逐时域构造的见证控制)。

    Args:
        schedule: 时域序列，缺省为 horizon_schedule(t)
        window: 尾部窗口长度 W

    Returns:
        ComparisonTrace
    """
    x = np.asarray(x, dtype=float).ravel()
    horizons = np.asarray(horizon_schedule(t) if schedule is None else schedule, dtype=float)
    horizons = np.unique(horizons[horizons > t])
    if horizons.size == 0:
        raise ValueError(f"时域序列中没有大于 t={t:g} 的点")

    if isinstance(u, Signal):
        if u is u_star:
            kept, deltas, truncated = horizons, np.zeros(horizons.size), False
        else:
            kept, deltas, truncated = _delta_profile(p, t, x, u_star, u, horizons, step, method)
    else:
        values = []
        truncated = False
        for T in horizons:
            _, d, cut = _delta_profile(p, t, x, u_star, u(float(T)), np.array([T]), step, method)
            if cut or d.size == 0:
                truncated = True
                break
            values.append(float(d[-1]))
        kept = horizons[:len(values)]
        deltas = np.asarray(values)

    rules = decide(deltas, window, eps_v_factor, eps_d_factor, truncated)
    trace = ComparisonTrace(kept, deltas, rules["limsup"], rules["liminf"], rules["drift"],
                            rules["verdict"], window, rules["eps_v"], rules["eps_d"],
                            truncated, label)
    if trace.verdict == INCONCLUSIVE:
        logger.warning(f"比较结果不确定: {trace}")
    else:
        logger.info(f"比较完成: {trace}")
    return trace


# ------------------------------------------------------------------ 随机比较控制

def random_controls(m: int, t: float, count: int, seed: int = 0, span: float = 4.0,
                    pieces: int = 8, amplitude: float = 1.0,
                    lower: Optional[np.ndarray] = None) -> List[Signal]:
    """
    随机分段常值控制，支撑 [t, t+span)，平方可积

    Args:
        lower: 可选的分量下界(盒约束)，样本截断到该下界以上
    """
    rng = np.random.default_rng(seed)
    edges = t + span * np.arange(pieces + 1) / pieces
    out = []
    for _ in range(count):
        vals = amplitude * rng.standard_normal((pieces, m))
        if lower is not None:
            vals = np.maximum(vals, np.asarray(lower, dtype=float))
        atoms = [Atom(vals[i], 0, 0.0, 0.0, 0.0, edges[i], edges[i + 1]) for i in range(pieces)]
        out.append(Signal.closed_form(atoms, dim=m))
    return out
