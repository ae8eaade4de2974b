"""
轨迹积分与代价
状态方程积分、有限时域代价 J_T、Cesàro 均值与 Abel 均值
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import LqProblem, forward_cell_integrals, matrix_exp_batch
from .errors import StateOverflowError
from .signals import Signal

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
EXACT_STEP = 1e-2
RK4 = "rk4"
EXACT = "exact"


@dataclass
class Trajectory:
    """
    状态轨迹

    grid 由若干单元组成，每个单元含中点，因此节点数为奇数；
    单元端点覆盖输入信号的所有断点。
    """
    grid: np.ndarray
    states: np.ndarray
    method: str
    step: float
    order: int
    t: float
    x: np.ndarray

    def at(self, s) -> np.ndarray:
        """线性插值"""
        return np.stack([np.interp(s, self.grid, self.states[:, j])
                         for j in range(self.states.shape[1])], axis=-1)

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def as_signal(self) -> Signal:
        return Signal.sampled(self.grid, self.states)

    def to_rows(self) -> List[List[float]]:
        return [[float(s)] + [float(v) for v in row] for s, row in zip(self.grid, self.states)]

    def __repr__(self):
        return (f"Trajectory(method={self.method}, nodes={self.grid.size}, "
                f"[{self.grid[0]:g}, {self.grid[-1]:g}])")


def build_grid(t: float, T: float, step: float,
               breakpoints: Iterable[float] = ()) -> np.ndarray:
    """
    构造带中点的积分网格

    Args:
        t, T: 区间
        step: 单元长度上限
        breakpoints: 必须作为单元端点的时刻(信号断点、输出时域等)

    Returns:
        奇数个节点，偶数下标为单元端点
    """
    if not T > t:
        raise ValueError(f"积分终点 T={T} 必须大于起点 t={t}")
    edges = sorted({float(t), float(T)} | {float(b) for b in breakpoints if t < b < T})
    pieces = []
    for a, c in zip(edges[:-1], edges[1:]):
        n_cells = max(1, int(math.ceil((c - a) / step - 1e-9)))
        pieces.append(np.linspace(a, c, 2 * n_cells + 1)[:-1])
    pieces.append(np.array([edges[-1]]))
    return np.concatenate(pieces)


def _first_bad(grid: np.ndarray, states: np.ndarray) -> Optional[float]:
    ok = np.all(np.isfinite(states), axis=1)
    if np.all(ok):
        return None
    return float(grid[np.argmin(ok)])


def propagate(A: np.ndarray, forcing: Signal, t: float, x: np.ndarray, T: float,
              step: Optional[float] = None, method: str = RK4,
              breakpoints: Iterable[float] = ()) -> Trajectory:
    """
    积分 Ẋ = AX + f(s), X(t) = x

    Args:
        A: n×n 矩阵
        forcing: f(s)，n 维信号
        method: "rk4" 为经典四阶Runge-Kutta；"exact" 为矩阵指数的变常数公式
            (每个单元用16点Gauss-Legendre求卷积积分)
        breakpoints: 额外的单元端点

    Raises:
        StateOverflowError: 出现非有限值
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if step is None:
        step = EXACT_STEP if method == EXACT else DEFAULT_STEP
    bps = list(breakpoints) + list(forcing.breakpoints(t, T))
    grid = build_grid(t, T, step, bps)
    n = A.shape[0]
    states = np.empty((grid.size, n))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        if method == EXACT:
            _propagate_exact(A, forcing, grid, states)
            order = 16
        elif method == RK4:
            _propagate_rk4(A, forcing, grid, states)
            order = 4
        else:
            raise ValueError(f"未知的积分方法: {method}. 可用方法: {[RK4, EXACT]}")
    bad = _first_bad(grid, states)
    if bad is not None:
        raise StateOverflowError("状态积分出现非有限值", bad)
    return Trajectory(grid, states, method, step, order, float(t), x)


def _propagate_rk4(A: np.ndarray, forcing: Signal, grid: np.ndarray, states: np.ndarray):
    h = np.diff(grid)
    mids = grid[:-1] + 0.5 * h
    f_right = forcing(grid[:-1], side="right")
    f_left = forcing(grid[1:], side="left")
    f_mid = forcing(mids)
    X = states[0].copy()
    for i in range(h.size):
        hi = h[i]
        k1 = A @ X + f_right[i]
        k2 = A @ (X + 0.5 * hi * k1) + f_mid[i]
        k3 = A @ (X + 0.5 * hi * k2) + f_mid[i]
        k4 = A @ (X + hi * k3) + f_left[i]
        X = X + hi / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = X


def _propagate_exact(A: np.ndarray, forcing: Signal, grid: np.ndarray, states: np.ndarray):
    h = np.diff(grid)
    props = matrix_exp_batch(A, h)
    if forcing.is_zero:
        conv = np.zeros((h.size, A.shape[0]))
    else:
        conv = forward_cell_integrals(A, forcing, grid)
    X = states[0].copy()
    for i in range(h.size):
        X = props[i] @ X + conv[i]
        states[i + 1] = X


def _input_forcing(p: LqProblem, u: Signal) -> Signal:
    return u.transform(p.B) + p.b


def integrate_state(p: LqProblem, t: float, x, u: Signal, T: float,
                    step: Optional[float] = None, method: str = RK4,
                    breakpoints: Iterable[float] = ()) -> Trajectory:
    """
    积分状态方程 Ẋ = AX + Bu + b

    闭式输入可选 method="exact"，走变常数公式的精确路径。
    """
    if u.dim != p.m:
        raise ValueError(f"控制维数 {u.dim} 与问题的 m={p.m} 不一致")
    return propagate(p.A, _input_forcing(p, u), t, x, T, step, method, breakpoints)


# ------------------------------------------------------------------ 代价

def running_cost_cells(p: LqProblem, traj: Trajectory, u: Signal,
                       include_phi: bool = True) -> np.ndarray:
    """
    每个单元上的 Simpson 积分

    单元左端用右极限、右端用左极限，因此单元端点处的跳跃不影响精度。
    """
    g = traj.grid
    X = traj.states
    left_nodes, mid_nodes, right_nodes = g[0:-2:2], g[1:-1:2], g[2::2]

    def rate(nodes, Xn, side):
        U = u(nodes, side=side)
        val = (np.einsum("ij,jk,ik->i", Xn, p.Q, Xn)
               + 2.0 * np.einsum("ij,jk,ik->i", U, p.S, Xn)
               + np.einsum("ij,jk,ik->i", U, p.R, U))
        if not p.q.is_zero:
            val += 2.0 * np.einsum("ij,ij->i", p.q(nodes, side=side), Xn)
        if not p.rho.is_zero:
            val += 2.0 * np.einsum("ij,ij->i", p.rho(nodes, side=side), U)
        if include_phi and not p.phi.is_zero:
            val += p.phi(nodes, side=side)[:, 0]
        return val

    f0 = rate(left_nodes, X[0:-2:2], "right")
    f1 = rate(mid_nodes, X[1:-1:2], "right")
    f2 = rate(right_nodes, X[2::2], "left")
    h = right_nodes - left_nodes
    return h / 6.0 * (f0 + 4.0 * f1 + f2)


def cost_profile(p: LqProblem, t: float, x, u: Signal, T: float,
                 horizons: Sequence[float] = (), step: Optional[float] = None,
                 method: str = EXACT, include_phi: bool = True) -> Tuple[np.ndarray, np.ndarray, Trajectory]:
    """
    一条轨迹上在多个时域处的累积代价

    Returns:
        (horizons, J_{T_k}, trajectory)
    """
    horizons = np.asarray(sorted(set(float(h) for h in horizons) | {float(T)}))
    traj = integrate_state(p, t, x, u, T, step, method, breakpoints=horizons)
    cells = running_cost_cells(p, traj, u, include_phi)
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    edges = traj.grid[0::2]
    idx = np.searchsorted(edges, horizons)
    idx = np.clip(idx, 0, edges.size - 1)
    return horizons, cum[idx], traj


def cost_JT(p: LqProblem, t: float, x, u: Signal, T: float,
            step: Optional[float] = None, method: str = EXACT,
            include_phi: bool = True) -> float:
    """
    J_T(t,x;u) = ∫_t^T g(s,X(s),u(s))ds，沿轨迹网格逐单元Simpson积分
    """
    if T <= t:
        return 0.0
    _, values, _ = cost_profile(p, t, x, u, T, (), step, method, include_phi)
    return float(values[-1])


def cesaro_mean(p: LqProblem, x, u: Signal, T: float, step: Optional[float] = None,
                method: str = EXACT) -> float:
    """(1/T)∫_0^T g ds"""
    return cost_JT(p, 0.0, x, u, T, step, method) / T


def cesaro_sweep(p: LqProblem, x, u: Signal, horizons: Sequence[float],
                 step: Optional[float] = None, method: str = EXACT) -> List[Dict]:
    """一条轨迹上的 Cesàro 均值序列"""
    horizons = sorted(float(h) for h in horizons)
    hs, values, _ = cost_profile(p, 0.0, x, u, horizons[-1], horizons, step, method)
    return [{"T": float(T), "cesaro_mean": float(v / T), "J_T": float(v)}
            for T, v in zip(hs, values) if T > 0]


# ------------------------------------------------------------------ Abel 均值

@dataclass
class AbelResult:
    """Abel 均值结果或发散报告"""
    lam: float
    converged: bool
    value: Optional[float]
    envelope_rate: float
    lower_bound: Optional[float]
    horizon: float
    tolerance: float
    history: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "lambda": self.lam,
            "converged": self.converged,
            "value": self.value,
            "envelope_rate": self.envelope_rate,
            "lower_bound": self.lower_bound,
            "horizon": self.horizon,
            "tolerance": self.tolerance,
            "history": self.history,
        }

    def __repr__(self):
        if self.converged:
            return f"AbelResult(λ={self.lam:g}, value={self.value:.10g})"
        return f"AbelResult(λ={self.lam:g}, 发散, 包络增长率={self.envelope_rate:.4g})"


def _envelope_rate(s: np.ndarray, h: np.ndarray, blocks: int = 10) -> Tuple[float, float]:
    """
    在给定窗口上拟合 log|h| 的上包络斜率

    Returns:
        (斜率, 窗口末端的包络值)
    """
    edges = np.linspace(s[0], s[-1], blocks + 1)
    centers, peaks = [], []
    for a, c in zip(edges[:-1], edges[1:]):
        mask = (s >= a) & (s <= c)
        if not np.any(mask):
            continue
        peak = float(np.max(np.abs(h[mask])))
        if peak > 0.0:
            centers.append(0.5 * (a + c))
            peaks.append(math.log(peak))
    if len(centers) < 2:
        return -math.inf, 0.0
    slope, intercept = np.polyfit(centers, peaks, 1)
    return float(slope), float(math.exp(intercept + slope * s[-1]))


def abel_mean(p: LqProblem, x, u: Signal, lam: float, tol: float = 1e-8,
              horizon0: float = 10.0, max_horizon: float = 160.0,
              growth_threshold: float = 1e-6, step: Optional[float] = None,
              method: str = EXACT) -> AbelResult:
    """
    Abel 均值 J^λ = ∫_0^∞ e^{-λs} g ds

    时域按几何级数延长；在时域最后十分之一上拟合被积函数的包络，
    增长率超过 growth_threshold 即给出发散报告(附已见证的下界)，
    衰减时用包络的尾界判定收敛。
    """
    if lam <= 0:
        raise ValueError(f"折现率必须为正: λ={lam}")
    H = horizon0
    history: List[Dict] = []
    last_value, rate, H_done = None, -math.inf, 0.0
    while H <= max_horizon:
        try:
            traj = integrate_state(p, 0.0, x, u, H, step, method)
        except StateOverflowError as e:
            logger.warning(f"Abel 均值在时域 {H:g} 处溢出: {e}")
            break
        # 折现后的被积函数逐单元Simpson积分
        g = traj.grid
        disc = np.exp(-lam * g)
        costs = _rate_samples(p, traj, u)
        weighted = costs * disc
        integral = float(np.sum((g[2::2] - g[0:-2:2]) / 6.0
                                * (weighted[0:-2:2] + 4.0 * weighted[1:-1:2] + weighted[2::2])))
        window = g >= 0.9 * H
        rate, env_end = _envelope_rate(g[window], weighted[window])
        history.append({"horizon": H, "partial_integral": integral, "envelope_rate": rate})
        H_done = H
        logger.debug(f"Abel λ={lam:g}: H={H:g}, 部分积分={integral:.6g}, 包络斜率={rate:.4g}")
        if rate > growth_threshold:
            return AbelResult(lam, False, None, rate, integral, H, tol, history)
        if rate < -growth_threshold:
            tail = env_end / (-rate)
            if tail <= tol * max(1.0, abs(integral)):
                return AbelResult(lam, True, integral, rate, None, H, tol, history)
        if last_value is not None and abs(integral - last_value) <= tol * max(1.0, abs(integral)) \
                and rate <= 0:
            return AbelResult(lam, True, integral, rate, None, H, tol, history)
        last_value = integral
        H *= 2.0
    # 预算用尽：按最后的斜率给出结论
    if rate > 0 or last_value is None:
        return AbelResult(lam, False, None, rate, last_value, H_done, tol, history)
    logger.warning(f"Abel 均值在最大时域 {max_horizon:g} 内未达到容差 {tol:g}")
    return AbelResult(lam, True, last_value, rate, None, H_done, tol, history)


def _rate_samples(p: LqProblem, traj: Trajectory, u: Signal) -> np.ndarray:
    """所有网格节点上的代价率(右极限)"""
    return p.running_cost(traj.grid, traj.states, u(traj.grid))
