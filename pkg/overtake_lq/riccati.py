"""
Riccati方程与经典最优控制
镇定代数Riccati方程、η 方程的尾积分表示、闭环最优控制综合与值函数
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import linalg

from .core import LqProblem, backward_tail_profile, spectral_abscissa, weighted_tail_integral
from .errors import (DegenerateSpectrumError, DivergentTailError, NotApplicableError,
                     NumericalInconsistencyError, RiccatiError)
from .quadrature import simpson_weights, uniform_grid
from .signals import (Signal, exp_forward_signal, exp_tail_signal, matrix_exp_signal,
                      signal_inner)
from .sim import EXACT, propagate

logger = logging.getLogger(__name__)

ARE_TOL = 1e-9
SPECTRUM_TOL = 1e-8
MAX_NEWTON = 30
ETA_CHECK_FACTOR = 10.0
ETA_SAMPLES = 10
ETA_STEP = 1e-2
DEFAULT_HORIZON = 40.0


@dataclass
class RiccatiSolution:
    """镇定解 P、反馈 Θ̄ = -R⁻¹(S + BᵀP) 与闭环矩阵"""
    P: np.ndarray
    theta_bar: np.ndarray
    a_cl: np.ndarray
    residual: float
    iterations: int = 0
    R: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None

    @property
    def closed_loop_decay(self) -> float:
        """μ_cl = -max Re σ(A_cl)"""
        return -spectral_abscissa(self.a_cl)

    def to_dict(self) -> Dict:
        return {
            "P": self.P.tolist(),
            "theta_bar": self.theta_bar.tolist(),
            "a_cl": self.a_cl.tolist(),
            "closed_loop_eigenvalues": [[float(v.real), float(v.imag)]
                                        for v in np.linalg.eigvals(self.a_cl)],
            "residual": self.residual,
            "newton_iterations": self.iterations,
        }

    def __repr__(self):
        return (f"RiccatiSolution(n={self.P.shape[0]}, residual={self.residual:.2e}, "
                f"μ_cl={self.closed_loop_decay:.4g})")


def are_residual(P: np.ndarray, A: np.ndarray, B: np.ndarray, Q: np.ndarray,
                 S: np.ndarray, R: np.ndarray) -> float:
    """‖PA + AᵀP - (BᵀP+S)ᵀR⁻¹(BᵀP+S) + Q‖_F"""
    K = B.T @ P + S
    res = P @ A + A.T @ P - K.T @ np.linalg.solve(R, K) + Q
    return float(np.linalg.norm(res))


def _check_positive(R: np.ndarray, tol: float):
    R = np.atleast_2d(R)
    if np.linalg.norm(R - R.T) > 1e-12 * max(1.0, np.linalg.norm(R)):
        raise RiccatiError("R 必须对称")
    eig = np.linalg.eigvalsh(R)
    if eig.min() <= tol * max(1.0, abs(eig.max())):
        raise RiccatiError(f"R 必须正定, 最小特征值 {eig.min():.3e}")


def _hamiltonian_solution(A_s: np.ndarray, G: np.ndarray, Q_s: np.ndarray,
                          spectrum_tol: float) -> np.ndarray:
    """平移问题 Hamilton 矩阵稳定不变子空间给出的 P"""
    n = A_s.shape[0]
    H = np.block([[A_s, -G], [-Q_s, -A_s.T]])
    eig = np.linalg.eigvals(H)
    scale = max(1.0, float(np.linalg.norm(H)))
    on_axis = np.abs(eig.real) <= spectrum_tol * scale
    if np.any(on_axis):
        raise DegenerateSpectrumError(
            f"Hamilton矩阵在虚轴上有 {int(on_axis.sum())} 个特征值，不存在镇定解")
    _, Z, sdim = linalg.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise DegenerateSpectrumError(f"稳定不变子空间维数 {sdim} ≠ {n}")
    U11, U21 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise RiccatiError("稳定子空间的上块奇异，(A,B) 可能不可镇定")
    P = np.linalg.solve(U11.T, U21.T).T
    return 0.5 * (P + P.T)


def solve_are(A, B, Q, S, R, tol: float = ARE_TOL, max_newton: int = MAX_NEWTON,
              spectrum_tol: float = SPECTRUM_TOL) -> RiccatiSolution:
    """
    求镇定解 PA + AᵀP - (BᵀP+S)ᵀR⁻¹(BᵀP+S) + Q = 0

    先对平移问题 Ã = A - BR⁻¹S, Q̃ = Q - SᵀR⁻¹S 的 Hamilton 矩阵做排序Schur分解，
    再用 Kleinman-Newton 迭代(每步一个Lyapunov方程)修正到残差不超过 tol·(1+‖P‖)。

    Raises:
        RiccatiError: R 非正定、解不镇定或残差不达标
        DegenerateSpectrumError: Hamilton 矩阵有虚轴特征值
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    _check_positive(R, 1e-14)

    R_inv_S = np.linalg.solve(R, S)
    G = B @ np.linalg.solve(R, B.T)
    A_s = A - B @ R_inv_S
    Q_s = Q - S.T @ R_inv_S
    P = _hamiltonian_solution(A_s, 0.5 * (G + G.T), 0.5 * (Q_s + Q_s.T), spectrum_tol)

    best_P, best_res = P, are_residual(P, A, B, Q, S, R)
    iterations = 0
    for _ in range(max_newton):
        if best_res <= 1e-3 * tol * (1.0 + np.linalg.norm(best_P)):
            break
        K = np.linalg.solve(R, B.T @ P + S)
        A_k = A - B @ K
        rhs = Q - S.T @ K - K.T @ S + K.T @ R @ K
        P_new = linalg.solve_continuous_lyapunov(A_k.T, -rhs)
        P_new = 0.5 * (P_new + P_new.T)
        res = are_residual(P_new, A, B, Q, S, R)
        logger.debug(f"Newton 第 {iterations + 1} 步: 残差 {res:.3e}")
        if not res < best_res:
            break
        iterations += 1
        best_P, best_res, P = P_new, res, P_new
    P = best_P

    theta_bar = -np.linalg.solve(R, S + B.T @ P)
    a_cl = A + B @ theta_bar
    abscissa = spectral_abscissa(a_cl)
    if not abscissa < 0:
        raise RiccatiError(f"解不镇定: 闭环谱横坐标 {abscissa:.4g}")
    if best_res > tol * (1.0 + np.linalg.norm(P)):
        raise RiccatiError(f"Riccati残差 {best_res:.3e} 超过容差 {tol:g}·(1+‖P‖)")
    sol = RiccatiSolution(P, theta_bar, a_cl, best_res, iterations, R, B, S)
    logger.info(f"Riccati 求解完成: {sol}")
    return sol


# ------------------------------------------------------------------ η 方程

@dataclass
class EtaSolution:
    """η(s) = ∫_s^∞ e^{A_clᵀ(τ-s)}(-f(τ))dτ 与 v̄ = -R⁻¹(Bᵀη + ρ)"""
    eta: Signal
    vbar: Signal
    method: str
    decays: bool
    square_integrable: bool
    check_residual: float
    forcing_rate: float
    horizon: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "decays": self.decays,
            "square_integrable": self.square_integrable,
            "check_residual": self.check_residual,
            "forcing_rate": self.forcing_rate,
            "horizon": self.horizon,
            "eta": self.eta.to_dict(),
        }

    def __repr__(self):
        return f"EtaSolution(method={self.method}, decays={self.decays}, residual={self.check_residual:.2e})"


def eta_forcing(p: LqProblem, ric: RiccatiSolution) -> Signal:
    """f = (PB + Sᵀ)R⁻¹ρ - Pb - q"""
    gain = (ric.P @ p.B + p.S.T) @ np.linalg.inv(p.R)
    return p.rho.transform(gain) - p.b.transform(ric.P) - p.q


def _signal_rate(sig: Signal) -> float:
    if sig.is_zero:
        return -math.inf
    if sig.growth_rate is not None:
        return sig.growth_rate
    return sig.dominant_rate()[0]


def _check_points(t: float, span: float, sig: Signal) -> np.ndarray:
    pts = t + np.linspace(0.0, span, ETA_SAMPLES + 1)[1:] - 0.5 * span / ETA_SAMPLES
    bps = sig.breakpoints()
    for i, s in enumerate(pts):
        if bps.size and np.min(np.abs(bps - s)) < 1e-6:
            pts[i] = s + 1e-3
    return pts


def solve_eta(p: LqProblem, ric: RiccatiSolution, t: float = 0.0, tol: float = 1e-10,
              horizon: Optional[float] = None, step: float = ETA_STEP,
              check_factor: float = ETA_CHECK_FACTOR) -> EtaSolution:
    """
    求 η 与 v̄

    闭式数据直接给出闭式 η，并在10个点上用解析导数代入
    η̇ = -A_clᵀη + f 检验，同时与数值尾积分比对；否则在网格上逆向递推。

    Raises:
        DivergentTailError: 数据增长率不小于闭环衰减率
        NumericalInconsistencyError: 检验残差超过 check_factor·tol
    """
    f = eta_forcing(p, ric)
    mu_cl = ric.closed_loop_decay
    rate = _signal_rate(f)
    if rate >= mu_cl:
        raise DivergentTailError(rate, mu_cl, "η 的尾积分")
    neg_f = -f
    N = ric.a_cl.T
    span = min(10.0, 10.0 / mu_cl)
    R_inv = np.linalg.inv(p.R)

    eta = exp_tail_signal(N, neg_f) if not f.is_sampled else None
    if eta is not None:
        method = "closed_form"
        pts = _check_points(t, span, eta)
        ode = eta.derivative()(pts) + eta(pts) @ N.T - f(pts)
        direct = np.stack([weighted_tail_integral(ric.a_cl, neg_f, s, tol, anchor=s) for s in pts])
        scale = 1.0 + float(np.max(np.abs(eta(pts))))
        residual = max(float(np.max(np.abs(ode))), float(np.max(np.abs(direct - eta(pts)))))
        if residual > check_factor * tol * scale:
            raise NumericalInconsistencyError(
                f"η 检验残差 {residual:.3e} 超过 {check_factor:g}·tol·{scale:.3g}")
        dom = eta.dominant_rate()[0]
        decays = dom < 0
        square_integrable = decays
        T_end = None
    else:
        method = "sampled"
        if f.is_sampled:
            T_end = f.domain()[1]
            terminal = np.zeros(p.n)
            logger.warning(f"η 的外力为采样信号，在 s={T_end:g} 之后按零截断")
        else:
            T_end = t + (DEFAULT_HORIZON if horizon is None else horizon)
            terminal = None
        grid = uniform_grid(t, T_end, int(math.ceil((T_end - t) / step)) + 1)
        values = backward_tail_profile(ric.a_cl, neg_f, grid, tol, terminal=terminal)
        eta = Signal.sampled(grid, values, growth_rate=max(rate, -mu_cl))
        residual = 0.0
        if not f.is_sampled:
            idx = np.linspace(0, grid.size - 1, ETA_SAMPLES + 2).astype(int)[1:-1]
            direct = np.stack([weighted_tail_integral(ric.a_cl, neg_f, grid[i], tol, anchor=grid[i])
                               for i in idx])
            residual = float(np.max(np.abs(direct - values[idx])))
            scale = 1.0 + float(np.max(np.abs(values[idx])))
            if residual > check_factor * tol * scale:
                raise NumericalInconsistencyError(f"η 逆向递推与尾积分不一致: {residual:.3e}")
        end = float(np.linalg.norm(values[-1]))
        decays = rate < 0 and end <= max(tol, 1e-8) * (1.0 + float(np.max(np.abs(values))))
        square_integrable = rate < 0

    vbar = (eta.transform(p.B.T) + p.rho).transform(-R_inv)
    sol = EtaSolution(eta, vbar, method, bool(decays), bool(square_integrable),
                      residual, rate, T_end)
    logger.info(f"η 求解完成: {sol}")
    return sol


# ------------------------------------------------------------------ 最优控制综合

@dataclass
class OptimalSynthesis:
    """反馈律 ū = Θ̄X̄ + v̄ 及其开环形式"""
    theta_bar: np.ndarray
    control: Signal
    trajectory: Signal
    method: str
    t: float
    x: np.ndarray

    def feedback(self, X: np.ndarray, vbar_value: np.ndarray) -> np.ndarray:
        return self.theta_bar @ X + vbar_value

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "t": self.t,
            "x": self.x.tolist(),
            "theta_bar": self.theta_bar.tolist(),
            "control": self.control.to_dict(),
            "trajectory": self.trajectory.to_dict(),
        }


def synthesize_optimal(p: LqProblem, ric: RiccatiSolution, eta: EtaSolution,
                       t: float, x, horizon: Optional[float] = None,
                       step: Optional[float] = None) -> OptimalSynthesis:
    """
    闭环轨迹 Ẋ = A_clX + Bv̄ + b, X(t) = x，以及 ū = Θ̄X̄ + v̄

    数据全为闭式时两者都是闭式信号，否则在 [t, horizon] 上积分。
    """
    x = np.asarray(x, dtype=float).ravel()
    forcing = eta.vbar.transform(p.B) + p.b
    free = matrix_exp_signal(ric.a_cl, x, anchor=t, lo=t)
    forced = exp_forward_signal(ric.a_cl, forcing, t)
    if free is not None and forced is not None:
        traj = free + forced
        method = "closed_form"
    else:
        T_end = t + (DEFAULT_HORIZON if horizon is None else horizon)
        if eta.horizon is not None:
            T_end = min(T_end, eta.horizon)
        path = propagate(ric.a_cl, forcing, t, x, T_end, step, method=EXACT)
        traj = path.as_signal()
        method = "sampled"
        logger.warning(f"最优轨迹改用采样表示 [t={t:g}, T={T_end:g}]")
    control = traj.transform(ric.theta_bar) + eta.vbar
    return OptimalSynthesis(ric.theta_bar, control, traj, method, float(t), x)


def value_function(p: LqProblem, ric: RiccatiSolution, eta: EtaSolution, t: float, x,
                   tol: float = 1e-10) -> float:
    """
    V(t,x) = ⟨Px,x⟩ + 2⟨η(t),x⟩ + ∫_t^∞ [2⟨η,b⟩ - ⟨R⁻¹(Bᵀη+ρ), Bᵀη+ρ⟩] ds

    Raises:
        NotApplicableError: η 不平方可积或积分发散(非经典情形)
    """
    x = np.asarray(x, dtype=float).ravel()
    if not eta.square_integrable:
        raise NotApplicableError("η 不平方可积，值函数公式不适用")
    R_inv = np.linalg.inv(p.R)
    w = eta.eta.transform(p.B.T) + p.rho
    head = float(x @ ric.P @ x + 2.0 * eta.eta(t) @ x)

    integral = None
    try:
        integrand = signal_inner(eta.eta, p.b).scale(2.0) - signal_inner(w, w, R_inv)
        if integrand.is_zero:
            integral = 0.0
        elif integrand.is_closed_form:
            tail = exp_tail_signal(np.zeros((1, 1)), integrand)
            if tail is not None:
                integral = float(tail(t)[0])
    except DivergentTailError as e:
        raise NotApplicableError(f"值函数中的积分发散: {e}") from e
    except ValueError:
        integral = None
    if integral is None:
        T_end = eta.horizon or (t + DEFAULT_HORIZON)
        grid = uniform_grid(t, T_end, int(math.ceil((T_end - t) / ETA_STEP)) + 1)
        E = eta.eta(grid)
        W = E @ p.B + p.rho(grid)
        vals = 2.0 * np.einsum("ij,ij->i", E, p.b(grid)) - np.einsum("ij,jk,ik->i", W, R_inv, W)
        integral = float(simpson_weights(grid) @ vals)
        logger.warning(f"值函数积分在 [{t:g}, {T_end:g}] 上截断计算")
    return head + integral
