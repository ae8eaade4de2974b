"""
可控子空间分解
可控子空间 ℍ₀、正交投影 Π/Π⊥、反馈变换后的投影问题与标准形约化
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.signal import place_poles

from .core import RANK_TOL, LqProblem, kalman_matrix, spectral_abscissa
from .errors import NumericalInconsistencyError, StabilizerRequiredError
from .signals import ROUNDOFF, Signal, exp_forward_signal, matrix_exp_signal, signal_inner
from .sim import EXACT, propagate

logger = logging.getLogger(__name__)

THETA_ZERO = "zero"
THETA_PLACE = "place"
THETA_CHOICES = (THETA_ZERO, THETA_PLACE)
DEFAULT_MU_STAR = 1.0
DEFAULT_HORIZON = 40.0


@dataclass(frozen=True, eq=False)
class ControllableSubspace:
    """可控子空间 ℍ₀ = span{R(AᵏB)} 及其正交补"""
    basis: np.ndarray          # n×ℓ，正交列
    complement: np.ndarray     # n×(n-ℓ)
    dim: int
    Pi: np.ndarray
    PiPerp: np.ndarray

    @property
    def n(self) -> int:
        return self.Pi.shape[0]

    @property
    def is_full(self) -> bool:
        return self.dim == self.n

    def coords(self, x) -> np.ndarray:
        """ℍ₀ 上的坐标 Vᵀx"""
        return self.basis.T @ np.asarray(x, dtype=float)

    def lift(self, z) -> np.ndarray:
        return self.basis @ np.asarray(z, dtype=float)

    def to_dict(self) -> Dict:
        return {
            "dim": self.dim,
            "n": self.n,
            "basis": self.basis.tolist(),
            "Pi": self.Pi.tolist(),
        }

    def __repr__(self):
        return f"ControllableSubspace(dim={self.dim}, n={self.n})"


def _orient(cols: np.ndarray) -> np.ndarray:
    """每列第一个非零元取非负"""
    cols = cols.copy()
    for j in range(cols.shape[1]):
        nz = np.flatnonzero(np.abs(cols[:, j]) > 1e-12)
        if nz.size and cols[nz[0], j] < 0:
            cols[:, j] = -cols[:, j]
    return cols


def controllable_subspace(A: np.ndarray, B: np.ndarray,
                          tol: float = RANK_TOL) -> ControllableSubspace:
    """
    用列主元QR求 Kalman 矩阵值域的正交基

    Args:
        A: n×n
        B: n×m
        tol: 相对截断阈值 |r_kk| ≤ tol·|r_11|

    Returns:
        ControllableSubspace
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0] or A.shape[0] != A.shape[1]:
        raise ValueError(f"维数不一致: A {A.shape}, B {B.shape}")
    n = A.shape[0]
    K = kalman_matrix(A, B)
    Qf, Rf, _ = linalg.qr(K, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > tol * diag[0]))
    V = _orient(Qf[:, :rank]) if rank else np.zeros((n, 0))
    if rank < n:
        W = linalg.null_space(V.T) if rank else np.eye(n)
        W = _orient(W)
    else:
        W = np.zeros((n, 0))
    Pi = V @ V.T
    PiPerp = np.eye(n) - Pi
    for M in (V, W, Pi, PiPerp):
        M.setflags(write=False)
    sub = ControllableSubspace(V, W, rank, Pi, PiPerp)

    scale = max(1.0, float(np.linalg.norm(A)))
    leak = max(float(np.linalg.norm(PiPerp @ A @ Pi)) / scale,
               float(np.linalg.norm(PiPerp @ B)) / max(1.0, float(np.linalg.norm(B))))
    if leak > math.sqrt(tol):
        raise NumericalInconsistencyError(f"可控子空间不是 A 不变的: 泄漏 {leak:.3e}")
    logger.debug(f"可控子空间维数 ℓ={rank} (n={n}), 不变性残差 {leak:.2e}")
    return sub


def target_spectrum(dim: int, mu_star: float = DEFAULT_MU_STAR) -> np.ndarray:
    """极点配置目标 {-μ*, -μ*-1, …}"""
    return -(mu_star + np.arange(dim, dtype=float))


def place_in_subspace(A_c: np.ndarray, B_c: np.ndarray,
                      mu_star: float = DEFAULT_MU_STAR) -> np.ndarray:
    """
    对可控对 (A_c, B_c) 做极点配置，返回 Θ_c 使 σ(A_c + B_cΘ_c) = 目标谱

    B_c 先做SVD降到列满秩，place_poles 要求这一点。
    """
    ell = A_c.shape[0]
    m = B_c.shape[1]
    if ell == 0:
        return np.zeros((m, 0))
    U, sv, Vt = np.linalg.svd(B_c, full_matrices=False)
    r = int(np.sum(sv > RANK_TOL * max(sv[0], 1e-300))) if sv.size else 0
    if r == 0:
        raise StabilizerRequiredError("输入矩阵在可控子空间上为零，无法配置极点")
    B_r = U[:, :r] * sv[:r]
    poles = target_spectrum(ell, mu_star)
    result = place_poles(A_c, B_r, poles)
    K = result.gain_matrix
    theta_c = -Vt[:r].T @ K
    achieved = spectral_abscissa(A_c + B_c @ theta_c)
    if not achieved < 0:
        raise NumericalInconsistencyError(f"极点配置失败: 闭环谱横坐标 {achieved:.3g}")
    return theta_c


def stabilizer(A: np.ndarray, B: np.ndarray, mu_star: float = DEFAULT_MU_STAR,
               sub: Optional[ControllableSubspace] = None) -> np.ndarray:
    """
    全空间上的镇定反馈 Θ (m×n)，σ(A + BΘ) ⊂ ℂ⁻

    在可控子空间上配置极点，正交补上保留原谱，补空间不稳定时报错。
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sub = sub or controllable_subspace(A, B)
    V, W = sub.basis, sub.complement
    if W.shape[1]:
        rest = spectral_abscissa(W.T @ A @ W)
        if rest >= 0:
            raise StabilizerRequiredError(
                f"(A,B) 不可镇定: 不可控部分谱横坐标 {rest:.4g} ≥ 0")
    theta_c = place_in_subspace(V.T @ A @ V, V.T @ B, mu_star)
    return theta_c @ V.T


@dataclass
class CompatibilityFlags:
    """投影问题的相容性标志"""
    cost_decoupled: bool          # ΠQΠ⊥ = 0 且 SΠ⊥ = 0
    b_pi_integrable: bool
    q_pi_integrable: bool
    rho_pi_L2: bool
    coupling_integrable: bool     # ΠAΠ⊥X_Π⊥ ∈ L¹
    residuals: Dict = field(default_factory=dict)

    @property
    def compatible(self) -> bool:
        return bool(self.cost_decoupled and self.b_pi_integrable
                    and self.q_pi_integrable and self.rho_pi_L2)

    def to_dict(self) -> Dict:
        return {
            "compatible": self.compatible,
            "cost_decoupled": self.cost_decoupled,
            "b_pi_integrable": self.b_pi_integrable,
            "q_pi_integrable": self.q_pi_integrable,
            "rho_pi_L2": self.rho_pi_L2,
            "coupling_integrable": self.coupling_integrable,
            "residuals": self.residuals,
        }


def _decays(sig: Signal) -> bool:
    """在 [0,∞) 上是否指数衰减(采样信号看声明的增长率)"""
    if sig.is_zero:
        return True
    if sig.is_sampled:
        return sig.growth_rate is not None and sig.growth_rate < 0
    return sig.dominant_rate()[0] < 0


@dataclass(frozen=True, eq=False)
class DecomposedProblem:
    """
    按 ℍ₀ ⊕ ℍ₀⊥ 分解并经反馈 u = ΘX_Π + v 变换后的问题

    X_Π⊥ 与控制无关，由初始对 (t, x) 决定，因此本对象依赖于场景。
    """
    problem: LqProblem
    sub: ControllableSubspace
    t: float
    x: np.ndarray
    A_Pi: np.ndarray
    B_Pi: np.ndarray
    A_PiPerp: np.ndarray
    b_Pi: Signal
    b_PiPerp: Signal
    X_PiPerp: Signal
    coupling: Signal              # ΠAΠ⊥X_Π⊥
    Theta: np.ndarray
    Q_Pi_Theta: np.ndarray
    S_Pi_Theta: np.ndarray
    q_Pi_Theta: Signal
    rho_Pi: Signal
    phi_Pi: Signal
    compatibility: Optional[CompatibilityFlags] = None

    @property
    def dim(self) -> int:
        return self.sub.dim

    @property
    def Theta_c(self) -> np.ndarray:
        return self.Theta @ self.sub.basis

    def weights(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Signal, Signal]:
        """给定反馈 Θ 时的 (Q_Π^Θ, S_Π^Θ, q_Π^Θ, ρ_Π)"""
        return _transformed_weights(self.problem, self.sub, theta, self.X_PiPerp)

    def projected_problem(self, include_coupling: bool = False,
                          use_theta: bool = False) -> LqProblem:
        """
        ℍ₀ 坐标 z = Vᵀ X_Π 下的 ℓ 维问题

        Args:
            include_coupling: 外力中是否计入 ΠAΠ⊥X_Π⊥
            use_theta: True 时控制变量为 v = u - ΘX_Π，否则为 u 本身

        Returns:
            初始状态为 Vᵀx 的 LqProblem，φ 取 φ_Π
        """
        p, V = self.problem, self.sub.basis
        theta = self.Theta if use_theta else np.zeros_like(self.Theta)
        if use_theta:
            Q_pi, S_pi, q_pi, rho_pi = self.Q_Pi_Theta, self.S_Pi_Theta, self.q_Pi_Theta, self.rho_Pi
        else:
            Q_pi, S_pi, q_pi, rho_pi = self.weights(theta)
        forcing = self.b_Pi + self.coupling if include_coupling else self.b_Pi
        Q_c = V.T @ Q_pi @ V
        suffix = "θ" if use_theta else ""
        return LqProblem(
            A=V.T @ (self.A_Pi + self.B_Pi @ theta) @ V,
            B=V.T @ self.B_Pi,
            Q=0.5 * (Q_c + Q_c.T),
            S=S_pi @ V,
            R=p.R,
            b=forcing.transform(V.T),
            q=q_pi.transform(V.T),
            rho=rho_pi,
            phi=self.phi_Pi,
            name=f"{p.name}[ℍ₀{suffix}{'+耦合' if include_coupling else ''}]",
        )

    @property
    def initial_coords(self) -> np.ndarray:
        return self.sub.coords(self.x)

    def to_dict(self) -> Dict:
        V = self.sub.basis
        return {
            "subspace": self.sub.to_dict(),
            "t": self.t,
            "x": self.x.tolist(),
            "A_Pi_coords": (V.T @ self.A_Pi @ V).tolist(),
            "B_Pi_coords": (V.T @ self.B_Pi).tolist(),
            "A_PiPerp_coords": (self.sub.complement.T @ self.A_PiPerp
                                @ self.sub.complement).tolist(),
            "Theta": self.Theta.tolist(),
            "Q_Pi_Theta": self.Q_Pi_Theta.tolist(),
            "S_Pi_Theta": self.S_Pi_Theta.tolist(),
            "X_PiPerp": self.X_PiPerp.to_dict(),
            "phi_Pi": self.phi_Pi.to_dict(),
            "compatibility": None if self.compatibility is None else self.compatibility.to_dict(),
        }

    def __repr__(self):
        return f"DecomposedProblem(ℓ={self.dim}, n={self.problem.n}, t={self.t:g})"


def _chop(M: np.ndarray, scale: float) -> np.ndarray:
    """舍入量级的元素置零"""
    M = np.array(M, dtype=float)
    M[np.abs(M) <= ROUNDOFF * max(scale, 1.0)] = 0.0
    return M


def _transformed_weights(p: LqProblem, sub: ControllableSubspace, theta: np.ndarray,
                         X_perp: Signal) -> Tuple[np.ndarray, np.ndarray, Signal, Signal]:
    Pi, Pp = sub.Pi, sub.PiPerp
    Q_pi = Pi @ (p.Q + p.S.T @ theta + theta.T @ p.S + theta.T @ p.R @ theta) @ Pi
    Q_pi = 0.5 * (Q_pi + Q_pi.T)
    S_pi = p.S @ Pi + p.R @ theta
    weight = p.Q + theta.T @ p.S
    q_pi = (p.q.transform(Pi)
            + X_perp.transform(_chop(Pi @ weight @ Pp, float(np.linalg.norm(weight))))
            + p.rho.transform(theta.T))
    rho_pi = p.rho + X_perp.transform(_chop(p.S @ Pp, float(np.linalg.norm(p.S))))
    return Q_pi, S_pi, q_pi, rho_pi


def complement_state(p: LqProblem, sub: ControllableSubspace, t: float, x,
                     horizon: Optional[float] = None, step: Optional[float] = None) -> Signal:
    """
    X_Π⊥(s)：Ẋ = Π⊥AΠ⊥X + Π⊥b，X(t) = Π⊥x

    b 为闭式时给出闭式 W·[e^{WᵀAW(s-t)}Wᵀx + ∫_t^s e^{WᵀAW(s-τ)}Wᵀb(τ)dτ] (s ≥ t)，
    否则在 [t, horizon] 上积分。
    """
    W = sub.complement
    if W.shape[1] == 0:
        return Signal.zero(p.n)
    x = np.asarray(x, dtype=float)
    A22 = W.T @ p.A @ W
    z0 = W.T @ x
    b_perp = p.b.transform(W.T)
    free = matrix_exp_signal(A22, z0, anchor=t, lo=t)
    forced = exp_forward_signal(A22, b_perp, t)
    if free is not None and forced is not None:
        return (free + forced).transform(W)
    logger.warning("X_Π⊥ 无法闭式表示，改用采样表示")
    horizon = t + DEFAULT_HORIZON if horizon is None else horizon
    traj = propagate(A22, b_perp, t, z0, horizon, step, method=EXACT)
    rates = [spectral_abscissa(A22)]
    if not b_perp.is_zero:
        rates.append(b_perp.growth_rate if b_perp.growth_rate is not None
                     else b_perp.dominant_rate()[0])
    return Signal.sampled(traj.grid, traj.states @ W.T, growth_rate=max(rates))


def decompose(p: LqProblem, sub: Optional[ControllableSubspace] = None,
              theta_choice: str = THETA_PLACE, t: float = 0.0, x=None,
              mu_star: float = DEFAULT_MU_STAR, horizon: Optional[float] = None,
              step: Optional[float] = None, tol: float = 1e-10) -> DecomposedProblem:
    """
    分解问题并做反馈变换

    Args:
        p: 原问题
        sub: 可控子空间，缺省时由 (A, B) 计算
        theta_choice: "zero" (要求 A_Π 在 ℍ₀ 上已稳定) 或 "place" (极点配置)
        t, x: 初始对，决定 X_Π⊥
        mu_star: 目标谱 {-μ*, -μ*-1, …}
        horizon: X_Π⊥ 需要数值积分时的终点
        tol: 相容性检查的容差

    Raises:
        StabilizerRequiredError: theta_choice="zero" 而 A_Π 在 ℍ₀ 上不稳定
    """
    if theta_choice not in THETA_CHOICES:
        raise ValueError(f"未知的反馈选择: {theta_choice}. 可用选择: {list(THETA_CHOICES)}")
    sub = sub or controllable_subspace(p.A, p.B)
    x = np.zeros(p.n) if x is None else np.asarray(x, dtype=float).ravel()
    if x.size != p.n:
        raise ValueError(f"初始状态维数 {x.size} 与 n={p.n} 不一致")
    Pi, Pp, V = sub.Pi, sub.PiPerp, sub.basis

    A_Pi = Pi @ p.A @ Pi
    B_Pi = Pi @ p.B
    A_PiPerp = Pp @ p.A @ Pp
    A_c = V.T @ p.A @ V
    if theta_choice == THETA_ZERO:
        if sub.dim and spectral_abscissa(A_c) >= 0:
            raise StabilizerRequiredError(
                f"A_Π 在 ℍ₀ 上不稳定 (谱横坐标 {spectral_abscissa(A_c):.4g})，需要镇定反馈")
        theta = np.zeros((p.m, p.n))
    else:
        theta = place_in_subspace(A_c, V.T @ p.B, mu_star) @ V.T

    X_perp = complement_state(p, sub, t, x, horizon, step)
    Q_pi, S_pi, q_pi, rho_pi = _transformed_weights(p, sub, theta, X_perp)
    # φ_Π 只由 X_Π⊥ 与 q 构成
    phi_pi = signal_inner(X_perp, X_perp, p.Q) + signal_inner(X_perp, p.q).scale(2.0)

    dp = DecomposedProblem(
        problem=p, sub=sub, t=float(t), x=x,
        A_Pi=A_Pi, B_Pi=B_Pi, A_PiPerp=A_PiPerp,
        b_Pi=p.b.transform(Pi), b_PiPerp=p.b.transform(Pp),
        X_PiPerp=X_perp,
        coupling=X_perp.transform(_chop(Pi @ p.A @ Pp, float(np.linalg.norm(p.A)))),
        Theta=theta, Q_Pi_Theta=Q_pi, S_Pi_Theta=S_pi,
        q_Pi_Theta=q_pi, rho_Pi=rho_pi, phi_Pi=phi_pi,
    )
    flags = check_compatibility(dp, tol)
    object.__setattr__(dp, "compatibility", flags)
    logger.info(f"分解完成: ℓ={sub.dim}, Θ={theta_choice}, 相容={flags.compatible}")
    return dp


def check_compatibility(dp: DecomposedProblem, tol: float = 1e-10) -> CompatibilityFlags:
    """结构条件 ΠQΠ⊥=0、SΠ⊥=0 与投影数据的可积性"""
    p, Pi, Pp = dp.problem, dp.sub.Pi, dp.sub.PiPerp
    r_q = float(np.linalg.norm(Pi @ p.Q @ Pp))
    r_s = float(np.linalg.norm(p.S @ Pp))
    scale = max(1.0, float(np.linalg.norm(p.Q)), float(np.linalg.norm(p.S)))
    flags = CompatibilityFlags(
        cost_decoupled=bool(r_q <= tol * scale and r_s <= tol * scale),
        b_pi_integrable=_decays(dp.b_Pi),
        q_pi_integrable=_decays(dp.q_Pi_Theta),
        rho_pi_L2=_decays(dp.rho_Pi),
        coupling_integrable=_decays(dp.coupling),
        residuals={"PiQPiPerp": r_q, "SPiPerp": r_s},
    )
    if not flags.coupling_integrable:
        logger.warning("耦合项 ΠAΠ⊥X_Π⊥ 不可积，投影问题只在限制意义下成立")
    return flags


# ------------------------------------------------------------------ 标准形约化

def _sym_sqrt(R: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """R^{1/2} 与 R^{-1/2}"""
    lam, U = np.linalg.eigh(R)
    if lam.min() <= 0:
        raise ValueError("R 必须正定")
    return (U * np.sqrt(lam)) @ U.T, (U / np.sqrt(lam)) @ U.T


@dataclass(frozen=True, eq=False)
class StandardFormReduction:
    """
    配方与平移后的标准形问题

    u 与 ũ 的关系：ũ = R^{1/2}u + R^{-1/2}(SX + ρ) - R^{-1/2}ΘX̃，X = X̃ + X₀。
    约化问题的 φ 即与控制无关的代价偏移。
    """
    original: LqProblem
    reduced: LqProblem
    X0: Signal
    theta: np.ndarray
    R_half: np.ndarray
    R_mhalf: np.ndarray
    t: float

    def to_reduced_control(self, u: Signal, X: Signal) -> Signal:
        """原问题的 (u, X) → ũ"""
        p = self.original
        X_tilde = X - self.X0
        return (u.transform(self.R_half)
                + (X.transform(p.S) + p.rho).transform(self.R_mhalf)
                - X_tilde.transform(self.R_mhalf @ self.theta))

    def from_reduced_control(self, u_tilde: Signal, X_tilde: Signal) -> Signal:
        """约化问题的 (ũ, X̃) → u"""
        p = self.original
        R_inv = self.R_mhalf @ self.R_mhalf
        u_hat = u_tilde + X_tilde.transform(self.R_mhalf @ self.theta)
        X = X_tilde + self.X0
        return u_hat.transform(self.R_mhalf) - (X.transform(p.S) + p.rho).transform(R_inv)

    def to_dict(self) -> Dict:
        return {
            "theta": self.theta.tolist(),
            "A_tilde": self.reduced.A.tolist(),
            "B_tilde": self.reduced.B.tolist(),
            "Q_tilde": self.reduced.Q.tolist(),
            "S_tilde": self.reduced.S.tolist(),
            "X0": self.X0.to_dict(),
        }


def reduce_to_standard_form(p: LqProblem, t: float = 0.0, theta: Optional[np.ndarray] = None,
                            horizon: Optional[float] = None, step: Optional[float] = None,
                            mu_star: float = DEFAULT_MU_STAR) -> StandardFormReduction:
    """
    把一般问题化为 R=I、b=ρ=0 的标准形

    Args:
        p: 原问题，R 正定
        t: 初始时刻 (X₀(t)=0)
        theta: 使 A + BR⁻¹(Θ-S) 稳定的反馈；缺省时 A-BR⁻¹S 已稳定则取零，否则极点配置
        horizon: X₀ 需要数值积分时的终点

    Returns:
        StandardFormReduction
    """
    R_half, R_mhalf = _sym_sqrt(p.R)
    R_inv = R_mhalf @ R_mhalf
    A0 = p.A - p.B @ R_inv @ p.S
    if theta is None:
        if spectral_abscissa(A0) < 0:
            theta = np.zeros((p.m, p.n))
        else:
            theta = stabilizer(A0, p.B @ R_inv, mu_star)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    A_tilde = A0 + p.B @ R_inv @ theta
    if spectral_abscissa(A_tilde) >= 0:
        raise StabilizerRequiredError("给定的 Θ 不能使 A + BR⁻¹(Θ-S) 稳定")

    forcing = p.b - p.rho.transform(p.B @ R_inv)
    X0 = exp_forward_signal(A0, forcing, t)
    if X0 is None:
        horizon = t + DEFAULT_HORIZON if horizon is None else horizon
        traj = propagate(A0, forcing, t, np.zeros(p.n), horizon, step, method=EXACT)
        X0 = traj.as_signal()

    Q0 = p.Q - p.S.T @ R_inv @ p.S
    Q_tilde = Q0 + theta.T @ R_inv @ theta
    q_tilde = p.q + X0.transform(Q0) - p.rho.transform(p.S.T @ R_inv)
    offset_arg = (X0.transform(p.S) + p.rho).transform(R_mhalf)
    phi = (signal_inner(X0, X0, p.Q) + signal_inner(X0, p.q).scale(2.0)
           - signal_inner(offset_arg, offset_arg))
    reduced = LqProblem(
        A=A_tilde,
        B=p.B @ R_mhalf,
        Q=0.5 * (Q_tilde + Q_tilde.T),
        S=R_mhalf @ theta,
        R=np.eye(p.m),
        q=q_tilde,
        phi=phi,
        standard_form=True,
        name=f"{p.name}[标准形]",
    )
    logger.info(f"标准形约化: σ(Ã) 横坐标 {spectral_abscissa(A_tilde):.4g}")
    return StandardFormReduction(p, reduced, X0, theta, R_half, R_mhalf, float(t))
