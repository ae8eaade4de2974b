"""
问题模型与基础数值工具
LQ问题数据、矩阵指数、指数加权尾积分与假设检查
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import integrate, linalg

from .errors import (DivergentTailError, NumericalInconsistencyError,
                     StateOverflowError, UnsupportedTailError)
from .quadrature import adaptive_gauss_legendre, gl_nodes
from .signals import Signal

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
RANK_TOL = 1e-9
DECAY_MARGIN = 1e-6
M_INFLATION = 1.1
TAIL_CAP = 200.0


def _as_matrix(M, rows: int = None, cols: int = None, name: str = "") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and M.shape[0] != rows:
        raise ValueError(f"矩阵 {name} 行数应为 {rows}, 实际 {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise ValueError(f"矩阵 {name} 列数应为 {cols}, 实际 {M.shape[1]}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"矩阵 {name} 含非有限值")
    return M


def _check_symmetric(M: np.ndarray, name: str, tol: float = SYMMETRY_TOL):
    scale = max(1.0, float(np.linalg.norm(M)))
    if np.linalg.norm(M - M.T) > tol * scale:
        raise ValueError(f"矩阵 {name} 不对称 (相对误差超过 {tol:g})")


@dataclass(frozen=True, eq=False)
class LqProblem:
    """
    LQ问题数据

    状态方程 Ẋ = AX + Bu + b(s)，运行代价
    g = ⟨QX,X⟩ + 2⟨SX,u⟩ + ⟨Ru,u⟩ + 2⟨q,X⟩ + 2⟨ρ,u⟩ (+ φ(s))
    """
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    b: Optional[Signal] = None
    q: Optional[Signal] = None
    rho: Optional[Signal] = None
    phi: Optional[Signal] = None          # 与状态、控制无关的代价偏移
    standard_form: bool = False
    name: str = ""

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError(f"A 必须是方阵, 实际形状 {A.shape}")
        B = _as_matrix(self.B, rows=n, name="B")
        m = B.shape[1]
        Q = _as_matrix(self.Q, n, n, "Q")
        S = _as_matrix(self.S, m, n, "S")
        R = _as_matrix(self.R, m, m, "R")
        _check_symmetric(Q, "Q")
        _check_symmetric(R, "R")
        for key, val in (("A", A), ("B", B), ("Q", Q), ("S", S), ("R", R)):
            val.setflags(write=False)
            object.__setattr__(self, key, val)
        for key, dim in (("b", n), ("q", n), ("rho", m), ("phi", 1)):
            sig = getattr(self, key)
            if sig is None:
                object.__setattr__(self, key, Signal.zero(dim))
            elif sig.dim != dim:
                raise ValueError(f"信号 {key} 维数应为 {dim}, 实际 {sig.dim}")
        if self.standard_form:
            if not np.allclose(R, np.eye(m), atol=SYMMETRY_TOL):
                raise ValueError("标准形要求 R = I")
            if not (self.rho.is_zero and self.b.is_zero):
                raise ValueError("标准形要求 ρ ≡ 0 且 b ≡ 0")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_phi(self, phi: Signal) -> "LqProblem":
        """加上与状态、控制无关的代价偏移"""
        return replace(self, phi=phi)

    def running_cost(self, s: np.ndarray, X: np.ndarray, u: np.ndarray,
                     include_phi: bool = True) -> np.ndarray:
        """
        逐点运行代价

        Args:
            s: (N,) 时间
            X: (N, n) 状态
            u: (N, m) 控制
            include_phi: 是否计入 φ

        Returns:
            (N,) 代价率
        """
        X = np.atleast_2d(X)
        u = np.atleast_2d(u)
        g = (np.einsum("ij,jk,ik->i", X, self.Q, X)
             + 2.0 * np.einsum("ij,jk,ik->i", u, self.S, X)
             + np.einsum("ij,jk,ik->i", u, self.R, u))
        if not self.q.is_zero:
            g = g + 2.0 * np.einsum("ij,ij->i", self.q(s), X)
        if not self.rho.is_zero:
            g = g + 2.0 * np.einsum("ij,ij->i", self.rho(s), u)
        if include_phi and not self.phi.is_zero:
            g = g + self.phi(s)[:, 0]
        return g

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Q": self.Q.tolist(),
            "S": self.S.tolist(),
            "R": self.R.tolist(),
            "b": self.b.to_dict(),
            "q": self.q.to_dict(),
            "rho": self.rho.to_dict(),
            "standard_form": self.standard_form,
        }

    def __repr__(self):
        return f"LqProblem(name='{self.name}', n={self.n}, m={self.m}, standard_form={self.standard_form})"


@dataclass
class HypothesisReport:
    """假设检查报告"""
    controllable: bool
    stabilizable: bool
    stable_A: bool
    decay_constants: Optional[Tuple[float, float]]    # (M, μ)，仅 A 稳定时给出
    q_locally_integrable: bool
    q_globally_integrable: bool
    satisfies_H: bool
    satisfies_QSR: bool
    controllable_rank: int = 0
    spectral_abscissa: float = 0.0
    tolerance: float = 0.0
    notes: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "controllable": self.controllable,
            "stabilizable": self.stabilizable,
            "stable_A": self.stable_A,
            "decay_constants": (None if self.decay_constants is None
                                else {"M": self.decay_constants[0], "mu": self.decay_constants[1]}),
            "q_locally_integrable": self.q_locally_integrable,
            "q_globally_integrable": self.q_globally_integrable,
            "satisfies_H": self.satisfies_H,
            "satisfies_QSR": self.satisfies_QSR,
            "controllable_rank": self.controllable_rank,
            "spectral_abscissa": self.spectral_abscissa,
            "tolerance": self.tolerance,
            "notes": self.notes,
        }

    def __repr__(self):
        return (f"HypothesisReport(controllable={self.controllable}, stable_A={self.stable_A}, "
                f"H={self.satisfies_H}, QSR={self.satisfies_QSR})")


# ------------------------------------------------------------------ 矩阵指数

def matrix_exp(A: np.ndarray, t: float) -> np.ndarray:
    """e^{At}，Padé-13 缩放平方法"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not (np.all(np.isfinite(A)) and math.isfinite(t)):
        raise ValueError("matrix_exp 的输入必须是有限值")
    with np.errstate(over="ignore", invalid="ignore"):
        E = linalg.expm(A * t)
    if not np.all(np.isfinite(E)):
        raise StateOverflowError(f"矩阵指数溢出: ‖A‖·t = {np.linalg.norm(A) * abs(t):.3g}", t)
    return E


def matrix_exp_batch(A: np.ndarray, times: np.ndarray, cond_limit: float = 1e4) -> np.ndarray:
    """
    批量计算 e^{A t_i}

    特征向量矩阵条件数不超过 cond_limit 时用特征分解，否则逐个 expm。

    Returns:
        (N, n, n) 数组
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) <= cond_limit:
        Vinv = np.linalg.inv(V)
        with np.errstate(over="ignore", invalid="ignore"):
            D = np.exp(np.outer(times, lam))
            E = np.einsum("ij,tj,jk->tik", V, D, Vinv).real
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            E = np.stack([linalg.expm(A * t) for t in times])
    if not np.all(np.isfinite(E)):
        bad = times[~np.all(np.isfinite(E), axis=(1, 2))]
        raise StateOverflowError("批量矩阵指数溢出", float(bad[0]))
    return E


def spectral_abscissa(A: np.ndarray) -> float:
    """max Re σ(A)"""
    return float(np.max(np.linalg.eigvals(np.atleast_2d(A)).real))


@lru_cache(maxsize=64)
def _decay_cached(key: bytes, n: int, margin: float, inflation: float,
                  n_grid: int) -> Tuple[float, float]:
    A = np.frombuffer(key, dtype=float).reshape(n, n)
    raw = -spectral_abscissa(A)
    mu = raw - margin if raw > 2.0 * margin or raw <= 0 else 0.5 * raw
    s_max = min(50.0 / max(abs(raw), 1e-3), 1e4)
    grid = np.concatenate([[0.0], np.logspace(-4, math.log10(s_max), n_grid)])
    peak = 1.0
    for s in grid:
        E = linalg.expm(A * s)
        val = np.linalg.norm(E, 2) * math.exp(mu * s)
        if not math.isfinite(val):
            break
        peak = max(peak, val)
    return inflation * peak, mu


def decay_constants(A: np.ndarray, margin: float = DECAY_MARGIN,
                    inflation: float = M_INFLATION, n_grid: int = 200) -> Tuple[float, float]:
    """
    拟合 (M, μ) 使 ‖e^{As}‖ ≤ M e^{-μs}, s ≥ 0

    μ 取谱横坐标的相反数减去 margin；M 为对数网格上的最大值再放大 inflation 倍。
    A 不稳定时 μ ≤ 0，仍给出同样意义的常数。
    """
    A = np.ascontiguousarray(np.atleast_2d(np.asarray(A, dtype=float)))
    return _decay_cached(A.tobytes(), A.shape[0], float(margin), float(inflation), int(n_grid))


# ------------------------------------------------------------------ 尾积分

def tail_horizon(A: np.ndarray, sig: Signal, s: float, tol: float,
                 anchor: float = 0.0, cap: float = TAIL_CAP,
                 decay: Optional[Tuple[float, float]] = None) -> float:
    """
    选取截断时刻 T*，使 ∫_{T*}^∞ ‖e^{Aᵀ(τ-anchor)}sig(τ)‖dτ ≤ tol/2

    Raises:
        DivergentTailError: 增长率 α ≥ μ
        UnsupportedTailError: 采样信号
    """
    if sig.is_sampled:
        raise UnsupportedTailError("有限范围的采样信号不支持无穷尾积分")
    if sig.is_zero:
        return s
    M, mu = decay if decay is not None else decay_constants(A.T)
    alpha, k = sig.dominant_rate()
    if sig.growth_rate is not None and sig.growth_rate > alpha:
        alpha = sig.growth_rate
    if alpha == -math.inf:
        last = max(a.hi for a in sig.atoms)
        return max(s, last)
    if alpha >= mu:
        raise DivergentTailError(alpha, mu)
    alpha_eff = alpha + min(0.5 * (mu - alpha), 0.25) if k > 0 else alpha
    gap = mu - alpha_eff
    C = sig.envelope(alpha_eff, s)
    if C == 0.0:
        return s
    log_needed = math.log(2.0 * M * C / (gap * tol)) + mu * anchor
    T_star = max(s, log_needed / gap)
    # 有界支撑原子的端点之后才可能进入纯衰减段
    finite_ends = [a.hi for a in sig.atoms if a.bounded_support]
    if finite_ends:
        T_star = max(T_star, min(max(finite_ends), s + cap))
    if T_star > s + cap:
        raise NumericalInconsistencyError(
            f"尾积分截断时刻 {T_star:.3g} 超过上限 s+{cap:g} (α={alpha:.3g}, μ={mu:.3g})")
    return T_star


def weighted_tail_integral(A: np.ndarray, sig: Signal, s: float, tol: float = 1e-10,
                           anchor: float = 0.0,
                           decay: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """
    ∫_s^∞ e^{Aᵀ(τ-anchor)}·sig(τ) dτ

    anchor=0 时即 ∫_s^∞ e^{Aᵀτ}sig(τ)dτ；取 anchor=s 可得相对尺度合适的
    e^{-Aᵀs}∫_s^∞ e^{Aᵀτ}sig(τ)dτ。

    Args:
        A: n×n 矩阵
        sig: n 维闭式信号
        s: 下限
        tol: 绝对误差
        anchor: 指数的参考时刻
        decay: 可选的 (M, μ)，缺省时拟合 e^{Aᵀτ} 的衰减常数
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if sig.dim != A.shape[0]:
        raise ValueError(f"信号维数 {sig.dim} 与矩阵阶数 {A.shape[0]} 不一致")
    if sig.is_zero:
        return np.zeros(A.shape[0])
    T_star = tail_horizon(A, sig, s, tol, anchor, decay=decay)
    At = A.T

    def integrand(tau):
        E = matrix_exp_batch(At, tau - anchor)
        return np.einsum("tij,tj->ti", E, sig(tau))

    value, err = adaptive_gauss_legendre(integrand, s, T_star, 0.5 * tol,
                                         breakpoints=sig.breakpoints(s, T_star))
    logger.debug(f"尾积分 s={s:g}, T*={T_star:.4g}, 误差估计={err:.2e}")
    return value


def backward_tail_profile(A: np.ndarray, sig: Signal, grid: np.ndarray,
                          tol: float = 1e-10,
                          terminal: Optional[np.ndarray] = None) -> np.ndarray:
    """
    在网格所有节点上计算 y(s_i) = ∫_{s_i}^∞ e^{Aᵀ(τ-s_i)}sig(τ)dτ

    末端节点用尾积分(或给定的 terminal)，其余节点用精确的逆向递推
    y(s_i) = e^{Aᵀh}y(s_{i+1}) + ∫_{s_i}^{s_{i+1}} e^{Aᵀ(τ-s_i)}sig(τ)dτ，
    每个单元用16点Gauss-Legendre(含断点的单元自适应)。

    Returns:
        (N, n) 数组
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    grid = np.asarray(grid, dtype=float)
    n = A.shape[0]
    out = np.zeros((grid.size, n))
    if sig.is_zero:
        return out
    At = A.T
    if terminal is None:
        out[-1] = weighted_tail_integral(A, sig, grid[-1], tol, anchor=grid[-1])
    else:
        out[-1] = terminal
    cell_int = _cell_integrals(At, sig, grid, tol)
    steps = np.diff(grid)
    prop = matrix_exp_batch(At, steps)
    for i in range(grid.size - 2, -1, -1):
        out[i] = prop[i] @ out[i + 1] + cell_int[i]
    return out


def _cell_integrals(M: np.ndarray, sig: Signal, grid: np.ndarray, tol: float) -> np.ndarray:
    """∫_{s_i}^{s_{i+1}} e^{M(τ-s_i)} sig(τ) dτ，逐单元"""
    lo, hi = grid[:-1], grid[1:]
    x, w = gl_nodes(0.0, 1.0)
    h = hi - lo
    offsets = np.outer(h, x)                        # (cells, 16)
    taus = lo[:, None] + offsets
    vals = sig(taus.ravel()).reshape(taus.shape + (sig.dim,))
    E = matrix_exp_batch(M, offsets.ravel()).reshape(offsets.shape + M.shape)
    out = np.einsum("c,k,ckij,ckj->ci", h, w, E, vals)
    bps = sig.breakpoints(grid[0], grid[-1])
    if bps.size:
        cells = np.unique(np.searchsorted(grid, bps, side="right") - 1)
        for c in cells:
            if grid[c] in bps:
                continue
            a, b = grid[c], grid[c + 1]

            def integrand(tau, a=a):
                Ec = matrix_exp_batch(M, tau - a)
                return np.einsum("tij,tj->ti", Ec, sig(tau))

            out[c], _ = adaptive_gauss_legendre(integrand, a, b, tol * (b - a),
                                                breakpoints=sig.breakpoints(a, b))
    return out


def forward_cell_integrals(M: np.ndarray, sig: Signal, grid: np.ndarray,
                           tol: float = 1e-12) -> np.ndarray:
    """∫_{s_i}^{s_{i+1}} e^{M(s_{i+1}-τ)} sig(τ) dτ，逐单元(变常数公式用)"""
    lo, hi = grid[:-1], grid[1:]
    x, w = gl_nodes(0.0, 1.0)
    h = hi - lo
    offsets = np.outer(h, x)
    taus = lo[:, None] + offsets
    vals = sig(taus.ravel()).reshape(taus.shape + (sig.dim,))
    back = (h[:, None] - offsets).ravel()
    E = matrix_exp_batch(M, back).reshape(offsets.shape + M.shape)
    out = np.einsum("c,k,ckij,ckj->ci", h, w, E, vals)
    bps = sig.breakpoints(grid[0], grid[-1])
    if bps.size:
        cells = np.unique(np.searchsorted(grid, bps, side="right") - 1)
        for c in cells:
            if grid[c] in bps:
                continue
            a, b = grid[c], grid[c + 1]

            def integrand(tau, b=b):
                Ec = matrix_exp_batch(M, b - tau)
                return np.einsum("tij,tj->ti", Ec, sig(tau))

            out[c], _ = adaptive_gauss_legendre(integrand, a, b, tol * (b - a),
                                                breakpoints=sig.breakpoints(a, b))
    return out


# ------------------------------------------------------------------ 假设检查

def kalman_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """[B, AB, …, A^{n-1}B]"""
    A = np.atleast_2d(A)
    blocks = [np.atleast_2d(B)]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def numerical_rank(M: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


def is_controllable(A: np.ndarray, B: np.ndarray, rank_tol: float = RANK_TOL) -> bool:
    return numerical_rank(kalman_matrix(A, B), rank_tol) == np.atleast_2d(A).shape[0]


def is_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-10,
                    rank_tol: float = RANK_TOL) -> bool:
    """PBH检验: 对 Re λ ≥ -tol 的特征值要求 rank[A-λI, B] = n"""
    A = np.atleast_2d(A)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -tol:
            pencil = np.hstack([A - lam * np.eye(n), np.atleast_2d(B).astype(complex)])
            sv = np.linalg.svd(pencil, compute_uv=False)
            scale = max(sv[0], 1.0)
            if np.sum(sv > rank_tol * scale) < n:
                return False
    return True


def q_local_integrability(q: Signal) -> Tuple[bool, Optional[str]]:
    """
    q 在有限区间上是否可积

    闭式原子的参数都有限时成立；采样信号按其网格上 |q| 的梯形积分是否有限判定。

    Returns:
        (结论, 说明)
    """
    if q.is_zero:
        return True, None
    if q.is_sampled:
        lo, hi = q.domain()
        with np.errstate(over="ignore", invalid="ignore"):
            mass = integrate.trapezoid(np.linalg.norm(q.values, axis=1), q.grid)
        return bool(np.isfinite(mass)), f"只在采样区间 [{lo:g}, {hi:g}] 上判定"
    finite = all(math.isfinite(v) for a in q.atoms for v in (a.rate, a.freq, a.phase, a.shift))
    return finite, None


def validate_problem(p: LqProblem, tol: float = 1e-10, rank_tol: float = RANK_TOL,
                     margin: float = DECAY_MARGIN, inflation: float = M_INFLATION) -> HypothesisReport:
    """
    检查可控性、稳定性、衰减常数、q 的可积性以及 (H)/(QSR)

    报告总会生成，不抛出异常。
    """
    rank = numerical_rank(kalman_matrix(p.A, p.B), rank_tol)
    controllable = rank == p.n
    abscissa = spectral_abscissa(p.A)
    stable = abscissa < -tol
    stabilizable = controllable or is_stabilizable(p.A, p.B, tol, rank_tol)
    decay = decay_constants(p.A, margin, inflation) if stable else None

    notes = {}
    q_local, local_note = q_local_integrability(p.q)
    if local_note:
        notes["q_locally_integrable"] = local_note
    if p.q.is_sampled:
        q_global = False
        notes["q_globally_integrable"] = "采样信号无法在 [0,∞) 上判定，按不可积处理"
    else:
        q_global = p.q.integrable()

    R_eig = np.linalg.eigvalsh(p.R)
    R_pos = bool(R_eig.min() > tol * max(1.0, abs(R_eig.max())))
    qsr = False
    if R_pos:
        schur = p.Q - p.S.T @ np.linalg.solve(p.R, p.S)
        qsr = bool(np.linalg.eigvalsh(0.5 * (schur + schur.T)).min()
                   >= -tol * max(1.0, np.linalg.norm(p.Q)))

    satisfies_H = False
    if p.standard_form:
        QmSS = p.Q - p.S.T @ p.S
        psd = np.linalg.eigvalsh(0.5 * (QmSS + QmSS.T)).min() >= -tol * max(1.0, np.linalg.norm(p.Q))
        satisfies_H = bool(controllable and stable and psd and q_local and not q_global)
    else:
        notes["satisfies_H"] = "仅对标准形问题判定"

    report = HypothesisReport(
        controllable=bool(controllable),
        stabilizable=bool(stabilizable),
        stable_A=bool(stable),
        decay_constants=decay,
        q_locally_integrable=q_local,
        q_globally_integrable=bool(q_global),
        satisfies_H=satisfies_H,
        satisfies_QSR=qsr,
        controllable_rank=rank,
        spectral_abscissa=abscissa,
        tolerance=tol,
        notes=notes,
    )
    logger.info(f"假设检查: {report}")
    return report
