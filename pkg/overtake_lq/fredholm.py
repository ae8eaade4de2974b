"""
存在性证书
ρ̂ 外力、核 Φ(s,τ)、压缩常数 κ、第二类Fredholm方程的Nyström求解与盒约束下的内法向检验
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import LqProblem, TAIL_CAP, backward_tail_profile, matrix_exp_batch, weighted_tail_integral
from .errors import ContractionViolatedError, NumericalInconsistencyError
from .overtake import (GEOMETRIC, bound_constants, horizon_schedule, kernel_F0, lyapunov_tail,
                       require_standard_form, variational_gap, f1_signal)
from .quadrature import simpson_weights, uniform_grid
from .signals import Signal, exp_tail_signal

logger = logging.getLogger(__name__)

DEFAULT_NODES = 801
NEUMANN_MAX_ITER = 500
POWER_ITERATIONS = 200
COORDINATE = "coordinate"
PROJECTED = "projected"
SPLIT_RULES = (COORDINATE, PROJECTED)
GAP_CONTROLS = 20
GAP_TOL = 1e-8

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True, eq=False)
class BoxControlSet:
    """逐分量盒约束 lower ≤ u ≤ upper，分量可取 ±inf"""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ValueError(f"上下界维数不一致: {lower.size} vs {upper.size}")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("盒约束不能含 NaN")
        if np.any(lower > upper):
            raise ValueError("盒约束要求 lower ≤ upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def full(cls, m: int) -> "BoxControlSet":
        return cls(np.full(m, -np.inf), np.full(m, np.inf))

    @classmethod
    def from_dict(cls, data: Dict, m: int) -> "BoxControlSet":
        """{"lower": [...], "upper": [...]}，null 表示无界"""
        def read(key, default):
            vals = data.get(key)
            if vals is None:
                return np.full(m, default)
            return np.array([default if v is None else float(v) for v in vals])
        return cls(read("lower", -np.inf), read("upper", np.inf))

    @property
    def m(self) -> int:
        return self.lower.size

    @property
    def is_full(self) -> bool:
        return bool(np.all(np.isinf(self.lower)) and np.all(np.isinf(self.upper)))

    def project(self, values: np.ndarray) -> np.ndarray:
        return np.clip(values, self.lower, self.upper)

    def contains(self, values: np.ndarray, tol: float = 1e-12) -> bool:
        values = np.asarray(values, dtype=float)
        return bool(np.all(values >= self.lower - tol) and np.all(values <= self.upper + tol))

    def to_dict(self) -> Dict:
        def dump(arr):
            return [None if math.isinf(v) else float(v) for v in arr]
        return {"lower": dump(self.lower), "upper": dump(self.upper)}


# ------------------------------------------------------------------ ρ̂ 与核

def rho_hat_signal(p: LqProblem) -> Optional[Signal]:
    """ρ̂(s) = Bᵀ∫_s^∞ e^{Aᵀ(τ-s)}q(τ)dτ 的闭式表示，不可闭式时返回 None"""
    tail = exp_tail_signal(p.A.T, p.q)
    return None if tail is None else tail.transform(p.B.T)


def rho_hat(p: LqProblem, s, tol: float = 1e-10) -> np.ndarray:
    """
    ρ̂(s) = Bᵀe^{-Aᵀs}∫_s^∞ e^{Aᵀτ}q(τ)dτ

    Raises:
        DivergentTailError: q 的增长率 α ≥ μ
    """
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.stack([p.B.T @ weighted_tail_integral(p.A, p.q, float(si), tol, anchor=float(si))
                    for si in ss])
    return out[0] if np.ndim(s) == 0 else out


def rho_hat_on_grid(p: LqProblem, grid: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """网格上的 ρ̂；采样 q 在其区间之后按零截断"""
    sig = None if p.q.is_sampled else rho_hat_signal(p)
    if sig is not None:
        return sig(grid)
    if p.q.is_sampled:
        logger.warning(f"q 为采样信号，ρ̂ 在 s={p.q.domain()[1]:g} 之后按零截断")
        return backward_tail_profile(p.A, p.q, grid, tol, terminal=np.zeros(p.n)) @ p.B
    return backward_tail_profile(p.A, p.q, grid, tol) @ p.B


def kernel_phi(p: LqProblem, s: float, tau: float, L: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Φ(s,τ) = 1_{τ≤s}Se^{A(s-τ)}B + 1_{τ≥s}Bᵀe^{Aᵀ(τ-s)}Sᵀ + Bᵀe^{Aᵀ(σ-s)}Le^{A(σ-τ)}B，σ = max(s,τ)

    τ = s 处两个示性项各取一半。

    Returns:
        m×m 矩阵
    """
    require_standard_form(p)
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    sigma = max(s, tau)
    E_left = matrix_exp_batch(p.A.T, [sigma - s])[0]
    E_right = matrix_exp_batch(p.A, [sigma - tau])[0]
    out = p.B.T @ E_left @ L @ E_right @ p.B
    if tau < s:
        out = out + p.S @ matrix_exp_batch(p.A, [s - tau])[0] @ p.B
    elif tau > s:
        out = out + p.B.T @ matrix_exp_batch(p.A.T, [tau - s])[0] @ p.S.T
    else:
        out = out + 0.5 * (p.S @ p.B + p.B.T @ p.S.T)
    return out


def phi_blocks(p: LqProblem, grid: np.ndarray, L: Optional[np.ndarray] = None) -> np.ndarray:
    """
    网格上的核块 Φ(s_i, τ_j)

    均匀网格只需要 N 个不同时滞的矩阵指数；否则逐对计算。

    Returns:
        (N, N, m, m) 数组
    """
    require_standard_form(p)
    L = lyapunov_tail(p.A, p.Q) if L is None else L
    grid = np.asarray(grid, dtype=float)
    N = grid.size
    K_fwd = p.S + p.B.T @ L
    K_bwd = p.S.T + L @ p.B
    h = np.diff(grid)
    lag = np.subtract.outer(np.arange(N), np.arange(N))
    if np.allclose(h, h[0], rtol=1e-12, atol=0.0):
        E = matrix_exp_batch(p.A, h[0] * np.arange(N))
        fwd = np.einsum("ij,kjl,lm->kim", K_fwd, E, p.B)
        bwd = np.einsum("ji,klj,lm->kim", p.B, E, K_bwd)
        idx = np.abs(lag)
        blocks = np.where((lag > 0)[:, :, None, None], fwd[idx], bwd[idx])
    else:
        diff = np.subtract.outer(grid, grid)
        E = matrix_exp_batch(p.A, np.abs(diff).ravel()).reshape(N, N, p.n, p.n)
        fwd = np.einsum("ij,abjl,lm->abim", K_fwd, E, p.B)
        bwd = np.einsum("ji,ablj,lm->abim", p.B, E, K_bwd)
        blocks = np.where((lag > 0)[:, :, None, None], fwd, bwd)
    diag = 0.5 * (K_fwd @ p.B + p.B.T @ K_bwd)
    blocks[np.arange(N), np.arange(N)] = diag
    return blocks


def contraction_kappa(p: LqProblem, decay: Optional[Tuple[float, float]] = None) -> float:
    """κ = (3‖B‖²M²/μ²)(‖B‖²M²‖Q‖²/μ² + 2‖S‖²)"""
    return bound_constants(p, decay)["kappa"]


def operator_norm(blocks: np.ndarray, weights: np.ndarray,
                  iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """
    离散积分算子 u ↦ Σ_j w_jΦ(·,τ_j)u_j 在加权 L² 中的范数(幂迭代)

    平方后可与 κ 直接比较。
    """
    N, _, m, _ = blocks.shape
    sw = np.sqrt(np.repeat(weights, m))
    K = blocks.transpose(0, 2, 1, 3).reshape(N * m, N * m)
    W = sw[:, None] * K * sw[None, :]
    v = np.random.default_rng(seed).standard_normal(N * m)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iterations):
        z = W.T @ (W @ v)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        v = z / nz
        new = math.sqrt(nz)
        if abs(new - sigma) <= 1e-12 * max(new, 1.0):
            sigma = new
            break
        sigma = new
    return sigma


# ------------------------------------------------------------------ Nyström 求解

@dataclass
class FredholmSetup:
    """Nyström 离散: forcing(s) + u(s) + ∫Φ(s,τ)u(τ)dτ = 0"""
    grid: np.ndarray
    weights: np.ndarray
    blocks: np.ndarray
    forcing: np.ndarray
    kappa: float
    kappa_empirical: float
    tail_bound: float = 0.0
    meta: Dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.blocks.shape[2]

    @property
    def matrix(self) -> np.ndarray:
        """(N·m)×(N·m) 矩阵，节点优先排列，已乘求积权重"""
        N, m = self.grid.size, self.m
        K = self.blocks * self.weights[None, :, None, None]
        return K.transpose(0, 2, 1, 3).reshape(N * m, N * m)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """(Φ∘u)(s_i)"""
        return np.einsum("abij,b,bj->ai", self.blocks, self.weights, u)

    def residual(self, u: np.ndarray, free: Optional[np.ndarray] = None) -> float:
        r = self.forcing + u + self.apply(u)
        if free is not None:
            r = np.where(free, r, 0.0)
        return float(np.max(np.abs(r)))

    @classmethod
    def from_kernel(cls, grid: np.ndarray, kernel: Callable[[float, float], np.ndarray],
                    forcing: np.ndarray, kappa: Optional[float] = None) -> "FredholmSetup":
        """由任意核函数构造(测试与自定义核用)"""
        grid = np.asarray(grid, dtype=float)
        blocks = np.array([[np.atleast_2d(kernel(s, tau)) for tau in grid] for s in grid])
        weights = simpson_weights(grid)
        forcing = np.asarray(forcing, dtype=float).reshape(grid.size, -1)
        emp = operator_norm(blocks, weights) ** 2
        return cls(grid, weights, blocks, forcing, emp if kappa is None else kappa, emp)

    def to_dict(self) -> Dict:
        return {
            "nodes": int(self.grid.size),
            "interval": [float(self.grid[0]), float(self.grid[-1])],
            "kappa": self.kappa,
            "kappa_empirical": self.kappa_empirical,
            "tail_bound": self.tail_bound,
            **self.meta,
        }


def truncation_horizon(p: LqProblem, t: float, tol: float, consts: Dict[str, float],
                       cap: float = TAIL_CAP) -> Tuple[float, float]:
    """
    Nyström 截断时刻 T∞

    用核包络 ‖Φ(s,τ)‖ ≤ c·M·e^{-μ|s-τ|}，c = ‖B‖·f0_coeff，取 T∞ 使
    2c·M·e^{-μ(T∞-t)}/μ ≤ tol·(1-κ)。

    Returns:
        (T∞, 截断处的包络值)
    """
    M, mu, kappa = consts["M"], consts["mu"], consts["kappa"]
    c = consts["norm_B"] * consts["f0_coeff"]
    if c == 0.0:
        return t + 1.0, 0.0
    target = tol * max(1.0 - kappa, 1e-3)
    span = max(math.log(max(2.0 * c * M / (mu * target), math.e)) / mu, 1.0)
    span = min(span, cap)
    bound = 2.0 * c * M * math.exp(-mu * span) / mu
    return t + span, bound


def build_setup(p: LqProblem, t: float, forcing: Callable[[np.ndarray], np.ndarray],
                n_nodes: int = DEFAULT_NODES, T_inf: Optional[float] = None,
                tol: float = 1e-10, decay: Optional[Tuple[float, float]] = None) -> FredholmSetup:
    """
    由问题数据组装 Nyström 系统

    Args:
        forcing: 网格 → (N, m) 的外力(通常为 ρ̂₀ + F₀x)
    """
    require_standard_form(p)
    consts = bound_constants(p, decay)
    T_end, tail = truncation_horizon(p, t, tol, consts)
    if T_inf is not None:
        T_end = T_inf
        tail = 2.0 * consts["norm_B"] * consts["f0_coeff"] * consts["M"] \
            * math.exp(-consts["mu"] * (T_end - t)) / consts["mu"]
    grid = uniform_grid(t, T_end, n_nodes)
    weights = simpson_weights(grid)
    blocks = phi_blocks(p, grid)
    norm = operator_norm(blocks, weights)
    setup = FredholmSetup(grid, weights, blocks, np.asarray(forcing(grid), dtype=float),
                          consts["kappa"], norm ** 2, tail,
                          {"M": consts["M"], "mu": consts["mu"], "operator_norm": norm})
    logger.debug(f"Nyström 网格: {grid.size} 点, T∞={T_end:.4g}, κ={setup.kappa:.4g}, "
                 f"经验 ‖Φ‖²={setup.kappa_empirical:.4g}")
    return setup


@dataclass
class FredholmSolution:
    """Neumann 迭代与直接求解的结果"""
    u: np.ndarray
    residual: float
    iterations: int
    rate: float
    direct_difference: float

    def to_dict(self) -> Dict:
        return {"residual": self.residual, "neumann_iterations": self.iterations,
                "neumann_rate": self.rate, "direct_difference": self.direct_difference}


def solve_fredholm(setup: FredholmSetup, tol: float = 1e-10, max_iter: int = NEUMANN_MAX_ITER,
                   fixed: Optional[np.ndarray] = None) -> FredholmSolution:
    """
    Neumann 迭代 ū^{k+1} = -forcing - Φ∘ū^k 至不动点，再做一次 Nyström 线性系统直接求解

    Args:
        fixed: 可选 (N, m) 数组，非 NaN 处为固定值，只对其余分量求解

    Raises:
        ContractionViolatedError: κ ≥ 1 或经验 ‖Φ‖² ≥ 1
        NumericalInconsistencyError: 迭代发散或两种解法不一致
    """
    if setup.kappa >= 1.0 or setup.kappa_empirical >= 1.0:
        raise ContractionViolatedError(setup.kappa, setup.kappa_empirical)
    f = setup.forcing
    free = np.ones_like(f, dtype=bool) if fixed is None else np.isnan(fixed)
    base = np.zeros_like(f) if fixed is None else np.where(free, 0.0, fixed)

    u = np.where(free, -f, base)
    updates: List[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        new = np.where(free, -f - setup.apply(u), base)
        delta = float(np.max(np.abs(new - u)))
        u = new
        updates.append(delta)
        if not np.all(np.isfinite(u)):
            raise NumericalInconsistencyError("Neumann 迭代出现非有限值，(M, μ) 拟合可能有误")
        if delta <= tol * (1.0 + float(np.max(np.abs(u)))):
            break
        if len(updates) >= 4 and updates[-1] > updates[-2] > updates[-3] > updates[-4]:
            raise NumericalInconsistencyError(
                f"Neumann 迭代发散: 更新量 {updates[-1]:.3e}，(M, μ) 拟合可能有误")
    else:
        raise NumericalInconsistencyError(f"Neumann 迭代 {max_iter} 步未收敛")
    if len(updates) >= 3 and updates[0] > 0:
        rate = (updates[-1] / updates[0]) ** (1.0 / (len(updates) - 1))
    else:
        rate = 0.0

    idx = np.flatnonzero(free.ravel())
    direct = u.copy()
    if idx.size:
        A_sys = np.eye(f.size) + setup.matrix
        rhs = -f.ravel() - A_sys[:, ~free.ravel()] @ base.ravel()[~free.ravel()]
        sol = np.linalg.solve(A_sys[np.ix_(idx, idx)], rhs[idx])
        flat = base.ravel().copy()
        flat[idx] = sol
        direct = flat.reshape(f.shape)
    diff = float(np.max(np.abs(direct - u)))
    scale = 1.0 + float(np.max(np.abs(direct)))
    if diff > max(100.0 * tol, 1e-8) * scale:
        raise NumericalInconsistencyError(f"Neumann 解与直接解不一致: {diff:.3e}")
    residual = setup.residual(direct, free)
    logger.debug(f"Fredholm 求解: {it} 次迭代, 收敛率 {rate:.4g}, 残差 {residual:.2e}")
    return FredholmSolution(direct, residual, it, float(rate), diff)


# ------------------------------------------------------------------ 存在性证书

@dataclass
class ExistenceCertificate:
    """Fredholm 解 ū、分裂 ρ̂ = ρ̂₀ + ρ̂₁ 与内法向检验"""
    grid: np.ndarray
    u_bar: np.ndarray
    rho1: np.ndarray
    residual: float
    boundary_active: List[Dict]
    inner_normal_ok: bool
    split_rule: str
    interior: bool
    setup: Dict
    solution: Dict
    gap_trace: Dict = field(default_factory=dict)
    reason: str = ""

    @property
    def control(self) -> Signal:
        return Signal.sampled(self.grid, self.u_bar)

    def to_rows(self) -> List[List[float]]:
        return [[float(s)] + [float(v) for v in u] + [float(v) for v in r]
                for s, u, r in zip(self.grid, self.u_bar, self.rho1)]

    def header(self) -> List[str]:
        m = self.u_bar.shape[1]
        return ["s"] + [f"u_bar_{i + 1}" for i in range(m)] + [f"rho1_{i + 1}" for i in range(m)]

    def to_dict(self) -> Dict:
        return {
            "split_rule": self.split_rule,
            "inner_normal_ok": self.inner_normal_ok,
            "residual": self.residual,
            "interior": self.interior,
            "boundary_active": self.boundary_active,
            "reason": self.reason,
            "setup": self.setup,
            "solution": self.solution,
            "gap_trace": self.gap_trace,
        }

    def __repr__(self):
        mark = "✓" if self.inner_normal_ok else "✗"
        return (f"ExistenceCertificate({mark} rule={self.split_rule}, "
                f"residual={self.residual:.2e}, nodes={self.grid.size})")


def _non_l2_coordinates(p: LqProblem, rho: np.ndarray, rho_sig: Optional[Signal]) -> np.ndarray:
    """ρ̂ 中不平方可积的分量"""
    if rho_sig is not None:
        if rho_sig.is_zero:
            return np.zeros(p.m, dtype=bool)
        return np.array([rho_sig.component(i).dominant_rate()[0] >= 0 for i in range(p.m)])
    start, end = np.abs(rho[0]), np.abs(rho[-1])
    return (end >= start) & (end > 1e-8)


def _asymptotic_signs(rho_sig: Optional[Signal], T_end: float, m: int) -> np.ndarray:
    """截断时刻之后 ρ̂ 的符号(闭式时在 2T, 4T, 8T 处取值)"""
    if rho_sig is None:
        return np.zeros((0, m))
    pts = T_end * np.array([2.0, 4.0, 8.0]) if T_end > 0 else np.array([2.0, 4.0, 8.0])
    with np.errstate(over="ignore", invalid="ignore"):
        vals = rho_sig(pts)
    return np.sign(vals)


def _sign_test(rho1: np.ndarray, u_bar: np.ndarray, U: BoxControlSet, free: np.ndarray,
               asymptotic: np.ndarray, tol: float) -> Tuple[bool, List[Dict], str]:
    """
    逐分量内法向条件: 下界处 ρ̂₁ ≥ 0，上界处 ρ̂₁ ≤ 0，自由处 ρ̂₁ = 0
    """
    scale = 1.0 + float(np.max(np.abs(rho1))) if rho1.size else 1.0
    at_lower = ~free & np.isclose(u_bar, U.lower[None, :], atol=tol)
    at_upper = ~free & np.isclose(u_bar, U.upper[None, :], atol=tol) & ~at_lower
    active = []
    for i in range(u_bar.shape[1]):
        for side, mask in ((LOWER, at_lower[:, i]), (UPPER, at_upper[:, i])):
            if np.any(mask):
                active.append({"coordinate": i, "side": side,
                               "fraction": float(np.mean(mask))})
    if np.any(rho1[at_lower] < -tol * scale):
        bad = np.argwhere(at_lower & (rho1 < -tol * scale))[0]
        return False, active, f"下界分量 {bad[1]} 在第 {bad[0]} 个节点 ρ̂₁ < 0"
    if np.any(rho1[at_upper] > tol * scale):
        bad = np.argwhere(at_upper & (rho1 > tol * scale))[0]
        return False, active, f"上界分量 {bad[1]} 在第 {bad[0]} 个节点 ρ̂₁ > 0"
    inner = ~(at_lower | at_upper)
    if np.any(np.abs(rho1[inner]) > max(1e-6, tol) * scale):
        return False, active, "内部分量上 ρ̂₁ ≠ 0"
    for i in range(u_bar.shape[1]):
        if asymptotic.size == 0:
            break
        if at_lower[-1, i] and np.any(asymptotic[:, i] < 0):
            return False, active, f"分量 {i} 的 ρ̂ 在截断时刻之后变号"
        if at_upper[-1, i] and np.any(asymptotic[:, i] > 0):
            return False, active, f"分量 {i} 的 ρ̂ 在截断时刻之后变号"
    return True, active, ""


def _projected_fixed_point(setup: FredholmSetup, rho: np.ndarray, F0: np.ndarray,
                           U: BoxControlSet, tol: float, max_iter: int) -> Tuple[np.ndarray, int]:
    """ū = P_U(-ρ̂ - F₀x - Φ∘ū) 的不动点"""
    base = rho + F0
    u = U.project(-base)
    for it in range(1, max_iter + 1):
        new = U.project(-base - setup.apply(u))
        delta = float(np.max(np.abs(new - u)))
        u = new
        if delta <= tol * (1.0 + float(np.max(np.abs(u)))):
            return u, it
    raise NumericalInconsistencyError(f"投影不动点迭代 {max_iter} 步未收敛")


def _gap_check(p: LqProblem, t: float, x: np.ndarray, cert_grid: np.ndarray, u_bar: np.ndarray,
               directions: np.ndarray, count: int, seed: int, tol: float,
               schedule: Optional[Sequence[float]]) -> Dict:
    """沿可行方向的随机扰动上计算有限时域变分间隙"""
    if not np.any(directions):
        return {"skipped": "没有边界分量，无可行的单侧扰动方向"}
    T_end = float(cert_grid[-1])
    if schedule is None:
        schedule = horizon_schedule(t, GEOMETRIC, K=16, horizon_max=T_end) if T_end >= t + 1.0 else []
    horizons = np.asarray(schedule, dtype=float)
    horizons = horizons[(horizons > t) & (horizons <= T_end)]
    if horizons.size == 0 or horizons[-1] < T_end:
        horizons = np.append(horizons, T_end)
    u_star = Signal.sampled(cert_grid, u_bar)
    F1 = f1_signal(p, t, u_star, tol=tol)
    rng = np.random.default_rng(seed)
    gaps = np.empty((count, horizons.size))
    for k in range(count):
        w = rng.uniform(0.0, 1.0, u_bar.shape) * directions
        u = Signal.sampled(cert_grid, u_bar + w)
        for j, T in enumerate(horizons):
            gaps[k, j] = variational_gap(p, t, x, u_star, u, float(T), tol, F1u_star=F1)
    min_gap = gaps.min(axis=0)
    return {"horizons": [float(T) for T in horizons],
            "min_gap": [float(g) for g in min_gap],
            "controls": count, "seed": seed,
            "ok": bool(np.all(min_gap >= -GAP_TOL))}


def certify_existence(p: LqProblem, t: float, x, U: Optional[BoxControlSet] = None,
                      split_rule: str = COORDINATE, n_nodes: int = DEFAULT_NODES,
                      tol: float = 1e-10, T_inf: Optional[float] = None,
                      decay: Optional[Tuple[float, float]] = None,
                      gap_controls: int = GAP_CONTROLS, seed: int = 0,
                      schedule: Optional[Sequence[float]] = None,
                      max_iter: int = NEUMANN_MAX_ITER) -> ExistenceCertificate:
    """
    盒约束下最优控制的存在性证书

    coordinate 规则: ρ̂ 不平方可积的分量被推到边界(ρ̂ 为正取下界，为负取上界)，
    其 ρ̂₁ 为该分量上的完整梯度 ρ̂ + F₀x + ū + Φ∘ū；其余分量 ρ̂₀ = ρ̂，解 Fredholm 方程。
    projected 规则: 投影不动点 ū = P_U(-ρ̂ - F₀x - Φ∘ū)，ρ̂₁ 为不动点处的梯度。

    找不到可行分裂时返回 inner_normal_ok = False 的证书，不抛异常。

    Raises:
        ContractionViolatedError: κ ≥ 1
        HypothesisViolationError: 非标准形或 A 不稳定
    """
    require_standard_form(p)
    if split_rule not in SPLIT_RULES:
        raise ValueError(f"未知的分裂规则: {split_rule}. 可用规则: {list(SPLIT_RULES)}")
    x = np.asarray(x, dtype=float).ravel()
    U = BoxControlSet.full(p.m) if U is None else U
    if U.m != p.m:
        raise ValueError(f"盒约束维数 {U.m} 与控制维数 {p.m} 不一致")
    L = lyapunov_tail(p.A, p.Q)
    rho_sig = None if p.q.is_sampled else rho_hat_signal(p)

    def gradient_forcing(grid):
        return rho_hat_on_grid(p, grid, tol) + kernel_F0(p, t, x, grid, L)

    setup = build_setup(p, t, gradient_forcing, n_nodes, T_inf, tol, decay)
    grid = setup.grid
    rho = rho_hat_on_grid(p, grid, tol)
    F0 = kernel_F0(p, t, x, grid, L)
    if setup.kappa >= 1.0 or setup.kappa_empirical >= 1.0:
        raise ContractionViolatedError(setup.kappa, setup.kappa_empirical)

    reason = ""
    solution_info: Dict = {}
    if split_rule == COORDINATE:
        pushed = _non_l2_coordinates(p, rho, rho_sig)
        fixed = np.full(rho.shape, np.nan)
        for i in np.flatnonzero(pushed):
            sign = np.sign(rho[-1, i])
            bound = U.lower[i] if sign > 0 else U.upper[i]
            if math.isinf(bound):
                reason = reason or f"分量 {i} 的 ρ̂ 不平方可积且对应方向无界，没有可行分裂"
            elif bound != 0.0:
                reason = reason or f"分量 {i} 的边界值 {bound:g} 非零，ū 不平方可积"
            fixed[:, i] = 0.0 if math.isinf(bound) else bound
        free = np.isnan(fixed)
        rho0 = np.where(free, rho, 0.0)
        setup.forcing = rho0 + F0
        sol = solve_fredholm(setup, tol, max_iter, fixed=np.where(free, np.nan, fixed))
        u_bar = sol.u
        solution_info = sol.to_dict()
        rho1 = np.where(free, 0.0, rho + F0 + u_bar + setup.apply(u_bar))
        residual = sol.residual
    else:
        u_bar, iterations = _projected_fixed_point(setup, rho, F0, U, tol, max_iter)
        grad = rho + F0 + u_bar + setup.apply(u_bar)
        free = ~(np.isclose(u_bar, U.lower[None, :], atol=tol)
                 | np.isclose(u_bar, U.upper[None, :], atol=tol))
        rho1 = np.where(free, 0.0, grad)
        residual = float(np.max(np.abs(np.where(free, grad, 0.0))))
        solution_info = {"projected_iterations": iterations, "residual": residual}

    ok, active, why = _sign_test(rho1, u_bar, U, free, _asymptotic_signs(rho_sig, grid[-1], p.m), tol)
    if reason:
        ok = False
    else:
        reason = why
    if not ok:
        logger.warning(f"内法向检验未通过: {reason}")
    interior = not active
    if ok and interior:
        reason = "ū 为内点，只满足无约束驻点方程"

    directions = np.zeros_like(u_bar)
    lower_hit = np.isclose(u_bar, U.lower[None, :], atol=tol) & ~free
    upper_hit = np.isclose(u_bar, U.upper[None, :], atol=tol) & ~free
    directions[lower_hit] = 1.0
    directions[upper_hit & ~lower_hit] = -1.0
    gap = _gap_check(p, t, x, grid, u_bar, directions, gap_controls, seed, tol, schedule) \
        if ok and gap_controls > 0 else {}

    cert = ExistenceCertificate(grid, u_bar, rho1, residual, active, bool(ok), split_rule,
                                interior, setup.to_dict(), solution_info, gap, reason)
    logger.info(f"存在性证书: {cert}")
    return cert
