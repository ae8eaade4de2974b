"""
不存在性诊断
q 的极分解、增长条件检验、见证控制构造与反驳轨迹
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import lambertw

from .core import (LqProblem, backward_tail_profile, decay_constants, is_controllable,
                   matrix_exp_batch, spectral_abscissa, tail_horizon, validate_problem)
from .decomp import DEFAULT_MU_STAR, stabilizer
from .errors import (DegenerateSignalError, DivergentTailError, NotApplicableError,
                     RangeConditionError, SingularGramianError, UnsupportedTailError)
from .fredholm import rho_hat_signal
from .overtake import (DEFAULT_K, DEFAULT_WINDOW, INCONCLUSIVE, LINEAR, REFUTED, ComparisonTrace,
                       comparison_trace, horizon_schedule)
from .quadrature import adaptive_gauss_legendre, gl_nodes
from .signals import INF, Atom, Signal, exp_forward_signal, matrix_exp_signal
from .sim import EXACT, EXACT_STEP, propagate

logger = logging.getLogger(__name__)

WEAK_DIRECTION = "weak_direction"
ETA_DRIFT = "eta_drift"
LIMIT_DIRECTION = "limit_direction"
THETA_TRACKING = "theta_tracking"
GRID_TRACKING = "grid_tracking"
THEOREM_IDS = (WEAK_DIRECTION, ETA_DRIFT, LIMIT_DIRECTION, THETA_TRACKING, GRID_TRACKING)

APPLIES = "applies"
FAILS = "fails"
UNKNOWN = "unknown"

SMOOTH = "smooth"
GRID = "grid"
TRACKING_MODES = (SMOOTH, GRID)

DEFAULT_EPSILON = 0.05
DEFAULT_DELTA = 1.0
DEFAULT_R0 = 100.0
DEFAULT_T0_OFFSET = 8.0
DEFAULT_HORIZON_STEP = 4.0
SWEEP_K = 8
SWEEP_STEP = 1e-2
PROFILE_STEP = 1.0 / 16.0
GROW_RATIO = 0.9
SHRINK_RATIO = 0.75
RANGE_TOL = 1e-8
FD_RANGE_TOL = 1e-3
GRAMIAN_COND_LIMIT = 1e12
SPHERE_SAMPLES = 72
ZERO_TOL = 1e-14

# 前提名 → 各定理
PREMISES = {
    WEAK_DIRECTION: ("satisfies_H", "q_not_integrable", "direction_condition", "weak_regime"),
    ETA_DRIFT: ("controllable", "range_condition", "G_epsilon_mass", "exp_weighted_integrable"),
    LIMIT_DIRECTION: ("controllable", "direction_limit", "limit_range", "q_not_integrable",
                      "exp_weighted_integrable"),
    THETA_TRACKING: ("satisfies_H", "q_not_integrable", "theta_range", "ratio_vanishes"),
    GRID_TRACKING: ("satisfies_H", "B_identity", "theta_uniformly_continuous", "cesaro_divergent"),
}


# ------------------------------------------------------------------ 极分解

@dataclass
class PolarDecomposition:
    """q(s) = |q(s)|·θ(s)，在网格上给出"""
    grid: np.ndarray
    magnitude: Signal            # 标量采样信号
    direction: Signal            # 单位向量采样信号
    continued: np.ndarray        # q 为零、方向由最近非零节点延拓的节点
    source: Signal

    @property
    def flagged(self) -> bool:
        return bool(np.any(self.continued))

    def at(self, s) -> Tuple[np.ndarray, np.ndarray]:
        """逐点 (|q|, θ)，零点处取延拓方向"""
        ss = np.atleast_1d(np.asarray(s, dtype=float))
        vals = self.source(ss)
        mag = np.linalg.norm(vals, axis=1)
        theta = self.direction(ss)
        nz = mag > ZERO_TOL * float(np.max(self.magnitude.values))
        theta[nz] = vals[nz] / mag[nz, None]
        if np.ndim(s) == 0:
            return mag[0], theta[0]
        return mag, theta

    def to_dict(self) -> Dict:
        return {
            "t0": float(self.grid[0]),
            "t1": float(self.grid[-1]),
            "nodes": int(self.grid.size),
            "continued_nodes": int(np.sum(self.continued)),
            "continued_times": [float(s) for s in self.grid[self.continued][:20]],
        }

    def __repr__(self):
        return (f"PolarDecomposition([{self.grid[0]:g}, {self.grid[-1]:g}], nodes={self.grid.size}, "
                f"continued={int(np.sum(self.continued))})")


def polar_decompose(q: Signal, t: float = 0.0, T: Optional[float] = None,
                    step: float = SWEEP_STEP, grid: Optional[np.ndarray] = None) -> PolarDecomposition:
    """
    q 的极分解

    闭式信号在 [t, T] 的均匀网格上分解(T 缺省为 t + 2^8)；采样信号直接用其网格。
    |q| 为零的节点上方向取最近非零节点的方向并记入 continued。
    出现溢出时窗口截断到最后一个有限节点。

    Raises:
        DegenerateSignalError: q 在整个窗口上恒为零
    """
    if q.is_zero:
        raise DegenerateSignalError("q 恒为零，不存在极分解")
    if grid is None:
        if q.is_sampled:
            grid = q.grid[q.grid >= t]
            if T is not None:
                grid = grid[grid <= T]
        else:
            T = t + 2.0 ** SWEEP_K if T is None else T
            n = max(int(math.ceil((T - t) / step)), 1)
            grid = np.linspace(t, T, 2 * n + 1)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ValueError("极分解网格至少需要两个节点")

    with np.errstate(over="ignore", invalid="ignore"):
        vals = q(grid)
        mag = np.linalg.norm(vals, axis=1)
    finite = np.isfinite(mag)
    if not np.all(finite):
        cut = int(np.argmin(finite))
        logger.warning(f"|q| 在 s≈{grid[cut]:g} 处溢出，极分解窗口截断")
        if cut < 2:
            raise DegenerateSignalError("q 在窗口起点即溢出")
        grid, vals, mag = grid[:cut], vals[:cut], mag[:cut]

    peak = float(np.max(mag))
    zero = mag <= ZERO_TOL * peak
    if peak == 0.0 or np.all(zero):
        raise DegenerateSignalError(f"q 在窗口 [{grid[0]:g}, {grid[-1]:g}] 上恒为零")
    theta = np.zeros_like(vals)
    theta[~zero] = vals[~zero] / mag[~zero, None]
    if np.any(zero):
        nz = np.flatnonzero(~zero)
        zi = np.flatnonzero(zero)
        pos = np.searchsorted(nz, zi)
        left = nz[np.clip(pos - 1, 0, nz.size - 1)]
        right = nz[np.clip(pos, 0, nz.size - 1)]
        pick = np.where(np.abs(grid[zi] - grid[left]) <= np.abs(grid[right] - grid[zi]), left, right)
        theta[zi] = theta[pick]
        logger.debug(f"极分解: {zi.size} 个零点的方向由最近非零节点延拓")
    return PolarDecomposition(grid, Signal.sampled(grid, mag[:, None]),
                              Signal.sampled(grid, theta), zero, q)


# ------------------------------------------------------------------ 闭式主导项

@dataclass
class LeadingTerm:
    """闭式信号的渐近主导项 c·s^k·e^{αs}(可能带振荡因子)"""
    rate: float
    power: int
    oscillating: bool
    direction: Optional[np.ndarray] = None

    def to_dict(self) -> Dict:
        return {
            "rate": self.rate,
            "power": self.power,
            "oscillating": self.oscillating,
            "direction": None if self.direction is None else [float(v) for v in self.direction],
        }


def leading_term(q: Signal) -> Optional[LeadingTerm]:
    """
    闭式信号的主导项

    支撑有界的信号 rate = -inf；采样信号或主导原子相消时返回 None。
    """
    if q.is_zero:
        return LeadingTerm(-INF, 0, False)
    if not q.is_closed_form:
        return None
    alpha, k = q.dominant_rate()
    if alpha == -INF:
        return LeadingTerm(-INF, 0, False)
    lead = [a for a in q.atoms if not a.bounded_support and a.rate == alpha and a.power == k]
    weights = [math.exp(-alpha * a.shift) for a in lead]
    ref = sum(w * float(np.linalg.norm(a.coeff)) for a, w in zip(lead, weights))
    if all(a.freq == 0.0 for a in lead):
        c = sum(w * math.cos(a.phase) * a.coeff for a, w in zip(lead, weights))
        size = float(np.linalg.norm(c))
        if size <= 1e-12 * ref:
            return None
        return LeadingTerm(float(alpha), int(k), False, c / size)
    omega = min(abs(a.freq) for a in lead if a.freq != 0.0)
    s = np.linspace(0.0, 4.0 * math.pi / omega, 257)
    vals = sum(w * np.outer(np.cos(a.freq * s + a.phase - a.freq * a.shift), a.coeff)
               for a, w in zip(lead, weights))
    if float(np.max(np.linalg.norm(vals, axis=1))) <= 1e-12 * ref:
        return None
    return LeadingTerm(float(alpha), int(k), True)


def fixed_direction(q: Signal) -> Optional[np.ndarray]:
    """所有原子系数共线且主导项不振荡时返回渐近方向"""
    lead = leading_term(q)
    if lead is None or lead.direction is None or not q.is_closed_form:
        return None
    sv = np.linalg.svd(np.stack([a.coeff for a in q.atoms]), compute_uv=False)
    if sv.size > 1 and sv[1] > 1e-12 * sv[0]:
        return None
    return lead.direction


# ------------------------------------------------------------------ 趋势判定

def _increments_trend(values: np.ndarray) -> Optional[bool]:
    """累积量是否趋于 +∞: True 发散，False 有界或趋于 -∞，None 不确定"""
    v = np.asarray(values, dtype=float)
    if v.size and not np.isfinite(v[-1]):
        return bool(v[-1] > 0)
    if v.size < 4:
        return None
    d = np.diff(v[-4:])
    scale = max(float(np.max(np.abs(v[-4:]))), 1e-300)
    if np.all(np.abs(d) <= 1e-12 * scale):
        return False
    if np.all(d > 0):
        r = d[1:] / d[:-1]
        if np.all(r >= GROW_RATIO):
            return True
        if np.all(r <= SHRINK_RATIO):
            return False
        return None
    if np.all(d < 0):
        return False
    return None


def _growth_trend(values: np.ndarray, up: float, flat: float) -> Optional[bool]:
    """正序列是否趋于 +∞(按相邻比值)"""
    v = np.asarray(values, dtype=float)
    if v.size and not np.isfinite(v[-1]):
        return True
    if v.size < 4 or np.any(v[-4:] <= 0):
        return None
    r = v[-3:] / v[-4:-1]
    if np.all(r >= up):
        return True
    if np.all(r <= flat):
        return False
    return None


def _vanishing_trend(values: np.ndarray) -> Optional[bool]:
    """正序列是否趋于零"""
    v = np.asarray(values, dtype=float)
    if v.size < 4 or not np.all(np.isfinite(v[-4:])):
        return None
    if v[-1] <= 1e-12:
        return True
    if np.any(v[-4:] <= 0):
        return None
    r = v[-3:] / v[-4:-1]
    if np.all(r <= SHRINK_RATIO):
        return True
    if np.all(np.abs(r - 1.0) <= 0.1) and v[-1] > 1e-6:
        return False
    return None


def _settling_trend(steps: np.ndarray) -> Optional[bool]:
    """相邻方向差是否趋于零"""
    d = np.asarray(steps, dtype=float)
    if d.size < 3:
        return None
    if d[-1] <= 1e-10:
        return True
    if np.any(d[-3:] <= 0):
        return None
    r = d[-2:] / d[-3:-1]
    if np.all(r <= SHRINK_RATIO):
        return True
    if np.all(d[-3:] >= 0.05) and np.all(r >= GROW_RATIO):
        return False
    return None


def _stable(rule: Callable[[np.ndarray], Optional[bool]], values: np.ndarray) -> Optional[bool]:
    """最后两个窗口上结论一致才给出确定值"""
    values = np.asarray(values)
    if values.shape[0] < 5:
        return None
    now, before = rule(values), rule(values[:-1])
    return now if now == before else None


def _and(*vals: Optional[bool]) -> Optional[bool]:
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def _or(*vals: Optional[bool]) -> Optional[bool]:
    if any(v is True for v in vals):
        return True
    if any(v is None for v in vals):
        return None
    return False


# ------------------------------------------------------------------ 增长报告

@dataclass
class FlagCertificate:
    """一个条件的判定及其依据(方法、时域窗口、裕量)"""
    name: str
    value: Optional[bool]
    method: str
    window: Tuple[float, float]
    margin: float = math.nan
    params: Dict = field(default_factory=dict)
    history: List[float] = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.value is None:
            return UNKNOWN
        return "true" if self.value else "false"

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "value": self.value,
            "status": self.status,
            "method": self.method,
            "window": [float(w) for w in self.window],
            "margin": self.margin,
            "params": self.params,
            "history": [float(h) for h in self.history],
        }

    def __repr__(self):
        return f"FlagCertificate({self.name}={self.status}, method={self.method})"


@dataclass
class GrowthReport:
    """q 的增长条件与各不存在性结论的适用性"""
    t: float
    flags: Dict[str, FlagCertificate]
    applicability: Dict[str, Dict]
    params: Dict
    horizons: np.ndarray
    hypotheses: Optional[Dict] = None
    direction: Optional[np.ndarray] = None         # θ(s) → θ₀ 的极限方向
    weak_direction: Optional[np.ndarray] = None    # ℝᵐ 中满足方向条件的 θ₀
    leading: Optional[LeadingTerm] = None

    def flag(self, name: str) -> Optional[bool]:
        cert = self.flags.get(name)
        return None if cert is None else cert.value

    @property
    def globally_integrable(self) -> Optional[bool]:
        return self.flag("globally_integrable")

    @property
    def exp_weighted_integrable(self) -> Optional[bool]:
        return self.flag("exp_weighted_integrable")

    @property
    def cesaro_divergent(self) -> Optional[bool]:
        return self.flag("cesaro_divergent")

    @property
    def ratio_vanishes(self) -> Optional[bool]:
        return self.flag("ratio_vanishes")

    @property
    def G_epsilon_mass(self) -> Optional[bool]:
        return self.flag("G_epsilon_mass")

    def status(self, theorem_id: str) -> str:
        return self.applicability[theorem_id]["status"]

    def applies(self, theorem_id: str) -> bool:
        return self.status(theorem_id) == APPLIES

    def to_dict(self) -> Dict:
        return {
            "t": self.t,
            "params": self.params,
            "horizons": [float(T) for T in self.horizons],
            "flags": {name: cert.to_dict() for name, cert in self.flags.items()},
            "theorem_applicability": self.applicability,
            "hypotheses": self.hypotheses,
            "direction": None if self.direction is None else [float(v) for v in self.direction],
            "weak_direction": (None if self.weak_direction is None
                               else [float(v) for v in self.weak_direction]),
            "leading": None if self.leading is None else self.leading.to_dict(),
        }

    def __repr__(self):
        states = ", ".join(f"{k}={v['status']}" for k, v in self.applicability.items())
        return f"GrowthReport({states})"


def _range_residual(B: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    v, *_ = np.linalg.lstsq(B, y, rcond=None)
    return v, float(np.linalg.norm(B @ v - y))


def _range_solve(B: np.ndarray, y: np.ndarray, tol: float, what: str) -> np.ndarray:
    """最小二乘解 Bv = y，残差超过 tol·(1+|y|) 时报错"""
    v, res = _range_residual(B, y)
    if res > tol * (1.0 + float(np.linalg.norm(y))):
        raise RangeConditionError(f"{what} 不在 R(B) 内: 最小二乘残差 {res:.3g}")
    return v


def _range_cert(name: str, p: Optional[LqProblem], vec: Optional[np.ndarray], t: float,
                tol: float) -> FlagCertificate:
    if p is None or vec is None:
        return FlagCertificate(name, None, "direct", (t, INF), params={"note": "缺少 p 或方向向量"})
    y = p.A @ vec
    _, res = _range_residual(p.B, y)
    scale = tol * (1.0 + float(np.linalg.norm(y)))
    return FlagCertificate(name, bool(res <= scale), "direct", (t, INF), margin=scale - res,
                           params={"vector": [float(v) for v in vec], "residual": res})


def _cumulative(grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return cumulative_trapezoid(values, grid, axis=0, initial=0.0)


def _default_mu(lead: Optional[LeadingTerm], q: Signal) -> float:
    if lead is not None and math.isfinite(lead.rate):
        return max(lead.rate, 0.0) + 1.0
    if q.growth_rate is not None and math.isfinite(q.growth_rate):
        return max(q.growth_rate, 0.0) + 1.0
    return 1.0


def _sweep_horizons(t: float, K: int, T_fin: float, delta: float) -> np.ndarray:
    horizons = t + 2.0 ** np.arange(K + 1)
    return horizons[horizons + delta <= T_fin + 1e-12]


def gramian_threshold(A: np.ndarray) -> float:
    """
    使 1 - 2‖A‖e^{‖A‖δ}δ - ‖A‖²e^{2‖A‖δ}δ² ≥ 1/2 成立的最大 δ

    令 y = ‖A‖δe^{‖A‖δ}，条件即 (1+y)² ≤ 3/2，故 ‖A‖δ = W₀(√1.5 - 1)。
    A = 0 时为 inf。
    """
    a = float(np.linalg.norm(np.atleast_2d(A), 2))
    if a == 0.0:
        return INF
    return float(lambertw(math.sqrt(1.5) - 1.0).real) / a


def uniform_modulus(theta: Signal, lo: float, hi: float, delta: float,
                    samples: int = 4001) -> float:
    """sup_{lo ≤ s ≤ hi-δ} |θ(s+δ) - θ(s)|"""
    if hi - lo <= delta:
        return INF
    s = np.linspace(lo, hi - delta, samples)
    return float(np.max(np.linalg.norm(theta(s + delta) - theta(s), axis=1)))


def select_grid_delta(A: np.ndarray, theta: Signal, t: float, T: float,
                      epsilon: float = DEFAULT_EPSILON, min_delta: float = 1e-4) -> Tuple[float, float]:
    """
    网格跟踪的步长: 不超过 Gram 阈值且连续模 ≤ ε 的最大 2 的负幂倍

    Returns:
        (δ, 连续模)

    Raises:
        NotApplicableError: 直到 min_delta 都找不到满足条件的 δ
    """
    d = min(gramian_threshold(A), 1.0)
    while d >= min_delta:
        w = uniform_modulus(theta, t, T, d)
        if w <= epsilon:
            return d, w
        d *= 0.5
    raise NotApplicableError(f"θ 在 [{t:g}, {T:g}] 上找不到连续模 ≤ ε={epsilon:g} 的 δ")


def _theta_flags(p: Optional[LqProblem], polar: PolarDecomposition, t: float, r0: float,
                 epsilon: float, fixed: Optional[np.ndarray]) -> Dict[str, FlagCertificate]:
    """θ̇ - Aθ ∈ B(Ō(0,r₀)) 与 θ 的一致连续性"""
    certs = {}
    grid = polar.grid
    window = (float(grid[0]), float(grid[-1]))
    if p is None:
        certs["theta_range"] = FlagCertificate("theta_range", None, "direct", window)
    else:
        if fixed is not None:
            g = np.tile(-(p.A @ fixed), (2, 1))
            method = "closed_form"
        else:
            theta = polar.direction.values
            g = np.gradient(theta, grid, axis=0) - theta @ p.A.T
            method = "finite_difference"
        v, *_ = np.linalg.lstsq(p.B, g.T, rcond=None)
        res = float(np.max(np.linalg.norm(p.B @ v - g.T, axis=0)))
        scale = (RANGE_TOL if fixed is not None else FD_RANGE_TOL) * (1.0 + float(np.max(np.abs(g))))
        vmax = float(np.max(np.linalg.norm(v, axis=0)))
        ok = res <= scale and vmax <= r0
        certs["theta_range"] = FlagCertificate(
            "theta_range", bool(ok), method, window, margin=r0 - vmax,
            params={"r0": r0, "residual": res, "v_max": vmax})

    start = min(gramian_threshold(p.A), 1.0) if p is not None else 1.0
    floor = 4.0 * float(np.max(np.diff(grid)))
    half = grid[0] + 0.5 * (grid[-1] - grid[0])

    def search(hi):
        d = start
        while d >= floor:
            w = uniform_modulus(polar.direction, grid[0], hi, d)
            if w <= epsilon:
                return d, w
            d *= 0.5
        return None

    full, part = search(grid[-1]), search(half)
    if full is not None:
        value, params = True, {"delta": full[0], "modulus": full[1], "epsilon": epsilon}
    elif part is not None:
        value, params = None, {"delta": part[0], "epsilon": epsilon, "note": "只在前半窗口成立"}
    else:
        value, params = False, {"epsilon": epsilon, "min_delta": floor}
    certs["theta_uniformly_continuous"] = FlagCertificate(
        "theta_uniformly_continuous", value, "modulus", window,
        margin=(epsilon - full[1]) if full is not None else math.nan, params=params)
    return certs


def _sphere_candidates(m: int, seed: int = 0) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        ang = 2.0 * math.pi * np.arange(SPHERE_SAMPLES) / SPHERE_SAMPLES
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((SPHERE_SAMPLES * m, m))
    pts = np.vstack([pts, np.eye(m), -np.eye(m)])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def search_direction(rows: np.ndarray, seed: int = 0) -> Tuple[Optional[np.ndarray], float]:
    """
    粗网格单位球搜索 θ₀，使 min_j ⟨θ₀, r_j/|r_j|⟩ 最大

    Returns:
        (θ₀, 裕量)；所有行都为零时 (None, nan)
    """
    rows = np.atleast_2d(rows)
    norms = np.linalg.norm(rows, axis=1)
    keep = norms > ZERO_TOL * max(float(np.max(norms)), 1e-300)
    if not np.any(keep):
        return None, math.nan
    unit = rows[keep] / norms[keep, None]
    m = unit.shape[1]
    cands = _sphere_candidates(m, seed)
    mean = unit.mean(axis=0)
    if np.linalg.norm(mean) > 0:
        cands = np.vstack([cands, mean / np.linalg.norm(mean)])
    scores = np.min(cands @ unit.T, axis=1)
    best = int(np.argmax(scores))
    return cands[best], float(scores[best])


def _weak_direction_flags(p: LqProblem, q: Signal, lead: Optional[LeadingTerm], t: float,
                          horizons: np.ndarray, tol: float,
                          seed: int = 0) -> Tuple[Dict[str, FlagCertificate], Optional[np.ndarray]]:
    """方向条件、尾积分可积性与两种情形的发散条件"""
    certs: Dict[str, FlagCertificate] = {}
    T_hi, T_lo = float(horizons[-1]), float(horizons[-2])
    window = (t, T_hi)
    n_hi = int(round((T_hi - t) / PROFILE_STEP))
    grid = np.linspace(t, T_hi, n_hi + 1)
    r_hi = backward_tail_profile(p.A, q, grid, tol, terminal=np.zeros(p.n)) @ p.B
    lo_grid = grid[grid <= T_lo + 1e-12]
    r_lo = backward_tail_profile(p.A, q, lo_grid, tol, terminal=np.zeros(p.n)) @ p.B
    early = lo_grid <= t + 0.5 * (T_lo - t)
    theta0, margin = search_direction(np.vstack([r_hi[:lo_grid.size][early], r_lo[early]]), seed)
    if theta0 is not None and margin > 1e-6:
        value = True
    elif p.m == 1:
        value = False
    else:
        value = None
    certs["direction_condition"] = FlagCertificate(
        "direction_condition", value, "sphere_search", window, margin=margin,
        params={"theta0": None if theta0 is None else [float(v) for v in theta0],
                "horizons": [T_lo, T_hi]})

    mu_A = -spectral_abscissa(p.A)
    if lead is not None:
        ti = lead.rate < mu_A
        certs["tail_integrable"] = FlagCertificate("tail_integrable", bool(ti), "closed_form",
                                                   (t, INF), margin=mu_A - lead.rate)
        certs["tail_divergent"] = FlagCertificate(
            "tail_divergent", bool(not ti and is_controllable(p.A, p.B)), "closed_form",
            (t, INF), margin=lead.rate - mu_A)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            E = matrix_exp_batch(p.A.T, grid - t)
            Z = np.linalg.norm(np.einsum("kij,kj->ki", E, q(grid)), axis=1)
        cum = np.interp(horizons, grid, _cumulative(grid, Z))
        div = _stable(_increments_trend, cum)
        certs["tail_integrable"] = FlagCertificate(
            "tail_integrable", None if div is None else not div, "trend", window, history=list(cum))

        T0 = t + 1.0
        after = grid >= T0 - 1e-12
        with np.errstate(over="ignore", invalid="ignore"):
            E0 = matrix_exp_batch(p.A.T, grid[after] - T0)
            Y = _cumulative(grid[after], np.einsum("kij,kj->ki", E0, q(grid[after])))
        later = horizons[horizons > T0]
        y_T = np.stack([np.interp(later, grid[after], Y[:, j]) for j in range(p.n)], axis=1)
        x, w = gl_nodes(t, T0)
        Es = matrix_exp_batch(p.A.T, T0 - x)
        vals = np.einsum("ij,kjl,hl->hki", p.B.T, Es, y_T)
        c = np.linalg.norm(vals, axis=2) @ w
        div = _stable(_increments_trend, c)
        certs["tail_divergent"] = FlagCertificate("tail_divergent", div, "trend", window,
                                                  params={"T0": T0}, history=list(c))

    if certs["tail_integrable"].value:
        rho = None
        try:
            rho = rho_hat_signal(p)
        except DivergentTailError:
            rho = None
        lead_rho = None if rho is None else leading_term(rho)
        if lead_rho is not None:
            certs["rho_growth"] = FlagCertificate("rho_growth", bool(lead_rho.rate >= 0.0),
                                                  "closed_form", (t, INF), margin=lead_rho.rate)
        else:
            cum = _cumulative(grid, np.linalg.norm(r_hi, axis=1))
            inner = horizons[:-1]
            c = np.interp(inner, grid, cum) / np.sqrt(inner - t)
            certs["rho_growth"] = FlagCertificate("rho_growth", _stable(
                lambda v: _growth_trend(v, 1.2, 1.0), c), "trend", (t, float(inner[-1])),
                history=list(c))
    else:
        certs["rho_growth"] = FlagCertificate("rho_growth", None, "skipped", window,
                                              params={"note": "尾积分不可积时不适用"})
    return certs, (theta0 if value else None)


def growth_report(q: Signal, p: Optional[LqProblem] = None, eta=None,
                  epsilon: float = DEFAULT_EPSILON, delta: float = DEFAULT_DELTA,
                  mu: Optional[float] = None, t: float = 0.0, K: int = SWEEP_K,
                  r0: float = DEFAULT_R0, step: float = SWEEP_STEP, tol: float = 1e-10,
                  seed: int = 0) -> GrowthReport:
    """
    q 的增长条件及各不存在性结论的前提

    闭式 q 按主导项精确判定；否则在几何时域 t + 2^k 上按单调趋势判定，
    最后两个窗口结论不一致时记为 unknown。报告总会生成。

    Args:
        q: n 维信号
        p: 问题数据，缺省时与 A、B 有关的条件记为 unknown
        eta: G_ε 条件中的 η
        epsilon: G_ε 的阈值，也是一致连续模的阈值
        delta: 比值条件中的 δ
        mu: 指数加权可积性中的 μ，缺省取 max(α,0)+1
        K: 几何时域个数
        r0: θ̇ - Aθ = Bv 中 |v| 的上界

    Returns:
        GrowthReport
    """
    lead = leading_term(q)
    mu = _default_mu(lead, q) if mu is None else float(mu)
    eta_vec = None if eta is None else np.asarray(eta, dtype=float).ravel()
    params = {"epsilon": epsilon, "delta": delta, "mu": mu, "K": K, "r0": r0,
              "eta": None if eta_vec is None else [float(v) for v in eta_vec]}

    T_end = t + 2.0 ** K + delta
    if q.is_sampled:
        T_end = min(T_end, q.domain()[1])
    polar = None
    try:
        polar = polar_decompose(q, t, T_end, step)
    except DegenerateSignalError as e:
        logger.warning(f"增长报告: {e}")
    T_fin = float(polar.grid[-1]) if polar is not None else T_end
    horizons = _sweep_horizons(t, K, T_fin, delta)
    window = (t, float(horizons[-1])) if horizons.size else (t, T_fin)
    closed_window = (t, INF)
    flags: Dict[str, FlagCertificate] = {}

    if polar is not None:
        grid, mag = polar.grid, polar.magnitude.values[:, 0]
        theta = polar.direction.values
        I_run = _cumulative(grid, mag)
        I_h = np.interp(horizons, grid, I_run)
    else:
        grid = mag = theta = I_run = None
        I_h = np.zeros(horizons.size)

    # ∫|q| < ∞
    if lead is not None:
        flags["globally_integrable"] = FlagCertificate(
            "globally_integrable", bool(lead.rate < 0), "closed_form", closed_window,
            margin=-lead.rate)
    else:
        div = _stable(_increments_trend, I_h)
        flags["globally_integrable"] = FlagCertificate(
            "globally_integrable", None if div is None else not div, "trend", window, history=list(I_h))
    gi = flags["globally_integrable"].value
    flags["q_not_integrable"] = FlagCertificate(
        "q_not_integrable", None if gi is None else not gi, flags["globally_integrable"].method,
        flags["globally_integrable"].window)

    # ∫e^{-μs}|q| < ∞
    if lead is not None:
        flags["exp_weighted_integrable"] = FlagCertificate(
            "exp_weighted_integrable", bool(lead.rate < mu), "closed_form", closed_window,
            margin=mu - lead.rate, params={"mu": mu})
    elif polar is not None:
        E_h = np.interp(horizons, grid, _cumulative(grid, np.exp(-mu * (grid - t)) * mag))
        div = _stable(_increments_trend, E_h)
        flags["exp_weighted_integrable"] = FlagCertificate(
            "exp_weighted_integrable", None if div is None else not div, "trend", window,
            params={"mu": mu}, history=list(E_h))

    # (1/T)∫|q| → ∞
    if lead is not None:
        value = lead.rate > 0 or (lead.rate == 0 and lead.power >= 1)
        flags["cesaro_divergent"] = FlagCertificate("cesaro_divergent", bool(value), "closed_form",
                                                    closed_window, margin=lead.rate)
    elif polar is not None:
        c = I_h / (horizons - t)
        flags["cesaro_divergent"] = FlagCertificate(
            "cesaro_divergent", _stable(lambda v: _growth_trend(v, 1.25, 1.05), c), "trend", window,
            history=list(c))

    # ∫_T^{T+δ}|q| / ∫_t^T|q| → e^{αδ} - 1 (α > 0) 或 0
    if lead is not None:
        limit = math.expm1(lead.rate * delta) if lead.rate > 0 else 0.0
        flags["ratio_vanishes"] = FlagCertificate("ratio_vanishes", bool(lead.rate <= 0), "closed_form",
                                                  closed_window, margin=limit,
                                                  params={"delta": delta, "limit": limit})
    elif polar is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (np.interp(horizons + delta, grid, I_run) - I_h) / I_h
        ok = np.isfinite(ratio)
        limit = float(ratio[ok][-1]) if np.any(ok) else math.nan
        flags["ratio_vanishes"] = FlagCertificate(
            "ratio_vanishes", _stable(_vanishing_trend, ratio[ok]), "trend", window, margin=limit,
            params={"delta": delta, "limit": limit}, history=list(ratio[ok]))

    # G_ε 质量
    if eta_vec is None:
        flags["G_epsilon_mass"] = FlagCertificate("G_epsilon_mass", None, "skipped", window,
                                                  params={"note": "未给出 η", "epsilon": epsilon})
    elif lead is not None and lead.rate < 0:
        flags["G_epsilon_mass"] = FlagCertificate("G_epsilon_mass", False, "closed_form", closed_window,
                                                  params={"epsilon": epsilon, "note": "q 可积"})
    elif lead is not None and lead.direction is not None:
        ip = float(lead.direction @ eta_vec)
        value = None if abs(ip - epsilon) <= 1e-12 else ip > epsilon
        flags["G_epsilon_mass"] = FlagCertificate(
            "G_epsilon_mass", value, "closed_form", closed_window, margin=ip - epsilon,
            params={"epsilon": epsilon, "eta": params["eta"]})
    elif polar is not None:
        w = np.where(theta @ eta_vec >= epsilon, epsilon, -float(np.linalg.norm(eta_vec)))
        G_h = np.interp(horizons, grid, _cumulative(grid, w * mag))
        flags["G_epsilon_mass"] = FlagCertificate(
            "G_epsilon_mass", _stable(_increments_trend, G_h), "trend", window,
            params={"epsilon": epsilon, "eta": params["eta"]}, history=list(G_h))

    # θ(s) → θ₀
    direction = None
    if lead is not None and math.isfinite(lead.rate):
        direction = lead.direction
        flags["direction_limit"] = FlagCertificate("direction_limit", not lead.oscillating,
                                                   "closed_form", closed_window)
    elif polar is not None:
        th_h = np.stack([np.interp(horizons, grid, theta[:, j]) for j in range(q.dim)], axis=1)
        steps = np.linalg.norm(np.diff(th_h, axis=0), axis=1)
        value = _stable(_settling_trend, np.concatenate([[np.inf], steps]))
        if value:
            direction = th_h[-1] / np.linalg.norm(th_h[-1])
        flags["direction_limit"] = FlagCertificate("direction_limit", value, "trend", window,
                                                   history=list(steps))
    else:
        flags["direction_limit"] = FlagCertificate("direction_limit", False, "closed_form",
                                                   closed_window, params={"note": "q 最终为零"})
    if direction is not None:
        flags["direction_limit"].params["theta0"] = [float(v) for v in direction]

    # 与 (A, B) 有关的条件
    hyp = None
    weak_theta = None
    if p is not None:
        report = validate_problem(p)
        hyp = report.to_dict()
        flags["controllable"] = FlagCertificate("controllable", report.controllable, "direct",
                                                closed_window)
        flags["satisfies_H"] = FlagCertificate("satisfies_H", report.satisfies_H, "direct",
                                               closed_window)
        flags["B_identity"] = FlagCertificate(
            "B_identity", bool(p.m == p.n and np.allclose(p.B, np.eye(p.n))), "direct", closed_window)
        if report.satisfies_H and horizons.size >= 2:
            certs, weak_theta = _weak_direction_flags(p, q, lead, t, horizons, tol, seed)
            flags.update(certs)
            flags["weak_regime"] = FlagCertificate(
                "weak_regime",
                _or(_and(certs["tail_integrable"].value, certs["rho_growth"].value),
                    certs["tail_divergent"].value),
                "combined", window)
    flags["range_condition"] = _range_cert("range_condition", p, eta_vec, t, RANGE_TOL)
    flags["limit_range"] = _range_cert("limit_range", p, direction, t, RANGE_TOL)
    if polar is not None:
        flags.update(_theta_flags(p, polar, t, r0, epsilon, fixed_direction(q)))

    applicability = {}
    for theorem_id, names in PREMISES.items():
        values = {name: (flags[name].status if name in flags else UNKNOWN) for name in names}
        failed = [name for name in names if values[name] == "false"]
        unknown = [name for name in names if values[name] == UNKNOWN]
        if failed:
            status = FAILS
        elif unknown:
            status = UNKNOWN
        else:
            status = APPLIES
        applicability[theorem_id] = {
            "status": status,
            "failed_premise": failed[0] if failed else None,
            "undetermined": unknown,
            "premises": values,
        }

    out = GrowthReport(t, flags, applicability, params, horizons, hyp, direction, weak_theta, lead)
    logger.info(f"增长报告: {out}")
    return out


# ------------------------------------------------------------------ Gram 矩阵

def _gramian(A: np.ndarray, B: np.ndarray, delta: float) -> np.ndarray:
    """Van Loan 分块指数: ∫_0^δ e^{Aτ}BBᵀe^{Aᵀτ}dτ"""
    n = A.shape[0]
    block = np.block([[-A, B @ B.T], [np.zeros((n, n)), A.T]]) * delta
    F = linalg.expm(block)
    W = F[n:, n:].T @ F[:n, n:]
    return 0.5 * (W + W.T)


def steering_gramian(A: np.ndarray, B: np.ndarray, delta: float) -> np.ndarray:
    """
    W(δ) = ∫_0^δ e^{A(δ-τ)}BBᵀe^{Aᵀ(δ-τ)}dτ

    Raises:
        ValueError: δ ≤ 0
        SingularGramianError: W(δ) 的条件数超过 1e12
    """
    if delta <= 0:
        raise ValueError(f"δ 必须为正: {delta}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    W = _gramian(A, B, float(delta))
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > GRAMIAN_COND_LIMIT:
        raise SingularGramianError(f"W(δ={delta:g}) 数值奇异: 条件数 {cond:.3g}")
    return W


# ------------------------------------------------------------------ 见证控制

@dataclass
class Witness:
    """见证控制 u = u* + δu 与证明中 ξ 的闭式表示"""
    theorem: str
    control: Signal
    perturbation: Signal
    t: float
    end: float                                   # 闭式 ξ 覆盖的区间右端
    reference_xi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    predicted: Optional[float] = None
    params: Dict = field(default_factory=dict)

    def xi_discrepancy(self, p: LqProblem, step: float = EXACT_STEP) -> float:
        """仿真得到的 ξ 与闭式 ξ 的 sup 范数差"""
        traj = propagate(p.A, self.perturbation.transform(p.B), self.t, np.zeros(p.n),
                         self.end, step, EXACT)
        ref = self.reference_xi(traj.grid)
        return float(np.max(np.linalg.norm(traj.states - ref, axis=1)))

    def to_dict(self) -> Dict:
        return {
            "theorem": self.theorem,
            "t": self.t,
            "end": self.end,
            "predicted": self.predicted,
            "params": self.params,
        }


def _restrict(sig: Signal, lo: float, hi: float) -> Signal:
    """闭式信号乘以 1_[lo,hi)"""
    if sig.is_zero:
        return sig
    if not sig.is_closed_form:
        raise NotApplicableError("采样信号不能按区间截断为闭式")
    atoms = []
    for a in sig.atoms:
        a_lo, a_hi = max(a.lo, lo), min(a.hi, hi)
        if a_lo < a_hi:
            atoms.append(Atom(a.coeff, a.power, a.rate, a.freq, a.phase, a_lo, a_hi, a.shift))
    return Signal.closed_form(atoms, dim=sig.dim)


def _feedback_for(p: LqProblem, rate: float) -> np.ndarray:
    """A 的衰减率已超过 q 的增长率时取 Θ = 0，否则做极点配置"""
    abscissa = spectral_abscissa(p.A)
    if abscissa < 0 and -abscissa > rate:
        return np.zeros((p.m, p.n))
    target = max(DEFAULT_MU_STAR, rate + 1.0) if math.isfinite(rate) else DEFAULT_MU_STAR
    return stabilizer(p.A, p.B, mu_star=target)


def _q_rate(q: Signal) -> float:
    lead = leading_term(q)
    if lead is not None:
        return lead.rate
    if q.growth_rate is not None:
        return float(q.growth_rate)
    return -INF


def _norm_integral(q: Signal, lo: float, hi: float, tol: float,
                   weight: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
    if hi <= lo or q.is_zero:
        return 0.0

    def f(s):
        val = np.linalg.norm(q(s), axis=1)
        return (val if weight is None else val * weight(s))[:, None]

    value, _ = adaptive_gauss_legendre(f, lo, hi, tol, breakpoints=q.breakpoints(lo, hi))
    return float(value[0])


def g_epsilon_breakpoints(q: Signal, eta: np.ndarray, epsilon: float, lo: float, hi: float,
                          step: float = SWEEP_STEP) -> List[float]:
    """G_ε = {s : ⟨q(s),η⟩ ≥ ε|q(s)|} 在 [lo, hi] 内的边界点"""
    n = max(int(math.ceil((hi - lo) / step)), 1)
    s = np.linspace(lo, hi, n + 1)

    def h(x):
        vals = q(np.atleast_1d(x))
        return vals @ eta - epsilon * np.linalg.norm(vals, axis=1)

    hv = h(s)
    out = []
    for i in np.flatnonzero(np.sign(hv[:-1]) * np.sign(hv[1:]) < 0):
        out.append(brentq(lambda x: float(h(x)[0]), s[i], s[i + 1], xtol=1e-13))
    return out


def eta_drift_bound(q: Signal, eta: np.ndarray, epsilon: float, t: float, T: float,
                    decay: Tuple[float, float], tol: float = 1e-10) -> Optional[float]:
    """
    ε∫_{G_ε∩[t,T]}|q| - |η|∫_{G_ε^c∩[t,T]}|q| - M|η|e^{μt}∫_t^∞e^{-μs}|q|

    尾积分发散时返回 None。
    """
    M, mu = decay
    eta = np.asarray(eta, dtype=float)
    size = float(np.linalg.norm(eta))
    if size == 0.0:
        return 0.0
    cuts = g_epsilon_breakpoints(q, eta, epsilon, t, T) + list(q.breakpoints(t, T))

    def split(s):
        vals = q(s)
        mag = np.linalg.norm(vals, axis=1)
        return np.where(vals @ eta >= epsilon * mag, epsilon * mag, -size * mag)[:, None]

    main, _ = adaptive_gauss_legendre(split, t, T, tol * (1.0 + T - t), breakpoints=cuts)
    try:
        T_star = tail_horizon(-mu * np.eye(q.dim), q, t, tol, anchor=t, decay=(1.0, mu))
    except DivergentTailError:
        logger.warning(f"∫e^{{-μs}}|q| 在 μ={mu:g} 下发散，不给出预测下界")
        return None
    except UnsupportedTailError:
        T_star = q.domain()[1]
    tail = _norm_integral(q, t, T_star, tol, weight=lambda s: np.exp(-mu * (s - t)))
    return float(main[0]) - M * size * tail


def witness_eta_control(p: LqProblem, t: float, x, u_star: Signal, eta, T: float,
                        theta: Optional[np.ndarray] = None, epsilon: float = 1.0,
                        tol: float = 1e-10, range_tol: float = RANGE_TOL) -> Witness:
    """
    常方向扰动

    取 Aη = Bv̂₀，v₀ = v̂₀ + Θη，在反馈 u = ΘX + v 下令 v 在 [t,T] 上加 v₀，
    于是 ξ(s) = -(I - e^{A_Θ(s-t)})η，ξ 趋向 -η，线性项 2⟨q,ξ⟩ 使 ΔJ 增长。
    原控制下的扰动为 δu = Θξ + v₀1_[t,T)。

    Args:
        theta: 反馈 Θ (m×n)，缺省时 A 的衰减快于 q 的增长则取零，否则极点配置
        epsilon: 预测下界中 G_ε 的阈值

    Raises:
        RangeConditionError: Aη ∉ R(B)
    """
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size != p.n:
        raise ValueError(f"η 维数 {eta.size} 与状态维数 {p.n} 不一致")
    if T <= t:
        raise ValueError(f"T={T:g} 必须大于 t={t:g}")
    if not np.any(eta):
        return Witness(ETA_DRIFT, u_star, Signal.zero(p.m), t, T,
                       lambda s: np.zeros((np.size(s), p.n)), 0.0, {"eta": eta.tolist(), "T": T})

    v_hat = _range_solve(p.B, p.A @ eta, range_tol, "Aη")
    Theta = _feedback_for(p, _q_rate(p.q)) if theta is None else np.atleast_2d(theta)
    A_th = p.A + p.B @ Theta
    v0 = v_hat + Theta @ eta
    forcing = Signal.constant(p.B @ v0, lo=t, hi=T)
    xi = exp_forward_signal(A_th, forcing, t)
    if xi is None:
        xi = propagate(A_th, forcing, t, np.zeros(p.n), T, method=EXACT).as_signal()
    du = xi.transform(Theta) + Signal.constant(v0, lo=t, hi=T)
    xi_T = -(eta - matrix_exp_batch(A_th, [T - t])[0] @ eta)

    def reference(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.size, p.n))
        inside = (s >= t) & (s <= T)
        after = s > T
        out[inside] = -(eta - matrix_exp_batch(A_th, s[inside] - t) @ eta)
        out[after] = matrix_exp_batch(A_th, s[after] - T) @ xi_T
        return out

    decay = decay_constants(A_th)
    predicted = eta_drift_bound(p.q, eta, epsilon, t, T, decay, tol)
    params = {"eta": eta.tolist(), "v0": v0.tolist(), "Theta": Theta.tolist(), "T": T,
              "epsilon": epsilon, "M": decay[0], "mu": decay[1]}
    return Witness(ETA_DRIFT, u_star + du, du, t, T, reference, predicted, params)


def tracking_constant(p: LqProblem, W: np.ndarray, delta: float,
                      decay: Optional[Tuple[float, float]] = None) -> float:
    """K(δ) = M²‖B‖²‖W(δ)⁻¹‖(1+M)δ + M(1+M)"""
    M, _ = decay_constants(p.A) if decay is None else decay
    norm_B = float(np.linalg.norm(p.B, 2))
    norm_W_inv = float(np.linalg.norm(np.linalg.inv(W), 2))
    return M * M * norm_B ** 2 * norm_W_inv * (1.0 + M) * delta + M * (1.0 + M)


def _spline_direction(theta: Signal, t: float, T: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """采样 θ 的三次样条: [t, T] 内节点上的 θ 与 θ̇"""
    lo, hi = theta.domain()
    if t < lo - 1e-12 or T > hi + 1e-12:
        raise NotApplicableError(f"θ 的采样区间 [{lo:g}, {hi:g}] 不覆盖 [{t:g}, {T:g}]")
    inner = theta.grid[(theta.grid > t) & (theta.grid < T)]
    nodes = np.concatenate([[t], inner, [T]])
    if theta.grid.size < 4:
        raise NotApplicableError("θ 的采样点不足以构造三次样条")
    spline = CubicSpline(theta.grid, theta.values, axis=0)
    return nodes, theta(nodes), spline.derivative()(nodes)


def _stitch(nodes: np.ndarray, v_vals: np.ndarray, v_hat: Signal, T: float,
            delta: float) -> Signal:
    """[t,T) 上的采样 v 与 [T,T+δ) 上的校正控制拼成一个采样信号"""
    seam = T - 1e-9 * (1.0 + abs(T))
    head = nodes < seam
    tail = np.linspace(T, T + delta, max(int(math.ceil(delta / SWEEP_STEP)), 16) + 1)
    tail_vals = v_hat(tail)
    tail_vals[-1] = v_hat(tail[-1], side="left")
    grid = np.concatenate([nodes[head], [seam], tail])
    values = np.vstack([v_vals[head], v_vals[-1:], tail_vals])
    return Signal.sampled(grid, values)


def _smooth_tracking(p: LqProblem, t: float, theta: Signal, delta: float, T: float, r0: float,
                     range_tol: float, tol: float) -> Witness:
    B_pinv = np.linalg.pinv(p.B)
    if theta.is_analytic:
        g = theta.derivative() - theta.transform(p.A)
        v = g.transform(B_pinv)
        check = np.linspace(t, T, 401)
        gv, v_vals = g(check), v(check)
    else:
        v = None
        check, th_vals, th_dot = _spline_direction(theta, t, T)
        gv = th_dot - th_vals @ p.A.T
        v_vals = gv @ B_pinv.T
    res = float(np.max(np.linalg.norm(gv - v_vals @ p.B.T, axis=1)))
    if res > range_tol * (1.0 + float(np.max(np.abs(gv)))):
        raise RangeConditionError(f"θ̇ - Aθ 不在 R(B) 内: 残差 {res:.3g}")
    v_max = float(np.max(np.linalg.norm(v_vals, axis=1)))
    if v_max > r0:
        raise RangeConditionError(f"|v| 最大值 {v_max:.4g} 超过 r₀ = {r0:g}")

    E_T = matrix_exp_batch(p.A, [T - t, delta])
    theta_t = theta(t)
    xi_T = theta(T, side="left") - E_T[0] @ theta_t
    W = steering_gramian(p.A, p.B, delta)
    c = np.linalg.solve(W, E_T[1] @ xi_T)
    v_hat = matrix_exp_signal(-p.A.T, c, anchor=T + delta, lo=T, hi=T + delta, C=-p.B.T)
    if v_hat is None:
        raise NotApplicableError("A 的特征向量矩阵病态，校正控制无法写成闭式")
    du = _restrict(v, t, T) + v_hat if v is not None else _stitch(check, v_vals, v_hat, T, delta)
    end = T + delta

    def reference(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.size, p.n))
        a = (s >= t) & (s <= T)
        if np.any(a):
            out[a] = theta(s[a], side="left") - matrix_exp_batch(p.A, s[a] - t) @ theta_t
        for j in np.flatnonzero((s > T) & (s < end)):
            r = s[j] - T
            E = matrix_exp_batch(p.A, [r])[0]
            F = matrix_exp_batch(p.A.T, [end - s[j]])[0]
            out[j] = E @ xi_T - _gramian(p.A, p.B, r) @ F @ c
        return out

    decay = decay_constants(p.A)
    K = tracking_constant(p, W, delta, decay)
    predicted = 0.5 * _norm_integral(p.q, t, T, tol) - K * _norm_integral(p.q, T, end, tol)
    params = {"mode": SMOOTH, "delta": delta, "T": T, "K": K, "v_max": v_max,
              "xi_T": xi_T.tolist()}
    return Witness(THETA_TRACKING, du, du, t, end, reference, predicted, params)


def _grid_tracking(p: LqProblem, t: float, theta: Signal, delta: float, T: float,
                   tol: float) -> Witness:
    if p.m != p.n or not np.allclose(p.B, np.eye(p.n)):
        raise NotApplicableError("网格跟踪构造要求 B = I")
    N = int(math.ceil((T - t) / delta - 1e-9))
    if N < 2:
        raise ValueError(f"网格至少需要两个单元: (T-t)/δ = {(T - t) / delta:.3g}")
    h = (T - t) / N
    nodes = t + h * np.arange(N + 1)
    I = np.eye(p.n)
    W = steering_gramian(p.A, I, h)
    W_inv = np.linalg.inv(W)
    E = matrix_exp_batch(p.A, [h])[0]

    th = theta(nodes[1:N])
    cs = np.empty((N, p.n))
    cs[0] = th[0]
    cs[1:N - 1] = th[1:] - th[:-1] @ E.T
    cs[N - 1] = -(E @ th[-1])
    ds = cs @ W_inv.T

    atoms: List[Atom] = []
    for i in range(N):
        piece = matrix_exp_signal(-p.A.T, ds[i], anchor=nodes[i + 1], lo=nodes[i], hi=nodes[i + 1])
        if piece is None:
            raise NotApplicableError("A 的特征向量矩阵病态，网格控制无法写成闭式")
        atoms.extend(piece.atoms)
    du = Signal.closed_form(atoms, dim=p.n) if atoms else Signal.zero(p.n)

    xi_nodes = np.zeros((N + 1, p.n))
    xi_nodes[1:N] = th

    def reference(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.size, p.n))
        for j in np.flatnonzero((s >= t) & (s < T)):
            i = min(int((s[j] - t) / h), N - 1)
            r = s[j] - nodes[i]
            E1 = matrix_exp_batch(p.A, [r])[0]
            E2 = matrix_exp_batch(p.A.T, [nodes[i + 1] - s[j]])[0]
            out[j] = E1 @ xi_nodes[i] + _gramian(p.A, I, r) @ E2 @ ds[i]
        return out

    predicted = _norm_integral(p.q, t, T, tol)
    params = {"mode": GRID, "delta": h, "cells": N, "T": T,
              "W_inv_norm": float(np.linalg.norm(W_inv, 2))}
    return Witness(GRID_TRACKING, du, du, t, T, reference, predicted, params)


def witness_theta_tracking(p: LqProblem, t: float, theta: Signal, delta: float, T: float,
                           mode: str = SMOOTH, r0: float = DEFAULT_R0,
                           range_tol: float = 1e-6, tol: float = 1e-10) -> Witness:
    """
    跟踪给定方向的扰动

    smooth: Bv = θ̇ - Aθ 在 [t,T] 上施加，ξ(s) = θ(s) - e^{A(s-t)}θ(t)，
    再在 [T,T+δ) 上用 v̂(τ) = -Bᵀe^{Aᵀ(T+δ-τ)}W(δ)⁻¹e^{Aδ}ξ(T) 把 ξ 拉回零。
    grid (B = I): 在 t_i = t + iδ 上逐格构造，使 ξ(t_k) = θ(t_k)，且 s ≥ T 时 ξ = 0。
    返回的 control 即扰动本身，由调用方叠加到 u* 上。

    Raises:
        RangeConditionError: θ̇ - Aθ 不在 R(B) 内或 |v| > r₀
        SingularGramianError: W(δ) 数值奇异
        NotApplicableError: grid 模式下 B ≠ I
    """
    if mode not in TRACKING_MODES:
        raise ValueError(f"未知的跟踪方式: {mode}. 可用方式: {list(TRACKING_MODES)}")
    if delta <= 0 or T <= t:
        raise ValueError(f"需要 δ > 0 且 T > t: δ={delta}, t={t}, T={T}")
    if theta.dim != p.n:
        raise ValueError(f"θ 维数 {theta.dim} 与状态维数 {p.n} 不一致")
    if mode == SMOOTH:
        return _smooth_tracking(p, t, theta, delta, T, r0, range_tol, tol)
    return _grid_tracking(p, t, theta, delta, T, tol)


def witness_weak_direction(p: LqProblem, t: float, u_star: Signal, theta0, radius: float,
                           T0: float) -> Witness:
    """
    η(s) = -(δ/√(T₀-t))·θ₀·1_[t,T₀)，L² 范数为 δ

    Raises:
        NotApplicableError: 响应 ξ 无法写成闭式
    """
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if theta0.size != p.m:
        raise ValueError(f"θ₀ 维数 {theta0.size} 与控制维数 {p.m} 不一致")
    if T0 <= t:
        raise ValueError(f"T₀={T0:g} 必须大于 t={t:g}")
    theta0 = theta0 / np.linalg.norm(theta0)
    amp = radius / math.sqrt(T0 - t)
    eta = Signal.constant(-amp * theta0, lo=t, hi=T0)
    xi = exp_forward_signal(p.A, eta.transform(p.B), t)
    if xi is None:
        raise NotApplicableError("A 的特征向量矩阵病态，ξ 无法写成闭式")
    params = {"theta0": theta0.tolist(), "radius": radius, "T0": T0, "amplitude": amp}
    return Witness(WEAK_DIRECTION, u_star + eta, eta, t, T0, lambda s: xi(np.atleast_1d(s)),
                   None, params)


def weak_direction_gain(p: LqProblem, t: float, theta0: np.ndarray, radius: float, T0: float,
                        T: float, tol: float = 1e-10) -> float:
    """一阶项 2(δ/√(T₀-t))∫_t^{T₀}⟨∫_s^T Bᵀe^{Aᵀ(τ-s)}q dτ, θ₀⟩ds"""
    n_lo = max(int(math.ceil((T0 - t) / PROFILE_STEP)), 2)
    n_hi = max(int(math.ceil((T - T0) / PROFILE_STEP)), 1)
    grid = np.concatenate([np.linspace(t, T0, n_lo + 1), np.linspace(T0, T, n_hi + 1)[1:]])
    r = backward_tail_profile(p.A, p.q, grid, tol, terminal=np.zeros(p.n)) @ p.B
    head = slice(0, n_lo + 1)
    inner = trapezoid(r[head] @ theta0, grid[head])
    return 2.0 * radius / math.sqrt(T0 - t) * float(inner)


# ------------------------------------------------------------------ 反驳

def _premise_trace(theorem_id: str, verdict: Dict, window: int, label: str) -> ComparisonTrace:
    """前提不成立时的空轨迹"""
    empty = np.zeros(0)
    return ComparisonTrace(empty, empty, math.nan, math.nan, math.nan, INCONCLUSIVE, window,
                           math.nan, math.nan, False, label,
                           meta={"theorem": theorem_id, "premises": verdict,
                                 "reason": "inconclusive-by-premise"})


def _schedule(start: float, params: Dict) -> np.ndarray:
    return horizon_schedule(start, LINEAR, K=int(params.get("K", DEFAULT_K)),
                            step=float(params.get("horizon_step", DEFAULT_HORIZON_STEP)))


def _direction_signal(p: LqProblem, t: float, T: float, params: Dict) -> Signal:
    theta = params.get("theta")
    if isinstance(theta, Signal):
        return theta
    if theta is not None:
        return Signal.constant(np.asarray(theta, dtype=float))
    fixed = fixed_direction(p.q)
    if fixed is not None:
        return Signal.constant(fixed)
    return polar_decompose(p.q, t, T).direction


def _eta_witnesses(p, t, x, u_star, report, params, theorem_id):
    eta = params.get("eta")
    if theorem_id == LIMIT_DIRECTION or eta is None:
        eta = report.direction
    if eta is None:
        raise NotApplicableError("没有可用的 η: 既未给出，也没有方向极限 θ₀")
    eta = np.asarray(eta, dtype=float)
    epsilon = float(params.get("epsilon", 1.0 if theorem_id == LIMIT_DIRECTION
                               else report.params["epsilon"]))
    Theta = _feedback_for(p, _q_rate(p.q))
    cache: Dict[float, Witness] = {}

    def family(T):
        w = witness_eta_control(p, t, x, u_star, eta, T, theta=Theta, epsilon=epsilon)
        cache[T] = w
        return w.control

    info = {"eta": eta.tolist(), "epsilon": epsilon, "Theta": Theta.tolist()}
    return family, _schedule(t, params), cache, info


def _smooth_witnesses(p, t, x, u_star, report, params, theorem_id):
    delta = float(params.get("delta", report.params["delta"]))
    schedule = _schedule(t, params)
    schedule = schedule[schedule - delta > t]
    target = -_direction_signal(p, t, float(schedule[-1]), params)
    r0 = float(params.get("r0", report.params["r0"]))
    cache: Dict[float, Witness] = {}

    def family(T):
        w = witness_theta_tracking(p, t, target, delta, T - delta, SMOOTH, r0)
        cache[T] = w
        return u_star + w.control

    return family, schedule, cache, {"delta": delta, "r0": r0}


def _grid_witnesses(p, t, x, u_star, report, params, theorem_id):
    schedule = _schedule(t, params)
    T_max = float(schedule[-1])
    theta = _direction_signal(p, t, T_max + 1.0, params)
    epsilon = float(params.get("epsilon", report.params["epsilon"]))
    if "grid_delta" in params:
        delta, modulus = float(params["grid_delta"]), math.nan
    else:
        delta, modulus = select_grid_delta(p.A, theta, t, T_max, epsilon)
    schedule = schedule[schedule - t >= 2.0 * delta]
    target = -theta
    cache: Dict[float, Witness] = {}

    def family(T):
        w = witness_theta_tracking(p, t, target, delta, T, GRID)
        cache[T] = w
        return u_star + w.control

    return family, schedule, cache, {"delta": delta, "modulus": modulus, "epsilon": epsilon}


def _weak_witnesses(p, t, x, u_star, report, params, theorem_id):
    theta0 = params.get("theta0", report.weak_direction)
    if theta0 is None:
        raise NotApplicableError("单位球搜索没有找到满足方向条件的 θ₀")
    theta0 = np.asarray(theta0, dtype=float)
    theta0 = theta0 / np.linalg.norm(theta0)
    T0 = float(params.get("T0", t + DEFAULT_T0_OFFSET))
    radius = float(params.get("radius", 1.0))
    w = witness_weak_direction(p, t, u_star, theta0, radius, T0)
    cache: Dict[float, Witness] = {}

    def family(T):
        cache[T] = w
        return w.control

    return family, _schedule(T0, params), cache, {"theta0": theta0.tolist(), "T0": T0,
                                                  "radius": radius}


_WITNESS_BUILDERS = {
    WEAK_DIRECTION: _weak_witnesses,
    ETA_DRIFT: _eta_witnesses,
    LIMIT_DIRECTION: _eta_witnesses,
    THETA_TRACKING: _smooth_witnesses,
    GRID_TRACKING: _grid_witnesses,
}


def refute(p: LqProblem, t: float, x, u_star: Signal, theorem_id: str,
           params: Optional[Dict] = None, report: Optional[GrowthReport] = None) -> ComparisonTrace:
    """
    构造见证控制并比较 u* 与见证的代价差

    前提不成立时直接返回 inconclusive-by-premise 的空轨迹；前提 unknown 时
    仍然尝试。比较结论不是 refuted 时一律记为 inconclusive，原结论存入 meta。

    Args:
        theorem_id: weak_direction / eta_drift / limit_direction / theta_tracking / grid_tracking
        params: eta, epsilon, delta, r0, theta, theta0, T0, radius, grid_delta,
            K, horizon_step, window, step
        report: 预先计算的增长报告

    Returns:
        ComparisonTrace，predicted 为各时域上的预测下界
    """
    if theorem_id not in THEOREM_IDS:
        raise ValueError(f"未知的定理编号: {theorem_id}. 可用编号: {list(THEOREM_IDS)}")
    params = dict(params or {})
    window = int(params.get("window", DEFAULT_WINDOW))
    label = params.get("label", theorem_id)
    if report is None:
        report = growth_report(p.q, p, eta=params.get("eta"),
                               epsilon=params.get("epsilon", DEFAULT_EPSILON),
                               delta=params.get("delta", DEFAULT_DELTA), mu=params.get("mu"),
                               t=t, r0=params.get("r0", DEFAULT_R0))
    verdict = report.applicability[theorem_id]
    if verdict["status"] == FAILS:
        logger.warning(f"{theorem_id} 的前提不成立: {verdict['failed_premise']}")
        return _premise_trace(theorem_id, verdict, window, label)
    if verdict["status"] == UNKNOWN:
        logger.warning(f"{theorem_id} 的前提未能判定 {verdict['undetermined']}，仍然构造见证")

    x = np.asarray(x, dtype=float).ravel()
    family, schedule, cache, info = _WITNESS_BUILDERS[theorem_id](
        p, t, x, u_star, report, params, theorem_id)
    trace = comparison_trace(p, t, x, u_star, family, schedule, window=window,
                             step=params.get("step"), label=label)
    if theorem_id == WEAK_DIRECTION:
        predicted = [weak_direction_gain(p, t, np.asarray(info["theta0"]), info["radius"],
                                         info["T0"], float(T)) for T in trace.horizons]
    else:
        predicted = [cache[float(T)].predicted for T in trace.horizons]
    if trace.horizons.size and all(v is not None for v in predicted):
        trace.predicted = np.asarray(predicted, dtype=float)
    trace.meta.update({"theorem": theorem_id, "premises": verdict, "witness": info,
                       "trace_verdict": trace.verdict})
    if trace.verdict != REFUTED:
        logger.warning(f"{theorem_id} 的见证未能在时域预算内给出反驳: {trace}")
        trace.verdict = INCONCLUSIVE
    else:
        logger.info(f"{theorem_id} 反驳成立: {trace}")
    return trace
