"""
时间信号
闭式(指数-多项式-三角原子之和)、采样网格、零信号三种表示
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DivergentTailError, SignalDomainError

logger = logging.getLogger(__name__)

INF = math.inf
ArrayLike = Union[float, Sequence[float], np.ndarray]

CLOSED_FORM = "closed_form"
SAMPLED = "sampled"
ZERO = "zero"
ROUNDOFF = 1e-13


@dataclass(frozen=True, eq=False)
class Atom:
    """
    单个原子 c·(s-shift)^k·e^{a(s-shift)}·cos(ω(s-shift)+φ)，支撑区间 [lo, hi)

    shift 只是数值上的平移原点，shift=0 时即 c·s^k·e^{as}·cos(ωs+φ)。
    """
    coeff: np.ndarray
    power: int = 0
    rate: float = 0.0
    freq: float = 0.0
    phase: float = 0.0
    lo: float = -INF
    hi: float = INF
    shift: float = 0.0

    def __post_init__(self):
        coeff = np.atleast_1d(np.asarray(self.coeff, dtype=float)).copy()
        coeff.setflags(write=False)
        object.__setattr__(self, "coeff", coeff)
        if int(self.power) != self.power or self.power < 0:
            raise ValueError(f"原子幂次必须是非负整数: {self.power}")
        object.__setattr__(self, "power", int(self.power))
        if not self.lo < self.hi:
            raise ValueError(f"原子支撑区间为空: [{self.lo}, {self.hi})")
        if not np.all(np.isfinite(coeff)):
            raise ValueError("原子系数必须是有限值")

    @property
    def bounded_support(self) -> bool:
        return math.isfinite(self.hi)

    def scalar_part(self, s: np.ndarray) -> np.ndarray:
        """标量部分 (s-shift)^k e^{a(s-shift)} cos(ω(s-shift)+φ)"""
        tau = s - self.shift
        val = np.ones_like(tau)
        if self.power:
            val = val * tau ** self.power
        if self.rate != 0.0:
            val = val * np.exp(self.rate * tau)
        if self.freq != 0.0 or self.phase != 0.0:
            val = val * np.cos(self.freq * tau + self.phase)
        return val

    def with_coeff(self, coeff: np.ndarray) -> "Atom":
        return Atom(coeff, self.power, self.rate, self.freq, self.phase,
                    self.lo, self.hi, self.shift)

    def bound(self, alpha: float, s0: float) -> float:
        """
        sup_{s≥s0} |atom(s)|·e^{-α s} 的上界

        Args:
            alpha: 包络指数，需满足 α > a (k>0) 或 α ≥ a (k=0)，有界支撑时不限
            s0: 区间起点
        """
        lo = max(self.lo, s0)
        if lo >= self.hi:
            return 0.0
        c = float(np.linalg.norm(self.coeff))
        if c == 0.0:
            return 0.0
        k, a = self.power, self.rate
        # 在平移坐标 τ = s - shift 上估计 |τ|^k e^{(a-α)τ}, 再乘 e^{-α·shift}
        t_lo, t_hi = lo - self.shift, self.hi - self.shift
        g = a - alpha

        def f(tau: float) -> float:
            if not math.isfinite(tau):
                if g < 0:
                    return 0.0
                return 1.0 if (g == 0 and k == 0) else INF
            return abs(tau) ** k * math.exp(g * tau) if k else math.exp(g * tau)

        cands = [f(t_lo), f(t_hi)]
        if k and g < 0:
            crit = k / (-g)
            if t_lo < crit < t_hi:
                cands.append(f(crit))
        if k and t_lo < 0.0 < t_hi:
            cands.append(0.0)
        return c * max(cands) * math.exp(-alpha * self.shift)

    def derivative(self) -> List["Atom"]:
        """原子的导数(支撑区间内部)"""
        out = []
        if self.power:
            out.append(Atom(self.coeff * self.power, self.power - 1, self.rate,
                            self.freq, self.phase, self.lo, self.hi, self.shift))
        if self.rate != 0.0:
            out.append(Atom(self.coeff * self.rate, self.power, self.rate,
                            self.freq, self.phase, self.lo, self.hi, self.shift))
        if self.freq != 0.0:
            # -ω sin(x) = -ω cos(x - π/2) = ω cos(x + π/2)
            out.append(Atom(self.coeff * self.freq, self.power, self.rate,
                            self.freq, self.phase + math.pi / 2, self.lo, self.hi,
                            self.shift))
        return out

    def to_dict(self) -> Dict:
        return {
            "coeff": [float(c) for c in self.coeff],
            "power": self.power,
            "rate": self.rate,
            "freq": self.freq,
            "phase": self.phase,
            "window": [None if math.isinf(self.lo) else self.lo,
                       None if math.isinf(self.hi) else self.hi],
            "shift": self.shift,
        }

    def __repr__(self):
        return (f"Atom(c={list(np.round(self.coeff, 6))}, k={self.power}, a={self.rate:g}, "
                f"ω={self.freq:g}, φ={self.phase:g}, [{self.lo:g},{self.hi:g}))")


@dataclass(frozen=True, eq=False)
class Signal:
    """向量值时间信号"""
    kind: str
    dim: int
    atoms: Tuple[Atom, ...] = ()
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    growth_rate: Optional[float] = None
    meta: Dict = field(default_factory=dict)

    # ------------------------------------------------------------ 构造

    @classmethod
    def zero(cls, dim: int) -> "Signal":
        return cls(ZERO, int(dim), growth_rate=-INF)

    @classmethod
    def closed_form(cls, atoms: Iterable[Atom], dim: Optional[int] = None,
                    growth_rate: Optional[float] = None) -> "Signal":
        atoms = tuple(a for a in atoms if np.any(a.coeff != 0.0))
        if dim is None:
            if not atoms:
                raise ValueError("空原子列表需要显式给出维数")
            dim = atoms[0].coeff.size
        for a in atoms:
            if a.coeff.size != dim:
                raise ValueError(f"原子系数维数 {a.coeff.size} 与信号维数 {dim} 不一致")
        if not atoms:
            return cls.zero(dim)
        actual = max((a.rate for a in atoms if not a.bounded_support), default=-INF)
        if growth_rate is None:
            growth_rate = actual
        elif growth_rate < actual:
            raise ValueError(f"声明的增长率 {growth_rate} 小于原子最大指数 {actual}")
        return cls(CLOSED_FORM, int(dim), atoms, growth_rate=float(growth_rate))

    @classmethod
    def sampled(cls, grid: ArrayLike, values: ArrayLike,
                growth_rate: Optional[float] = None) -> "Signal":
        grid = np.asarray(grid, dtype=float).ravel()
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if grid.size < 2:
            raise ValueError("采样网格至少需要两个节点")
        if values.shape[0] != grid.size:
            raise ValueError(f"采样值行数 {values.shape[0]} 与网格长度 {grid.size} 不一致")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("采样网格必须严格递增")
        if not np.all(np.isfinite(values)):
            raise ValueError("采样值必须是有限值")
        grid = grid.copy()
        values = values.copy()
        grid.setflags(write=False)
        values.setflags(write=False)
        return cls(SAMPLED, values.shape[1], grid=grid, values=values,
                   growth_rate=growth_rate)

    @classmethod
    def exp_poly(cls, coeff: ArrayLike, power: int = 0, rate: float = 0.0,
                 freq: float = 0.0, phase: float = 0.0,
                 lo: float = -INF, hi: float = INF) -> "Signal":
        """单原子信号的便捷构造"""
        return cls.closed_form([Atom(coeff, power, rate, freq, phase, lo, hi)])

    @classmethod
    def constant(cls, vec: ArrayLike, lo: float = -INF, hi: float = INF) -> "Signal":
        """常向量(可带支撑区间，即指示函数)"""
        return cls.closed_form([Atom(vec, 0, 0.0, 0.0, 0.0, lo, hi)],
                               dim=np.atleast_1d(vec).size)

    # ------------------------------------------------------------ 属性

    @property
    def is_zero(self) -> bool:
        return self.kind == ZERO

    @property
    def is_closed_form(self) -> bool:
        return self.kind == CLOSED_FORM

    @property
    def is_sampled(self) -> bool:
        return self.kind == SAMPLED

    @property
    def is_analytic(self) -> bool:
        """闭式或零信号"""
        return self.kind != SAMPLED

    def domain(self) -> Tuple[float, float]:
        if self.is_sampled:
            return float(self.grid[0]), float(self.grid[-1])
        return -INF, INF

    def breakpoints(self, lo: float = -INF, hi: float = INF) -> np.ndarray:
        """开区间 (lo, hi) 内的间断/折点"""
        if self.is_sampled:
            pts = self.grid
        else:
            pts = np.array([p for a in self.atoms for p in (a.lo, a.hi) if math.isfinite(p)])
        pts = np.unique(pts)
        return pts[(pts > lo) & (pts < hi)]

    def dominant_rate(self) -> Tuple[float, int]:
        """无界支撑原子中的最大指数及该指数下的最高幂次"""
        inf_atoms = [a for a in self.atoms if not a.bounded_support]
        if not inf_atoms:
            return -INF, 0
        a_max = max(a.rate for a in inf_atoms)
        k_max = max(a.power for a in inf_atoms if a.rate == a_max)
        return a_max, k_max

    def square_integrable(self) -> bool:
        """在 [0,∞) 上是否平方可积(采样信号视为有限区间)"""
        if not self.is_closed_form:
            return True
        return self.dominant_rate()[0] < 0

    def integrable(self) -> bool:
        return self.square_integrable()

    def envelope(self, alpha: float, s0: float = 0.0) -> float:
        """
        给出常数 C 使 |sig(s)| ≤ C·e^{α s} 对所有 s ≥ s0 成立

        Args:
            alpha: 包络指数
            s0: 起始时刻

        Returns:
            C (不存在时为 inf)
        """
        if self.is_zero:
            return 0.0
        if self.is_sampled:
            lo, hi = self.domain()
            if hi < s0:
                return 0.0
            mask = self.grid >= s0
            v = np.linalg.norm(self.values[mask], axis=1) * np.exp(-alpha * self.grid[mask])
            return float(np.max(v)) if v.size else 0.0
        return float(sum(a.bound(alpha, s0) for a in self.atoms))

    # ------------------------------------------------------------ 求值

    def evaluate(self, s: ArrayLike, side: str = "right") -> np.ndarray:
        """
        求值

        Args:
            s: 标量或一维时间数组
            side: "right" 取右极限 (支撑 [lo,hi))，"left" 取左极限 (支撑 (lo,hi])

        Returns:
            标量输入返回 (dim,)，数组输入返回 (N, dim)
        """
        scalar = np.ndim(s) == 0
        ss = np.atleast_1d(np.asarray(s, dtype=float))
        if self.is_zero:
            out = np.zeros((ss.size, self.dim))
        elif self.is_sampled:
            out = self._eval_sampled(ss)
        else:
            out = self._eval_closed(ss, side)
        return out[0] if scalar else out

    __call__ = evaluate

    def _eval_sampled(self, s: np.ndarray) -> np.ndarray:
        g0, g1 = self.grid[0], self.grid[-1]
        slack = 1e-12 * (1.0 + max(abs(g0), abs(g1)))
        bad = (s < g0 - slack) | (s > g1 + slack)
        if np.any(bad):
            raise SignalDomainError(float(s[bad][0]), float(g0), float(g1))
        s = np.clip(s, g0, g1)
        out = np.empty((s.size, self.dim))
        for j in range(self.dim):
            out[:, j] = np.interp(s, self.grid, self.values[:, j])
        return out

    def _eval_closed(self, s: np.ndarray, side: str) -> np.ndarray:
        out = np.zeros((s.size, self.dim))
        order = np.argsort(s, kind="stable")
        ss = s[order]
        how = "left" if side == "right" else "right"
        for atom in self.atoms:
            if math.isinf(atom.lo) and math.isinf(atom.hi):
                sel = slice(None)
                tt = s
            else:
                i0 = np.searchsorted(ss, atom.lo, how) if math.isfinite(atom.lo) else 0
                i1 = np.searchsorted(ss, atom.hi, how) if math.isfinite(atom.hi) else ss.size
                if i1 <= i0:
                    continue
                sel = order[i0:i1]
                tt = s[sel]
            out[sel] += np.outer(atom.scalar_part(tt), atom.coeff)
        return out

    def sample(self, grid: ArrayLike, side: str = "right") -> "Signal":
        """在给定网格上采样"""
        grid = np.asarray(grid, dtype=float)
        return Signal.sampled(grid, self.evaluate(grid, side), self.growth_rate)

    # ------------------------------------------------------------ 代数运算

    def transform(self, M: ArrayLike) -> "Signal":
        """逐点左乘矩阵 M: s ↦ M·sig(s)"""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.dim:
            raise ValueError(f"矩阵列数 {M.shape[1]} 与信号维数 {self.dim} 不一致")
        if self.is_zero or not np.any(M):
            return Signal.zero(M.shape[0])
        if self.is_sampled:
            return Signal.sampled(self.grid, self.values @ M.T, self.growth_rate)
        norm_M = float(np.linalg.norm(M))
        atoms = []
        for a in self.atoms:
            c = M @ a.coeff
            # 投影等运算产生的舍入残差原子
            if np.linalg.norm(c) <= ROUNDOFF * norm_M * np.linalg.norm(a.coeff):
                continue
            atoms.append(a.with_coeff(c))
        return Signal.closed_form(atoms, dim=M.shape[0])

    def scale(self, c: float) -> "Signal":
        return self.transform(c * np.eye(self.dim))

    def component(self, i: int) -> "Signal":
        row = np.zeros((1, self.dim))
        row[0, i] = 1.0
        return self.transform(row)

    def __neg__(self) -> "Signal":
        return self.scale(-1.0)

    def __add__(self, other: "Signal") -> "Signal":
        if not isinstance(other, Signal):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"信号维数不一致: {self.dim} vs {other.dim}")
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.is_closed_form and other.is_closed_form:
            rate = max(self.growth_rate, other.growth_rate)
            return Signal.closed_form(self.atoms + other.atoms, dim=self.dim, growth_rate=rate)
        # 有采样项时在公共区间的并网格上采样，闭式项中的跳跃被线性插值抹平
        lo = max(self.domain()[0], other.domain()[0])
        hi = min(self.domain()[1], other.domain()[1])
        grids = [g for g in (self.grid, other.grid) if g is not None]
        grid = np.unique(np.concatenate(grids))
        grid = grid[(grid >= lo) & (grid <= hi)]
        values = self.evaluate(grid) + other.evaluate(grid)
        rates = [r for r in (self.growth_rate, other.growth_rate) if r is not None]
        return Signal.sampled(grid, values, max(rates) if len(rates) == 2 else None)

    def __sub__(self, other: "Signal") -> "Signal":
        return self + (-other)

    def derivative(self) -> "Signal":
        """闭式信号的导数(窗口端点处的跳跃不计)"""
        if self.is_zero:
            return self
        if self.is_sampled:
            raise ValueError("采样信号不支持解析求导")
        atoms = [d for a in self.atoms for d in a.derivative()]
        return Signal.closed_form(atoms, dim=self.dim, growth_rate=self.growth_rate)

    # ------------------------------------------------------------ 序列化

    def to_dict(self) -> Dict:
        if self.is_zero:
            return {"zero": self.dim}
        if self.is_sampled:
            return {"sampled": {"grid": [float(g) for g in self.grid],
                                "values": [[float(v) for v in row] for row in self.values]}}
        return {"closed_form": {"dim": self.dim,
                                "atoms": [a.to_dict() for a in self.atoms]}}

    def __repr__(self):
        if self.is_zero:
            return f"Signal(zero, dim={self.dim})"
        if self.is_sampled:
            lo, hi = self.domain()
            return f"Signal(sampled, dim={self.dim}, n={self.grid.size}, [{lo:g},{hi:g}])"
        return f"Signal(closed_form, dim={self.dim}, atoms={len(self.atoms)}, α={self.growth_rate:g})"


def matrix_exp_signal(M: np.ndarray, z: np.ndarray, anchor: float,
                      lo: float = -INF, hi: float = INF,
                      C: Optional[np.ndarray] = None,
                      cond_limit: float = 1e8) -> Optional[Signal]:
    """
    把 s ↦ C·e^{M(s-anchor)}·z (支撑 [lo,hi)) 写成闭式信号

    通过实特征分解展开；复共轭特征值对展开为相位 0 与 π/2 两个原子。
    特征向量矩阵条件数超过 cond_limit 时返回 None，由调用方改用采样。
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    z = np.asarray(z, dtype=float).ravel()
    C = np.eye(M.shape[0]) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
    if not np.any(z):
        return Signal.zero(C.shape[0])
    lam, V = np.linalg.eig(M)
    if np.linalg.cond(V) > cond_limit:
        return None
    w = np.linalg.solve(V, z.astype(complex))
    atoms: List[Atom] = []
    done = np.zeros(lam.size, dtype=bool)
    for j, lj in enumerate(lam):
        if done[j]:
            continue
        done[j] = True
        vec = C @ (V[:, j] * w[j])
        if abs(lj.imag) <= 1e-14 * (1.0 + abs(lj)):
            atoms.append(Atom(vec.real, 0, float(lj.real), 0.0, 0.0, lo, hi, anchor))
            continue
        # 找共轭伙伴
        partner = int(np.argmin(np.where(done, INF, np.abs(lam - np.conj(lj)))))
        done[partner] = True
        if lj.imag < 0:
            vec = C @ (V[:, partner] * w[partner])
            lj = lam[partner]
        sigma, omega = float(lj.real), float(lj.imag)
        atoms.append(Atom(2.0 * vec.real, 0, sigma, omega, 0.0, lo, hi, anchor))
        atoms.append(Atom(2.0 * vec.imag, 0, sigma, omega, math.pi / 2, lo, hi, anchor))
    return Signal.closed_form(atoms, dim=C.shape[0])


def signal_from_dict(data: Dict, dim: Optional[int] = None) -> Signal:
    """由场景文件中的标签联合构造信号(不做字段路径报错，由加载器包装)"""
    if not isinstance(data, dict) or len(data) != 1:
        raise ValueError("信号必须是仅含一个键的对象: zero / closed_form / sampled")
    (tag, body), = data.items()
    if tag == ZERO:
        return Signal.zero(int(body))
    if tag == CLOSED_FORM:
        if isinstance(body, list):
            body = {"atoms": body}
        atoms = []
        for item in body.get("atoms", []):
            window = item.get("window") or [None, None]
            atoms.append(Atom(
                item["coeff"],
                item.get("power", 0),
                float(item.get("rate", 0.0)),
                float(item.get("freq", 0.0)),
                float(item.get("phase", 0.0)),
                -INF if window[0] is None else float(window[0]),
                INF if window[1] is None else float(window[1]),
                float(item.get("shift", 0.0)),
            ))
        return Signal.closed_form(atoms, dim=body.get("dim", dim),
                                  growth_rate=body.get("growth_rate"))
    if tag == SAMPLED:
        return Signal.sampled(body["grid"], body["values"], body.get("growth_rate"))
    raise ValueError(f"未知的信号类型: {tag}. 可用类型: {[ZERO, CLOSED_FORM, SAMPLED]}")


def _reanchor(atom: Atom, shift: float) -> Atom:
    """把 k=0 的原子改写为以 shift 为原点"""
    d = shift - atom.shift
    return Atom(atom.coeff * math.exp(atom.rate * d), 0, atom.rate, atom.freq,
                atom.phase + atom.freq * d, atom.lo, atom.hi, shift)


def _atom_product(a1: Atom, a2: Atom, M: np.ndarray) -> Optional[List[Atom]]:
    lo, hi = max(a1.lo, a2.lo), min(a1.hi, a2.hi)
    if lo >= hi:
        return []
    if a1.shift != a2.shift:
        if a1.power == 0:
            a1 = _reanchor(a1, a2.shift)
        elif a2.power == 0:
            a2 = _reanchor(a2, a1.shift)
        else:
            return None
    c = float(a2.coeff @ M @ a1.coeff)
    if c == 0.0:
        return []
    k, r, sh = a1.power + a2.power, a1.rate + a2.rate, a1.shift
    if a1.freq == 0.0 and a2.freq == 0.0:
        c *= math.cos(a1.phase) * math.cos(a2.phase)
        return [Atom([c], k, r, 0.0, 0.0, lo, hi, sh)] if c != 0.0 else []
    return [Atom([0.5 * c], k, r, a1.freq + a2.freq, a1.phase + a2.phase, lo, hi, sh),
            Atom([0.5 * c], k, r, a1.freq - a2.freq, a1.phase - a2.phase, lo, hi, sh)]


def signal_inner(x: Signal, y: Signal, M: Optional[np.ndarray] = None,
                 grid: Optional[np.ndarray] = None) -> Signal:
    """
    标量信号 s ↦ ⟨M·x(s), y(s)⟩

    两个闭式信号的乘积仍是闭式；含采样项时在采样网格上逐点计算，
    原点无法对齐的幂次原子乘积需要调用方给出 grid。
    """
    M = np.eye(x.dim) if M is None else np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (y.dim, x.dim):
        raise ValueError(f"内积矩阵形状 {M.shape} 与信号维数 ({y.dim}, {x.dim}) 不一致")
    if x.is_zero or y.is_zero or not np.any(M):
        return Signal.zero(1)
    if x.is_closed_form and y.is_closed_form:
        atoms: List[Atom] = []
        ok = True
        for a1 in x.atoms:
            for a2 in y.atoms:
                prod = _atom_product(a1, a2, M)
                if prod is None:
                    ok = False
                    break
                atoms.extend(prod)
            if not ok:
                break
        if ok:
            return Signal.closed_form(atoms, dim=1)
        if grid is None:
            raise ValueError("原子原点无法对齐，需要给出采样网格")
    if grid is None:
        grids = [g for g in (x.grid, y.grid) if g is not None]
        grid = np.unique(np.concatenate(grids))
        lo = max(x.domain()[0], y.domain()[0])
        hi = min(x.domain()[1], y.domain()[1])
        grid = grid[(grid >= lo) & (grid <= hi)]
    grid = np.asarray(grid, dtype=float)
    vals = np.einsum("ij,kj,ik->i", x(grid), M, y(grid))
    return Signal.sampled(grid, vals)


# ------------------------------------------------------------------ 闭式卷积

def _complex_atoms(vecs: List[np.ndarray], atom: Atom, lo: float, hi: float) -> List[Atom]:
    """Σ_j Re[v_j (s-σ)^j e^{λ(s-σ)}] 展开为实原子"""
    out = []
    for j, v in enumerate(vecs):
        out.append(Atom(v.real, j, atom.rate, atom.freq, 0.0, lo, hi, atom.shift))
        if atom.freq != 0.0:
            out.append(Atom(v.imag, j, atom.rate, atom.freq, math.pi / 2, lo, hi, atom.shift))
    return out


def _particular(L: np.ndarray, atom: Atom, sign: float, cond_limit: float) -> Optional[List[np.ndarray]]:
    """
    多项式-指数特解系数: L v_j + (j+1) v_{j+1} = sign·w δ_{jk}

    w = c·e^{iφ}；L 病态(共振)时返回 None。
    """
    if np.linalg.cond(L) > cond_limit:
        return None
    w = atom.coeff.astype(complex) * complex(math.cos(atom.phase), math.sin(atom.phase))
    k = atom.power
    vecs = [None] * (k + 1)
    vecs[k] = np.linalg.solve(L, sign * w)
    for j in range(k - 1, -1, -1):
        vecs[j] = -(j + 1) * np.linalg.solve(L, vecs[j + 1])
    return vecs


def _sum_signals(parts: List[Signal], dim: int) -> Signal:
    total = Signal.zero(dim)
    for part in parts:
        total = total + part
    return total


def exp_tail_signal(N: np.ndarray, g: Signal, cond_limit: float = 1e10) -> Optional[Signal]:
    """
    s ↦ ∫_s^∞ e^{N(τ-s)} g(τ) dτ 的闭式表示

    每个原子取 y' + Ny = -g 的多项式-指数特解 Y，在支撑 [lo,hi) 内为
    Y(s) - e^{N(hi-s)}Y(hi)，在 lo 之前为 e^{N(lo-s)}·(lo 处的值)。
    无法闭式表示(采样信号、共振、特征分解病态)时返回 None。

    Raises:
        DivergentTailError: 无界支撑原子的增长率使积分发散
    """
    N = np.atleast_2d(np.asarray(N, dtype=float))
    n = N.shape[0]
    if g.is_zero:
        return Signal.zero(n)
    if not g.is_closed_form:
        return None
    decay = -float(np.max(np.linalg.eigvals(N).real))
    parts: List[Signal] = []
    for atom in g.atoms:
        if not atom.bounded_support and atom.rate >= decay:
            raise DivergentTailError(atom.rate, decay)
        lam = complex(atom.rate, atom.freq)
        vecs = _particular(N + lam * np.eye(n), atom, -1.0, cond_limit)
        if vecs is None:
            return None
        Y = Signal.closed_form(_complex_atoms(vecs, atom, -INF, INF), dim=n)
        lo, hi = atom.lo, atom.hi
        inside = Signal.closed_form(_complex_atoms(vecs, atom, lo, hi), dim=n)
        parts.append(inside)
        corr = Signal.zero(n)
        if math.isfinite(hi):
            corr = matrix_exp_signal(-N, Y(hi), anchor=hi, lo=lo, hi=hi)
            if corr is None:
                return None
            parts.append(-corr)
        if math.isfinite(lo):
            at_lo = Y(lo) - corr(lo)
            before = matrix_exp_signal(-N, at_lo, anchor=lo, hi=lo)
            if before is None:
                return None
            parts.append(before)
    return _sum_signals(parts, n)


def exp_forward_signal(M: np.ndarray, g: Signal, t: float,
                       cond_limit: float = 1e10) -> Optional[Signal]:
    """
    s ↦ ∫_t^s e^{M(s-τ)} g(τ) dτ (s ≥ t，s < t 时为零) 的闭式表示

    每个原子取 y' - My = g 的特解 Y；有效支撑 [a0,a1) = [max(lo,t), hi)，
    结果为 Y(s)·1_[a0,a1) - e^{M(s-a0)}Y(a0) + e^{M(s-a1)}Y(a1)·1_[a1,∞)。
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    if g.is_zero:
        return Signal.zero(n)
    if not g.is_closed_form:
        return None
    parts: List[Signal] = []
    for atom in g.atoms:
        a0, a1 = max(atom.lo, t), atom.hi
        if a1 <= a0:
            continue
        lam = complex(atom.rate, atom.freq)
        vecs = _particular(lam * np.eye(n) - M, atom, 1.0, cond_limit)
        if vecs is None:
            return None
        Y = Signal.closed_form(_complex_atoms(vecs, atom, -INF, INF), dim=n)
        parts.append(Signal.closed_form(_complex_atoms(vecs, atom, a0, a1), dim=n))
        start = matrix_exp_signal(M, Y(a0), anchor=a0, lo=a0)
        if start is None:
            return None
        parts.append(-start)
        if math.isfinite(a1):
            end = matrix_exp_signal(M, Y(a1), anchor=a1, lo=a1)
            if end is None:
                return None
            parts.append(end)
    return _sum_signals(parts, n)
