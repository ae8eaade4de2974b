"""
数值积分
自适应复合Gauss-Legendre积分与(非均匀)复合Simpson权重
"""

import logging
from functools import lru_cache
from typing import Callable, Iterable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

logger = logging.getLogger(__name__)

DEFAULT_NODES = 16


@lru_cache(maxsize=8)
def gauss_legendre(n: int = DEFAULT_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """[-1,1] 上的 n 点 Gauss-Legendre 节点与权重"""
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_nodes(a: float, b: float, n: int = DEFAULT_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """[a,b] 上的节点与权重"""
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def gl_panel(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
             n: int = DEFAULT_NODES) -> np.ndarray:
    """单个面板上的积分，f 接受节点数组返回 (N, d) 数组"""
    x, w = gl_nodes(a, b, n)
    vals = np.asarray(f(x), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return w @ vals


def adaptive_gauss_legendre(f: Callable[[np.ndarray], np.ndarray],
                            a: float, b: float, tol: float,
                            breakpoints: Iterable[float] = (),
                            n: int = DEFAULT_NODES,
                            max_depth: int = 48) -> Tuple[np.ndarray, float]:
    """
    自适应复合Gauss-Legendre积分

    先在断点处切分，再对每段做二分，直到面板与两个半面板之差不超过
    按长度分配的容差。

    Args:
        f: 被积函数，接受一维节点数组，返回 (N, d)
        a, b: 积分区间 (a ≤ b)
        tol: 绝对误差容差
        breakpoints: 被积函数的间断点
        n: 每个面板的节点数
        max_depth: 最大二分深度

    Returns:
        (积分值, 误差估计)
    """
    if b <= a:
        sample = np.asarray(f(np.array([a])), dtype=float)
        return np.zeros(sample.size), 0.0
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a] + cuts + [b]
    total_len = b - a
    total = None
    err_total = 0.0
    hit_depth = False
    for lo, hi in zip(edges[:-1], edges[1:]):
        stack = [(lo, hi, gl_panel(f, lo, hi, n), 0)]
        while stack:
            p_lo, p_hi, whole, depth = stack.pop()
            mid = 0.5 * (p_lo + p_hi)
            left = gl_panel(f, p_lo, mid, n)
            right = gl_panel(f, mid, p_hi, n)
            refined = left + right
            err = float(np.max(np.abs(refined - whole)))
            local_tol = tol * (p_hi - p_lo) / total_len
            scale_tol = 1e-14 * float(np.max(np.abs(refined)))
            if err <= max(local_tol, scale_tol) or depth >= max_depth:
                if depth >= max_depth and err > max(local_tol, scale_tol):
                    hit_depth = True
                total = refined if total is None else total + refined
                err_total += err
            else:
                stack.append((p_lo, mid, left, depth + 1))
                stack.append((mid, p_hi, right, depth + 1))
    if hit_depth:
        logger.warning(f"自适应积分在 [{a:g}, {b:g}] 上达到最大深度, 误差估计 {err_total:.3e}")
    return total, err_total


def simpson_weights(grid: np.ndarray) -> np.ndarray:
    """
    非均匀复合Simpson权重

    Args:
        grid: 奇数个严格递增节点，相邻两个子区间组成一个Simpson单元

    Returns:
        与 grid 同长的权重
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3 or grid.size % 2 == 0:
        raise ValueError(f"Simpson网格需要奇数个(≥3)节点, 当前 {grid.size}")
    w = np.zeros(grid.size)
    h0 = grid[1:-1:2] - grid[0:-2:2]
    h1 = grid[2::2] - grid[1:-1:2]
    hs = h0 + h1
    w[0:-2:2] += hs / 6.0 * (2.0 - h1 / h0)
    w[1:-1:2] += hs ** 3 / (6.0 * h0 * h1)
    w[2::2] += hs / 6.0 * (2.0 - h0 / h1)
    return w


def uniform_grid(lo: float, hi: float, n_nodes: int) -> np.ndarray:
    """均匀Simpson网格，节点数取不小于 n_nodes 的奇数"""
    if n_nodes % 2 == 0:
        n_nodes += 1
    return np.linspace(lo, hi, max(n_nodes, 3))
