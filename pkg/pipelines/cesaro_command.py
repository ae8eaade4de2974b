"""
cesaro-sweep 命令
一条轨迹上 (1/T)∫_0^T g ds 随 T 的变化
"""

import logging
from typing import Dict, List

import numpy as np

from overtake_lq.errors import StateOverflowError
from overtake_lq.sim import EXACT_STEP, cesaro_sweep
from overtake_lq.signals import Signal

from .base_command import BaseCommand, CommandResult, PipelineContext

logger = logging.getLogger(__name__)

DIVERGENT = "divergent"
SETTLING = "settling"
SETTLE_TOL = 1e-3


def classify_means(means: List[float]) -> str:
    """均值严格递增且增量不减视为发散；末两项相对变化小于 SETTLE_TOL 视为趋于稳定"""
    values = np.asarray(means, dtype=float)
    if values.size < 2 or not np.all(np.isfinite(values)):
        return DIVERGENT if values.size and not np.all(np.isfinite(values)) else "inconclusive"
    steps = np.diff(values)
    if np.all(steps > 0) and (steps.size < 2 or np.all(np.diff(steps) >= 0)):
        return DIVERGENT
    if abs(steps[-1]) <= SETTLE_TOL * max(1.0, abs(values[-1])):
        return SETTLING
    return "inconclusive"


class CesaroSweepCommand(BaseCommand):
    """Cesàro 均值扫描"""

    name = "cesaro-sweep"
    description = "在给定时域上计算 Cesàro 均值，判断是否发散"
    parallel_safe = True

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        p = ctx.problem
        name = params.get("control")
        u = ctx.control(name) if name is not None else Signal.zero(p.m)
        horizons = [float(T) for T in (params.get("horizons")
                                       or ctx.setting("means", "cesaro_horizons", [1, 2, 3, 4, 8]))]
        step = float(ctx.setting("sim", "exact_step", EXACT_STEP, params, "step"))
        method = ctx.setting("sim", "method", "exact", params)
        horizon_max = ctx.setting("schedule", "horizon_max", None, params)
        if horizon_max is not None:
            horizons = [T for T in horizons if T <= float(horizon_max)]

        overflow = None
        try:
            rows = cesaro_sweep(p, ctx.x, u, horizons, step, method)
        except StateOverflowError as e:
            logger.warning(f"Cesàro 扫描中状态溢出: {e}")
            overflow = str(e)
            rows = []
            for T in horizons:
                try:
                    rows += cesaro_sweep(p, ctx.x, u, [T], step, method)
                except StateOverflowError:
                    rows.append({"T": T, "cesaro_mean": float("inf"), "J_T": float("inf")})

        means = [r["cesaro_mean"] for r in rows]
        verdict = classify_means(means)
        table = (["T", "J_T", "cesaro_mean"], [[r["T"], r["J_T"], r["cesaro_mean"]] for r in rows])
        return CommandResult(
            self.name, True,
            payload={"control": name or "zero", "sweep": rows, "overflow": overflow},
            tables={"cesaro_sweep": table},
            metadata={"horizons": horizons, "step": step, "method": method,
                      "settle_tol": SETTLE_TOL, "start": 0.0},
            verdict=verdict,
            summary=", ".join(f"T={r['T']:g}: {r['cesaro_mean']:.6g}" for r in rows),
            label=name or "zero",
        )
