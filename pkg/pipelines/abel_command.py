"""
abel-sweep 命令
对若干折现率 λ 计算 ∫_0^∞ e^{-λs} g ds 或给出发散报告
"""

import logging
from typing import Dict

from tqdm import tqdm

from overtake_lq.sim import EXACT_STEP, abel_mean
from overtake_lq.signals import Signal

from .base_command import BaseCommand, CommandResult, PipelineContext

logger = logging.getLogger(__name__)


class AbelSweepCommand(BaseCommand):
    """Abel 均值扫描"""

    name = "abel-sweep"
    description = "逐个 λ 计算 Abel 均值；包络增长时报告发散及已见证的下界"
    parallel_safe = True

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        p = ctx.problem
        name = params.get("control")
        u = ctx.control(name) if name is not None else Signal.zero(p.m)
        if "lambda" in params:
            lambdas = [float(params["lambda"])]
        else:
            lambdas = [float(v) for v in (params.get("lambdas")
                                          or ctx.setting("means", "abel_lambdas", [3, 5]))]
        tol = float(ctx.setting("means", "abel_tol", 1e-8, params))
        horizon0 = float(ctx.setting("means", "abel_horizon0", 10.0, params, "horizon0"))
        max_horizon = float(ctx.setting("means", "abel_max_horizon", 160.0, params, "max_horizon"))
        step = float(ctx.setting("sim", "exact_step", EXACT_STEP, params, "step"))
        method = ctx.setting("sim", "method", "exact", params)

        results = []
        for lam in tqdm(lambdas, desc="Abel", disable=not ctx.verbose):
            res = abel_mean(p, ctx.x, u, lam, tol=tol, horizon0=horizon0,
                            max_horizon=max_horizon, step=step, method=method)
            logger.info(f"{res}")
            results.append(res)

        header = ["lambda", "converged", "value", "envelope_rate", "lower_bound", "horizon"]
        rows = [[r.lam, r.converged, r.value, r.envelope_rate, r.lower_bound, r.horizon]
                for r in results]
        converged = [r.converged for r in results]
        if all(converged):
            verdict = "convergent"
        elif not any(converged):
            verdict = "divergent"
        else:
            verdict = "mixed"
        return CommandResult(
            self.name, True,
            payload={"control": name or "zero", "results": [r.to_dict() for r in results]},
            tables={"abel_sweep": (header, rows)},
            metadata={"tol": tol, "horizon0": horizon0, "max_horizon": max_horizon,
                      "step": step, "method": method},
            verdict=verdict,
            summary="; ".join(repr(r) for r in results),
            label=name or "zero",
        )
