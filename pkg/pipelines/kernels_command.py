"""
kernels-dump 命令
导出 F₀x、F₁u 的采样与 L² 界
"""

import logging
from typing import Dict

from overtake_lq.core import decay_constants
from overtake_lq.overtake import corollary_bound, variational_kernels

from .base_command import BaseCommand, CommandResult, PipelineContext, sample_table

logger = logging.getLogger(__name__)


class KernelsDumpCommand(BaseCommand):
    name = "kernels-dump"
    description = "标准形问题的变分核采样、‖F₀x‖² 与 ‖F₁u‖² 的界、常数 C₀"

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        p = ctx.problem
        name = params.get("control")
        u = ctx.control(name)
        tol = ctx.tol(params)
        decay = decay_constants(p.A, float(ctx.setting("decay", "margin", 1e-6, params)),
                                float(ctx.setting("decay", "m_inflation", 1.1, params)))
        kernels = variational_kernels(p, ctx.t, ctx.x, u, tol, decay)
        c0 = corollary_bound(p, ctx.t, ctx.x, u, decay, tol)

        span = float(ctx.setting("kernels", "sample_span", 20.0, params))
        step = float(ctx.setting("kernels", "sample_step", 0.05, params))
        tables = {
            "kernels_samples": sample_table(ctx.t, span, step, {"F0x": kernels.F0x,
                                                                "F1u": kernels.F1u, "u": u}),
            "kernels_bounds": (["kernel", "l2_squared", "bound", "holds"], kernels.bound_rows()),
        }
        return CommandResult(
            self.name, True,
            payload={"kernels": kernels.to_dict(), "C0": c0},
            tables=tables,
            metadata={"tol": tol, "decay": {"M": decay[0], "mu": decay[1]},
                      "sample_span": span, "sample_step": step},
            verdict="bounds-hold" if kernels.bounds_hold else "bounds-violated",
            summary=f"{kernels!r}, C0={c0:.6g}",
            label=name or "synthesized",
        )
