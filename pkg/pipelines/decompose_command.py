"""
decompose 命令
可控子空间 ℍ₀ 上的分解、变换后的代价数据与相容性检查
"""

import logging
from typing import Dict

import numpy as np

from overtake_lq.decomp import decompose

from .base_command import BaseCommand, CommandResult, PipelineContext

logger = logging.getLogger(__name__)


def run_decomposition(ctx: PipelineContext, params: Dict):
    """按配置分解并缓存到上下文"""
    dp = decompose(
        ctx.problem,
        theta_choice=ctx.setting("decomp", "theta_choice", "place", params),
        t=ctx.t,
        x=ctx.x,
        mu_star=float(ctx.setting("decomp", "mu_star", 1.0, params)),
        horizon=float(ctx.setting("decomp", "horizon", 40.0, params)),
        tol=ctx.tol(params),
    )
    ctx.state["decomposition"] = dp
    return dp


class DecomposeCommand(BaseCommand):
    """ℍ₀ ⊕ ℍ₀⊥ 分解"""

    name = "decompose"
    description = "可控子空间、投影矩阵、镇定器 Θ 与变换后的代价数据"

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        dp = run_decomposition(ctx, params)
        sub = dp.sub
        P = sub.Pi
        identities = {
            "Pi_idempotent": float(np.linalg.norm(P @ P - P)),
            "PiPerp_A_Pi": float(np.linalg.norm(sub.PiPerp @ ctx.problem.A @ P)),
            "PiPerp_B": float(np.linalg.norm(sub.PiPerp @ ctx.problem.B)),
        }
        compat = dp.compatibility
        rows = [[i] + [float(v) for v in col] for i, col in enumerate(sub.basis.T)]
        header = ["column"] + [f"e{i + 1}" for i in range(sub.n)]
        return CommandResult(
            self.name, True,
            payload={"decomposition": dp.to_dict(), "identities": identities},
            tables={"decompose_basis": (header, rows)},
            metadata={"tol": ctx.tol(params),
                      "mu_star": float(ctx.setting("decomp", "mu_star", 1.0, params)),
                      "theta_choice": ctx.setting("decomp", "theta_choice", "place", params)},
            verdict="compatible" if compat.compatible else "incompatible",
            summary=f"dim ℍ₀ = {sub.dim}/{sub.n}",
            label=ctx.problem.name,
        )
