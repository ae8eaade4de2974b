"""
synthesize 命令
在可控部分上解 Riccati 方程与 η 方程，合成闭环最优控制
"""

import logging
from typing import Dict

from overtake_lq.core import is_controllable
from overtake_lq.errors import NotApplicableError
from overtake_lq.riccati import solve_are, solve_eta, synthesize_optimal, value_function

from .base_command import BaseCommand, CommandResult, PipelineContext, sample_table
from .decompose_command import run_decomposition

logger = logging.getLogger(__name__)


class SynthesizeCommand(BaseCommand):
    """ū = Θ̄X̄ + v̄"""

    name = "synthesize"
    description = "可控时直接求解，否则在 ℍ₀ 坐标下的投影问题上求解"

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        p = ctx.problem
        tol = ctx.tol(params)
        are_tol = float(ctx.setting("tolerances", "are_residual", 1e-9, params, "are_tol"))
        check_factor = float(ctx.setting("tolerances", "eta_check_factor", 10.0, params))
        rank_tol = float(ctx.setting("tolerances", "rank", 1e-9, params, "rank_tol"))
        include_coupling = bool(ctx.setting("decomp", "include_coupling", False, params))

        if is_controllable(p.A, p.B, rank_tol) and not params.get("force_decompose", False):
            work, x0, route = p, ctx.x, "direct"
        else:
            dp = ctx.state.get("decomposition") or run_decomposition(ctx, params)
            work = dp.projected_problem(include_coupling=include_coupling)
            x0, route = dp.initial_coords, "projected"
            logger.info(f"在 ℍ₀ 上综合 (ℓ={dp.sub.dim}, 耦合={include_coupling})")

        ric = solve_are(work.A, work.B, work.Q, work.S, work.R, tol=are_tol)
        eta = solve_eta(work, ric, ctx.t, tol, check_factor=check_factor)
        syn = synthesize_optimal(work, ric, eta, ctx.t, x0,
                                 horizon=float(ctx.setting("decomp", "horizon", 40.0, params)))
        try:
            value = value_function(work, ric, eta, ctx.t, x0, tol)
        except NotApplicableError as e:
            logger.warning(f"值函数不适用: {e}")
            value = None

        ctx.state.update(u_star=syn.control, synthesis=syn, riccati=ric, eta=eta,
                         working_problem=work, working_x=x0)
        span = float(params.get("sample_span", 20.0))
        step = float(params.get("sample_step", 0.1))
        table = sample_table(ctx.t, span, step, {"u_star": syn.control, "X_bar": syn.trajectory})
        return CommandResult(
            self.name, True,
            payload={"route": route, "working_problem": work.to_dict(), "riccati": ric.to_dict(),
                     "eta": eta.to_dict(), "synthesis": syn.to_dict(), "value": value},
            tables={"synthesis": table},
            metadata={"tol": tol, "are_tol": are_tol, "eta_check_factor": check_factor,
                      "include_coupling": include_coupling, "sample_step": step},
            verdict="synthesized",
            summary=(f"P={ric.P.tolist()}, 闭环衰减率={ric.closed_loop_decay:.10g}, "
                     f"V={'n/a' if value is None else f'{value:.10g}'}"),
            label=work.name,
        )
