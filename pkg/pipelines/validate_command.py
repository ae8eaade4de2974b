"""
validate 命令
检查可控性、稳定性、衰减常数与 (H)/(QSR)
"""

import logging
from typing import Dict

from overtake_lq.core import validate_problem

from .base_command import BaseCommand, CommandResult, PipelineContext

logger = logging.getLogger(__name__)


class ValidateCommand(BaseCommand):
    """问题假设检查"""

    name = "validate"
    description = "可控性、稳定性、(M, μ)、q 的可积性、(H) 与 (QSR)"
    parallel_safe = True

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        tol = ctx.tol(params)
        rank_tol = float(ctx.setting("tolerances", "rank", 1e-9, params, "rank_tol"))
        margin = float(ctx.setting("decay", "margin", 1e-6, params))
        inflation = float(ctx.setting("decay", "m_inflation", 1.1, params))
        report = validate_problem(ctx.problem, tol, rank_tol, margin, inflation)
        ctx.state["hypotheses"] = report

        marks = [f"controllable={'✓' if report.controllable else '✗'}",
                 f"stable_A={'✓' if report.stable_A else '✗'}",
                 f"(H)={'✓' if report.satisfies_H else '✗'}"]
        return CommandResult(
            self.name, True,
            payload={"problem": ctx.problem.to_dict(), "hypotheses": report.to_dict()},
            metadata={"tol": tol, "rank_tol": rank_tol, "decay_margin": margin,
                      "m_inflation": inflation},
            verdict="satisfies_H" if report.satisfies_H else
                    ("controllable" if report.controllable else "uncontrollable"),
            summary=", ".join(marks),
            label=ctx.problem.name,
        )
