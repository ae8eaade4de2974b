"""
compare 命令
u* 与比较控制的有限时域代价差轨迹及尾部窗口结论
"""

import logging
from typing import Dict, List

from tqdm import tqdm

from overtake_lq.errors import NotApplicableError
from overtake_lq.overtake import (INCONCLUSIVE, OVERTAKING, REFUTED, TRACE_HEADER,
                                  WEAKLY_OVERTAKING, comparison_trace, random_controls)
from overtake_lq.sim import EXACT_STEP

from .base_command import BaseCommand, CommandResult, PipelineContext, file_label

logger = logging.getLogger(__name__)


def aggregate_verdict(verdicts: List[str]) -> str:
    """所有比较都支持超越最优才给出 overtaking-evidence"""
    if not verdicts:
        return INCONCLUSIVE
    if REFUTED in verdicts:
        return REFUTED
    if all(v == OVERTAKING for v in verdicts):
        return OVERTAKING
    if all(v in (OVERTAKING, WEAKLY_OVERTAKING) for v in verdicts):
        return WEAKLY_OVERTAKING
    return INCONCLUSIVE


class CompareCommand(BaseCommand):
    """ΔJ(T_k) = J_{T_k}(u*) - J_{T_k}(u)"""

    name = "compare"
    description = "对命名控制及随机扰动逐一比较，输出每条轨迹的 CSV"

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        space = params.get("space", "full")
        if space == "projected":
            if "working_problem" not in ctx.state:
                raise NotApplicableError("space=projected 需要先运行 synthesize 命令")
            p, x = ctx.state["working_problem"], ctx.state["working_x"]
        elif space == "full":
            p, x = ctx.problem, ctx.x
        else:
            raise ValueError(f"未知的比较空间: {space}. 可用: ['full', 'projected']")
        u_star = ctx.control(params.get("reference"))
        names = params.get("controls") or list(ctx.scenario.controls)
        schedule = ctx.schedule(params)
        window = int(ctx.setting("schedule", "window", 5, params))
        eps_v = float(ctx.setting("decision", "eps_v_factor", 1e-6, params))
        eps_d = float(ctx.setting("decision", "eps_d_factor", 1e-8, params))
        step = float(ctx.setting("sim", "exact_step", EXACT_STEP, params, "step"))
        method = ctx.setting("sim", "method", "exact", params)

        comparisons = [(name, ctx.control(name)) for name in names]
        count = int(ctx.setting("random", "count", 0, params, "random"))
        if count:
            seed = int(ctx.setting("random", "seed", 0, params))
            batch = random_controls(
                p.m, ctx.t, count, seed=seed,
                span=float(ctx.setting("random", "span", 4.0, params)),
                pieces=int(ctx.setting("random", "pieces", 8, params)),
                amplitude=float(ctx.setting("random", "amplitude", 1.0, params)))
            comparisons += [(f"random_{i + 1}", u_star + w) for i, w in enumerate(batch)]

        traces, tables = [], {}
        for label, u in tqdm(comparisons, desc="比较", disable=not ctx.verbose):
            trace = comparison_trace(p, ctx.t, x, u_star, u, schedule, window, eps_v, eps_d,
                                     step, method, label)
            traces.append(trace)
            tables[f"compare_{file_label(label)}"] = (TRACE_HEADER, trace.to_rows())

        verdicts = [tr.verdict for tr in traces]
        verdict = aggregate_verdict(verdicts)
        return CommandResult(
            self.name, True,
            payload={"traces": [tr.to_dict() for tr in traces], "verdicts": dict(zip(
                [tr.label for tr in traces], verdicts))},
            tables=tables,
            metadata={"space": space, "schedule": [float(T) for T in schedule], "window": window,
                      "eps_v_factor": eps_v, "eps_d_factor": eps_d, "step": step,
                      "method": method},
            verdict=verdict,
            summary="; ".join(f"{tr.label}: {tr.verdict}" for tr in traces),
            label=params.get("reference") or "synthesized",
        )
