"""
refute 命令
q 的增长报告与各不存在性结论的见证控制
"""

import logging
from typing import Dict

from tqdm import tqdm

from overtake_lq.diagnose import THEOREM_IDS, growth_report, refute
from overtake_lq.errors import OvertakeError
from overtake_lq.overtake import DEFAULT_K, INCONCLUSIVE, REFUTED, TRACE_HEADER
from overtake_lq.signals import Signal

from .base_command import BaseCommand, CommandResult, PipelineContext

logger = logging.getLogger(__name__)

# 透传给见证构造的参数
WITNESS_KEYS = ("eta", "mu", "theta", "theta0", "radius", "grid_delta")


class RefuteCommand(BaseCommand):
    """不存在性诊断"""

    name = "refute"
    description = "增长条件检验，前提成立时构造见证控制并比较代价差"

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        p = ctx.problem
        if "theorem" in params:
            theorems = [params["theorem"]]
        else:
            theorems = list(params.get("theorems") or THEOREM_IDS)
        unknown = [th for th in theorems if th not in THEOREM_IDS]
        if unknown:
            raise ValueError(f"未知的定理编号: {unknown}. 可用编号: {list(THEOREM_IDS)}")

        candidate = params.get("candidate")
        if candidate is not None or ctx.u_star is not None:
            u_star = ctx.control(candidate)
        else:
            u_star = Signal.zero(p.m)
            logger.info("没有候选控制，以 u* ≡ 0 为待反驳对象")

        settings = {
            "epsilon": float(ctx.setting("diagnose", "epsilon", 0.05, params)),
            "delta": float(ctx.setting("diagnose", "delta", 1.0, params)),
            "r0": float(ctx.setting("diagnose", "r0", 100.0, params)),
            "horizon_step": float(ctx.setting("diagnose", "horizon_step", 4.0, params)),
            "window": int(ctx.setting("schedule", "window", 5, params)),
            "K": int(params.get("K", DEFAULT_K)),
        }
        sweep_K = int(ctx.setting("diagnose", "K", 8, params, "sweep_K"))
        settings["T0"] = float(params.get(
            "T0", ctx.t + float(ctx.setting("diagnose", "t0_offset", 8.0, params))))
        if "step" in params:
            settings["step"] = float(params["step"])
        witness = dict(settings)
        witness.update({k: params[k] for k in WITNESS_KEYS if k in params})

        report = growth_report(p.q, p, eta=params.get("eta"), epsilon=settings["epsilon"],
                               delta=settings["delta"], mu=params.get("mu"), t=ctx.t, K=sweep_K,
                               r0=settings["r0"], tol=ctx.tol(params),
                               seed=int(ctx.setting("random", "seed", 0, params)))
        ctx.state["growth_report"] = report

        traces, tables, skipped = [], {}, {}
        for theorem in tqdm(theorems, desc="反驳", disable=not ctx.verbose):
            try:
                trace = refute(p, ctx.t, ctx.x, u_star, theorem,
                               params=dict(witness, label=theorem), report=report)
            except OvertakeError as e:
                logger.warning(f"{theorem} 无法构造见证: {type(e).__name__}: {e}")
                skipped[theorem] = f"{type(e).__name__}: {e}"
                continue
            traces.append(trace)
            header = list(TRACE_HEADER)
            rows = trace.to_rows()
            if trace.predicted is not None:
                header.append("predicted")
                rows = [row + [float(v)] for row, v in zip(rows, trace.predicted)]
            tables[f"refute_{theorem}"] = (header, rows)

        flags_rows = [[name, cert.status, cert.method, cert.window[0], cert.window[1], cert.margin]
                      for name, cert in report.flags.items()]
        tables["growth_flags"] = (["flag", "status", "method", "window_lo", "window_hi", "margin"],
                                  flags_rows)
        verdicts = {tr.label: tr.verdict for tr in traces}
        verdicts.update({th: INCONCLUSIVE for th in skipped})
        verdict = REFUTED if REFUTED in verdicts.values() else INCONCLUSIVE
        return CommandResult(
            self.name, True,
            payload={"growth_report": report.to_dict(),
                     "traces": [tr.to_dict() for tr in traces],
                     "verdicts": verdicts,
                     "skipped": skipped},
            tables=tables,
            metadata={"tol": ctx.tol(params), "sweep_K": sweep_K, **settings},
            verdict=verdict,
            summary="; ".join(f"{k}: {v}" for k, v in verdicts.items()),
            label=params.get("candidate") or ("synthesized" if ctx.u_star is not None else "zero"),
        )
