"""
certify 命令
盒约束下最优控制的 Fredholm 存在性证书
"""

import logging
from typing import Dict

from overtake_lq.core import decay_constants
from overtake_lq.decomp import reduce_to_standard_form
from overtake_lq.fredholm import certify_existence

from .base_command import BaseCommand, CommandResult, PipelineContext

logger = logging.getLogger(__name__)


class CertifyCommand(BaseCommand):
    """存在性证书"""

    name = "certify"
    description = "解 ū + Φ∘ū = -ρ̂₀ - F₀x，检验 ρ̂₁ 的内法向条件"

    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        p = ctx.problem
        U = ctx.scenario.control_set
        payload: Dict = {}
        if not p.standard_form and U.is_full and params.get("reduce", True):
            reduction = reduce_to_standard_form(p, ctx.t, mu_star=float(
                ctx.setting("decomp", "mu_star", 1.0, params)))
            payload["reduction"] = reduction.to_dict()
            p = reduction.reduced
            logger.info("先化为标准形再求证书")

        tol = ctx.tol(params)
        margin = float(ctx.setting("decay", "margin", 1e-6, params))
        inflation = float(ctx.setting("decay", "m_inflation", 1.1, params))
        decay = decay_constants(p.A, margin, inflation)
        split_rule = ctx.setting("fredholm", "split_rule", "coordinate", params)
        n_nodes = int(ctx.setting("fredholm", "nodes", 801, params))
        cert = certify_existence(
            p, ctx.t, ctx.x, U,
            split_rule=split_rule,
            n_nodes=n_nodes,
            tol=tol,
            decay=decay,
            gap_controls=int(ctx.setting("fredholm", "gap_controls", 20, params)),
            seed=int(ctx.setting("random", "seed", 0, params)),
            schedule=ctx.schedule(params),
            max_iter=int(ctx.setting("fredholm", "max_iter", 500, params)),
        )
        ctx.state["certificate"] = cert
        if ctx.u_star is None and params.get("as_reference", True):
            ctx.state["u_star"] = cert.control

        payload["certificate"] = cert.to_dict()
        verdict = "certified" if cert.inner_normal_ok else "not-certified"
        return CommandResult(
            self.name, True,
            payload=payload,
            tables={"certify_control": (cert.header(), cert.to_rows())},
            metadata={"tol": tol, "decay": {"M": decay[0], "mu": decay[1]},
                      "split_rule": split_rule, "nodes": n_nodes, "control_set": U.to_dict()},
            verdict=verdict,
            summary=f"residual={cert.residual:.3g}, inner_normal_ok={cert.inner_normal_ok}",
            label=p.name,
        )
