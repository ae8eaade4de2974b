"""
流水线命令基类
定义统一的命令接口、运行上下文与结果结构
"""

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from overtake_lq.core import LqProblem
from overtake_lq.errors import NotApplicableError, OvertakeError
from overtake_lq.overtake import horizon_schedule
from overtake_lq.signals import Signal
from utils.scenario_loader import SYNTHESIZED, ControlRef, Scenario

logger = logging.getLogger(__name__)

Table = Tuple[List[str], List[List[Any]]]


@dataclass
class CommandResult:
    """一条命令的结果"""
    command: str
    success: bool
    payload: Dict = field(default_factory=dict)
    tables: Dict[str, Table] = field(default_factory=dict)
    metadata: Dict = field(default_factory=dict)
    error: Optional[str] = None
    error_type: Optional[str] = None
    verdict: str = ""
    summary: str = ""
    label: str = ""
    elapsed: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "command": self.command,
            "label": self.label,
            "success": self.success,
            "error": self.error,
            "error_type": self.error_type,
            "verdict": self.verdict,
            "summary": self.summary,
            "metadata": self.metadata,
            "tables": sorted(self.tables),
            "payload": self.payload,
        }

    def __repr__(self):
        state = "✓" if self.success else f"✗ {self.error_type}"
        return f"CommandResult({self.command}: {state}, verdict='{self.verdict}')"


@dataclass
class PipelineContext:
    """
    流水线共享状态

    state 中依次积累 decomposition / synthesis / u_star / growth_report 等，
    供后续命令使用。
    """
    scenario: Scenario
    config: Dict = field(default_factory=dict)
    overrides: Dict = field(default_factory=dict)
    state: Dict = field(default_factory=dict)
    verbose: bool = False

    @property
    def problem(self) -> LqProblem:
        return self.scenario.problem

    @property
    def t(self) -> float:
        return self.scenario.t

    @property
    def x(self) -> np.ndarray:
        return self.scenario.x

    def setting(self, section: str, key: str, default: Any = None,
                params: Optional[Dict] = None, param_key: Optional[str] = None) -> Any:
        """命令行覆盖 > 命令 params > config.yaml > 默认值"""
        name = param_key or key
        if name in self.overrides and self.overrides[name] is not None:
            return self.overrides[name]
        if params is not None and name in params:
            return params[name]
        value = self.config.get(section, {}).get(key, default)
        return default if value is None else value

    def tol(self, params: Optional[Dict] = None) -> float:
        return float(self.setting("tolerances", "tol", 1e-10, params))

    def schedule(self, params: Optional[Dict] = None, start: Optional[float] = None) -> np.ndarray:
        """时域序列: schedule / K / linear_step / horizon_max"""
        params = params or {}
        if "horizons" in params:
            return np.asarray(params["horizons"], dtype=float)
        kind = self.setting("schedule", "kind", "geom", params, "schedule")
        K = int(self.setting("schedule", "K", 6, params))
        step = float(self.setting("schedule", "linear_step", 4.0, params))
        horizon_max = self.setting("schedule", "horizon_max", None, params)
        return horizon_schedule(self.t if start is None else start, kind, K, step,
                                None if horizon_max is None else float(horizon_max))

    @property
    def u_star(self) -> Optional[Signal]:
        return self.state.get("u_star")

    def control(self, name: Optional[str]) -> Signal:
        """
        按名字取控制；None 或 "synthesized" 取流水线合成的 ū

        Raises:
            NotApplicableError: 引用了合成控制但流水线中还没有 synthesize
        """
        if name is None or name == SYNTHESIZED:
            if self.u_star is None:
                raise NotApplicableError("需要先运行 synthesize 命令得到 ū")
            return self.u_star
        entry = self.scenario.controls[name]
        if isinstance(entry, ControlRef):
            if self.u_star is None:
                raise NotApplicableError(f"控制 '{name}' 引用合成控制，但流水线中还没有 synthesize")
            return entry.resolve(self.u_star)
        return entry


def sample_table(t: float, span: float, step: float, signals: Dict[str, Signal]) -> Table:
    """把若干信号在 [t, t+span] 的均匀网格上制表；采样信号截到其定义域"""
    hi = t + span
    for sig in signals.values():
        if sig.is_sampled:
            hi = min(hi, sig.domain()[1])
    grid = np.linspace(t, hi, int(round((hi - t) / step)) + 1) if hi > t else np.array([t])
    header = ["s"]
    columns = []
    for name, sig in signals.items():
        header += [f"{name}_{i + 1}" for i in range(sig.dim)] if sig.dim > 1 else [name]
        columns.append(sig(grid))
    values = np.hstack(columns) if columns else np.zeros((grid.size, 0))
    rows = [[float(s)] + [float(v) for v in row] for s, row in zip(grid, values)]
    return header, rows


def file_label(label: str) -> str:
    """表格文件名中使用的标签"""
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


class BaseCommand(ABC):
    """流水线命令基类"""

    name = "base"
    description = ""
    parallel_safe = False

    def __init__(self, **kwargs):
        self.options = kwargs

    @abstractmethod
    def run(self, ctx: PipelineContext, params: Dict) -> CommandResult:
        """
        执行命令

        Args:
            ctx: 运行上下文
            params: 场景中该命令的参数

        Returns:
            CommandResult
        """
        pass

    def execute(self, ctx: PipelineContext, params: Optional[Dict] = None) -> CommandResult:
        """执行并把数值错误记入结果，不向外抛出"""
        params = dict(params or {})
        start = time.time()
        try:
            result = self.run(ctx, params)
        except (OvertakeError, ValueError, ArithmeticError) as e:
            logger.warning(f"命令 {self.name} 失败: {type(e).__name__}: {e}")
            result = CommandResult(self.name, False, error=str(e), error_type=type(e).__name__,
                                   verdict="error")
        result.elapsed = time.time() - start
        result.metadata.setdefault("params", params)
        return result

    def __repr__(self):
        return f"{self.__class__.__name__}(name='{self.name}')"
