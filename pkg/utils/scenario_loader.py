"""
场景文件加载器
解析 overtake-lq/1 场景 JSON，校验维数与引用，构造问题与控制信号
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from overtake_lq.core import LqProblem
from overtake_lq.errors import ScenarioError
from overtake_lq.fredholm import BoxControlSet
from overtake_lq.signals import Signal, signal_from_dict

logger = logging.getLogger(__name__)

SCHEMA = "overtake-lq/1"
SYNTHESIZED = "synthesized"


@dataclass
class ControlRef:
    """对流水线中合成控制的引用: scale·ū + add"""
    ref: str = SYNTHESIZED
    scale: float = 1.0
    add: Optional[Signal] = None

    def resolve(self, u_star: Signal) -> Signal:
        out = u_star if self.scale == 1.0 else u_star.scale(self.scale)
        return out if self.add is None else out + self.add

    def to_dict(self) -> Dict:
        return {"ref": self.ref, "scale": self.scale,
                "add": None if self.add is None else self.add.to_dict()}


@dataclass
class PipelineStep:
    command: str
    params: Dict = field(default_factory=dict)
    path: str = ""


@dataclass
class Scenario:
    """一个场景: 问题、初始对、命名控制、控制集与流水线"""
    name: str
    problem: LqProblem
    t: float
    x: np.ndarray
    controls: Dict[str, Union[Signal, ControlRef]]
    control_set: BoxControlSet
    pipeline: List[PipelineStep]
    outputs: Optional[str] = None
    source: Optional[Path] = None
    digest: str = ""

    def __repr__(self):
        return (f"Scenario(name='{self.name}', n={self.problem.n}, m={self.problem.m}, "
                f"controls={list(self.controls)}, commands={[s.command for s in self.pipeline]})")


def _require(data: Dict, key: str, path: str) -> Any:
    if not isinstance(data, dict):
        raise ScenarioError("应为对象", field_path=path)
    if key not in data:
        raise ScenarioError(f"缺少字段 '{key}'", field_path=f"{path}.{key}" if path else key)
    return data[key]


def _matrix(value: Any, path: str, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"无法解析为实矩阵: {e}", field_path=path) from e
    if M.ndim == 1 and cols == 1:
        M = M[:, None]
    elif M.ndim == 1 and rows == 1:
        M = M[None, :]
    elif M.ndim == 0 and rows == 1 and cols == 1:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ScenarioError(f"应为二维数组, 实际维数 {M.ndim}", field_path=path)
    if (rows is not None and M.shape[0] != rows) or (cols is not None and M.shape[1] != cols):
        raise ScenarioError(f"形状应为 ({rows}, {cols}), 实际 {M.shape}", field_path=path)
    if not np.all(np.isfinite(M)):
        raise ScenarioError("矩阵含非有限值", field_path=path)
    return M


def _signal(value: Any, path: str, dim: int) -> Signal:
    if value is None:
        return Signal.zero(dim)
    try:
        sig = signal_from_dict(value, dim=dim)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"信号定义无效: {e}", field_path=path) from e
    if sig.dim != dim:
        raise ScenarioError(f"信号维数应为 {dim}, 实际 {sig.dim}", field_path=path)
    return sig


def _problem(data: Dict, name: str) -> LqProblem:
    A = _matrix(_require(data, "A", "problem"), "problem.A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ScenarioError(f"A 必须是方阵, 实际形状 {A.shape}", field_path="problem.A")
    B = _matrix(_require(data, "B", "problem"), "problem.B", rows=n)
    m = B.shape[1]
    Q = _matrix(data.get("Q", np.zeros((n, n)).tolist()), "problem.Q", n, n)
    S = _matrix(data.get("S", np.zeros((m, n)).tolist()), "problem.S", m, n)
    R = _matrix(data.get("R", np.eye(m).tolist()), "problem.R", m, m)
    signals = {key: _signal(data.get(key), f"problem.{key}", dim)
               for key, dim in (("b", n), ("q", n), ("rho", m), ("phi", 1))}
    try:
        return LqProblem(A, B, Q, S, R, signals["b"], signals["q"], signals["rho"], signals["phi"],
                         standard_form=bool(data.get("standard_form", False)), name=name)
    except ValueError as e:
        raise ScenarioError(str(e), field_path="problem") from e


def _control(value: Any, path: str, m: int) -> Union[Signal, ControlRef]:
    if isinstance(value, dict) and "ref" in value:
        if value["ref"] != SYNTHESIZED:
            raise ScenarioError(f"未知的控制引用: {value['ref']}. 可用引用: ['{SYNTHESIZED}']",
                                field_path=f"{path}.ref")
        add = value.get("add")
        return ControlRef(SYNTHESIZED, float(value.get("scale", 1.0)),
                          None if add is None else _signal(add, f"{path}.add", m))
    return _signal(value, path, m)


def _pipeline(value: Any) -> List[PipelineStep]:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ScenarioError("pipeline 应为数组", field_path="pipeline")
    steps = []
    for i, item in enumerate(value):
        path = f"pipeline[{i}]"
        if isinstance(item, str):
            steps.append(PipelineStep(item, {}, path))
            continue
        command = _require(item, "command", path)
        params = item.get("params", {}) or {}
        if not isinstance(params, dict):
            raise ScenarioError("params 应为对象", field_path=f"{path}.params")
        steps.append(PipelineStep(str(command), dict(params), path))
    return steps


def parse_scenario(text: str, source: Optional[Path] = None,
                   known_commands: Optional[List[str]] = None) -> Scenario:
    """
    解析场景文本

    Args:
        text: JSON 文本
        source: 来源路径(仅用于报告)
        known_commands: 允许的命令名，给出时校验流水线

    Raises:
        ScenarioError: 语法错误(带行列号)、缺少字段、维数不一致或引用无效(带字段路径)
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"JSON 语法错误: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ScenarioError("场景顶层应为对象", field_path="$")
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ScenarioError(f"不支持的场景版本: {schema}. 支持: {SCHEMA}", field_path="schema")

    name = str(data.get("name", source.stem if source else "scenario"))
    problem = _problem(_require(data, "problem", ""), name)
    n, m = problem.n, problem.m

    initial = data.get("initial", {}) or {}
    t = float(initial.get("t", 0.0))
    x = np.array(initial.get("x", [0.0] * n), dtype=float).ravel()
    if x.size != n:
        raise ScenarioError(f"初始状态维数应为 {n}, 实际 {x.size}", field_path="initial.x")

    raw_controls = data.get("controls", {}) or {}
    if not isinstance(raw_controls, dict):
        raise ScenarioError("controls 应为对象", field_path="controls")
    controls = {str(k): _control(v, f"controls.{k}", m) for k, v in raw_controls.items()}

    raw_set = data.get("control_set", "full")
    if raw_set in (None, "full"):
        control_set = BoxControlSet.full(m)
    elif isinstance(raw_set, dict):
        try:
            control_set = BoxControlSet.from_dict(raw_set, m)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"控制集无效: {e}", field_path="control_set") from e
        if control_set.m != m:
            raise ScenarioError(f"控制集维数应为 {m}, 实际 {control_set.m}", field_path="control_set")
    else:
        raise ScenarioError("control_set 应为 \"full\" 或 {lower, upper}", field_path="control_set")

    pipeline = _pipeline(data.get("pipeline"))
    for step in pipeline:
        if known_commands is not None and step.command not in known_commands:
            raise ScenarioError(f"未知的命令: {step.command}. 可用命令: {known_commands}",
                                field_path=f"{step.path}.command")
        for key in ("control", "candidate", "reference"):
            ref = step.params.get(key)
            if isinstance(ref, str) and ref not in controls and ref != SYNTHESIZED:
                raise ScenarioError(f"引用了不存在的控制: {ref}", field_path=f"{step.path}.params.{key}")
        for ref in step.params.get("controls", []) or []:
            if ref not in controls:
                raise ScenarioError(f"引用了不存在的控制: {ref}", field_path=f"{step.path}.params.controls")

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    scenario = Scenario(name, problem, t, x, controls, control_set, pipeline,
                        data.get("outputs"), source, digest)
    logger.info(f"场景已加载: {scenario}")
    return scenario


def load_scenario(path: Union[str, Path], known_commands: Optional[List[str]] = None) -> Scenario:
    """从文件加载场景(UTF-8)"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"无法读取场景文件: {e}", field_path=str(path)) from e
    return parse_scenario(text, path, known_commands)
