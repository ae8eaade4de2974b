"""
场景运行器
加载配置与场景，按流水线依次执行命令并写出报告、CSV 与清单
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import yaml

from overtake_lq.errors import ScenarioError
from pipelines import PipelineContext, get_command, list_commands
from pipelines.base_command import CommandResult
from utils.report_writer import ReportWriter
from utils.scenario_loader import Scenario, load_scenario

logger = logging.getLogger(__name__)

# 可由命令行覆盖的设置
OVERRIDE_KEYS = ("tol", "horizon_max", "schedule", "seed")


class ScenarioRunner:
    """场景运行器"""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict] = None,
                 verbose: bool = False):
        """
        Args:
            config_path: 配置文件路径，缺省为同目录下的 config.yaml
            overrides: 命令行覆盖项 tol / horizon_max / schedule / seed / out / excel / workers
            verbose: 显示进度条
        """
        self.config = self._load_config(config_path)
        self.overrides = dict(overrides or {})
        self.verbose = verbose
        self.results: List[CommandResult] = []
        self.scenario: Optional[Scenario] = None

    def _load_config(self, config_path: Optional[str] = None) -> Dict:
        """加载配置文件"""
        if config_path is None:
            config_path = Path(__file__).parent / "config.yaml"

        if Path(config_path).exists():
            with open(config_path, 'r', encoding='utf-8') as f:
                return yaml.safe_load(f) or {}
        logger.warning(f"配置文件不存在，使用内置默认值: {config_path}")
        return {}

    def output_dir(self, scenario: Scenario) -> Path:
        """--out > 场景 outputs > config output.directory"""
        out = self.overrides.get("out") or scenario.outputs \
            or self.config.get("output", {}).get("directory") or "output"
        return Path(out)

    def _groups(self, scenario: Scenario) -> List[List[int]]:
        """把相邻的可并行命令归为一组"""
        groups: List[List[int]] = []
        prev_safe = False
        for i, step in enumerate(scenario.pipeline):
            safe = get_command(step.command).parallel_safe
            if safe and prev_safe:
                groups[-1].append(i)
            else:
                groups.append([i])
            prev_safe = safe
        return groups

    def execute(self, scenario: Scenario) -> List[CommandResult]:
        """执行流水线；单个命令的数值错误只记入该命令的结果"""
        ctx = PipelineContext(scenario, self.config,
                              {k: self.overrides.get(k) for k in OVERRIDE_KEYS},
                              verbose=self.verbose)
        workers = int(self.overrides.get("workers") or self.config.get("runner", {}).get("workers", 1))
        results: List[Optional[CommandResult]] = [None] * len(scenario.pipeline)

        for group in self._groups(scenario):
            if len(group) > 1 and workers > 1:
                logger.info(f"并行执行命令 {[scenario.pipeline[i].command for i in group]}")
                with ThreadPoolExecutor(max_workers=workers) as executor:
                    futures = {i: executor.submit(get_command(scenario.pipeline[i].command).execute,
                                                  ctx, scenario.pipeline[i].params)
                               for i in group}
                    for i, future in futures.items():
                        results[i] = future.result()
                continue
            for i in group:
                step = scenario.pipeline[i]
                logger.info(f"[{i + 1}/{len(scenario.pipeline)}] {step.command}")
                results[i] = get_command(step.command).execute(ctx, step.params)

        for i, result in enumerate(results):
            mark = "✓" if result.success else "✗"
            logger.info(f"{mark} {scenario.pipeline[i].command}: {result.verdict} "
                        f"({result.elapsed:.2f}s)")
        return results

    def write_artifacts(self, scenario: Scenario, results: List[CommandResult]) -> Dict:
        """写出 CSV、report.json、可选 Excel 与 manifest.json"""
        writer = ReportWriter(str(self.output_dir(scenario)))
        entries = []
        for i, result in enumerate(results, start=1):
            files = []
            for name, (header, rows) in sorted(result.tables.items()):
                path = writer.write_table(f"{i:02d}_{name}", header, rows)
                files.append(path.name)
            entry = {"index": i, **result.to_dict(), "tables": files}
            entries.append(entry)

        config_used = {"config": self.config,
                       "overrides": {k: self.overrides.get(k) for k in OVERRIDE_KEYS}}
        writer.write_report(scenario.name, scenario.digest, entries, config_used)

        excel = self.overrides.get("excel")
        if excel is None:
            excel = self.config.get("output", {}).get("excel", False)
        if excel:
            writer.export_to_excel([{k: e[k] for k in ("index", "command", "label", "success",
                                                        "verdict", "summary", "error")}
                                    for e in entries])
        return writer.write_manifest()

    def run(self, path: Union[str, Path]) -> Tuple[int, Dict]:
        """
        运行一个场景文件

        Returns:
            (退出码, 清单)；场景无效或 I/O 失败时退出码为 1
        """
        try:
            scenario = self.scenario = load_scenario(path, list_commands())
        except ScenarioError as e:
            logger.error(f"场景无效: {e}")
            return 1, {}

        if not scenario.pipeline:
            logger.info("流水线为空，不写出任何文件")
            return 0, {"files": []}

        results = self.results = self.execute(scenario)
        try:
            manifest = self.write_artifacts(scenario, results)
        except OSError as e:
            logger.error(f"写出结果失败: {e}")
            return 1, {}
        return 0, manifest


def run_scenario(path: Union[str, Path], overrides: Optional[Dict] = None) -> Tuple[int, Dict]:
    """
    执行场景并写出全部结果

    Args:
        path: 场景 JSON 文件
        overrides: tol / horizon_max / schedule / seed / out / excel / config / workers / verbose

    Returns:
        (退出码, 清单)
    """
    overrides = dict(overrides or {})
    runner = ScenarioRunner(overrides.pop("config", None), overrides,
                            verbose=bool(overrides.pop("verbose", False)))
    return runner.run(path)
