"""
场景流水线性能基准测试
重复运行场景文件，统计每条命令的耗时
"""

import json
import tempfile
from pathlib import Path
from typing import Dict, List

import numpy as np

from scenario_runner import ScenarioRunner


class ScenarioBenchmark:
    """场景基准测试"""

    def __init__(self, config_path: str = None, overrides: Dict = None):
        """
        初始化基准测试

        Args:
            config_path: 配置文件路径
            overrides: 与命令行相同的覆盖项(tol / schedule / seed ...)
        """
        self.config_path = config_path
        self.overrides = dict(overrides or {})
        self.results = {}

    def run_benchmark(self, scenario_paths: List[str], num_runs: int = 3) -> Dict:
        """
        运行基准测试

        Args:
            scenario_paths: 场景文件列表
            num_runs: 每个场景运行次数

        Returns:
            {场景: {命令: 耗时统计}}
        """
        results = {}

        for path in scenario_paths:
            name = Path(path).stem
            print(f"\n正在测试 {name}...")
            print("-" * 40)

            times: Dict[str, List[float]] = {}
            failures: Dict[str, int] = {}
            errors: List[str] = []
            for _ in range(num_runs):
                with tempfile.TemporaryDirectory() as tmp:
                    runner = ScenarioRunner(self.config_path, dict(self.overrides, out=tmp))
                    status, _ = runner.run(path)
                if status != 0:
                    errors.append("场景无效或写出失败")
                    break
                for i, r in enumerate(runner.results, start=1):
                    key = f"{i:02d}_{r.command}"
                    times.setdefault(key, []).append(r.elapsed * 1000)
                    if not r.success:
                        failures[key] = failures.get(key, 0) + 1
                        errors.append(f"{key}: {r.error_type}: {r.error}")

            results[name] = {
                key: {
                    "mean_ms": float(np.mean(ts)),
                    "median_ms": float(np.median(ts)),
                    "min_ms": float(np.min(ts)),
                    "max_ms": float(np.max(ts)),
                    "runs": len(ts),
                    "failures": failures.get(key, 0),
                }
                for key, ts in times.items()
            }
            if errors:
                results[name]["errors"] = errors[:5]  # 只保留前5个错误

            for key, stats in results[name].items():
                if key != "errors":
                    print(f"  {key:<22} 平均 {stats['mean_ms']:.1f}ms  中位数 {stats['median_ms']:.1f}ms")

        self.results = results
        return results

    def print_summary(self):
        """打印测试摘要"""
        print("\n" + "=" * 80)
        print("场景运行耗时摘要")
        print("=" * 80)
        print(f"{'场景':<28} {'命令数':<8} {'总耗时(ms)':<14} {'最慢命令':<24}")
        print("-" * 80)

        for name, result in self.results.items():
            stats = {k: v for k, v in result.items() if k != "errors"}
            if not stats:
                print(f"{name:<28} {'N/A':<8} {'N/A':<14} {'失败':<24}")
                continue
            total = sum(v["mean_ms"] for v in stats.values())
            slowest = max(stats, key=lambda k: stats[k]["mean_ms"])
            mark = "⚠ " if "errors" in result else ""
            print(f"{name:<28} {len(stats):<8} {total:<14.1f} {mark}{slowest:<24}")
        print("-" * 80)

    def save_results(self, output_path: str = "benchmark_results.json"):
        """保存测试结果到JSON文件"""
        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(self.results, f, indent=2, ensure_ascii=False)
        print(f"\n测试结果已保存到: {output_path}")


def main():
    import argparse

    parser = argparse.ArgumentParser(description="场景流水线基准测试")
    parser.add_argument("scenarios", nargs="*", help="场景文件路径 (默认: scenarios/*.json)")
    parser.add_argument("-n", "--num-runs", type=int, default=3,
                        help="每个场景运行次数 (默认: 3)")
    parser.add_argument("--config", help="配置文件路径")
    parser.add_argument("-o", "--output", default="benchmark_results.json",
                        help="结果输出文件")

    args = parser.parse_args()

    paths = args.scenarios or sorted(str(p) for p in (Path(__file__).parent / "scenarios").glob("*.json"))
    valid = [p for p in paths if Path(p).exists()]
    if not valid:
        print("没有找到有效的场景文件")
        return

    print(f"场景数量: {len(valid)}")
    print(f"每个场景运行次数: {args.num_runs}")

    benchmark = ScenarioBenchmark(config_path=args.config)
    benchmark.run_benchmark(valid, num_runs=args.num_runs)
    benchmark.print_summary()
    benchmark.save_results(args.output)


if __name__ == "__main__":
    main()
