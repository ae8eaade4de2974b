#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
无穷时域 LQ 超越最优控制 - 命令行入口
读取场景 JSON，执行其中的流水线，写出 report.json、CSV 与清单
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from overtake_lq import __version__
from pipelines import COMMAND_REGISTRY, list_commands
from scenario_runner import ScenarioRunner

# 修复Windows控制台UTF-8编码问题
if sys.platform == 'win32':
    import io
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8', errors='replace')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8', errors='replace')
    os.environ['PYTHONIOENCODING'] = 'utf-8'


def configure_logging(verbose: bool, debug: bool):
    """--debug > -v > 默认 WARNING"""
    if debug:
        log_level = logging.DEBUG
        log_format = '%(levelname)s - %(name)s - %(message)s'
    elif verbose:
        log_level = logging.INFO
        log_format = '%(levelname)s - %(message)s'
    else:
        log_level = logging.WARNING
        log_format = '%(message)s'

    logging.basicConfig(
        level=log_level,
        format=log_format,
        handlers=[
            logging.StreamHandler(sys.stdout)
        ]
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='无穷时域 LQ 超越最优控制 - 场景流水线',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
使用示例：
  # 运行一个场景
  %(prog)s scenarios/section_3.json

  # 指定输出目录与容差
  %(prog)s scenarios/example_2_7.json --out ./results --tol 1e-9

  # 线性时域序列，最长时域 64，随机比较控制的种子
  %(prog)s scenarios/section_3.json --schedule linear --horizon-max 64 --seed 7

  # 额外导出结论汇总Excel
  %(prog)s scenarios/drift_refutation.json --excel -v

  # 列出可用命令
  %(prog)s --list-commands
''')

    parser.add_argument(
        'scenario',
        nargs='?',
        help='场景 JSON 文件路径'
    )

    parser.add_argument(
        '--out',
        help='输出目录（默认: 场景 outputs 字段或 config.yaml 中的 output.directory）'
    )

    parser.add_argument('--tol', type=float, help='一般数值容差')
    parser.add_argument('--horizon-max', type=float, dest='horizon_max', help='比较时域的上限 T')
    parser.add_argument('--schedule', choices=['geom', 'linear'], help='时域序列类型')
    parser.add_argument('--seed', type=int, help='随机比较控制的种子')
    parser.add_argument('--config', help='配置文件路径（默认: config.yaml）')
    parser.add_argument('--workers', type=int, help='可并行命令的线程数')
    parser.add_argument('--excel', action='store_true', help='导出结论汇总Excel')
    parser.add_argument('-v', '--verbose', action='store_true', help='显示进度与详细日志')
    parser.add_argument('--debug', action='store_true', help='显示调试日志（Newton 迭代、截断时域等）')
    parser.add_argument('--list-commands', action='store_true', help='列出流水线命令后退出')

    parser.add_argument(
        '--version',
        action='version',
        version=f'overtake-lq v{__version__}'
    )
    return parser


def print_summary(runner: ScenarioRunner, manifest: dict, out_dir: Path):
    print("\n" + "=" * 70)
    print("运行完成")
    print("=" * 70)

    results = runner.results
    failed = [r for r in results if not r.success]
    for i, r in enumerate(results, start=1):
        mark = "✓" if r.success else "✗"
        print(f"  {i}. {mark} {r.command:<14} {r.verdict:<28} {r.label}")
    if failed:
        print("\n失败命令:")
        for r in failed:
            print(f"  - {r.command}: {r.error_type}: {r.error}")

    print(f"\n写出文件: {len(manifest.get('files', []))} 个")
    print(f"输出目录: {out_dir.absolute()}")


def main():
    """主函数"""
    parser = build_parser()
    args = parser.parse_args()

    if args.list_commands:
        for name in list_commands():
            print(f"  {name:<14} {COMMAND_REGISTRY[name].description}")
        sys.exit(0)

    if not args.scenario:
        parser.error("需要场景文件路径")
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        print(f"错误: 文件不存在: {args.scenario}", file=sys.stderr)
        sys.exit(1)

    configure_logging(args.verbose, args.debug)
    logger = logging.getLogger(__name__)
    logger.info("场景流水线启动")

    overrides = {
        "tol": args.tol,
        "horizon_max": args.horizon_max,
        "schedule": args.schedule,
        "seed": args.seed,
        "out": args.out,
        "workers": args.workers,
        "excel": True if args.excel else None,
    }

    try:
        runner = ScenarioRunner(args.config, overrides, verbose=args.verbose or args.debug)
        status, manifest = runner.run(scenario_path)
        if status != 0:
            print("错误: 场景无效或结果写出失败", file=sys.stderr)
            sys.exit(status)
        if runner.results:
            print_summary(runner, manifest, runner.output_dir(runner.scenario))
        else:
            print("流水线为空，没有写出文件")
        sys.exit(0)

    except KeyboardInterrupt:
        print("\n\n用户中断操作", file=sys.stderr)
        sys.exit(130)
    except Exception as e:
        print(f"\n错误: 运行失败: {e}", file=sys.stderr)
        if args.verbose or args.debug:
            import traceback
            traceback.print_exc()
        sys.exit(1)


if __name__ == '__main__':
    main()
