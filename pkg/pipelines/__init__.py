"""
流水线命令模块
场景文件中每条命令对应一个命令类
"""

from .base_command import BaseCommand, CommandResult, PipelineContext
from .validate_command import ValidateCommand
from .decompose_command import DecomposeCommand
from .synthesize_command import SynthesizeCommand
from .compare_command import CompareCommand
from .certify_command import CertifyCommand
from .refute_command import RefuteCommand
from .cesaro_command import CesaroSweepCommand
from .abel_command import AbelSweepCommand
from .kernels_command import KernelsDumpCommand

# 命令注册表
COMMAND_REGISTRY = {
    "validate": ValidateCommand,
    "decompose": DecomposeCommand,
    "synthesize": SynthesizeCommand,
    "compare": CompareCommand,
    "certify": CertifyCommand,
    "refute": RefuteCommand,
    "cesaro-sweep": CesaroSweepCommand,
    "abel-sweep": AbelSweepCommand,
    # 场景中 "abel" 与 "abel-sweep" 等价
    "abel": AbelSweepCommand,
    "kernels-dump": KernelsDumpCommand,
}


def get_command(command_name: str, **kwargs) -> BaseCommand:
    """获取命令实例"""
    if command_name not in COMMAND_REGISTRY:
        raise ValueError(f"未知的命令: {command_name}. 可用命令: {list(COMMAND_REGISTRY.keys())}")
    return COMMAND_REGISTRY[command_name](**kwargs)


def list_commands():
    """列出所有可用的命令"""
    return list(COMMAND_REGISTRY.keys())


__all__ = [
    "BaseCommand", "CommandResult", "PipelineContext", "COMMAND_REGISTRY",
    "get_command", "list_commands",
]
