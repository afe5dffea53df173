import importlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Union

logger = logging.getLogger(__name__)

# 仓库根目录；模块按相对它的路径导入，与当前工作目录无关
PROJECT_ROOT = Path(__file__).resolve().parent.parent


@dataclass(frozen=True)
class Command:
    """一个CLI子命令: configure 注册参数，handler 接收校验后的 RunConfig 并返回退出码"""
    name: str
    help: str
    configure: Callable
    handler: Callable


def scan_commands(directory: Union[str, Path]) -> List[Command]:
    """扫描目录下所有模块中的 Command 对象；相对路径按仓库根目录解析"""
    base = PROJECT_ROOT / directory
    commands = []
    for root, _, files in os.walk(base):
        for file in sorted(files):
            if file.endswith(".py"):
                # 构建模块路径
                relative = (Path(root) / file).relative_to(PROJECT_ROOT).with_suffix("")
                module_path = ".".join(relative.parts)
                try:
                    # 导入模块
                    module = importlib.import_module(module_path)
                except ImportError as e:
                    logger.warning(f"跳过无法导入的命令模块 {module_path}: {str(e)}")
                    continue
                for attr_name in dir(module):
                    attr = getattr(module, attr_name)
                    # 检查是否为 Command 实例
                    if isinstance(attr, Command):
                        commands.append(attr)
    return sorted(commands, key=lambda c: c.name)
