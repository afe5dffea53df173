import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from core.command_scanner import scan_commands
from core.config import get_settings
from core.exceptions import InvalidConfig, SoftSensorError
from core.logging import setup_logging
from services.soft_sensor import RunConfig
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


class CommandParser(argparse.ArgumentParser):
    """参数错误抛出 InvalidConfig(退出码1)，而不是 argparse 默认的退出码2"""

    def error(self, message):
        raise InvalidConfig(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = CommandParser(prog="soft-sensor", description=settings.DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # 全局扫描CLI命令
    for command in scan_commands("cli/commands"):
        sub = subparsers.add_parser(command.name, help=command.help)
        command.configure(sub)
        sub.set_defaults(handler=command.handler)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    logger.debug(f"Current settings: {get_settings().model_dump_json()}")
    try:
        args = build_parser().parse_args(argv)
        fields = {k: v for k, v in vars(args).items() if k in RunConfig.model_fields and v is not None}
        config = RunConfig(**fields)
        logger.info(f"Running command {config.command.value}")
        return args.handler(config)
    except ValidationError as e:
        logger.error(f"参数错误: {str(e)}")
        return CommandResponse.error(message=f"参数错误: {str(e)}", exit_code=1)
    except SoftSensorError as e:
        logger.error(f"{type(e).__name__}: {str(e)}", exc_info=get_settings().DEBUG)
        return CommandResponse.error(message=str(e), exit_code=e.exit_code,
                                     data={"error": type(e).__name__})
    except OSError as e:
        logger.error(f"文件读写失败: {str(e)}", exc_info=True)
        return CommandResponse.error(message=f"文件读写失败: {str(e)}", exit_code=2)
    except Exception as e:
        logger.error(f"命令执行失败: {str(e)}", exc_info=True)
        return CommandResponse.error(message=f"命令执行失败: {str(e)}", exit_code=1)


if __name__ == "__main__":
    sys.exit(main())
