import logging

from cli.options import add_out, add_protocol, add_synth_size
from core.command_scanner import Command
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_out(parser, "输出CSV路径，manifest 写在同目录的 <stem>.manifest.json")
    add_protocol(parser, with_outliers=False)
    add_synth_size(parser)


def handle(config: RunConfig) -> int:
    logger.info(f"收到数据生成请求: out={config.out}, rows={config.rows}, seed={config.seed}")
    files = SoftSensorService().generate_dataset(config)
    return CommandResponse.success(data=files, message="合成数据生成完成")


command = Command(name="generate", help="生成合成工艺数据集", configure=configure, handler=handle)
