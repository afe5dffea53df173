import logging

from cli.options import add_data, add_model, add_model_path, add_out, add_protocol
from core.command_scanner import Command
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_data(parser)
    add_model_path(parser)
    add_out(parser, "重要性CSV输出路径")
    add_model(parser)
    add_protocol(parser)


def handle(config: RunConfig) -> int:
    logger.info(f"收到重要性分析请求: data={config.data}, model_path={config.model_path}, seed={config.seed}")
    report = SoftSensorService().importance(config)
    return CommandResponse.success(
        data={"ranking": report.ranking, "entries": report.entries, "out": str(config.out)},
        message="置换重要性计算完成",
    )


command = Command(name="importance", help="随机森林袋外置换重要性", configure=configure, handler=handle)
