import logging

from cli.options import add_data, add_model_path, add_out, add_protocol
from core.command_scanner import Command
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_data(parser)
    add_model_path(parser)
    add_out(parser, "报告输出目录(可选)")
    add_protocol(parser)


def handle(config: RunConfig) -> int:
    logger.info(f"收到评估请求: model_path={config.model_path}, data={config.data}")
    report, table = SoftSensorService().evaluate_saved(config)
    return CommandResponse.success(data={"report": report, "table": table}, message="评估完成")


command = Command(name="evaluate", help="在重建的测试集上评估已保存的模型", configure=configure, handler=handle)
