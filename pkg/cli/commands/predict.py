import logging

from cli.options import add_data, add_model_path, add_out
from core.command_scanner import Command
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_data(parser, "原始单位的工艺参数CSV(nt列可选)")
    add_model_path(parser)
    add_out(parser, "预测结果CSV输出路径(nt_pred, mg KOH/g)")


def handle(config: RunConfig) -> int:
    logger.info(f"收到预测请求: model_path={config.model_path}, data={config.data}")
    predictions = SoftSensorService().predict(config)
    return CommandResponse.success(data={"n_predictions": len(predictions), "out": str(config.out)},
                                   message="预测完成")


command = Command(name="predict", help="用已保存的模型从原始工艺参数预测NT", configure=configure, handler=handle)
