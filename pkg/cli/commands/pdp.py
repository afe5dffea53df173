import logging

from cli.options import add_data, add_feature, add_model, add_model_path, add_out, add_protocol
from core.command_scanner import Command
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_data(parser)
    add_model_path(parser)
    add_out(parser, "偏依赖CSV输出路径(grid,value,smoothed)")
    add_feature(parser)
    add_model(parser)
    add_protocol(parser)


def handle(config: RunConfig) -> int:
    logger.info(f"收到偏依赖分析请求: feature={config.feature}, data={config.data}")
    curve = SoftSensorService().partial_dependence(config)
    return CommandResponse.success(
        data={"feature": curve.feature, "grid_points": len(curve.grid), "window": curve.window,
              "out": str(config.out)},
        message="偏依赖计算完成",
    )


command = Command(name="pdp", help="单特征偏依赖曲线", configure=configure, handler=handle)
