import logging

from cli.options import add_data, add_feature, add_model, add_out, add_protocol, add_synth_size
from core.command_scanner import Command
from core.config import get_settings
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_data(parser)
    add_out(parser, f"报告输出目录(默认 {get_settings().OUTPUT_DIR})")
    parser.add_argument("--synth", action="store_true", help="用 --seed 现场生成合成数据")
    add_synth_size(parser)
    add_feature(parser)
    add_model(parser, with_kind=False)
    add_protocol(parser, with_outliers=False)


def handle(config: RunConfig) -> int:
    """两种异常值设置 × 四个模型，输出结果表、预测对、重要性和偏依赖"""
    if config.out is None:
        config = config.model_copy(update={"out": get_settings().OUTPUT_DIR})
    logger.info(f"收到实验复现请求: data={config.data}, synth={config.synth}, seed={config.seed}, out={config.out}")
    result = SoftSensorService().reproduce(config)
    return CommandResponse.success(
        data={
            "tables": [setting.table for setting in result.settings],
            "reports": [setting.reports for setting in result.settings],
            "importance_ranking": result.importance.ranking,
            "files": result.files,
        },
        message="实验复现完成",
    )


command = Command(name="reproduce", help="复现两种异常值设置下的完整实验", configure=configure, handler=handle)
