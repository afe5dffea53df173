import logging

from cli.options import add_data, add_model, add_out, add_protocol
from core.command_scanner import Command
from services.soft_sensor import RunConfig, SoftSensorService
from utils.response import CommandResponse

logger = logging.getLogger(__name__)


def configure(parser):
    add_data(parser)
    add_out(parser, "模型文件输出路径(JSON)")
    add_model(parser)
    add_protocol(parser)


def handle(config: RunConfig) -> int:
    """按 --split / --seed / --outliers 划分后训练并保存模型

    划分协议随模型一起保存，evaluate / importance / pdp 据此重建同一训练集和测试集。
    """
    logger.info(f"收到训练请求: data={config.data}, model={config.model}, seed={config.seed}")
    model = SoftSensorService().train_and_save(config)
    return CommandResponse.success(
        data={"model_path": str(config.out), "kind": model.kind.value, "protocol": model.protocol},
        message="模型训练完成",
    )


command = Command(name="train", help="训练模型并保存", configure=configure, handler=handle)
