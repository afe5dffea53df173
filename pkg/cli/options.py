"""子命令共用的参数定义；默认值来自 Settings，可用 .env 覆盖"""
import argparse

from core.config import get_settings
from services.dataset import CANONICAL_FEATURES
from services.soft_sensor import MODEL_CHOICES


def add_data(parser: argparse.ArgumentParser, help_text: str = "输入CSV路径"):
    parser.add_argument("--data", help=help_text)


def add_out(parser: argparse.ArgumentParser, help_text: str):
    parser.add_argument("--out", help=help_text)


def add_model_path(parser: argparse.ArgumentParser):
    parser.add_argument("--model-path", dest="model_path", help="已保存的模型文件(JSON)")


def add_protocol(parser: argparse.ArgumentParser, with_outliers: bool = True):
    settings = get_settings()
    parser.add_argument("--split", type=float, default=settings.DEFAULT_SPLIT, help="训练集比例")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="主种子")
    if with_outliers:
        parser.add_argument("--outliers", choices=["keep", "drop"], default="keep", help="是否剔除标记的异常值")


def add_model(parser: argparse.ArgumentParser, with_kind: bool = True):
    """with_kind=False 时只注册超参数(reproduce 总是训练全部四个模型)"""
    settings = get_settings()
    if with_kind:
        parser.add_argument("--model", choices=sorted(MODEL_CHOICES), default="rf", help="模型类型")
    parser.add_argument("--trees", type=int, default=settings.FOREST_TREES, help="随机森林树的数量")
    parser.add_argument("--mtry", type=int, default=settings.FOREST_MTRY, help="每次分裂的候选特征数")
    parser.add_argument("--min-leaf", dest="min_leaf", type=int, default=settings.FOREST_MIN_LEAF)
    parser.add_argument("--max-depth", dest="max_depth", type=int, default=settings.FOREST_MAX_DEPTH)
    parser.add_argument("--jobs", type=int, default=settings.FOREST_N_JOBS, help="并行建树的进程数")
    parser.add_argument("--lr", type=float, default=settings.NN_LEARNING_RATE, help="神经网络学习率")
    parser.add_argument("--batch", type=int, default=settings.NN_BATCH_SIZE, help="神经网络批大小")
    parser.add_argument("--epochs", type=int, default=settings.NN_EPOCHS, help="神经网络训练轮数")
    parser.add_argument("--momentum", type=float, default=settings.NN_MOMENTUM, help="动量系数")


def add_feature(parser: argparse.ArgumentParser):
    parser.add_argument("--feature", choices=list(CANONICAL_FEATURES), default="raw_material",
                        help="偏依赖分析的特征")


def add_synth_size(parser: argparse.ArgumentParser):
    parser.add_argument("--rows", type=int, default=14252, help="合成数据记录数")
    parser.add_argument("--n-outliers", dest="n_outliers", type=int, default=23, help="注入的异常值数量")
