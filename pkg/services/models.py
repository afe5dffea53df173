import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, model_validator

from core.exceptions import EmptyInput, InvalidDatasetState, InvalidHyperparameters
from services.dataset import Dataset, Standardizer
from services.forest import ForestModel, ForestParams, fit_forest
from services.linear import LinearModel, fit_linear
from services.network import NetworkModel, NetworkParams, fit_network

logger = logging.getLogger(__name__)


class RegressorKind(str, Enum):
    RANDOM_FOREST = "random_forest"
    NEURAL_NET = "neural_net"
    LINEAR = "linear"
    MEAN_BASELINE = "mean_baseline"

    @property
    def label(self) -> str:
        """结果表中的模型名称"""
        return {
            RegressorKind.RANDOM_FOREST: "Random Forest",
            RegressorKind.NEURAL_NET: "Neural Network",
            RegressorKind.LINEAR: "Linear regression",
            RegressorKind.MEAN_BASELINE: "Mean value",
        }[self]


# 报表行顺序
REPORT_ORDER = (
    RegressorKind.RANDOM_FOREST,
    RegressorKind.NEURAL_NET,
    RegressorKind.LINEAR,
    RegressorKind.MEAN_BASELINE,
)


class RegressorSpec(BaseModel):
    """模型规格: 类型 + 对应的超参数 + 种子

    Example:
        >>> spec = RegressorSpec(kind="random_forest", hyperparameters=ForestParams(n_trees=100), seed=42)
    """
    kind: RegressorKind
    hyperparameters: Optional[Union[ForestParams, NetworkParams]] = None
    seed: int = 42

    @model_validator(mode="after")
    def _default_hyperparameters(self):
        expected = {
            RegressorKind.RANDOM_FOREST: ForestParams,
            RegressorKind.NEURAL_NET: NetworkParams,
        }.get(self.kind)
        if expected is None:
            if self.hyperparameters is not None:
                raise ValueError(f"{self.kind.value} 模型没有超参数")
        elif self.hyperparameters is None:
            self.hyperparameters = expected()
        elif not isinstance(self.hyperparameters, expected):
            raise ValueError(f"{self.kind.value} 模型需要 {expected.__name__}")
        return self


@dataclass(frozen=True)
class MeanBaselineModel:
    mean_nt: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.mean_nt)


Estimator = Union[ForestModel, LinearModel, NetworkModel, MeanBaselineModel]


class TrainingProtocol(BaseModel):
    """训练时使用的数据划分协议，用于在评估/解释阶段重建同一划分"""
    split_fraction: float = 0.7
    master_seed: int = 42
    outliers: str = "keep"
    n_train: int = 0


@dataclass(frozen=True)
class RegressionModel:
    """训练好的模型；携带标准化器以便从原始单位预测"""
    spec: RegressorSpec
    estimator: Estimator
    standardizer: Optional[Standardizer] = None
    protocol: Optional[TrainingProtocol] = None

    @property
    def kind(self) -> RegressorKind:
        return self.spec.kind


def train(
        spec: RegressorSpec,
        train_data: Dataset,
        standardizer: Optional[Standardizer] = None,
        protocol: Optional[TrainingProtocol] = None,
        n_jobs: Optional[int] = None,
) -> RegressionModel:
    """按规格训练模型；要求数据已标准化、全部带标签且至少2条

    n_jobs 只对随机森林生效，None 时取 FOREST_N_JOBS。

    Raises:
        InvalidHyperparameters: 超参数不合法
        DivergedTraining: 神经网络损失变为非有限值
    """
    if not train_data.standardized:
        raise InvalidDatasetState("训练数据必须先标准化")
    y = train_data.labels()
    if len(train_data) < 2:
        raise EmptyInput(f"训练至少需要2条记录，实际为 {len(train_data)}")
    X = train_data.features
    params = spec.hyperparameters

    logger.info(f"Training {spec.kind.value} on {len(train_data)} records (seed={spec.seed})")
    try:
        if spec.kind is RegressorKind.RANDOM_FOREST:
            estimator = fit_forest(X, y, params, spec.seed, n_jobs=n_jobs)
        elif spec.kind is RegressorKind.NEURAL_NET:
            estimator = fit_network(X, y, params, spec.seed)
        elif spec.kind is RegressorKind.LINEAR:
            estimator = fit_linear(X, y)
        elif spec.kind is RegressorKind.MEAN_BASELINE:
            estimator = MeanBaselineModel(mean_nt=float(np.mean(y)))
        else:
            raise InvalidHyperparameters(f"不支持的模型类型: {spec.kind}")
    except Exception as e:
        logger.error(f"模型训练失败: {spec.kind.value} - {str(e)}", exc_info=True)
        raise
    return RegressionModel(spec=spec, estimator=estimator, standardizer=standardizer, protocol=protocol)


def predict_batch(model: RegressionModel, features: np.ndarray) -> np.ndarray:
    """对已标准化的特征矩阵逐行预测"""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[None, :]
    return model.estimator.predict(features)


def predict(model: RegressionModel, features: np.ndarray) -> float:
    return float(predict_batch(model, np.asarray(features, dtype=np.float64)[None, :])[0])


def predict_raw(model: RegressionModel, raw_features: np.ndarray) -> np.ndarray:
    """软测量用法: 原始单位的工艺参数 -> 原始单位的NT(mg KOH/g)"""
    if model.standardizer is None:
        raise InvalidDatasetState("模型没有携带标准化器，无法从原始单位预测")
    scaled = model.standardizer.transform_features(raw_features)
    return model.standardizer.inverse_target(predict_batch(model, scaled))
