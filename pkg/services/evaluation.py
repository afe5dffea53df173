import logging
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from prettytable import PrettyTable
from pydantic import BaseModel, field_validator

from core.exceptions import EmptyInput, LengthMismatch, NonFiniteInput
from services.dataset import Dataset
from services.models import REPORT_ORDER, RegressionModel, RegressorKind, predict_batch

logger = logging.getLogger(__name__)


class OutlierSetting(str, Enum):
    WITH_OUTLIERS = "with_outliers"
    WITHOUT_OUTLIERS = "without_outliers"

    @property
    def title(self) -> str:
        if self is OutlierSetting.WITH_OUTLIERS:
            return "Results on dataset with outliers."
        return "Results on dataset without outliers."


class EvaluationReport(BaseModel):
    """单个模型在测试集上的三项指标

    Attributes:
        model_kind (RegressorKind): 模型类型
        n_test (int): 测试集记录数
        mae (float): 平均绝对误差
        rmse (float): 均方根误差
        correlation (float): Pearson相关系数，零方差时为0
        setting (OutlierSetting): 是否包含异常值
    """
    model_kind: RegressorKind
    n_test: int
    mae: float
    rmse: float
    correlation: float
    setting: OutlierSetting = OutlierSetting.WITH_OUTLIERS

    @field_validator("mae", "rmse")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("误差指标不能为负")
        return value

    @field_validator("correlation")
    @classmethod
    def _bounded(cls, value: float) -> float:
        if not -1.0 <= value <= 1.0:
            raise ValueError("相关系数必须在[-1, 1]之间")
        return value


def _paired(truth: Sequence[float], pred: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if truth.shape != pred.shape:
        raise LengthMismatch(f"真实值({len(truth)})与预测值({len(pred)})长度不一致")
    if truth.size == 0:
        raise EmptyInput("指标计算需要至少1个样本")
    if not (np.all(np.isfinite(truth)) and np.all(np.isfinite(pred))):
        raise NonFiniteInput("指标计算的输入必须为有限数值")
    return truth, pred


def mae(truth: Sequence[float], pred: Sequence[float]) -> float:
    truth, pred = _paired(truth, pred)
    return float(np.mean(np.abs(truth - pred)))


def rmse(truth: Sequence[float], pred: Sequence[float]) -> float:
    truth, pred = _paired(truth, pred)
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def pearson(truth: Sequence[float], pred: Sequence[float]) -> float:
    """Pearson相关系数；任一向量方差为0时定义为0(均值基线因此报告0.000)"""
    truth, pred = _paired(truth, pred)
    if truth.size < 2:
        raise EmptyInput("相关系数至少需要2个样本")
    if np.ptp(truth) == 0 or np.ptp(pred) == 0:
        return 0.0
    dt = truth - truth.mean()
    dp = pred - pred.mean()
    r = float(np.dot(dt, dp) / np.sqrt(np.dot(dt, dt) * np.dot(dp, dp)))
    return min(1.0, max(-1.0, r))


def evaluate(
        model: RegressionModel,
        test: Dataset,
        setting: OutlierSetting = OutlierSetting.WITH_OUTLIERS,
) -> Tuple[EvaluationReport, pd.DataFrame]:
    """在测试集上计算 MAE / RMSE / Pearson，同时返回 (truth, pred) 对"""
    if len(test) == 0:
        raise EmptyInput("测试集为空")
    truth = test.labels()
    pred = predict_batch(model, test.features)
    report = EvaluationReport(
        model_kind=model.kind,
        n_test=len(test),
        mae=mae(truth, pred),
        rmse=rmse(truth, pred),
        correlation=pearson(truth, pred),
        setting=setting,
    )
    logger.info(f"Evaluated {model.kind.value} ({setting.value}): MAE={report.mae:.3f}, "
                f"RMSE={report.rmse:.3f}, r={report.correlation:.3f}, n={report.n_test}")
    return report, pd.DataFrame({"truth": truth, "pred": pred})


def render_table(reports: List[EvaluationReport], title: str = "") -> str:
    """渲染结果表(三位小数，固定行顺序)"""
    table = PrettyTable()
    table.field_names = ["", "MAE", "RMSE", "Correlation"]
    table.align[""] = "l"
    if title:
        table.title = title
    ranked = sorted(reports, key=lambda r: REPORT_ORDER.index(r.model_kind))
    for report in ranked:
        table.add_row([
            report.model_kind.label,
            f"{report.mae:.3f}",
            f"{report.rmse:.3f}",
            f"{report.correlation:.3f}",
        ])
    return table.get_string()
