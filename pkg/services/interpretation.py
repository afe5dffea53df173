import logging
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator

from core.config import get_settings
from core.exceptions import EmptyInput, EmptyOob, InvalidConfig, InvalidDatasetState, WindowTooLarge
from services.dataset import Dataset
from services.forest import ForestModel, node_purity_importance
from services.models import RegressionModel, predict_batch

logger = logging.getLogger(__name__)


class ImportanceEntry(BaseModel):
    """单个特征的置换重要性

    Attributes:
        name (str): 特征名
        pct_inc_mse (float): 置换后MSE的平均增幅占平均袋外MSE的百分比
        raw_mean_diff (float): 各树 MSE差值 的均值
        std_of_diffs (float): 各树 MSE差值 的标准差
        importance (float): raw_mean_diff / std_of_diffs；标准差为0时取 raw_mean_diff
        degenerate (bool): 标准差为0
        inc_node_purity (float): 该特征所有分裂的节点SSE下降之和
    """
    name: str
    pct_inc_mse: float
    raw_mean_diff: float
    std_of_diffs: float
    importance: float
    degenerate: bool = False
    inc_node_purity: float = 0.0


class ImportanceReport(BaseModel):
    entries: List[ImportanceEntry]
    n_trees: int
    repeats: int = 1
    seed: int = 0

    @property
    def ranking(self) -> List[str]:
        return [entry.name for entry in self.entries]

    def entry(self, name: str) -> ImportanceEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)


class PartialDependenceCurve(BaseModel):
    """单特征偏依赖曲线: values[k] 是把该特征全部设为 grid[k] 后的平均预测"""
    feature: str
    grid: List[float]
    values: List[float]
    smoothed: List[float]
    n_background: int
    window: int = 1

    @model_validator(mode="after")
    def _check_shape(self):
        if not len(self.grid) == len(self.values) == len(self.smoothed):
            raise ValueError("grid / values / smoothed 长度必须一致")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid 必须严格递增")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("偏依赖值必须为有限数值")
        return self


def _forest_of(model: Union[RegressionModel, ForestModel]) -> ForestModel:
    forest = model.estimator if isinstance(model, RegressionModel) else model
    if not isinstance(forest, ForestModel):
        raise InvalidConfig("置换重要性只支持随机森林模型")
    return forest


def permutation_importance(
        model: Union[RegressionModel, ForestModel],
        train: Dataset,
        seed: int,
        repeats: Optional[int] = None,
) -> ImportanceReport:
    """基于袋外样本的置换重要性

    对每棵树 t 和特征 j: e_t 为袋外MSE，e_tj 为在袋外样本内置换第 j 列后的MSE，
    d_tj = e_tj - e_t。重要性为 mean_t(d) / std_t(d)，百分比为 mean_t(d) / mean_t(e) * 100。
    train 必须是训练该森林时使用的同一份数据。
    """
    forest = _forest_of(model)
    repeats = get_settings().IMPORTANCE_REPEATS if repeats is None else repeats
    if repeats < 1:
        raise InvalidConfig(f"repeats 必须 >= 1，实际为 {repeats}")
    X = train.features
    y = train.labels()
    if len(train) != forest.n_train:
        raise InvalidDatasetState(f"数据集有 {len(train)} 条记录，但森林是在 {forest.n_train} 条记录上训练的")

    n_trees, n_features = len(forest.trees), train.n_features
    base = np.empty(n_trees)
    diffs = np.zeros((n_trees, n_features))
    for t, (tree, oob) in enumerate(zip(forest.trees, forest.per_tree_oob_indices)):
        if len(oob) == 0:
            raise EmptyOob(t)
        X_oob, y_oob = X[oob], y[oob]
        base[t] = np.mean((tree.predict(X_oob) - y_oob) ** 2)
        for j in range(n_features):
            total = 0.0
            for r in range(repeats):
                rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(t, j, r)))
                permuted = X_oob.copy()
                permuted[:, j] = X_oob[rng.permutation(len(oob)), j]
                total += np.mean((tree.predict(permuted) - y_oob) ** 2) - base[t]
            diffs[t, j] = total / repeats

    mean_diff = diffs.mean(axis=0)
    std_diff = diffs.std(axis=0, ddof=1) if n_trees > 1 else np.zeros(n_features)
    mean_base = float(base.mean())
    if mean_base > 0:
        pct = mean_diff / mean_base * 100.0
    else:
        logger.warning("Mean OOB MSE is zero, percent increase reported as 0")
        pct = np.zeros(n_features)
    purity = node_purity_importance(forest, n_features)

    entries = []
    for j, name in enumerate(train.schema.names):
        degenerate = bool(std_diff[j] == 0)
        entries.append(ImportanceEntry(
            name=name,
            pct_inc_mse=float(pct[j]),
            raw_mean_diff=float(mean_diff[j]),
            std_of_diffs=float(std_diff[j]),
            importance=float(mean_diff[j]) if degenerate else float(mean_diff[j] / std_diff[j]),
            degenerate=degenerate,
            inc_node_purity=float(purity[j]),
        ))
    entries.sort(key=lambda e: (-e.pct_inc_mse, e.name))
    logger.info(f"Permutation importance ranking (seed={seed}): {[e.name for e in entries[:3]]} ...")
    return ImportanceReport(entries=entries, n_trees=n_trees, repeats=repeats, seed=seed)


def smooth_curve(values: Sequence[float], window: int) -> List[float]:
    """居中滑动平均；边界处窗口截断，只对落在范围内的点求平均"""
    values = list(values)
    if window < 1 or window % 2 == 0:
        raise InvalidConfig(f"window 必须为正奇数，实际为 {window}")
    if window > len(values):
        raise WindowTooLarge(f"window={window} 超过序列长度 {len(values)}")
    series = pd.Series(values, dtype=np.float64)
    return series.rolling(window=window, center=True, min_periods=1).mean().tolist()


def default_grid(column: np.ndarray, max_points: int) -> np.ndarray:
    unique = np.unique(column)
    if len(unique) <= max_points:
        return unique
    return np.unique(np.quantile(column, np.linspace(0.0, 1.0, max_points)))


def partial_dependence(
        model: RegressionModel,
        data: Dataset,
        feature: str,
        grid: Optional[Sequence[float]] = None,
        n_quantiles: Optional[int] = None,
        window: Optional[int] = None,
) -> PartialDependenceCurve:
    """f_s(v) = 1/n * sum_i f(v, z_ic)：把该特征在每条记录上都设为 v，对预测求平均

    网格: 显式给定 > 指定分位点数 > 默认(去重后的观测值，超过 PDP_MAX_GRID 时取分位点)。
    """
    settings = get_settings()
    if len(data) == 0:
        raise EmptyInput("偏依赖需要非空数据集")
    j = data.schema.index(feature)
    column = data.features[:, j]

    if grid is not None:
        points = np.unique(np.asarray(grid, dtype=np.float64))
    elif n_quantiles is not None:
        if n_quantiles < 2:
            raise InvalidConfig(f"n_quantiles 必须 >= 2，实际为 {n_quantiles}")
        points = np.unique(np.quantile(column, np.linspace(0.0, 1.0, n_quantiles)))
    else:
        points = default_grid(column, settings.PDP_MAX_GRID)
    if points.size == 0:
        raise EmptyInput("偏依赖网格为空")

    modified = data.features.copy()
    values = []
    for v in points:
        modified[:, j] = v
        values.append(float(np.mean(predict_batch(model, modified))))

    width = min(settings.SMOOTH_WINDOW if window is None else window, len(points))
    if width % 2 == 0:
        width -= 1
    curve = PartialDependenceCurve(
        feature=feature,
        grid=points.tolist(),
        values=values,
        smoothed=smooth_curve(values, width),
        n_background=len(data),
        window=width,
    )
    logger.info(f"Partial dependence for {feature}: {len(points)} grid points over {len(data)} records")
    return curve
