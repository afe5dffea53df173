import dataclasses
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator

from core.config import get_settings
from core.exceptions import (
    DatasetIOError,
    DegenerateColumn,
    EmptyInput,
    EmptySplit,
    InvalidConfig,
    InvalidDatasetState,
    MalformedRow,
    SchemaMismatch,
    UnknownFeature,
)

logger = logging.getLogger(__name__)

CANONICAL_FEATURES: Tuple[str, ...] = (
    "raw_material",      # kg/hr
    "sulfur",            # kg/hr
    "dew_point",         # 温度
    "air_sulfur_oven",   # nm3/hr
    "air_converter",     # nm3/hr
    "air_so3_filter",    # nm3/hr
    "molar",             # mol rate
    "molar_stp",         # molar weight
)
TARGET_COLUMN = "nt"
OPTIONAL_COLUMNS: Tuple[str, ...] = ("nt", "outlier", "timestamp")


class FeatureSchema(BaseModel):
    """工艺参数特征模式，固定为8个参数且顺序不可变"""
    model_config = ConfigDict(frozen=True)

    names: Tuple[str, ...] = CANONICAL_FEATURES

    @field_validator("names")
    @classmethod
    def _check_names(cls, names: Tuple[str, ...]) -> Tuple[str, ...]:
        names = tuple(names)
        if len(names) != len(CANONICAL_FEATURES):
            raise ValueError(f"特征数量必须为 {len(CANONICAL_FEATURES)}，实际为 {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError(f"特征名称重复: {names}")
        if names != CANONICAL_FEATURES:
            raise ValueError(f"特征顺序必须为 {CANONICAL_FEATURES}")
        return names

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownFeature(name) from None


class ProcessRecord(BaseModel):
    """单条观测: 8个工艺参数 + 可选NT标签 + 异常标记 + 可选时间戳"""
    model_config = ConfigDict(frozen=True)

    features: Tuple[float, ...]
    nt: Optional[float] = None
    outlier: bool = False
    timestamp: Optional[int] = None

    @field_validator("features")
    @classmethod
    def _finite_features(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        if not all(math.isfinite(v) for v in values):
            raise ValueError("特征值必须为有限数值")
        return values

    @field_validator("nt")
    @classmethod
    def _finite_nt(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not math.isfinite(value):
            raise ValueError("NT必须为有限数值")
        return value


def _frozen(array: Optional[np.ndarray], dtype) -> Optional[np.ndarray]:
    if array is None:
        return None
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """按列存储的观测集合，构造后不可变

    features: (n, 8) float64
    nt: (n,) float64 或 None(仅用于预测的数据)
    outlier: (n,) bool
    timestamp: (n,) int64 或 None
    """
    schema: FeatureSchema
    features: np.ndarray
    nt: Optional[np.ndarray] = None
    outlier: Optional[np.ndarray] = None
    timestamp: Optional[np.ndarray] = None
    standardized: bool = False

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != len(self.schema):
            raise SchemaMismatch(
                f"特征矩阵形状 {features.shape} 与特征模式({len(self.schema)}列)不一致")
        n = features.shape[0]
        outlier = np.zeros(n, dtype=bool) if self.outlier is None else self.outlier
        for name, column in (("nt", self.nt), ("outlier", outlier), ("timestamp", self.timestamp)):
            if column is not None and np.shape(column) != (n,):
                raise SchemaMismatch(f"列 {name} 的长度与记录数 {n} 不一致")
        if not np.all(np.isfinite(features)):
            raise ValueError("特征值必须为有限数值")
        if self.nt is not None and not np.all(np.isfinite(self.nt)):
            raise ValueError("NT必须为有限数值")
        object.__setattr__(self, "features", _frozen(features, np.float64))
        object.__setattr__(self, "nt", _frozen(self.nt, np.float64))
        object.__setattr__(self, "outlier", _frozen(outlier, bool))
        object.__setattr__(self, "timestamp", _frozen(self.timestamp, np.int64))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.schema)

    @property
    def n_outliers(self) -> int:
        return int(self.outlier.sum())

    @property
    def has_labels(self) -> bool:
        return self.nt is not None

    def labels(self) -> np.ndarray:
        """返回NT标签；训练与评估要求所有记录都有标签"""
        if self.nt is None:
            raise InvalidDatasetState("数据集缺少NT标签，只能用于预测")
        return self.nt

    def column(self, name: str) -> np.ndarray:
        if name == TARGET_COLUMN:
            return self.labels()
        return self.features[:, self.schema.index(name)]

    def take(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return dataclasses.replace(
            self,
            features=self.features[idx],
            nt=None if self.nt is None else self.nt[idx],
            outlier=self.outlier[idx],
            timestamp=None if self.timestamp is None else self.timestamp[idx],
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        return dataclasses.replace(self, features=features)

    @property
    def records(self) -> List[ProcessRecord]:
        return [
            ProcessRecord(
                features=tuple(float(v) for v in self.features[i]),
                nt=None if self.nt is None else float(self.nt[i]),
                outlier=bool(self.outlier[i]),
                timestamp=None if self.timestamp is None else int(self.timestamp[i]),
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_records(
            cls,
            records: Sequence[ProcessRecord],
            schema: Optional[FeatureSchema] = None,
            standardized: bool = False,
    ) -> "Dataset":
        schema = schema or FeatureSchema()
        for i, record in enumerate(records):
            if len(record.features) != len(schema):
                raise SchemaMismatch(f"第 {i} 条记录有 {len(record.features)} 个特征，应为 {len(schema)}")
        labelled = [r.nt is not None for r in records]
        if any(labelled) and not all(labelled):
            raise SchemaMismatch("NT标签必须全部存在或全部缺失")
        stamped = [r.timestamp is not None for r in records]
        if any(stamped) and not all(stamped):
            raise SchemaMismatch("时间戳必须全部存在或全部缺失")
        n = len(records)
        return cls(
            schema=schema,
            features=np.array([r.features for r in records], dtype=np.float64).reshape(n, len(schema)),
            nt=np.array([r.nt for r in records], dtype=np.float64) if records and all(labelled) else None,
            outlier=np.array([r.outlier for r in records], dtype=bool),
            timestamp=np.array([r.timestamp for r in records], dtype=np.int64) if records and all(stamped) else None,
            standardized=standardized,
        )


@dataclass(frozen=True)
class Standardizer:
    """每列均值/标准差(8个特征 + NT)，用于z-score变换

    degenerate 标记零方差列，这些列的 stds 记为1.0，只做平移。
    """
    names: Tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means, np.float64))
        object.__setattr__(self, "stds", _frozen(self.stds, np.float64))
        object.__setattr__(self, "degenerate", _frozen(self.degenerate, bool))

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return self.names[:-1]

    def transform_features(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.means[:-1]) / self.stds[:-1]

    def inverse_features(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) * self.stds[:-1] + self.means[:-1]

    def transform_target(self, nt: np.ndarray) -> np.ndarray:
        return (np.asarray(nt, dtype=np.float64) - self.means[-1]) / self.stds[-1]

    def inverse_target(self, nt: np.ndarray) -> np.ndarray:
        return np.asarray(nt, dtype=np.float64) * self.stds[-1] + self.means[-1]

    def to_dict(self) -> Dict[str, list]:
        return {
            "names": list(self.names),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "degenerate": self.degenerate.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, list]) -> "Standardizer":
        return cls(
            names=tuple(payload["names"]),
            means=np.array(payload["means"], dtype=np.float64),
            stds=np.array(payload["stds"], dtype=np.float64),
            degenerate=np.array(payload["degenerate"], dtype=bool),
        )


def _check_header(header: List[str], schema: FeatureSchema) -> List[str]:
    n = len(schema)
    if tuple(header[:n]) != schema.names:
        raise SchemaMismatch(f"表头必须以 {list(schema.names)} 开头，实际为 {header[:n]}")
    trailing = header[n:]
    positions = []
    for name in trailing:
        if name not in OPTIONAL_COLUMNS:
            raise SchemaMismatch(f"未知列: {name}")
        positions.append(OPTIONAL_COLUMNS.index(name))
    if positions != sorted(set(positions)):
        raise SchemaMismatch(f"可选列顺序必须为 {list(OPTIONAL_COLUMNS)}，实际为 {trailing}")
    return trailing


def _to_float(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        return math.nan


def _numeric_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    """逐个 token 用 float() 转换，保证与 write_csv 的 repr 输出逐位往返"""
    tokens = frame[name]
    values = tokens.str.strip().map(_to_float).to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        raise MalformedRow(row, f"列 {name} 的值 {tokens.iloc[row]!r} 不是有限数值")
    return values


def parse_csv(path: Union[str, Path], schema: Optional[FeatureSchema] = None) -> Dataset:
    """读取工艺数据CSV

    表头为8个特征名，可选追加 nt / outlier / timestamp 列。
    行号(row_index)从0开始，不含表头。
    """
    schema = schema or FeatureSchema()
    path = Path(path)
    logger.info(f"Parsing process data from {path}")
    try:
        # header=None: 每行字段数都按第一行(表头)校验，多出字段的行直接报错
        frame = pd.read_csv(path, header=None, index_col=False, dtype=str,
                            keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise SchemaMismatch(f"文件为空: {path}") from None
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        row = int(match.group(1)) - 2 if match else -1
        raise MalformedRow(row, "字段数量与表头不一致") from None
    except OSError as e:
        logger.error(f"读取数据文件失败: {path} - {str(e)}")
        raise DatasetIOError(f"无法读取 {path}: {e}") from e

    header = [str(c).strip() for c in frame.iloc[0]]
    frame = frame.iloc[1:].reset_index(drop=True)
    frame.columns = header
    trailing = _check_header(list(frame.columns), schema)

    short_rows = np.flatnonzero(frame.isna().any(axis=1).to_numpy())
    if short_rows.size:
        raise MalformedRow(int(short_rows[0]), f"字段数量少于表头的 {len(frame.columns)} 列")

    features = np.column_stack([_numeric_column(frame, name) for name in schema.names]) \
        if len(frame) else np.empty((0, len(schema)))

    nt = _numeric_column(frame, "nt") if "nt" in trailing else None

    outlier = None
    if "outlier" in trailing:
        tokens = frame["outlier"].str.strip()
        bad = np.flatnonzero(~tokens.isin(["0", "1"]).to_numpy())
        if bad.size:
            row = int(bad[0])
            raise MalformedRow(row, f"outlier 列只能为0或1，实际为 {tokens.iloc[row]!r}")
        outlier = (tokens == "1").to_numpy()

    timestamp = None
    if "timestamp" in trailing:
        values = _numeric_column(frame, "timestamp")
        fractional = np.flatnonzero(values != np.floor(values))
        if fractional.size:
            raise MalformedRow(int(fractional[0]), "timestamp 必须为整数秒")
        out_of_range = np.flatnonzero((values >= 2.0 ** 63) | (values < -2.0 ** 63))
        if out_of_range.size:
            raise MalformedRow(int(out_of_range[0]), "timestamp 超出 int64 范围")
        timestamp = values.astype(np.int64)
        decreasing = np.flatnonzero(np.diff(timestamp) < 0)
        if decreasing.size:
            raise MalformedRow(int(decreasing[0]) + 1, "timestamp 必须单调不减")

    data = Dataset(schema=schema, features=features, nt=nt, outlier=outlier, timestamp=timestamp)
    logger.info(f"Parsed {len(data)} records ({data.n_outliers} flagged outliers) from {path}")
    return data


def write_csv(data: Dataset, path: Union[str, Path]) -> Path:
    """按解析格式写出CSV；浮点数用最短可往返的repr表示"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = {}
    for j, name in enumerate(data.schema.names):
        columns[name] = [repr(float(v)) for v in data.features[:, j]]
    if data.nt is not None:
        columns["nt"] = [repr(float(v)) for v in data.nt]
    columns["outlier"] = data.outlier.astype(np.int64)
    if data.timestamp is not None:
        columns["timestamp"] = data.timestamp
    pd.DataFrame(columns).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(data)} records to {path}")
    return path


def fit_standardizer(data: Dataset, allow_degenerate: bool = False) -> Standardizer:
    """按列计算均值和样本标准差(n-1分母)

    Raises:
        DegenerateColumn: 某列为常数且 allow_degenerate=False
    """
    if data.standardized:
        raise InvalidDatasetState("数据集已经标准化")
    if len(data) < 2:
        raise EmptyInput(f"标准化至少需要2条记录，实际为 {len(data)}")
    matrix = np.column_stack([data.features, data.labels()])
    names = data.schema.names + (TARGET_COLUMN,)

    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0, ddof=1)
    degenerate = np.ptp(matrix, axis=0) == 0
    if degenerate.any():
        first = names[int(np.flatnonzero(degenerate)[0])]
        if not allow_degenerate:
            raise DegenerateColumn(first)
        logger.warning(f"Degenerate columns kept unscaled: "
                       f"{[n for n, d in zip(names, degenerate) if d]}")
        stds = np.where(degenerate, 1.0, stds)
    return Standardizer(names=names, means=means, stds=stds, degenerate=degenerate)


def _check_standardizer(data: Dataset, s: Standardizer):
    if s.feature_names != data.schema.names:
        raise SchemaMismatch(f"标准化器的列 {s.feature_names} 与数据集 {data.schema.names} 不一致")


def apply_standardizer(data: Dataset, s: Standardizer) -> Dataset:
    _check_standardizer(data, s)
    if data.standardized:
        raise InvalidDatasetState("数据集已经标准化")
    return dataclasses.replace(
        data,
        features=s.transform_features(data.features),
        nt=None if data.nt is None else s.transform_target(data.nt),
        standardized=True,
    )


def invert_standardizer(data: Dataset, s: Standardizer) -> Dataset:
    _check_standardizer(data, s)
    if not data.standardized:
        raise InvalidDatasetState("数据集尚未标准化")
    return dataclasses.replace(
        data,
        features=s.inverse_features(data.features),
        nt=None if data.nt is None else s.inverse_target(data.nt),
        standardized=False,
    )


def split_indices(n: int, train_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """随机打乱后前 floor(n*f) 个进训练集；两侧索引各自按原顺序排序"""
    if not 0 < train_fraction < 1:
        raise InvalidConfig(f"train_fraction 必须在(0,1)之间，实际为 {train_fraction}")
    n_train = math.floor(n * train_fraction)
    if n_train == 0 or n_train == n:
        raise EmptySplit(f"n={n}, train_fraction={train_fraction} 会产生空的训练集或测试集")
    permutation = np.random.default_rng(seed).permutation(n)
    return np.sort(permutation[:n_train]), np.sort(permutation[n_train:])


def split(data: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(len(data), train_fraction, seed)
    logger.info(f"Split {len(data)} records into {len(train_idx)} train / {len(test_idx)} test (seed={seed})")
    return data.take(train_idx), data.take(test_idx)


def filter_outliers(data: Dataset) -> Dataset:
    """去掉 outlier=True 的记录，保持原顺序"""
    kept = np.flatnonzero(~data.outlier)
    if len(kept) != len(data):
        logger.info(f"Dropped {len(data) - len(kept)} flagged outliers, {len(kept)} records remain")
    return data.take(kept)


def flag_outliers_zscore(data: Dataset, threshold: Optional[float] = None) -> Dataset:
    """任一特征 |z| > threshold 的记录标记为异常；已有标记不会被清除

    均值/标准差在整个数据集上计算。只是简单的辅助工具，不是异常检测方法。
    """
    threshold = get_settings().ZSCORE_THRESHOLD if threshold is None else threshold
    if not threshold > 0:
        raise InvalidConfig(f"threshold 必须大于0，实际为 {threshold}")
    if len(data) < 2:
        raise EmptyInput("z-score 标记至少需要2条记录")

    constant = np.ptp(data.features, axis=0) == 0
    if constant.any():
        raise DegenerateColumn(data.schema.names[int(np.flatnonzero(constant)[0])])

    means = data.features.mean(axis=0)
    stds = data.features.std(axis=0, ddof=1)
    z = np.abs(data.features - means) / stds
    flagged = (z > threshold).any(axis=1)
    new_flags = int((flagged & ~data.outlier).sum())
    logger.info(f"z-score flagger (threshold={threshold}) added {new_flags} outlier flags")
    return dataclasses.replace(data, outlier=data.outlier | flagged)
