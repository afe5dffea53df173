import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from core.exceptions import EmptySplit, InvalidDatasetState
from services.dataset import (
    CANONICAL_FEATURES,
    Dataset,
    apply_standardizer,
    filter_outliers,
    fit_standardizer,
    parse_csv,
    split_indices,
    write_csv,
)
from services.evaluation import EvaluationReport, OutlierSetting, evaluate, render_table
from services.forest import ForestParams
from services.interpretation import ImportanceReport, PartialDependenceCurve, partial_dependence, permutation_importance
from services.models import (
    REPORT_ORDER,
    RegressionModel,
    RegressorKind,
    RegressorSpec,
    TrainingProtocol,
    predict_raw,
    train,
)
from services.network import NetworkParams
from services.persistence import load_model, save_model
from services.synth import GeneratorConfig, generate, write_manifest
from utils import report_writer
from utils.seeding import derive_seed

# 配置日志
logger = logging.getLogger(__name__)

MODEL_CHOICES: Dict[str, RegressorKind] = {
    "rf": RegressorKind.RANDOM_FOREST,
    "nn": RegressorKind.NEURAL_NET,
    "lm": RegressorKind.LINEAR,
    "mean": RegressorKind.MEAN_BASELINE,
}


class CommandName(str, Enum):
    GENERATE = "generate"
    TRAIN = "train"
    EVALUATE = "evaluate"
    IMPORTANCE = "importance"
    PDP = "pdp"
    PREDICT = "predict"
    REPRODUCE = "reproduce"


class OutlierHandling(str, Enum):
    KEEP = "keep"
    DROP = "drop"

    @property
    def setting(self) -> OutlierSetting:
        if self is OutlierHandling.KEEP:
            return OutlierSetting.WITH_OUTLIERS
        return OutlierSetting.WITHOUT_OUTLIERS


class RunConfig(BaseModel):
    """一次命令运行的全部参数(CLI 参数校验后的形式)

    Attributes:
        command (CommandName): 子命令
        data (Optional[Path]): 输入CSV
        out (Optional[Path]): 输出文件或目录
        model_path (Optional[Path]): 已保存的模型文件
        model (str): 模型类型 rf / nn / lm / mean
        split (float): 训练集比例，(0, 1)
        seed (int): 主种子，所有子种子由它派生
        outliers (OutlierHandling): keep 保留异常值，drop 在划分后剔除
        feature (str): 偏依赖分析的特征
        synth (bool): reproduce 时现场生成合成数据
        rows / n_outliers: 合成数据规模

    Example:
        >>> config = RunConfig(command="train", data="plant.csv", out="rf.json", model="rf")
    """
    command: CommandName
    data: Optional[Path] = None
    out: Optional[Path] = None
    model_path: Optional[Path] = None
    model: str = "rf"
    trees: int = 100
    mtry: int = 2
    min_leaf: int = 5
    max_depth: Optional[int] = None
    jobs: Optional[int] = None
    lr: float = 0.3
    batch: int = 100
    epochs: int = 500
    momentum: float = 0.2
    split: float = 0.7
    seed: int = 42
    outliers: OutlierHandling = OutlierHandling.KEEP
    feature: str = "raw_material"
    synth: bool = False
    rows: int = 14252
    n_outliers: int = 23

    @field_validator("split")
    @classmethod
    def _check_split(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"split 必须在(0,1)之间，实际为 {value}")
        return value

    @field_validator("model")
    @classmethod
    def _check_model(cls, value: str) -> str:
        if value not in MODEL_CHOICES:
            raise ValueError(f"model 必须是 {sorted(MODEL_CHOICES)} 之一，实际为 {value}")
        return value

    @field_validator("feature")
    @classmethod
    def _check_feature(cls, value: str) -> str:
        if value not in CANONICAL_FEATURES:
            raise ValueError(f"未知特征: {value}")
        return value

    @model_validator(mode="after")
    def _check_paths(self):
        needs_data = {CommandName.TRAIN, CommandName.EVALUATE, CommandName.IMPORTANCE,
                      CommandName.PDP, CommandName.PREDICT}
        needs_out = {CommandName.GENERATE, CommandName.TRAIN, CommandName.IMPORTANCE,
                     CommandName.PDP, CommandName.PREDICT}
        if self.command in needs_data and not self.data:
            raise ValueError(f"{self.command.value} 需要 --data")
        if self.command in needs_out and not self.out:
            raise ValueError(f"{self.command.value} 需要 --out")
        if self.command in (CommandName.EVALUATE, CommandName.PREDICT) and not self.model_path:
            raise ValueError(f"{self.command.value} 需要 --model-path")
        if self.command is CommandName.REPRODUCE and not (self.data or self.synth):
            raise ValueError("reproduce 需要 --data 或 --synth")
        return self

    @property
    def kind(self) -> RegressorKind:
        return MODEL_CHOICES[self.model]


class SettingResult(BaseModel):
    """一种异常值设置下四个模型的结果(对应一张结果表)"""
    setting: OutlierSetting
    n_train: int
    n_test: int
    test_target_std: float
    reports: List[EvaluationReport]
    table: str

    def report(self, kind: RegressorKind) -> EvaluationReport:
        for report in self.reports:
            if report.model_kind is kind:
                return report
        raise KeyError(kind)


class ReproductionResult(BaseModel):
    settings: List[SettingResult]
    importance: ImportanceReport
    pdp: PartialDependenceCurve
    files: List[str]

    def setting(self, setting: OutlierSetting) -> SettingResult:
        for result in self.settings:
            if result.setting is setting:
                return result
        raise KeyError(setting)


class SoftSensorService:
    """软测量流水线服务

    提供:
    - 数据加载 / 合成数据生成
    - 按协议划分、标准化、训练和保存模型
    - 评估、置换重要性、偏依赖与原始单位预测
    - 两种异常值设置 × 四个模型的完整实验复现

    Usage:
        >>> service = SoftSensorService()
        >>> result = service.reproduce(RunConfig(command="reproduce", synth=True, out="output"))
        >>> print(result.settings[1].table)
    """

    def __init__(self):
        logger.info("SoftSensorService initialized")

    def load_data(self, config: RunConfig) -> Dataset:
        if config.synth and not config.data:
            data, _ = generate(self.generator_config(config))
            return data
        return parse_csv(config.data)

    @staticmethod
    def generator_config(config: RunConfig) -> GeneratorConfig:
        return GeneratorConfig(n_rows=config.rows, n_outliers=config.n_outliers, seed=config.seed)

    @staticmethod
    def regressor_spec(config: RunConfig, kind: Optional[RegressorKind] = None) -> RegressorSpec:
        """按CLI参数构造模型规格；森林用 bootstrap 子种子，网络用 init 子种子"""
        kind = kind or config.kind
        if kind is RegressorKind.RANDOM_FOREST:
            params = ForestParams(n_trees=config.trees, mtry=config.mtry,
                                  min_leaf_size=config.min_leaf, max_depth=config.max_depth)
            return RegressorSpec(kind=kind, hyperparameters=params, seed=derive_seed(config.seed, "bootstrap"))
        if kind is RegressorKind.NEURAL_NET:
            params = NetworkParams(learning_rate=config.lr, batch_size=config.batch,
                                   epochs=config.epochs, momentum=config.momentum)
            return RegressorSpec(kind=kind, hyperparameters=params, seed=derive_seed(config.seed, "init"))
        return RegressorSpec(kind=kind, seed=config.seed)

    @staticmethod
    def partition(data: Dataset, protocol: TrainingProtocol) -> Tuple[Dataset, Dataset]:
        """按协议在完整数据上划分一次；drop 时从两侧剔除标记的异常值"""
        train_idx, test_idx = split_indices(len(data), protocol.split_fraction,
                                            derive_seed(protocol.master_seed, "split"))
        train_part, test_part = data.take(train_idx), data.take(test_idx)
        if protocol.outliers == OutlierHandling.DROP.value:
            train_part, test_part = filter_outliers(train_part), filter_outliers(test_part)
            if len(train_part) == 0 or len(test_part) == 0:
                raise EmptySplit("剔除异常值后训练集或测试集为空")
        return train_part, test_part

    @staticmethod
    def protocol_for(config: RunConfig, model: Optional[RegressionModel] = None) -> TrainingProtocol:
        if model is not None and model.protocol is not None:
            return model.protocol
        return TrainingProtocol(split_fraction=config.split, master_seed=config.seed,
                                outliers=config.outliers.value)

    def prepared_partitions(self, data: Dataset, protocol: TrainingProtocol, model: Optional[RegressionModel] = None):
        """返回标准化后的 (train, test, standardizer)；有模型时使用模型携带的标准化器"""
        train_part, test_part = self.partition(data, protocol)
        if model is not None and model.standardizer is not None:
            standardizer = model.standardizer
            if protocol.n_train and len(train_part) != protocol.n_train:
                raise InvalidDatasetState(
                    f"重建的训练集有 {len(train_part)} 条记录，模型训练时为 {protocol.n_train} 条；数据文件与模型不匹配")
        else:
            standardizer = fit_standardizer(train_part)
        return (apply_standardizer(train_part, standardizer),
                apply_standardizer(test_part, standardizer),
                standardizer)

    def resolve_model(self, config: RunConfig, data: Dataset) -> RegressionModel:
        """有 --model-path 时加载模型，否则按参数现场训练"""
        if config.model_path:
            return load_model(config.model_path)
        return self.train_model(config, data)

    def train_model(self, config: RunConfig, data: Dataset) -> RegressionModel:
        protocol = self.protocol_for(config)
        train_part, _, standardizer = self.prepared_partitions(data, protocol)
        protocol = protocol.model_copy(update={"n_train": len(train_part)})
        return train(self.regressor_spec(config), train_part, standardizer=standardizer,
                     protocol=protocol, n_jobs=config.jobs)

    def generate_dataset(self, config: RunConfig) -> Dict[str, str]:
        data, manifest = generate(self.generator_config(config))
        csv_path = write_csv(data, config.out)
        manifest_path = write_manifest(manifest, csv_path.with_name(csv_path.stem + ".manifest.json"))
        return {"data": str(csv_path), "manifest": str(manifest_path)}

    def train_and_save(self, config: RunConfig) -> RegressionModel:
        try:
            data = self.load_data(config)
            model = self.train_model(config, data)
            save_model(model, config.out)
            return model
        except Exception as e:
            logger.error(f"训练失败: {str(e)}", exc_info=True)
            raise

    def evaluate_saved(self, config: RunConfig) -> Tuple[EvaluationReport, str]:
        data = self.load_data(config)
        model = load_model(config.model_path)
        protocol = self.protocol_for(config, model)
        _, test_part, _ = self.prepared_partitions(data, protocol, model)
        setting = OutlierHandling(protocol.outliers).setting
        report, pairs = evaluate(model, test_part, setting)
        table = render_table([report], setting.title)
        if config.out:
            out = Path(config.out)
            report_writer.write_table([report], setting.title, out / "table.txt")
            report_writer.write_report_json([report], setting.title, out / "report.json")
            report_writer.write_pairs_csv(pairs, out / f"pairs_{model.kind.value}.csv")
        return report, table

    def importance(self, config: RunConfig) -> ImportanceReport:
        data = self.load_data(config)
        model = self.resolve_model(config, data)
        protocol = self.protocol_for(config, model)
        train_part, _, _ = self.prepared_partitions(data, protocol, model)
        report = permutation_importance(model, train_part, derive_seed(config.seed, "permutation"))
        report_writer.write_importance_csv(report, config.out, node_purity=True)
        return report

    def partial_dependence(self, config: RunConfig) -> PartialDependenceCurve:
        data = self.load_data(config)
        model = self.resolve_model(config, data)
        protocol = self.protocol_for(config, model)
        train_part, _, _ = self.prepared_partitions(data, protocol, model)
        curve = partial_dependence(model, train_part, config.feature)
        report_writer.write_pdp_csv(curve, config.out)
        return curve

    def predict(self, config: RunConfig) -> np.ndarray:
        data = parse_csv(config.data)
        model = load_model(config.model_path)
        predictions = predict_raw(model, data.features)
        report_writer.write_predictions_csv(predictions, config.out)
        return predictions

    def run_setting(
            self,
            config: RunConfig,
            data: Dataset,
            handling: OutlierHandling,
            out: Path,
    ) -> Tuple[SettingResult, Dict[RegressorKind, RegressionModel], Dataset, List[str]]:
        """一种异常值设置下训练并评估四个模型"""
        protocol = TrainingProtocol(split_fraction=config.split, master_seed=config.seed,
                                    outliers=handling.value)
        train_part, test_part, standardizer = self.prepared_partitions(data, protocol)
        protocol = protocol.model_copy(update={"n_train": len(train_part)})
        setting = handling.setting

        reports, models, files = [], {}, []
        for kind in REPORT_ORDER:
            model = train(self.regressor_spec(config, kind), train_part, standardizer=standardizer,
                          protocol=protocol, n_jobs=config.jobs)
            report, pairs = evaluate(model, test_part, setting)
            reports.append(report)
            models[kind] = model
            files.append(str(report_writer.write_pairs_csv(pairs, out / f"pairs_{setting.value}_{kind.value}.csv")))

        table = render_table(reports, setting.title)
        files.append(str(report_writer.write_table(reports, setting.title, out / f"table_{setting.value}.txt")))
        files.append(str(report_writer.write_report_json(reports, setting.title,
                                                         out / f"report_{setting.value}.json")))
        logger.info(f"{setting.title}\n{table}")
        result = SettingResult(
            setting=setting,
            n_train=len(train_part),
            n_test=len(test_part),
            test_target_std=float(np.std(test_part.labels())),
            reports=reports,
            table=table,
        )
        return result, models, train_part, files

    def reproduce(self, config: RunConfig) -> ReproductionResult:
        """完整实验: 同一划分上 两种异常值设置 × 四个模型，外加重要性和偏依赖

        重要性与偏依赖取自无异常值设置下的随机森林。
        """
        out = Path(config.out) if config.out else Path("output")
        try:
            files = []
            if config.synth and not config.data:
                data, manifest = generate(self.generator_config(config))
                files.append(str(write_csv(data, out / "synthetic.csv")))
                files.append(str(write_manifest(manifest, out / "synthetic.manifest.json")))
            else:
                data = parse_csv(config.data)
            logger.info(f"Reproducing experiment on {len(data)} records ({data.n_outliers} outliers), seed={config.seed}")

            results = []
            forest = forest_train = None
            for handling in (OutlierHandling.KEEP, OutlierHandling.DROP):
                result, models, train_part, setting_files = self.run_setting(config, data, handling, out)
                results.append(result)
                files.extend(setting_files)
                if handling is OutlierHandling.DROP:
                    forest = models[RegressorKind.RANDOM_FOREST]
                    forest_train = train_part

            importance = permutation_importance(forest, forest_train, derive_seed(config.seed, "permutation"))
            files.append(str(report_writer.write_importance_csv(importance, out / "importance.csv",
                                                                node_purity=True)))
            curve = partial_dependence(forest, forest_train, config.feature)
            files.append(str(report_writer.write_pdp_csv(curve, out / f"pdp_{config.feature}.csv")))

            logger.info(f"Reproduction finished, importance ranking: {importance.ranking}")
            return ReproductionResult(settings=results, importance=importance, pdp=curve, files=files)
        except Exception as e:
            logger.error(f"实验复现失败: {str(e)}", exc_info=True)
            raise
