"""合成工艺数据生成器

真实工厂数据无法公开，这里按已知的数据规模和统计特征(8个参数、14,252条、
23个异常、raw_material 与 NT 相关系数 -0.4)构造可复现的替代数据集。
分布都是人为设定，不代表真实工艺。
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from core.exceptions import InvalidConfig
from services.dataset import CANONICAL_FEATURES, Dataset, FeatureSchema

logger = logging.getLogger(__name__)

# 原始单位下各参数的均值和标准差
FEATURE_LOCATIONS: Dict[str, Tuple[float, float]] = {
    "raw_material": (2500.0, 150.0),
    "sulfur": (320.0, 20.0),
    "dew_point": (-60.0, 3.0),
    "air_sulfur_oven": (2200.0, 90.0),
    "air_converter": (1500.0, 70.0),
    "air_so3_filter": (600.0, 40.0),
    "molar": (1.05, 0.02),
    "molar_stp": (280.0, 6.0),
}
NT_LOCATION: Tuple[float, float] = (175.0, 8.0)

# 特征间的温和相关(|rho| <= 0.5)
FEATURE_CORRELATIONS: Dict[Tuple[str, str], float] = {
    ("sulfur", "air_sulfur_oven"): 0.35,
    ("sulfur", "air_converter"): 0.3,
    ("raw_material", "molar"): 0.35,
    ("air_converter", "air_so3_filter"): 0.25,
    ("molar", "molar_stp"): -0.2,
}

LATENT_CLIP = 4.5
TIMESTAMP_STEP = 1800
OUTLIER_FEATURE = "sulfur"


class NtStructure(BaseModel):
    """NT 在潜变量(标准正态)空间中的构成

    signal = -raw_saturation * tanh(raw_steepness * r) + raw_slope * r
             + sulfur_linear * s + sulfur_quadratic * (s^2 - 1)
             + interaction * r * s + sum(minor[k] * z_k)
    raw_slope 由生成器求解，使 corr(raw_material, NT) 等于目标值。
    """
    raw_saturation: float = 0.3
    raw_steepness: float = 1.5
    sulfur_linear: float = 0.9
    sulfur_quadratic: float = 0.35
    interaction: float = 0.2
    minor: Dict[str, float] = Field(default_factory=lambda: {
        "dew_point": 0.05,
        "air_sulfur_oven": -0.04,
        "air_converter": 0.04,
        "air_so3_filter": 0.05,
        "molar": -0.04,
        "molar_stp": 0.03,
    })


class GeneratorConfig(BaseModel):
    """生成器配置；默认规模为14,252条记录、23个异常值"""
    n_rows: int = 14252
    n_outliers: int = 23
    seed: int = 42
    noise_std: float = 0.2
    outlier_magnitude: float = 6.0
    target_raw_correlation: float = -0.4
    linear_only: bool = False
    structure: NtStructure = Field(default_factory=NtStructure)


class GeneratorManifest(BaseModel):
    """生成数据的真实结构，供测试当作标准答案"""
    config: GeneratorConfig
    outlier_indices: List[int]
    structure: NtStructure
    raw_slope: float
    achieved_raw_correlation: float
    raw_unit_coefficients: Optional[Dict[str, float]] = None
    raw_unit_intercept: Optional[float] = None


def _validate(config: GeneratorConfig):
    if config.n_rows < 2:
        raise InvalidConfig(f"n_rows 必须 >= 2，实际为 {config.n_rows}")
    if not 0 <= config.n_outliers < config.n_rows:
        raise InvalidConfig(f"n_outliers 必须在 [0, n_rows) 之间，实际为 {config.n_outliers}")
    if config.noise_std < 0:
        raise InvalidConfig(f"noise_std 不能为负，实际为 {config.noise_std}")
    if config.outlier_magnitude <= 0:
        raise InvalidConfig(f"outlier_magnitude 必须 > 0，实际为 {config.outlier_magnitude}")
    if not -1 < config.target_raw_correlation < 1:
        raise InvalidConfig(f"target_raw_correlation 必须在 (-1, 1) 之间")
    unknown = set(config.structure.minor) - set(CANONICAL_FEATURES[2:])
    if unknown:
        raise InvalidConfig(f"structure.minor 包含未知或非次要特征: {sorted(unknown)}")


def correlation_matrix() -> np.ndarray:
    names = list(CANONICAL_FEATURES)
    matrix = np.eye(len(names))
    for (a, b), rho in FEATURE_CORRELATIONS.items():
        i, j = names.index(a), names.index(b)
        matrix[i, j] = matrix[j, i] = rho
    return matrix


def solve_raw_slope(raw: np.ndarray, rest: np.ndarray, target: float) -> float:
    """求 beta 使 corr(raw, rest + beta * raw) == target

    以样本矩 a=var(raw), b=var(rest), c=cov(raw, rest) 表示:
    beta = (-c + target * sqrt((a*b - c^2) / (1 - target^2))) / a
    """
    raw_c = raw - raw.mean()
    rest_c = rest - rest.mean()
    a = float(np.dot(raw_c, raw_c))
    b = float(np.dot(rest_c, rest_c))
    c = float(np.dot(raw_c, rest_c))
    spread = max(a * b - c * c, 0.0)
    return (-c + target * np.sqrt(spread / (1.0 - target ** 2))) / a


def generate(config: Optional[GeneratorConfig] = None) -> Tuple[Dataset, GeneratorManifest]:
    """生成原始单位的数据集(不做标准化)和对应的 manifest

    异常值: 在 sulfur 上偏离均值 (outlier_magnitude + |N(0, 0.5)|) 个标准差，
    NT 仍由真实的 sulfur 计算，因此这些行的读数与标签不一致。
    """
    config = config or GeneratorConfig()
    _validate(config)
    structure = config.structure
    rng = np.random.default_rng(config.seed)
    names = list(CANONICAL_FEATURES)
    n = config.n_rows

    chol = np.linalg.cholesky(correlation_matrix())
    latent = np.clip(rng.standard_normal((n, len(names))) @ chol.T, -LATENT_CLIP, LATENT_CLIP)
    noise = rng.standard_normal(n)
    r = latent[:, names.index("raw_material")]
    s = latent[:, names.index("sulfur")]

    rest = structure.sulfur_linear * s
    for name, coefficient in structure.minor.items():
        rest = rest + coefficient * latent[:, names.index(name)]
    if not config.linear_only:
        rest = (rest
                - structure.raw_saturation * np.tanh(structure.raw_steepness * r)
                + structure.sulfur_quadratic * (s ** 2 - 1.0)
                + structure.interaction * r * s)
    rest = rest + config.noise_std * noise

    raw_slope = solve_raw_slope(r, rest, config.target_raw_correlation)
    signal = rest + raw_slope * r

    means = np.array([FEATURE_LOCATIONS[name][0] for name in names])
    scales = np.array([FEATURE_LOCATIONS[name][1] for name in names])
    features = means + scales * latent
    nt_mean, nt_scale = NT_LOCATION
    nt = nt_mean + nt_scale * signal

    outlier = np.zeros(n, dtype=bool)
    outlier_indices = np.sort(rng.choice(n, size=config.n_outliers, replace=False))
    if config.n_outliers:
        j = names.index(OUTLIER_FEATURE)
        signs = rng.choice([-1.0, 1.0], size=config.n_outliers)
        offsets = config.outlier_magnitude + np.abs(rng.normal(0.0, 0.5, size=config.n_outliers))
        features[outlier_indices, j] = means[j] + signs * offsets * scales[j]
        outlier[outlier_indices] = True

    data = Dataset(
        schema=FeatureSchema(),
        features=features,
        nt=nt,
        outlier=outlier,
        timestamp=np.arange(n, dtype=np.int64) * TIMESTAMP_STEP,
    )

    achieved = float(np.corrcoef(data.column("raw_material"), nt)[0, 1])
    coefficients = intercept = None
    if config.linear_only:
        latent_coefficients = {"raw_material": raw_slope, "sulfur": structure.sulfur_linear}
        latent_coefficients.update(structure.minor)
        coefficients = {name: nt_scale * latent_coefficients.get(name, 0.0) / FEATURE_LOCATIONS[name][1]
                        for name in names}
        intercept = nt_mean - sum(coefficients[name] * FEATURE_LOCATIONS[name][0] for name in names)

    manifest = GeneratorManifest(
        config=config,
        outlier_indices=outlier_indices.tolist(),
        structure=structure,
        raw_slope=float(raw_slope),
        achieved_raw_correlation=achieved,
        raw_unit_coefficients=coefficients,
        raw_unit_intercept=intercept,
    )
    logger.info(f"Generated {n} synthetic records (seed={config.seed}, outliers={config.n_outliers}, "
                f"corr(raw_material, NT)={achieved:.3f})")
    return data, manifest


def describe(manifest: GeneratorManifest) -> str:
    """生成数据真实结构的可读摘要"""
    structure = manifest.structure
    lines = [
        f"synthetic sulphonation data: {manifest.config.n_rows} rows, seed {manifest.config.seed}",
        f"noise_std: {manifest.config.noise_std}",
        f"outliers ({len(manifest.outlier_indices)}, displaced in {OUTLIER_FEATURE} by "
        f">= {manifest.config.outlier_magnitude} sd): {manifest.outlier_indices}",
        f"mode: {'linear only' if manifest.config.linear_only else 'nonlinear'}",
        f"raw_material: saturation {structure.raw_saturation} (steepness {structure.raw_steepness}), "
        f"calibrated slope {manifest.raw_slope:.6f}",
        f"sulfur: linear {structure.sulfur_linear}, quadratic {structure.sulfur_quadratic}",
        f"raw_material x sulfur interaction: {structure.interaction}",
        "minor effects: " + ", ".join(f"{k} {v}" for k, v in structure.minor.items()),
        f"corr(raw_material, NT): {manifest.achieved_raw_correlation:.4f} "
        f"(target {manifest.config.target_raw_correlation})",
    ]
    return "\n".join(lines)


def write_manifest(manifest: GeneratorManifest, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
