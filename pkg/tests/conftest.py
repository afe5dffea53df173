import numpy as np
import pytest

from services.dataset import Dataset, FeatureSchema, apply_standardizer, fit_standardizer, split
from services.synth import GeneratorConfig, generate


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """日志写到临时目录，控制台不输出，命令结果只在stdout/stderr的信封里"""
    monkeypatch.setenv("LOG_PATH", str(tmp_path / "logs" / "soft_sensor.log"))
    monkeypatch.setenv("LOG_CONSOLE", "false")
    monkeypatch.setenv("SHOW_PROGRESS", "false")


def make_dataset(X, y=None, standardized=True) -> Dataset:
    return Dataset(
        schema=FeatureSchema(),
        features=np.asarray(X, dtype=np.float64),
        nt=None if y is None else np.asarray(y, dtype=np.float64),
        standardized=standardized,
    )


@pytest.fixture
def small_raw():
    data, _ = generate(GeneratorConfig(n_rows=400, n_outliers=4, seed=7))
    return data


@pytest.fixture
def small_parts(small_raw):
    """(train, test, standardizer)，两侧都已用训练集统计量标准化"""
    train, test = split(small_raw, 0.7, seed=3)
    standardizer = fit_standardizer(train)
    return apply_standardizer(train, standardizer), apply_standardizer(test, standardizer), standardizer


@pytest.fixture
def signal_data():
    """nt 只依赖第0列的标准化数据集"""
    rng = np.random.default_rng(11)
    X = rng.normal(size=(300, 8))
    y = 2.0 * X[:, 0] + 0.05 * rng.normal(size=300)
    return make_dataset(X, y)
