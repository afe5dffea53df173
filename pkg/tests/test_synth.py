import json

import numpy as np
import pytest

from core.exceptions import InvalidConfig
from services.dataset import write_csv
from services.linear import fit_linear
from services.synth import GeneratorConfig, describe, generate, write_manifest


@pytest.fixture(scope="module")
def reference():
    return generate(GeneratorConfig(seed=42))


def test_reference_counts(reference):
    data, manifest = reference
    assert len(data) == 14252
    assert data.n_outliers == 23
    assert len(manifest.outlier_indices) == 23
    assert np.flatnonzero(data.outlier).tolist() == manifest.outlier_indices


def test_raw_material_correlation(reference):
    data, manifest = reference
    achieved = float(np.corrcoef(data.column("raw_material"), data.nt)[0, 1])
    assert -0.45 <= achieved <= -0.35
    assert achieved == pytest.approx(manifest.config.target_raw_correlation, abs=1e-9)
    assert manifest.achieved_raw_correlation == pytest.approx(achieved)


def test_outliers_sit_beyond_five_sigma(reference):
    data, _ = reference
    z = np.abs(data.features - data.features.mean(axis=0)) / data.features.std(axis=0, ddof=1)
    assert np.all(z[~data.outlier] < 5)
    assert np.all(z[data.outlier, 1] > 5)


def test_timestamps_follow_sampling_cadence(reference):
    data, _ = reference
    assert data.timestamp[0] == 0
    assert set(np.diff(data.timestamp).tolist()) == {1800}


def test_same_seed_gives_identical_csv(tmp_path):
    config = GeneratorConfig(n_rows=300, n_outliers=3, seed=9)
    first = write_csv(generate(config)[0], tmp_path / "a.csv")
    second = write_csv(generate(config)[0], tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    third = write_csv(generate(config.model_copy(update={"seed": 10}))[0], tmp_path / "c.csv")
    assert first.read_bytes() != third.read_bytes()


def test_linear_only_coefficients_are_recoverable():
    config = GeneratorConfig(n_rows=500, n_outliers=0, seed=1, noise_std=0.0, linear_only=True)
    data, manifest = generate(config)
    model = fit_linear(data.features, data.nt)
    expected = [manifest.raw_unit_coefficients[name] for name in data.schema.names]
    np.testing.assert_allclose(model.weights, expected, atol=1e-6)
    assert model.intercept == pytest.approx(manifest.raw_unit_intercept, rel=1e-6)


def test_describe_lists_ground_truth(reference):
    _, manifest = reference
    text = describe(manifest)
    assert str(manifest.outlier_indices) in text
    assert "sulfur: linear 0.9, quadratic 0.35" in text

    _, empty = generate(GeneratorConfig(n_rows=50, n_outliers=0, seed=1))
    assert "outliers (0" in describe(empty)
    assert empty.outlier_indices == []


def test_manifest_sidecar(tmp_path):
    _, manifest = generate(GeneratorConfig(n_rows=60, n_outliers=2, seed=3))
    path = write_manifest(manifest, tmp_path / "synthetic.manifest.json")
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["outlier_indices"] == manifest.outlier_indices
    assert payload["config"]["seed"] == 3


@pytest.mark.parametrize("config", [
    GeneratorConfig(n_rows=10, n_outliers=10),
    GeneratorConfig(noise_std=-0.1),
    GeneratorConfig(outlier_magnitude=0.0),
    GeneratorConfig(target_raw_correlation=1.0),
    GeneratorConfig(n_rows=1, n_outliers=0),
])
def test_invalid_config(config):
    with pytest.raises(InvalidConfig):
        generate(config)
