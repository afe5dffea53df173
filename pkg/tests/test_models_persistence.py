import json

import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import DatasetIOError, InvalidDatasetState, SchemaMismatch
from services.forest import ForestParams, RegressionTree, TreeNode
from services.models import (
    MeanBaselineModel,
    RegressorKind,
    RegressorSpec,
    TrainingProtocol,
    predict,
    predict_batch,
    predict_raw,
    train,
)
from services.network import NetworkParams
from services.persistence import _node_from_dict, _node_to_dict, load_model, model_to_document, save_model

SPECS = [
    RegressorSpec(kind="random_forest", hyperparameters=ForestParams(n_trees=8), seed=3),
    RegressorSpec(kind="neural_net", hyperparameters=NetworkParams(epochs=5, batch_size=50), seed=3),
    RegressorSpec(kind="linear"),
    RegressorSpec(kind="mean_baseline"),
]


def test_spec_fills_default_hyperparameters():
    assert RegressorSpec(kind="random_forest").hyperparameters == ForestParams()
    assert RegressorSpec(kind="neural_net").hyperparameters == NetworkParams()
    assert RegressorSpec(kind="linear").hyperparameters is None
    with pytest.raises(ValidationError):
        RegressorSpec(kind="linear", hyperparameters=ForestParams())
    with pytest.raises(ValidationError):
        RegressorSpec(kind="neural_net", hyperparameters=ForestParams())


def test_training_requires_standardized_labelled_data(small_raw, small_parts):
    with pytest.raises(InvalidDatasetState):
        train(RegressorSpec(kind="linear"), small_raw)
    train_part, _, _ = small_parts
    unlabelled = type(train_part)(schema=train_part.schema, features=train_part.features, standardized=True)
    with pytest.raises(InvalidDatasetState):
        train(RegressorSpec(kind="linear"), unlabelled)


def test_mean_baseline_predicts_training_mean(small_parts):
    train_part, test_part, _ = small_parts
    model = train(RegressorSpec(kind="mean_baseline"), train_part)
    assert isinstance(model.estimator, MeanBaselineModel)
    np.testing.assert_allclose(predict_batch(model, test_part.features), np.mean(train_part.nt))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind.value)
def test_single_and_batch_predictions_agree(spec, small_parts):
    train_part, test_part, _ = small_parts
    model = train(spec, train_part)
    batch = predict_batch(model, test_part.features[:5])
    assert [predict(model, row) for row in test_part.features[:5]] == batch.tolist()


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind.value)
def test_save_load_round_trip_is_bit_exact(spec, small_parts, tmp_path):
    train_part, test_part, standardizer = small_parts
    protocol = TrainingProtocol(split_fraction=0.7, master_seed=42, outliers="keep", n_train=len(train_part))
    model = train(spec, train_part, standardizer=standardizer, protocol=protocol)

    path = save_model(model, tmp_path / "model.json")
    loaded = load_model(path)

    assert loaded.kind is spec.kind
    assert loaded.spec == model.spec
    assert loaded.protocol == protocol
    np.testing.assert_array_equal(predict_batch(loaded, test_part.features), predict_batch(model, test_part.features))
    np.testing.assert_array_equal(loaded.standardizer.means, standardizer.means)
    assert json.dumps(model_to_document(loaded)) == json.dumps(model_to_document(model))


def test_forest_round_trip_restores_oob_sets(small_parts, tmp_path):
    train_part, _, standardizer = small_parts
    model = train(SPECS[0], train_part, standardizer=standardizer)
    loaded = load_model(save_model(model, tmp_path / "rf.json"))
    for stored, restored in zip(model.estimator.per_tree_oob_indices, loaded.estimator.per_tree_oob_indices):
        np.testing.assert_array_equal(stored, restored)
    np.testing.assert_array_equal(loaded.estimator.trees[0].impurity, model.estimator.trees[0].impurity)


def test_predict_raw_returns_process_units(small_raw, small_parts):
    train_part, _, standardizer = small_parts
    model = train(RegressorSpec(kind="linear"), train_part, standardizer=standardizer)
    raw = predict_raw(model, small_raw.features[:20])
    expected = standardizer.inverse_target(predict_batch(model, standardizer.transform_features(small_raw.features[:20])))
    np.testing.assert_array_equal(raw, expected)
    assert 120 < float(np.mean(raw)) < 230

    bare = train(RegressorSpec(kind="linear"), train_part)
    with pytest.raises(InvalidDatasetState):
        predict_raw(bare, small_raw.features[:1])


def test_load_rejects_bad_documents(tmp_path):
    with pytest.raises(DatasetIOError):
        load_model(tmp_path / "missing.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaMismatch):
        load_model(broken)

    future = tmp_path / "future.json"
    future.write_text(json.dumps({"format_version": 99, "kind": "linear"}), encoding="utf-8")
    with pytest.raises(SchemaMismatch):
        load_model(future)


def test_report_label_order():
    assert [kind.label for kind in RegressorKind] == [
        "Random Forest", "Neural Network", "Linear regression", "Mean value"]


def test_deep_tree_converts_without_recursion():
    depth = 3000
    node = TreeNode(value=float(depth))
    for i in reversed(range(depth)):
        node = TreeNode(value=0.0, feature_index=0, threshold=i + 0.5, left=TreeNode(value=float(i)), right=node)
    tree = RegressionTree.from_node(node)
    assert tree.n_leaves == depth + 1

    restored = RegressionTree.from_node(_node_from_dict(_node_to_dict(tree.to_node())))
    X = np.zeros((depth + 1, 8))
    X[:, 0] = np.arange(depth + 1)
    np.testing.assert_array_equal(restored.predict(X), np.arange(depth + 1, dtype=float))
    np.testing.assert_array_equal(restored.threshold, tree.threshold)
