"""模型持久化: 自描述的JSON文档

浮点数用 json 的最短 repr 写出，load(save(m)) 的预测与原模型逐位一致。
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from core.exceptions import DatasetIOError, SchemaMismatch
from services.dataset import Standardizer
from services.forest import ForestModel, ForestParams, RegressionTree, TreeNode, recompute_oob
from services.linear import LinearModel
from services.models import MeanBaselineModel, RegressionModel, RegressorKind, RegressorSpec, TrainingProtocol
from services.network import NetworkModel, NetworkParams

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _node_to_dict(root: TreeNode) -> Dict[str, Any]:
    """嵌套节点记录；用显式栈遍历，深树不会触发递归上限"""
    document: Dict[str, Any] = {}
    stack = [(root, None, None)]
    while stack:
        node, parent, side = stack.pop()
        if node.is_leaf:
            payload = {"value": node.value, "n": node.n_samples, "impurity": node.impurity}
        else:
            payload = {
                "feature": node.feature_index,
                "threshold": node.threshold,
                "value": node.value,
                "n": node.n_samples,
                "impurity": node.impurity,
            }
            stack.append((node.right, payload, "right"))
            stack.append((node.left, payload, "left"))
        if parent is None:
            document = payload
        else:
            parent[side] = payload
    return document


def _node_from_dict(document: Dict[str, Any]) -> TreeNode:
    root = None
    stack = [(document, None, None)]
    while stack:
        payload, parent, side = stack.pop()
        node = TreeNode(value=payload["value"], n_samples=payload["n"], impurity=payload["impurity"])
        if "feature" in payload:
            node.feature_index = payload["feature"]
            node.threshold = payload["threshold"]
            stack.append((payload["right"], node, "right"))
            stack.append((payload["left"], node, "left"))
        if parent is None:
            root = node
        else:
            setattr(parent, side, node)
    return root


def _parameters_to_dict(model: RegressionModel) -> Dict[str, Any]:
    estimator = model.estimator
    if isinstance(estimator, ForestModel):
        return {
            "n_train": estimator.n_train,
            "per_tree_seed": list(estimator.per_tree_seed),
            "trees": [_node_to_dict(tree.to_node()) for tree in estimator.trees],
        }
    if isinstance(estimator, LinearModel):
        return {"weights": estimator.weights.tolist(), "intercept": estimator.intercept}
    if isinstance(estimator, NetworkModel):
        return {
            "hidden_weights": estimator.hidden_weights.tolist(),
            "hidden_bias": estimator.hidden_bias.tolist(),
            "output_weights": estimator.output_weights.tolist(),
            "output_bias": estimator.output_bias,
        }
    return {"mean_nt": estimator.mean_nt}


def model_to_document(model: RegressionModel) -> Dict[str, Any]:
    hyperparameters = model.spec.hyperparameters
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind.value,
        "hyperparameters": None if hyperparameters is None else hyperparameters.model_dump(),
        "seed": model.spec.seed,
        "standardizer": None if model.standardizer is None else model.standardizer.to_dict(),
        "protocol": None if model.protocol is None else model.protocol.model_dump(),
        "parameters": _parameters_to_dict(model),
    }


def model_from_document(document: Dict[str, Any]) -> RegressionModel:
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaMismatch(f"不支持的模型文件版本: {version}")
    kind = RegressorKind(document["kind"])
    params = document["parameters"]
    hyperparameters = document.get("hyperparameters")

    if kind is RegressorKind.RANDOM_FOREST:
        forest_params = ForestParams(**hyperparameters)
        spec = RegressorSpec(kind=kind, hyperparameters=forest_params, seed=document["seed"])
        seeds = [int(s) for s in params["per_tree_seed"]]
        estimator = ForestModel(
            trees=[RegressionTree.from_node(_node_from_dict(t)) for t in params["trees"]],
            per_tree_oob_indices=recompute_oob(seeds, params["n_train"]),
            per_tree_seed=seeds,
            params=forest_params,
            n_train=params["n_train"],
        )
    elif kind is RegressorKind.NEURAL_NET:
        spec = RegressorSpec(kind=kind, hyperparameters=NetworkParams(**hyperparameters), seed=document["seed"])
        estimator = NetworkModel(
            hidden_weights=np.array(params["hidden_weights"], dtype=np.float64),
            hidden_bias=np.array(params["hidden_bias"], dtype=np.float64),
            output_weights=np.array(params["output_weights"], dtype=np.float64),
            output_bias=float(params["output_bias"]),
        )
    elif kind is RegressorKind.LINEAR:
        spec = RegressorSpec(kind=kind, seed=document["seed"])
        estimator = LinearModel(weights=np.array(params["weights"], dtype=np.float64),
                                intercept=float(params["intercept"]))
    else:
        spec = RegressorSpec(kind=kind, seed=document["seed"])
        estimator = MeanBaselineModel(mean_nt=float(params["mean_nt"]))

    standardizer = document.get("standardizer")
    protocol = document.get("protocol")
    return RegressionModel(
        spec=spec,
        estimator=estimator,
        standardizer=None if standardizer is None else Standardizer.from_dict(standardizer),
        protocol=None if protocol is None else TrainingProtocol(**protocol),
    )


def save_model(model: RegressionModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(model_to_document(model), f, allow_nan=False)
    logger.info(f"Saved {model.kind.value} model to {path}")
    return path


def load_model(path: Union[str, Path]) -> RegressionModel:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            document = json.load(f)
    except OSError as e:
        logger.error(f"读取模型文件失败: {path} - {str(e)}")
        raise DatasetIOError(f"无法读取模型文件 {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"模型文件不是合法的JSON: {path}: {e}") from e
    model = model_from_document(document)
    logger.info(f"Loaded {model.kind.value} model from {path}")
    return model
