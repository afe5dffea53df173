import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel
from tqdm import tqdm

from core.config import get_settings
from core.exceptions import EmptyInput, EmptyOob, InvalidHyperparameters

logger = logging.getLogger(__name__)

LEAF = -1
# 分裂SSE的相对平局容差
SPLIT_TIE_TOLERANCE = 1e-10


class ForestParams(BaseModel):
    """随机森林超参数

    Attributes:
        n_trees (int): 树的数量
        mtry (int): 每次分裂随机抽取的候选特征数，回归默认 floor(8/3)=2
        min_leaf_size (int): 叶节点最少样本数
        max_depth (Optional[int]): 最大深度，None表示不限制
    """
    n_trees: int = 100
    mtry: int = 2
    min_leaf_size: int = 5
    max_depth: Optional[int] = None

    def validate_for(self, n_features: int):
        if self.n_trees < 1:
            raise InvalidHyperparameters(f"n_trees 必须 >= 1，实际为 {self.n_trees}")
        if not 1 <= self.mtry <= n_features:
            raise InvalidHyperparameters(f"mtry 必须在 [1, {n_features}] 之间，实际为 {self.mtry}")
        if self.min_leaf_size < 1:
            raise InvalidHyperparameters(f"min_leaf_size 必须 >= 1，实际为 {self.min_leaf_size}")
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidHyperparameters(f"max_depth 必须 >= 1 或不限制，实际为 {self.max_depth}")


@dataclass
class TreeNode:
    """树节点的嵌套表示；叶节点只有 value"""
    value: float
    n_samples: int = 0
    impurity: float = 0.0
    feature_index: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


@dataclass(frozen=True)
class RegressionTree:
    """CART回归树，节点按前序存成平行数组

    feature[i] == LEAF 表示叶节点；x[feature] <= threshold 走左子树。
    n_samples / impurity(节点SSE) 用于节点纯度重要性。
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature == LEAF).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """返回每一行落入的叶节点编号"""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            current = node[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def decision_path(self, x: np.ndarray) -> List[Tuple[int, float]]:
        """单条记录从根到叶经过的 (feature, threshold)"""
        path = []
        node = 0
        while self.feature[node] != LEAF:
            f, t = int(self.feature[node]), float(self.threshold[node])
            path.append((f, t))
            node = self.left[node] if x[f] <= t else self.right[node]
        return path

    def to_node(self) -> TreeNode:
        """转成嵌套的 TreeNode，返回根节点；按数组下标连接，不递归"""
        nodes = [
            TreeNode(value=float(v), n_samples=int(n), impurity=float(s))
            for v, n, s in zip(self.value, self.n_samples, self.impurity)
        ]
        for i in np.flatnonzero(self.feature != LEAF):
            node = nodes[i]
            node.feature_index = int(self.feature[i])
            node.threshold = float(self.threshold[i])
            node.left = nodes[self.left[i]]
            node.right = nodes[self.right[i]]
        return nodes[0]

    @classmethod
    def from_node(cls, root: TreeNode) -> "RegressionTree":
        builder = _TreeBuilder()
        stack = [(root, -1, False)]
        while stack:
            node, parent, is_right = stack.pop()
            index = builder.add(node.value, node.n_samples, node.impurity, parent, is_right)
            if not node.is_leaf:
                if node.left is None or node.right is None:
                    raise ValueError("内部节点必须同时有左右子节点")
                builder.set_split(index, node.feature_index, node.threshold)
                stack.append((node.right, index, True))
                stack.append((node.left, index, False))
        return builder.build()


class _TreeBuilder:
    def __init__(self):
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []
        self.n_samples: List[int] = []
        self.impurity: List[float] = []

    def add(self, value: float, n_samples: int, impurity: float, parent: int, is_right: bool) -> int:
        index = len(self.value)
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.n_samples.append(n_samples)
        self.impurity.append(impurity)
        if parent >= 0:
            if is_right:
                self.right[parent] = index
            else:
                self.left[parent] = index
        return index

    def set_split(self, index: int, feature: int, threshold: float):
        self.feature[index] = feature
        self.threshold[index] = threshold

    def build(self) -> RegressionTree:
        return RegressionTree(
            feature=np.array(self.feature, dtype=np.intp),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.intp),
            right=np.array(self.right, dtype=np.intp),
            value=np.array(self.value, dtype=np.float64),
            n_samples=np.array(self.n_samples, dtype=np.int64),
            impurity=np.array(self.impurity, dtype=np.float64),
        )


def best_split(
        X: np.ndarray,
        y: np.ndarray,
        features: np.ndarray,
        min_leaf_size: int = 1,
) -> Tuple[float, Optional[int], Optional[float]]:
    """在给定候选特征上寻找使左右子节点SSE之和最小的 (feature, threshold)

    阈值取排序后相邻不同取值的中点；平局时取特征编号最小、阈值最小者。
    累积和的舍入误差随特征排序不同而不同，SSE 相差在 SPLIT_TIE_TOLERANCE * 节点SSE
    以内的候选视为平局。
    返回 (sse, feature, threshold)，找不到合法分裂时 feature 为 None。
    """
    m = len(y)
    centered = y - y.mean()
    tolerance = SPLIT_TIE_TOLERANCE * float(np.dot(centered, centered))
    left_count = np.arange(1, m)
    right_count = m - left_count
    size_ok = (left_count >= min_leaf_size) & (right_count >= min_leaf_size)

    best_sse, best_feature, best_threshold = np.inf, None, None
    for f in np.sort(features):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = centered[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        left_sum, left_sq = csum[:-1], csq[:-1]
        right_sum, right_sq = csum[-1] - left_sum, csq[-1] - left_sq
        sse = (left_sq - left_sum ** 2 / left_count) + (right_sq - right_sum ** 2 / right_count)

        valid = size_ok & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        sse = np.where(valid, sse, np.inf)
        k = int(np.flatnonzero(sse <= sse.min() + tolerance)[0])
        if sse[k] < best_sse - tolerance:
            threshold = (xs[k] + xs[k + 1]) / 2.0
            if threshold >= xs[k + 1]:
                threshold = xs[k]
            best_sse, best_feature, best_threshold = float(sse[k]), int(f), float(threshold)
    return best_sse, best_feature, best_threshold


def fit_tree(
        X: np.ndarray,
        y: np.ndarray,
        mtry: int,
        rng: np.random.Generator,
        min_leaf_size: int = 5,
        max_depth: Optional[int] = None,
) -> RegressionTree:
    """按前序(先左后右)递归生长CART回归树

    每个节点从 rng 无放回抽取 mtry 个特征；节点样本数 < 2*min_leaf_size、
    到达深度上限或目标值全相同时成为叶节点，叶值为目标均值。
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise EmptyInput("建树样本不能为空")
    n_features = X.shape[1]

    builder = _TreeBuilder()
    # (样本索引, 深度, 父节点, 是否右子节点)
    stack = [(np.arange(len(y)), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        y_node = y[idx]
        mean = float(y_node.mean())
        sse_node = float(((y_node - mean) ** 2).sum())
        index = builder.add(mean, len(idx), sse_node, parent, is_right)

        if (len(idx) < 2 * min_leaf_size
                or (max_depth is not None and depth >= max_depth)
                or np.ptp(y_node) == 0):
            continue

        candidates = rng.choice(n_features, size=mtry, replace=False)
        X_node = X[idx]
        sse, feature, threshold = best_split(X_node, y_node, candidates, min_leaf_size)
        if feature is None or not sse < sse_node * (1.0 - SPLIT_TIE_TOLERANCE):
            continue

        builder.set_split(index, feature, threshold)
        goes_left = X_node[:, feature] <= threshold
        stack.append((idx[~goes_left], depth + 1, index, True))
        stack.append((idx[goes_left], depth + 1, index, False))
    return builder.build()


def derive_tree_seed(seed: int, tree_index: int) -> int:
    """每棵树的种子只由 (seed, tree_index) 决定，与建树顺序/并行方式无关"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(tree_index),))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def bootstrap_indices(rng: np.random.Generator, n: int) -> np.ndarray:
    """有放回抽取n个样本；这是每棵树随机流的第一次抽样"""
    return rng.integers(0, n, size=n)


def oob_indices(bootstrap: np.ndarray, n: int) -> np.ndarray:
    in_bag = np.zeros(n, dtype=bool)
    in_bag[bootstrap] = True
    return np.flatnonzero(~in_bag)


def _grow_tree(X: np.ndarray, y: np.ndarray, tree_seed: int, params: ForestParams
               ) -> Tuple[RegressionTree, np.ndarray]:
    rng = np.random.default_rng(tree_seed)
    sample = bootstrap_indices(rng, len(y))
    tree = fit_tree(X[sample], y[sample], params.mtry, rng, params.min_leaf_size, params.max_depth)
    return tree, oob_indices(sample, len(y))


@dataclass(frozen=True)
class ForestModel:
    trees: List[RegressionTree]
    per_tree_oob_indices: List[np.ndarray]
    per_tree_seed: List[int]
    params: ForestParams = field(default_factory=ForestParams)
    n_train: int = 0

    def predict_each(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n_rows) 每棵树的预测"""
        return np.stack([tree.predict(X) for tree in self.trees])

    def predict(self, X: np.ndarray) -> np.ndarray:
        # 每行在连续内存上求均值，单条与批量预测逐位一致
        return np.ascontiguousarray(self.predict_each(X).T).mean(axis=1)


def fit_forest(
        X: np.ndarray,
        y: np.ndarray,
        params: ForestParams,
        seed: int,
        n_jobs: Optional[int] = None,
) -> ForestModel:
    """训练随机森林

    每棵树的种子由 (seed, t) 派生，先抽bootstrap样本再用同一随机流建树，
    因此顺序训练和并行训练的结果完全相同。
    """
    settings = get_settings()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    params.validate_for(X.shape[1])
    if len(y) < 2:
        raise EmptyInput(f"随机森林至少需要2条训练记录，实际为 {len(y)}")
    n_jobs = settings.FOREST_N_JOBS if n_jobs is None else n_jobs

    seeds = [derive_tree_seed(seed, t) for t in range(params.n_trees)]
    logger.info(f"Training random forest: {params.n_trees} trees, mtry={params.mtry}, "
                f"min_leaf_size={params.min_leaf_size}, n={len(y)}, n_jobs={n_jobs}")
    grown = Parallel(n_jobs=n_jobs)(
        delayed(_grow_tree)(X, y, tree_seed, params)
        for tree_seed in tqdm(seeds, desc="trees", disable=not settings.SHOW_PROGRESS)
    )
    trees = [tree for tree, _ in grown]
    oob = [indices for _, indices in grown]
    logger.debug(f"Forest nodes per tree: mean={np.mean([t.n_nodes for t in trees]):.1f}")
    return ForestModel(trees=trees, per_tree_oob_indices=oob, per_tree_seed=seeds,
                       params=params, n_train=len(y))


def recompute_oob(per_tree_seed: List[int], n_train: int) -> List[np.ndarray]:
    """由每棵树的种子重放bootstrap抽样，得到袋外索引(模型加载时使用)"""
    return [oob_indices(bootstrap_indices(np.random.default_rng(s), n_train), n_train)
            for s in per_tree_seed]


def oob_mse(model: ForestModel, X: np.ndarray, y: np.ndarray) -> List[float]:
    """每棵树在自己袋外样本上的MSE；X/y必须是训练该森林时的数据"""
    errors = []
    for t, (tree, oob) in enumerate(zip(model.trees, model.per_tree_oob_indices)):
        if len(oob) == 0:
            raise EmptyOob(t)
        residual = tree.predict(X[oob]) - y[oob]
        errors.append(float(np.mean(residual ** 2)))
    return errors


def node_purity_importance(model: ForestModel, n_features: int) -> np.ndarray:
    """各特征分裂带来的节点SSE下降之和(对所有树求和)"""
    total = np.zeros(n_features)
    for tree in model.trees:
        internal = np.flatnonzero(tree.feature != LEAF)
        decrease = (tree.impurity[internal]
                    - tree.impurity[tree.left[internal]]
                    - tree.impurity[tree.right[internal]])
        np.add.at(total, tree.feature[internal], decrease)
    return total
