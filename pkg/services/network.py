import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel
from scipy.special import expit

from core.exceptions import DivergedTraining, EmptyInput, InvalidHyperparameters
from utils.numerics import rowwise_dot

logger = logging.getLogger(__name__)

HIDDEN_UNITS = 4
INIT_RANGE = 0.5


class NetworkParams(BaseModel):
    """神经网络超参数"""
    learning_rate: float = 0.3
    batch_size: int = 100
    epochs: int = 500
    momentum: float = 0.2

    def validate_for(self, n_rows: int):
        if not self.learning_rate > 0:
            raise InvalidHyperparameters(f"learning_rate 必须 > 0，实际为 {self.learning_rate}")
        if not 1 <= self.batch_size <= n_rows:
            raise InvalidHyperparameters(f"batch_size 必须在 [1, {n_rows}] 之间，实际为 {self.batch_size}")
        if self.epochs < 0:
            raise InvalidHyperparameters(f"epochs 不能为负，实际为 {self.epochs}")
        if not 0 <= self.momentum < 1:
            raise InvalidHyperparameters(f"momentum 必须在 [0, 1) 之间，实际为 {self.momentum}")


@dataclass(frozen=True)
class NetworkModel:
    """8 -> 4(sigmoid) -> 1(线性) 的前馈网络"""
    hidden_weights: np.ndarray   # (4, 8)
    hidden_bias: np.ndarray      # (4,)
    output_weights: np.ndarray   # (4,)
    output_bias: float

    def hidden(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return expit(rowwise_dot(X[..., None, :], self.hidden_weights) + self.hidden_bias)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return rowwise_dot(self.hidden(X), self.output_weights) + self.output_bias

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            self.hidden_weights.ravel(), self.hidden_bias,
            self.output_weights, [self.output_bias],
        ])

    @classmethod
    def from_vector(cls, vector: np.ndarray, n_features: int) -> "NetworkModel":
        vector = np.asarray(vector, dtype=np.float64)
        h = HIDDEN_UNITS
        a = h * n_features
        return cls(
            hidden_weights=vector[:a].reshape(h, n_features).copy(),
            hidden_bias=vector[a:a + h].copy(),
            output_weights=vector[a + h:a + 2 * h].copy(),
            output_bias=float(vector[a + 2 * h]),
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_vector())))


def init_network(n_features: int, seed: int) -> NetworkModel:
    """权重在 [-0.5, 0.5] 上均匀初始化，顺序: 隐藏层权重、隐藏层偏置、输出层权重、输出层偏置"""
    rng = np.random.default_rng(seed)
    n_params = HIDDEN_UNITS * n_features + 2 * HIDDEN_UNITS + 1
    return NetworkModel.from_vector(rng.uniform(-INIT_RANGE, INIT_RANGE, n_params), n_features)


def loss_and_gradient(model: NetworkModel, X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """损失 L = mean(0.5 * (f(x) - y)^2) 及其对展平参数向量的梯度"""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = len(y)
    hidden = model.hidden(X)
    error = rowwise_dot(hidden, model.output_weights) + model.output_bias - y
    loss = 0.5 * float(np.mean(error ** 2))

    residual = error / m
    grad_output_weights = hidden.T @ residual
    grad_output_bias = residual.sum()
    delta = np.outer(residual, model.output_weights) * hidden * (1.0 - hidden)
    grad_hidden_weights = delta.T @ X
    grad_hidden_bias = delta.sum(axis=0)
    gradient = np.concatenate([
        grad_hidden_weights.ravel(), grad_hidden_bias,
        grad_output_weights, [grad_output_bias],
    ])
    return loss, gradient


def fit_network(X: np.ndarray, y: np.ndarray, params: NetworkParams, seed: int) -> NetworkModel:
    """带动量的小批量梯度下降

    每个epoch用种子派生的随机流打乱样本，最后一个批次可以不足 batch_size。
    损失或参数出现非有限值时抛出 DivergedTraining。
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, n_features = X.shape
    if n == 0:
        raise EmptyInput("神经网络训练数据不能为空")
    params.validate_for(n)

    model = init_network(n_features, seed)
    if params.epochs == 0:
        return model

    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
    theta = model.to_vector()
    velocity = np.zeros_like(theta)
    logger.info(f"Training neural network 8-{HIDDEN_UNITS}-1: lr={params.learning_rate}, "
                f"batch={params.batch_size}, epochs={params.epochs}, momentum={params.momentum}, n={n}")

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(params.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, params.batch_size):
                batch = order[start:start + params.batch_size]
                current = NetworkModel.from_vector(theta, n_features)
                loss, gradient = loss_and_gradient(current, X[batch], y[batch])
                velocity = params.momentum * velocity - params.learning_rate * gradient
                theta = theta + velocity
                epoch_loss += loss * len(batch)
                if not (np.isfinite(loss) and np.all(np.isfinite(theta))):
                    logger.error(f"神经网络训练发散: epoch={epoch}, loss={loss}")
                    raise DivergedTraining(epoch, loss)
            if epoch % 100 == 0 or epoch == params.epochs - 1:
                logger.debug(f"epoch {epoch}: train loss={epoch_loss / n:.6f}")

    return NetworkModel.from_vector(theta, n_features)
