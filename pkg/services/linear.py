import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from core.exceptions import EmptyInput, RankDeficient
from utils.numerics import rowwise_dot

logger = logging.getLogger(__name__)

# |R_ii| 相对最大对角元低于该值视为秩不足
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return rowwise_dot(X, self.weights) + self.intercept


def fit_linear(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """普通最小二乘，设计矩阵 [1, X] 做QR分解后回代求解

    共线列直接报 RankDeficient，不退化为伪逆。
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n <= p:
        raise EmptyInput(f"线性回归需要多于 {p} 条记录，实际为 {n}")

    design = np.column_stack([np.ones(n), X])
    q, r = qr(design, mode="economic")
    diagonal = np.abs(np.diag(r))
    rank = int((diagonal > RANK_TOLERANCE * diagonal.max()).sum())
    if rank < p + 1:
        logger.error(f"线性回归设计矩阵秩不足: rank={rank}, columns={p + 1}")
        raise RankDeficient(rank, p + 1)

    beta = solve_triangular(r, q.T @ y)
    if not np.all(np.isfinite(beta)):
        raise RankDeficient(rank, p + 1)
    logger.info(f"Fitted linear model on {n} records, intercept={beta[0]:.6g}")
    return LinearModel(weights=beta[1:], intercept=float(beta[0]))
