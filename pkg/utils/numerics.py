import numpy as np


def rowwise_dot(X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """沿最后一维做点积，每行结果与批量大小无关

    矩阵乘法对单行和多行输入会走不同的BLAS路径，结果可能差1ulp，
    单条预测和批量预测因此不一致。
    """
    return np.sum(np.asarray(X, dtype=np.float64) * weights, axis=-1)
