"""软测量流水线的异常体系

每个异常带 exit_code，CLI 据此映射退出码:
1 参数错误, 2 数据/IO错误, 3 训练失败。
"""


class SoftSensorError(Exception):
    exit_code = 1


# ---- 数据/IO ----

class DataError(SoftSensorError, ValueError):
    exit_code = 2


class MalformedRow(DataError):
    def __init__(self, row_index: int, reason: str):
        self.row_index = row_index
        self.reason = reason
        super().__init__(f"第 {row_index} 行数据格式错误: {reason}")


class SchemaMismatch(DataError):
    pass


class DatasetIOError(DataError):
    pass


# ---- 训练 ----

class TrainingError(SoftSensorError, ValueError):
    exit_code = 3


class DegenerateColumn(TrainingError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"列 {name} 的标准差为0，无法标准化")


class EmptySplit(TrainingError):
    pass


class DivergedTraining(TrainingError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"神经网络训练发散: epoch={epoch}, loss={loss}")


class RankDeficient(TrainingError):
    def __init__(self, rank: int, n_columns: int):
        self.rank = rank
        self.n_columns = n_columns
        super().__init__(f"设计矩阵秩不足: rank={rank} < {n_columns}")


class EmptyOob(TrainingError):
    def __init__(self, tree_index: int):
        self.tree_index = tree_index
        super().__init__(f"第 {tree_index} 棵树没有袋外样本")


class InvalidDatasetState(TrainingError):
    pass


# ---- 参数 ----

class UsageError(SoftSensorError, ValueError):
    exit_code = 1


class InvalidHyperparameters(UsageError):
    pass


class InvalidConfig(UsageError):
    pass


class UnknownFeature(UsageError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"未知特征: {name}")


class WindowTooLarge(UsageError):
    pass


class LengthMismatch(UsageError):
    pass


class EmptyInput(UsageError):
    pass


class NonFiniteInput(UsageError):
    pass
