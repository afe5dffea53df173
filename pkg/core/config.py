from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "NT Soft Sensor"
    VERSION: str = "0.2.0"
    DESCRIPTION: str = "Soft sensor predicting the neutralization number (NT) of a sulphonation line"

    # 运行配置
    DEBUG: bool = Field(False, env="DEBUG")
    OUTPUT_DIR: str = Field("output", env="OUTPUT_DIR")
    SHOW_PROGRESS: bool = Field(False, env="SHOW_PROGRESS")

    # 日志配置
    LOG_LEVEL: str = Field("INFO", env="LOG_LEVEL")
    LOG_FORMAT: str = Field(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        env="LOG_FORMAT"
    )
    LOG_PATH: str = Field("logs/soft_sensor.log", env="LOG_PATH")
    LOG_CONSOLE: bool = Field(True, env="LOG_CONSOLE")

    # 实验配置
    DEFAULT_SEED: int = Field(42, env="DEFAULT_SEED")
    DEFAULT_SPLIT: float = Field(0.7, env="DEFAULT_SPLIT")

    # 随机森林
    FOREST_TREES: int = Field(100, env="FOREST_TREES")
    FOREST_MTRY: int = Field(2, env="FOREST_MTRY")
    FOREST_MIN_LEAF: int = Field(5, env="FOREST_MIN_LEAF")
    FOREST_MAX_DEPTH: Optional[int] = Field(None, env="FOREST_MAX_DEPTH")
    FOREST_N_JOBS: int = Field(1, env="FOREST_N_JOBS")

    # 神经网络
    NN_LEARNING_RATE: float = Field(0.3, env="NN_LEARNING_RATE")
    NN_BATCH_SIZE: int = Field(100, env="NN_BATCH_SIZE")
    NN_EPOCHS: int = Field(500, env="NN_EPOCHS")
    NN_MOMENTUM: float = Field(0.2, env="NN_MOMENTUM")

    # 异常值与解释性分析
    ZSCORE_THRESHOLD: float = Field(4.0, env="ZSCORE_THRESHOLD")
    IMPORTANCE_REPEATS: int = Field(1, env="IMPORTANCE_REPEATS")
    PDP_MAX_GRID: int = Field(200, env="PDP_MAX_GRID")
    SMOOTH_WINDOW: int = Field(21, env="SMOOTH_WINDOW")

    # 指定环境变量文件位置
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8")


def get_settings():
    return Settings()
