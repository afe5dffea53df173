import json
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel


class CommandResponse:
    """命令结果信封: {"success", "message", "data"}

    成功写到stdout并返回0，失败写到stderr并返回对应退出码。
    """

    @staticmethod
    def _convert_data(data: Any) -> Any:
        """递归转换BaseModel / numpy / Path 为可序列化格式"""
        if isinstance(data, BaseModel):
            return data.model_dump(mode="json")
        elif isinstance(data, (list, tuple)):
            return [CommandResponse._convert_data(item) for item in data]
        elif isinstance(data, dict):
            return {k: CommandResponse._convert_data(v) for k, v in data.items()}
        elif isinstance(data, np.ndarray):
            return data.tolist()
        elif isinstance(data, np.generic):
            return data.item()
        elif isinstance(data, Path):
            return str(data)
        return data

    @staticmethod
    def envelope(success: bool, message: str, data: Any = None) -> str:
        data = CommandResponse._convert_data(data) if data is not None else None
        return json.dumps(
            {
                "success": success,
                "message": message,
                "data": data
            },
            ensure_ascii=False,
            indent=2,
        )

    @staticmethod
    def success(
            data: Any = None,
            message: str = "Success",
    ) -> int:
        print(CommandResponse.envelope(True, message, data), file=sys.stdout)
        return 0

    @staticmethod
    def error(
            message: str = "Error",
            exit_code: int = 1,
            data: Optional[Any] = None
    ) -> int:
        print(CommandResponse.envelope(False, message, data), file=sys.stderr)
        return exit_code
