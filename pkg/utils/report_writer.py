"""报告文件输出: 文本表格、JSON报告、预测对/重要性/偏依赖CSV

所有写出函数返回目标路径，父目录不存在时自动创建。
"""
import json
import logging
from pathlib import Path
from typing import List, Union

import pandas as pd

from services.evaluation import EvaluationReport, render_table
from services.interpretation import ImportanceReport, PartialDependenceCurve

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = _prepare(path)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_table(reports: List[EvaluationReport], title: str, path: PathLike) -> Path:
    path = _prepare(path)
    path.write_text(render_table(reports, title) + "\n", encoding="utf-8")
    logger.info(f"Wrote report table to {path}")
    return path


def write_report_json(reports: List[EvaluationReport], title: str, path: PathLike) -> Path:
    path = _prepare(path)
    payload = {
        "title": title,
        "reports": [report.model_dump(mode="json") for report in reports],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_pairs_csv(pairs: pd.DataFrame, path: PathLike) -> Path:
    """两列 truth,pred，供外部绘制真实值-预测值图"""
    return _write_frame(pairs.loc[:, ["truth", "pred"]], path)


def write_importance_csv(report: ImportanceReport, path: PathLike, node_purity: bool = False) -> Path:
    """feature,pct_inc_mse 按重要性降序；node_purity=True 时追加 inc_node_purity 列"""
    columns = {
        "feature": [e.name for e in report.entries],
        "pct_inc_mse": [e.pct_inc_mse for e in report.entries],
    }
    if node_purity:
        columns["inc_node_purity"] = [e.inc_node_purity for e in report.entries]
    return _write_frame(pd.DataFrame(columns), path)


def write_pdp_csv(curve: PartialDependenceCurve, path: PathLike) -> Path:
    frame = pd.DataFrame({"grid": curve.grid, "value": curve.values, "smoothed": curve.smoothed})
    return _write_frame(frame, path)


def write_predictions_csv(predictions, path: PathLike) -> Path:
    return _write_frame(pd.DataFrame({"nt_pred": list(predictions)}), path)
