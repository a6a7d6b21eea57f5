#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
文本报告生成器

- 对偶校验的通过/失败表
- 扫参结果按 N 汇总（中位数间隙、LCB 成立比例、平均 |D^g|）
- 拟合诊断 JSON
"""

from typing import Dict, Iterable, Optional, Sequence

import pandas as pd

from src.generators.csv_generator import rows_to_frame
from src.harness.experiment_config import SweepRow
from src.utils.common_utils import save_json_atomic
from src.utils.logger import get_logger

logger = get_logger(__name__)


def validation_table(results: Sequence[Dict]) -> pd.DataFrame:
    """results 中每项含 suite / cases / failures / max_error / tolerance / seconds"""
    frame = pd.DataFrame(list(results),
                         columns=["suite", "cases", "failures", "max_error", "tolerance", "seconds"])
    frame["status"] = ["PASS" if f == 0 else "FAIL" for f in frame["failures"]]
    return frame


def format_validation(results: Sequence[Dict]) -> str:
    frame = validation_table(results)
    if frame.empty:
        return "(无校验结果)"
    return frame.to_string(index=False, float_format=lambda x: f"{x:.3e}")


def sweep_summary(rows: Iterable[SweepRow]) -> pd.DataFrame:
    frame = rows_to_frame(rows)
    if frame.empty:
        return pd.DataFrame(columns=["N", "seeds", "median_gap", "mean_gap", "lcb_rate", "mean_dg_size"])
    grouped = frame.groupby("N", sort=True)
    return pd.DataFrame({
        "seeds": grouped["seed"].count(),
        "median_gap": grouped["gap"].median(),
        "mean_gap": grouped["gap"].mean(),
        "lcb_rate": grouped["lcb_valid"].mean(),
        "mean_dg_size": grouped["dg_size"].mean(),
    }).reset_index()


def format_sweep_summary(rows: Iterable[SweepRow], slope: Optional[tuple] = None) -> str:
    text = sweep_summary(rows).to_string(index=False, float_format=lambda x: f"{x:.6g}")
    if slope is not None:
        s, intercept, r2 = slope
        text += f"\n\nlog-log 斜率: {s:.4f}  截距: {intercept:.4f}  r²: {r2:.4f}"
    return text


def write_fit_report(report: Dict, file_path) -> str:
    save_json_atomic(report, file_path)
    logger.info(f"拟合诊断已保存: {file_path}")
    return file_path
