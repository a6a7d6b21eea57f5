#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
扫参结果 CSV 的写出与读回

列顺序固定为 CSV_COLUMNS；浮点数保留 17 位有效数字，
行按 (N, seed) 排序，整文件原子替换写出。
"""

import io
from typing import Iterable, List

import pandas as pd

from src.harness.experiment_config import SweepRow
from src.utils.common_utils import atomic_write_text
from src.utils.logger import get_logger

logger = get_logger(__name__)

CSV_COLUMNS = ["N", "seed", "gap", "dg_size", "theta_hat", "conf_size", "lcb_valid", "ms"]


def rows_to_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    records = [
        {
            "N": int(r.n),
            "seed": int(r.seed),
            "gap": float(r.gap),
            "dg_size": int(r.dg_size),
            "theta_hat": int(r.theta_hat),
            "conf_size": int(r.conf_size),
            "lcb_valid": bool(r.lcb_valid),
            "ms": float(r.ms),
        }
        for r in rows
    ]
    frame = pd.DataFrame.from_records(records, columns=CSV_COLUMNS)
    if not frame.empty:
        frame = frame.sort_values(["N", "seed"], kind="mergesort").reset_index(drop=True)
    return frame


def format_csv(rows: Iterable[SweepRow]) -> str:
    frame = rows_to_frame(rows)
    # 布尔列写成 0/1
    frame["lcb_valid"] = frame["lcb_valid"].astype(int)
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def emit_csv(rows: Iterable[SweepRow], file_path) -> str:
    """写出扫参 CSV，返回文件路径"""
    rows = list(rows)
    atomic_write_text(format_csv(rows), file_path)
    logger.info(f"CSV 已写出: {file_path} ({len(rows)} 行)")
    return file_path


def read_csv(file_path) -> List[SweepRow]:
    frame = pd.read_csv(file_path, float_precision="round_trip")
    return [
        SweepRow(
            n=int(rec["N"]),
            seed=int(rec["seed"]),
            gap=float(rec["gap"]),
            dg_size=int(rec["dg_size"]),
            theta_hat=int(rec["theta_hat"]),
            conf_size=int(rec["conf_size"]),
            lcb_valid=bool(int(rec["lcb_valid"])),
            ms=float(rec["ms"]),
        )
        for rec in frame.to_dict("records")
    ]
