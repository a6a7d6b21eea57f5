#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import json
import os
import tempfile

import numpy as np

from src.utils.logger import get_logger

# 设置日志器
logger = get_logger(__name__)


def setup_output_directories(output_dir):
    """创建输出目录结构"""
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        logger.info(f"输出目录已准备: {output_dir}")


def _numpy_default(x):
    if hasattr(x, 'tolist'):
        return x.tolist()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    raise TypeError(f"无法序列化类型 {type(x).__name__}")


def atomic_write_text(text, file_path):
    """先写同目录临时文件，再 os.replace，读者看不到半截文件"""
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_path, file_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def save_json_atomic(data, file_path):
    """保存数据为JSON，支持numpy类型转换"""
    text = json.dumps(data, default=_numpy_default, indent=2, allow_nan=True)
    atomic_write_text(text + "\n", file_path)


def load_json(file_path):
    with open(file_path, 'r', encoding='utf-8') as f:
        return json.load(f)


def spawn_seed(master_seed, *counters):
    """
    计数器式种子拆分

    (master_seed, counters...) 唯一确定一个子随机流，与调度顺序无关。
    """
    sequence = np.random.SeedSequence(entropy=int(master_seed),
                                      spawn_key=tuple(int(c) for c in counters))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
