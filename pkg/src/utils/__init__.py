# -*- coding: utf-8 -*-
"""
通用工具模块

提供项目中常用的工具函数，包括：
- 输出目录与原子写文件
- JSON 读写（支持 numpy 类型）
- 计数器式随机种子拆分
"""

from .common_utils import (
    setup_output_directories,
    atomic_write_text,
    save_json_atomic,
    load_json,
    spawn_seed
)

__all__ = [
    'setup_output_directories',
    'atomic_write_text',
    'save_json_atomic',
    'load_json',
    'spawn_seed'
]
