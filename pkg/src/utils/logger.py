# -*- coding: utf-8 -*-
"""
日志

控制台 + 按日期命名的滚动文件。模块内统一 `logger = get_logger(__name__)`；
格式、级别、滚动大小都在 config.settings.LOGGING_CONFIG 中。
"""

import logging
import os
import time
from datetime import datetime
from functools import wraps
from logging.handlers import RotatingFileHandler

from config.settings import LOG_DIR, LOGGING_CONFIG

ROOT_LOGGER_NAME = "robust_psr"

# 同一进程内所有日志器共用一个文件处理器，按日志文件路径区分
_file_handlers = {}


def _formatter():
    return logging.Formatter(LOGGING_CONFIG["format"], datefmt=LOGGING_CONFIG["datefmt"])


def _shared_file_handler(level):
    os.makedirs(LOG_DIR, exist_ok=True)
    log_file = os.path.join(LOG_DIR, f"{datetime.now():%Y%m%d}.log")
    handler = _file_handlers.get(log_file)
    if handler is None:
        handler = RotatingFileHandler(
            log_file,
            maxBytes=LOGGING_CONFIG["max_bytes"],
            backupCount=LOGGING_CONFIG["backup_count"],
            encoding="utf-8",
        )
        handler.setFormatter(_formatter())
        _file_handlers[log_file] = handler
    handler.setLevel(min(handler.level or level, level))
    return handler


def setup_logger(name, level=None, log_to_file=None):
    """
    配置日志器（重复调用直接返回已配置的实例）

    Args:
        name: 日志器名称，通常是 __name__
        level: 日志级别，None 时取 LOGGING_CONFIG["level"]
        log_to_file: 是否写文件，None 时取 LOGGING_CONFIG["log_to_file"]
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    if level is None:
        level = logging.getLevelName(LOGGING_CONFIG["level"])
        if not isinstance(level, int):
            level = logging.INFO
    logger.setLevel(level)

    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(_formatter())
    logger.addHandler(console)

    if log_to_file is None:
        log_to_file = LOGGING_CONFIG["log_to_file"]
    if log_to_file:
        try:
            logger.addHandler(_shared_file_handler(level))
        except OSError as e:
            logger.warning(f"日志文件不可写，仅输出到控制台: {e}")

    logger.propagate = False
    return logger


def log_performance(logger=None, label=None):
    """
    计时装饰器：记录开始、完成与失败（附错误类别）

    使用示例:
        @log_performance(logger)
        def run(self, workers=None):
            ...
    """
    def decorator(func):
        name = label or func.__qualname__

        @wraps(func)
        def wrapper(*args, **kwargs):
            func_logger = logger or get_logger(func.__module__)
            start = time.perf_counter()
            func_logger.info(f"开始: {name}")
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                kind = getattr(e, "kind", type(e).__name__)
                func_logger.error(f"失败: {name} [{kind}] {e} - 耗时 {time.perf_counter() - start:.2f}秒")
                raise
            func_logger.info(f"完成: {name} - 耗时 {time.perf_counter() - start:.2f}秒")
            return result
        return wrapper
    return decorator


def get_logger(name=None):
    """获取配置好的日志器，缺省为项目根日志器"""
    return setup_logger(name or ROOT_LOGGER_NAME)
