#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
样本量扫参入口

说明：
- 读取实验配置（默认 `config/ring2_sweep.json`），对每个 (N, seed) 运行离线学习并计算次优间隙。
- 结果 CSV 默认写到 `output/sweep/<配置名>.csv`；失败的行写到同名 `.errors.json`。
- 进程数由 --workers 或环境变量 ROBUSTPSR_THREADS 控制，结果与进程数无关。
- 退出码：0 全部成功；1 配置错误；2 存在失败行。
"""

import argparse
import os
import sys

from config.settings import DEFAULT_SWEEP_CONFIG, SWEEP_OUTPUT_DIR
from src.core.errors import ConfigError, InsufficientPointsError, RobustPsrError
from src.generators.csv_generator import emit_csv
from src.generators.report_generator import format_sweep_summary
from src.harness.experiment_config import load_experiment_config
from src.harness.sweep_runner import SweepRunner, fit_slope
from src.utils.common_utils import save_json_atomic
from src.utils.logger import get_logger

logger = get_logger("robust_psr.sweep")


def build_parser():
    parser = argparse.ArgumentParser(description='离线鲁棒学习的样本量扫参')
    parser.add_argument('--config', type=str, default=DEFAULT_SWEEP_CONFIG, help='实验配置 JSON')
    parser.add_argument('--output', type=str, default=None, help='CSV 输出路径（覆盖配置中的 output）')
    parser.add_argument('--workers', type=int, default=None, help='进程数')
    parser.add_argument('--no-progress', action='store_true', help='关闭进度条')
    return parser


def _output_path(args, config):
    if args.output:
        return args.output
    if config.output:
        return config.resolve_path(config.output)
    name = os.path.splitext(os.path.basename(args.config))[0]
    return os.path.join(SWEEP_OUTPUT_DIR, f"{name}.csv")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_experiment_config(args.config)
        runner = SweepRunner(config)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return 1
    except RobustPsrError as e:
        logger.error(f"裁判鲁棒值计算失败: {e.kind} {e}")
        return 2

    output = _output_path(args, config)
    print(f'配置: {args.config}')
    print(f'集合 {config.uncertainty.label} ξ={config.uncertainty.xi}, 算法 {config.algorithm}, '
          f'N={list(config.n_schedule)}, 每个 N {config.seeds} 个种子')

    result = runner.run(workers=args.workers, progress=not args.no_progress)
    emit_csv(result.rows, output)
    errors_path = f"{output}.errors.json"
    if result.errors:
        save_json_atomic(result.errors, errors_path)
        print(f'失败行 {len(result.errors)} 条，已写入: {errors_path}')
    elif os.path.exists(errors_path):
        os.remove(errors_path)

    slope = None
    try:
        slope = fit_slope(result.rows)
    except InsufficientPointsError as e:
        logger.warning(f"无法拟合斜率: {e}")
    print(format_sweep_summary(result.rows, slope))
    print(f'CSV 已保存: {output}')
    return 0 if result.ok else 2


if __name__ == '__main__':
    sys.exit(main())
