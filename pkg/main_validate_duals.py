#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
对偶求解器校验入口

说明：
- 在随机实例上把标量 TV/KL 对偶、P 型 TV 对偶、P 型 KL 对偶与 Bellman 递推
  分别与网格或线性规划原问题比较，打印通过/失败表。
- --scale 按比例缩放各套件的默认实例数（如 0.1 做快速检查）。
- 退出码：0 全部通过；1 参数错误；2 存在失败。
"""

import argparse
import sys

from src.generators.report_generator import format_validation
from src.harness.dual_validation import DEFAULT_COUNTS, SUITES, validate_duals
from src.utils.common_utils import save_json_atomic
from src.utils.logger import get_logger

logger = get_logger("robust_psr.validate")


def build_parser():
    parser = argparse.ArgumentParser(description='对偶求解器随机校验')
    parser.add_argument('--seed', type=int, default=0, help='主种子')
    parser.add_argument('--scale', type=float, default=1.0, help='实例数缩放比例')
    parser.add_argument('--suites', type=str, default=None,
                        help=f'逗号分隔的套件名，可选 {",".join(SUITES)}')
    parser.add_argument('--output', type=str, default=None, help='结果 JSON 输出路径')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    selected = SUITES
    if args.suites:
        selected = tuple(s.strip() for s in args.suites.split(',') if s.strip())
        unknown = [s for s in selected if s not in SUITES]
        if unknown:
            logger.error(f"未知的校验套件: {unknown}")
            return 1
    if args.scale <= 0:
        logger.error(f"--scale 必须为正: {args.scale}")
        return 1

    counts = {name: (max(1, int(round(DEFAULT_COUNTS[name] * args.scale))) if name in selected else 0)
              for name in SUITES}
    results = validate_duals(counts, seed=args.seed)
    print(format_validation(results))
    if args.output:
        save_json_atomic(results, args.output)
        print(f'结果已保存: {args.output}')
    return 0 if all(r["failures"] == 0 for r in results) else 2


if __name__ == '__main__':
    sys.exit(main())
