#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
鲁棒值计算入口

说明：
- 读取模型 / 策略 / 奖励 JSON，在指定不确定集上计算鲁棒值，结果以 JSON 打印到标准输出。
- 退出码：0 成功；1 配置或输入错误；2 计算错误（如规模超限、线性规划不可行）。
"""

import argparse
import json
import sys

from src.analyzers.ambiguity_analyzer import Divergence, SetKind, SimplexGrid, UncertaintySpec
from src.analyzers.dual_solvers import p_tv_primal
from src.analyzers.robust_value_analyzer import METHODS, robust_value, robust_value_p
from src.core.decision_process import value
from src.core.errors import ConfigError, RobustPsrError
from src.core.model_io import load_model, load_policy, load_reward
from src.utils.logger import get_logger

logger = get_logger("robust_psr.robust_value")


def build_parser():
    parser = argparse.ArgumentParser(description='非马尔可夫决策过程的鲁棒值计算')
    parser.add_argument('--model', required=True, help='模型 JSON')
    parser.add_argument('--policy', required=True, help='策略 JSON')
    parser.add_argument('--reward', required=True, help='奖励 JSON')
    parser.add_argument('--set', dest='set_kind', choices=['T', 'P'], required=True, help='不确定集类型')
    parser.add_argument('--div', choices=['tv', 'kl'], required=True, help='散度')
    parser.add_argument('--xi', type=float, required=True, help='半径 ξ')
    parser.add_argument('--method', choices=METHODS, default='auto', help='求解方法')
    parser.add_argument('--grid-k', type=int, default=None, help='暴力枚举的网格分辨率')
    parser.add_argument('--convention', choices=['tv', 'l1'], default=None, help='P 型 TV 的预算约定')
    parser.add_argument('--cross-check', action='store_true', help='P 型 TV 同时计算 P1 与对偶')
    parser.add_argument('--dump-lp', type=str, default=None, help='P 型 TV 时把线性规划写到该文件')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        model = load_model(args.model)
        policy = load_policy(args.policy)
        reward = load_reward(args.reward)
        spec_doc = {"set": args.set_kind, "div": args.div, "xi": args.xi}
        if args.convention:
            spec_doc["convention"] = args.convention
        spec = UncertaintySpec.from_dict(spec_doc)
        is_p_tv = spec.set_kind is SetKind.P_TYPE and spec.divergence is Divergence.TV
        if args.dump_lp and not is_p_tv:
            raise ConfigError("--dump-lp 只适用于 P 型 TV")
        if args.cross_check and not is_p_tv:
            raise ConfigError("--cross-check 只适用于 P 型 TV")
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        print(json.dumps(e.to_record(), ensure_ascii=False))
        return 1

    try:
        if args.cross_check:
            report = robust_value_p(model, policy, reward, spec,
                                    method='dual' if args.method == 'dual' else 'lp', cross_check=True)
        else:
            grid = SimplexGrid(args.grid_k, model.num_obs) if args.grid_k else None
            report = robust_value(model, policy, reward, spec, method=args.method, grid=grid)
        if args.dump_lp:
            p_tv_primal(model, policy, reward, spec.xi, convention=spec.budget_convention,
                        dump_path=args.dump_lp)
            logger.info(f"线性规划已写出: {args.dump_lp}")
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        print(json.dumps(e.to_record(), ensure_ascii=False))
        return 1
    except RobustPsrError as e:
        logger.error(f"计算失败: {e.kind} {e}")
        print(json.dumps(e.to_record(), ensure_ascii=False))
        return 2

    doc = report.to_dict()
    doc["nominal"] = value(model, policy, reward)
    print(json.dumps(doc, ensure_ascii=False, indent=2))
    return 0


if __name__ == '__main__':
    sys.exit(main())
