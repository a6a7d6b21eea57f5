#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
离线鲁棒策略学习入口

说明：
- 数据来源二选一：
  1) --data / --class / --policies / --reward 指定 JSON 文件；
  2) --config 指定实验配置，按 --n 与 --data-seed 在真值模型下用行为策略采样。
- 运行算法 1 或 2，打印所选策略下标，并把诊断块写到 `output/fit/fit_report.json`（可用 --output 修改）。
- 模型类带真值下标（nominal）时额外给出覆盖系数、理论界与 MLE 检验。
- 退出码：0 成功；1 配置错误；2 计算错误。
"""

import argparse
import json
import os
import sys

import numpy as np

from config.settings import FIT_OUTPUT_DIR, LEARNER_CONFIG
from src.analyzers.ambiguity_analyzer import UncertaintySpec
from src.analyzers.diagnostics_analyzer import coverage_report, gap_bound, mle_hellinger_check
from src.analyzers.psr_analyzer import gamma_condition, psr_rank
from src.analyzers.robust_value_analyzer import robust_value
from src.core.decision_process import sample_dataset
from src.core.errors import ConfigError, RobustPsrError
from src.core.model_io import load_policies, load_reward
from src.generators.report_generator import write_fit_report
from src.harness.experiment_config import build_setup, load_experiment_config
from src.learners.offline_learner import (
    LearnerParams, ModelClass, OfflineDataset, algorithm1, algorithm2, behavior_iota,
)
from src.utils.common_utils import load_json
from src.utils.logger import get_logger

logger = get_logger("robust_psr.fit")


def build_parser():
    parser = argparse.ArgumentParser(description='离线鲁棒策略学习（算法 1 / 算法 2）')
    parser.add_argument('--data', type=str, help='数据集 JSON（observations / actions / behavior）')
    parser.add_argument('--class', dest='model_class', type=str, help='模型类 JSON')
    parser.add_argument('--policies', type=str, help='候选策略 JSON')
    parser.add_argument('--reward', type=str, help='奖励 JSON')
    parser.add_argument('--config', type=str, help='实验配置 JSON（替代上面四个文件）')
    parser.add_argument('--n', type=int, default=1024, help='--config 模式下的样本数')
    parser.add_argument('--data-seed', type=int, default=0, help='--config 模式下的采样种子')
    parser.add_argument('--algo', type=int, choices=[1, 2], default=1, help='算法编号')
    parser.add_argument('--set', dest='set_kind', choices=['T', 'P'], help='不确定集类型')
    parser.add_argument('--div', choices=['tv', 'kl'], help='散度')
    parser.add_argument('--xi', type=float, help='半径 ξ')
    parser.add_argument('--pmin', type=float, default=None, help='蒸馏阈值 p_min')
    parser.add_argument('--alpha', type=float, default=None, help='奖励项系数 α')
    parser.add_argument('--lambda', dest='ridge', type=float, default=None, help='岭参数 λ')
    parser.add_argument('--beta', type=float, default=None, help='置信参数 β')
    parser.add_argument('--cu', type=float, default=None, help='直接指定缩放常数 C_u')
    parser.add_argument('--seed', type=int, default=LEARNER_CONFIG["split_seed"], help='蒸馏数据划分种子')
    parser.add_argument('--output', type=str, default=os.path.join(FIT_OUTPUT_DIR, 'fit_report.json'),
                        help='诊断 JSON 输出路径')
    return parser


def _load_inputs(args):
    """返回 (data, model_class, policies, reward, spec)"""
    if args.config:
        config = load_experiment_config(args.config)
        setup = build_setup(config)
        observations, actions = sample_dataset(setup.truth, setup.behavior, args.n, args.data_seed)
        data = OfflineDataset(observations, actions, setup.behavior)
        spec = config.uncertainty
        if args.set_kind:
            spec = _spec_from_args(args)
        return data, setup.model_class, setup.policies, setup.reward, spec

    missing = [flag for flag, v in (("--data", args.data), ("--class", args.model_class),
                                    ("--policies", args.policies), ("--reward", args.reward)) if not v]
    if missing:
        raise ConfigError(f"缺少参数: {', '.join(missing)}（或使用 --config）")
    try:
        data = OfflineDataset.from_dict(load_json(args.data))
        model_class = ModelClass.from_dict(load_json(args.model_class))
    except (OSError, ValueError) as e:
        raise ConfigError(f"无法读取输入: {e}") from e
    return data, model_class, load_policies(args.policies), load_reward(args.reward), _spec_from_args(args)


def _spec_from_args(args):
    if args.set_kind is None or args.div is None or args.xi is None:
        raise ConfigError("需要 --set、--div 与 --xi")
    return UncertaintySpec.from_dict({"set": args.set_kind, "div": args.div, "xi": args.xi})


def _truth_diagnostics(result, data, model_class, policies, reward, spec, algo, n):
    """
    模型类带真值下标时的诊断

    覆盖系数针对真值下鲁棒最优的候选策略 π*；另给出理论界、真值下的间隙与 MLE 检验。
    """
    truth = model_class[model_class.nominal]
    tests = model_class.tests
    truth_values = [robust_value(truth, p, reward, spec).value for p in policies]
    best = int(np.argmax(truth_values))
    coverage = coverage_report(policies[best], data.behavior, truth, tests)
    check = mle_hellinger_check(model_class[result.theta_hat], truth, data.behavior,
                                n, len(model_class), LEARNER_CONFIG["delta"])
    beta = result.params.get("beta")
    c_u = result.params.get("c_u", 1.0)
    if algo == 1:
        bound = gap_bound(1, horizon=truth.horizon, n=n, c_u=c_u, coverage=coverage.type1, beta=beta,
                          rank=psr_rank(truth), dimension=tests.dimension,
                          q_a=tests.max_action_sequences, iota=behavior_iota(data.behavior, tests),
                          gamma=1.0 / gamma_condition(truth, tests))
    else:
        bound = gap_bound(2, horizon=truth.horizon, n=n, c_u=c_u, coverage=coverage.type2, beta=beta)
    return {
        "robust_optimal": best,
        "gap": truth_values[best] - truth_values[result.index],
        "coverage": coverage.to_dict(),
        "gap_bound": bound,
        "mle_check": check._asdict(),
    }


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data, model_class, policies, reward, spec = _load_inputs(args)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        print(json.dumps(e.to_record(), ensure_ascii=False))
        return 1

    params = LearnerParams(split_seed=args.seed).overrides(
        p_min=args.pmin, alpha=args.alpha, ridge=args.ridge, beta=args.beta, c_u=args.cu)
    print(f'数据集 N={data.size}, 模型类 |Θ|={len(model_class)}, 候选策略 {len(policies)} 个, 集合 {spec.label}')
    try:
        if args.algo == 1:
            result = algorithm1(data, model_class, policies, reward, spec, params=params)
        else:
            result = algorithm2(data, model_class, policies, reward, spec, beta=args.beta)
        report = {"algorithm": args.algo, "set": spec.to_dict(), "n": data.size}
        report.update(result.diagnostics())
        if model_class.nominal is not None:
            report["truth"] = _truth_diagnostics(result, data, model_class, policies, reward, spec,
                                                 args.algo, data.size)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        print(json.dumps(e.to_record(), ensure_ascii=False))
        return 1
    except RobustPsrError as e:
        logger.error(f"学习失败: {e.kind} {e}")
        print(json.dumps(e.to_record(), ensure_ascii=False))
        return 2

    write_fit_report(report, args.output)
    print(f'所选策略: {result.index}  θ̂: {result.theta_hat}  |D^g|: {result.dg_size}  |C|: {result.conf_size}')
    print(f'诊断已保存: {args.output}')
    return 0


if __name__ == '__main__':
    sys.exit(main())
