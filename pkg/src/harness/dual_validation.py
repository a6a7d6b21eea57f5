#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
对偶求解器的随机校验

每个套件在固定种子的随机实例上，把对偶解与独立的原问题求解（网格或线性规划）比较。
"""

from __future__ import annotations

import time
from typing import Callable, Dict, List, Optional

import numpy as np

from src.analyzers.ambiguity_analyzer import Divergence, SetKind, SimplexGrid, UncertaintySpec, ball_rows
from src.analyzers.dual_solvers import (
    kl_dual_expectation, p_kl_dual, p_tv_dual, p_tv_primal, terminal_payoff, tv_dual_expectation,
)
from src.analyzers.robust_value_analyzer import robust_value_bruteforce, robust_value_t
from src.generators.instance_generator import random_model, random_policy, random_reward
from src.utils.common_utils import spawn_seed
from src.utils.logger import get_logger, log_performance

logger = get_logger(__name__)

SUITES = ("scalar-tv", "scalar-kl", "p-tv-duality", "p-kl-grid", "bellman-brute")

DEFAULT_COUNTS = {
    "scalar-tv": 500,
    "scalar-kl": 500,
    "p-tv-duality": 200,
    "p-kl-grid": 50,
    "bellman-brute": 200,
}

# 标量与 P 型 KL 网格的维数与分辨率
SCALAR_DIM = 3
TV_GRID_K = 1000
KL_GRID_K = 1000
KL_TOLERANCE = 2e-3
P_TV_TOLERANCE = 1e-3
BELLMAN_GRID_K = 50

# 半径范围：太小的球在网格上可能没有内点
XI_RANGE = (0.05, 0.5)


def _rng(seed, suite_index, case):
    return np.random.default_rng(spawn_seed(seed, suite_index, case))


def _scalar_case(rng):
    p0 = rng.dirichlet(np.full(SCALAR_DIM, 2.0))
    ell = rng.uniform(0.0, 1.0, size=SCALAR_DIM)
    xi = float(rng.uniform(*XI_RANGE))
    return p0, ell, xi


def _scalar_tv_error(rng, points):
    p0, ell, xi = _scalar_case(rng)
    dual = tv_dual_expectation(p0, ell, xi).value
    members = ball_rows(p0, xi, Divergence.TV, None, points)
    return abs(float(np.min(members @ ell)) - dual)


def _scalar_kl_error(rng, points):
    p0, ell, xi = _scalar_case(rng)
    dual = kl_dual_expectation(p0, ell, xi).value
    members = ball_rows(p0, xi, Divergence.KL, None, points)
    return abs(float(np.min(members @ ell)) - dual)


def _random_instance(rng, horizon, num_obs, num_actions):
    seed = int(rng.integers(0, 2 ** 31 - 1))
    model = random_model(horizon, num_obs, num_actions, rng_seed=seed)
    reward = random_reward(horizon, num_obs, num_actions, rng_seed=seed + 1)
    policy = random_policy(horizon, num_obs, num_actions, rng_seed=seed + 2)
    return model, policy, reward


def _p_tv_error(rng, horizon):
    model, policy, reward = _random_instance(rng, horizon, 2, 2)
    xi = float(rng.uniform(*XI_RANGE))
    primal = p_tv_primal(model, policy, reward, xi)
    dual = p_tv_dual(model, policy, reward, xi).value
    return abs(primal - dual)


def p_kl_grid_oracle(model, policy, reward, xi, grid: SimplexGrid):
    """
    H=2 时 P 型 KL 的网格原问题

    每个动作 a_1 的联合分布就是 T_1(·|o_1, a_1)，各序列独立取最小（并上中心行）。
    """
    f = terminal_payoff(model, policy, reward)[model.o1]
    rows = model.transitions[0][model.o1]
    points = grid.points()
    total = 0.0
    for a in range(model.num_actions):
        members = ball_rows(rows[a], xi, Divergence.KL, grid, points)
        candidates = np.vstack([rows[a][None, :], members])
        total += float(np.min(candidates @ f[a]))
    return total


def _p_kl_error(rng, grid):
    model, policy, reward = _random_instance(rng, 2, grid.n, 2)
    xi = float(rng.uniform(*XI_RANGE))
    dual = p_kl_dual(model, policy, reward, xi).value
    return abs(p_kl_grid_oracle(model, policy, reward, xi, grid) - dual)


def _bellman_error(rng, grid):
    model, policy, reward = _random_instance(rng, 2, grid.n, 2)
    divergence = Divergence.TV if rng.uniform() < 0.5 else Divergence.KL
    spec = UncertaintySpec(SetKind.T_TYPE, divergence, float(rng.uniform(*XI_RANGE)))
    exact = robust_value_t(model, policy, reward, spec).value
    brute = robust_value_bruteforce(model, policy, reward, spec, grid)
    return abs(exact - brute)


def _run_suite(name, count, tolerance, case_error: Callable[[int], float]) -> Dict:
    start = time.time()
    errors = [case_error(case) for case in range(count)]
    failures = sum(1 for e in errors if not e <= tolerance)
    max_error = float(max(errors)) if errors else 0.0
    result = {
        "suite": name,
        "cases": count,
        "failures": failures,
        "max_error": max_error,
        "tolerance": tolerance,
        "seconds": time.time() - start,
    }
    log = logger.info if failures == 0 else logger.warning
    log(f"{name}: {count} 例, 失败 {failures}, 最大误差 {max_error:.3e} (容差 {tolerance:.1e})")
    return result


@log_performance(logger)
def validate_duals(counts: Optional[Dict[str, int]] = None, seed=0) -> List[Dict]:
    """
    运行全部对偶校验套件

    Args:
        counts: 各套件的随机实例数，缺省取 DEFAULT_COUNTS；为 0 的套件跳过
        seed: 主种子

    Returns:
        每个套件一条 {suite, cases, failures, max_error, tolerance, seconds}
    """
    counts = {**DEFAULT_COUNTS, **(counts or {})}
    unknown = set(counts) - set(SUITES)
    if unknown:
        raise ValueError(f"未知的校验套件: {sorted(unknown)}")
    results = []

    if counts["scalar-tv"]:
        points = SimplexGrid(TV_GRID_K, SCALAR_DIM).points()
        results.append(_run_suite("scalar-tv", counts["scalar-tv"], 2.0 / TV_GRID_K,
                                  lambda c: _scalar_tv_error(_rng(seed, 0, c), points)))
    if counts["scalar-kl"]:
        points = SimplexGrid(KL_GRID_K, SCALAR_DIM).points()
        results.append(_run_suite("scalar-kl", counts["scalar-kl"], KL_TOLERANCE,
                                  lambda c: _scalar_kl_error(_rng(seed, 1, c), points)))
    # 偶数例 H=2，奇数例 H=3
    if counts["p-tv-duality"]:
        results.append(_run_suite("p-tv-duality", counts["p-tv-duality"], P_TV_TOLERANCE,
                                  lambda c: _p_tv_error(_rng(seed, 2, c), 2 + c % 2)))
    if counts["p-kl-grid"]:
        grid = SimplexGrid(KL_GRID_K, SCALAR_DIM)
        results.append(_run_suite("p-kl-grid", counts["p-kl-grid"], KL_TOLERANCE,
                                  lambda c: _p_kl_error(_rng(seed, 3, c), grid)))
    if counts["bellman-brute"]:
        grid = SimplexGrid(BELLMAN_GRID_K, 2)
        results.append(_run_suite("bellman-brute", counts["bellman-brute"], 2.0 / BELLMAN_GRID_K,
                                  lambda c: _bellman_error(_rng(seed, 4, c), grid)))
    return results
