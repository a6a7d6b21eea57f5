#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
内置实验实例生成器

- ring2：H=2、|O|=|A|=2 的参照实例
- ring2_family：以 ring2 为真值的扰动模型类
- random_model / random_reward：Dirichlet 随机实例
- 策略类：constant_actions / deterministic_all / mixtures，行为策略 uniform
"""

from __future__ import annotations

import itertools
from typing import List, Sequence

import numpy as np

from src.core.decision_process import Policy, RewardSpec, TabularModel, history_shape
from src.core.errors import ConfigError, TooLargeError

# ring2 中 o_1=0 时各动作下 P(o_2=0)
RING2_FIRST_OBS = (0.3, 0.2)

# ring2_family 中对 P(o_2=0|a=0)、P(o_2=0|a=1) 的平移
RING2_FAMILY_SHIFTS = (
    (0.0, 0.0),
    (0.1, 0.0),
    (0.0, 0.1),
    (0.1, 0.1),
    (-0.1, 0.0),
    (0.2, 0.2),
    (-0.1, 0.1),
    (0.2, -0.1),
)


def _ring2_rows(p_zero):
    """o_1=0 时两行由 p_zero 给出，不可达的 o_1=1 取反向（环）"""
    table = np.zeros((2, 2, 2))
    for a, p in enumerate(p_zero):
        table[0, a] = (p, 1.0 - p)
        table[1, a] = (1.0 - p, p)
    return table


def ring2() -> TabularModel:
    return TabularModel(2, 2, 2, 0, (_ring2_rows(RING2_FIRST_OBS),))


def ring2_reward() -> RewardSpec:
    """R = 1{o_2 = 1}"""
    return RewardSpec.observation_indicator(2, 2, 2, step=2, obs=1)


def ring2_family(size=8, truth_index=0) -> List[TabularModel]:
    """
    真值位于 truth_index 的扰动模型类

    其余成员依次取 RING2_FAMILY_SHIFTS 中的非零平移。
    """
    if not 1 <= size <= len(RING2_FAMILY_SHIFTS):
        raise ConfigError(f"ring2_family 的大小需在 [1, {len(RING2_FAMILY_SHIFTS)}]: {size}")
    if not 0 <= truth_index < size:
        raise ConfigError(f"真值下标越界: {truth_index}")
    others = [
        TabularModel(2, 2, 2, 0, (_ring2_rows(tuple(p + d for p, d in zip(RING2_FIRST_OBS, shift))),))
        for shift in RING2_FAMILY_SHIFTS[1:size]
    ]
    others.insert(truth_index, ring2())
    return others


def random_model(horizon, num_obs, num_actions, rng_seed, concentration=1.0, o1=0) -> TabularModel:
    """每行独立抽取 Dirichlet(concentration)"""
    rng = np.random.default_rng(rng_seed)
    tables = []
    for h in range(1, horizon):
        shape = history_shape(num_obs, num_actions, h)
        rows = rng.dirichlet(np.full(num_obs, float(concentration)), size=int(np.prod(shape)))
        tables.append(rows.reshape(shape + (num_obs,)))
    return TabularModel(horizon, num_obs, num_actions, o1, tuple(tables))


def random_reward(horizon, num_obs, num_actions, rng_seed) -> RewardSpec:
    rng = np.random.default_rng(rng_seed)
    return RewardSpec(horizon, num_obs, num_actions,
                      rng.uniform(0.0, 1.0, size=history_shape(num_obs, num_actions, horizon)))


def random_policy(horizon, num_obs, num_actions, rng_seed) -> Policy:
    rng = np.random.default_rng(rng_seed)
    tables = []
    for h in range(1, horizon + 1):
        shape = history_shape(num_obs, num_actions, h)
        rows = rng.dirichlet(np.ones(num_actions), size=int(np.prod(shape[:-1])))
        tables.append(rows.reshape(shape))
    return Policy(horizon, num_obs, num_actions, tuple(tables))


def uniform_behavior(horizon, num_obs, num_actions) -> Policy:
    return Policy.uniform(horizon, num_obs, num_actions)


def constant_actions(horizon, num_obs, num_actions) -> List[Policy]:
    """每个动作一个常数策略，按动作编号排列"""
    return [Policy.constant(horizon, num_obs, num_actions, a) for a in range(num_actions)]


def deterministic_all(horizon, num_obs, num_actions, o1=0, cap=4096) -> List[Policy]:
    """
    枚举 o_1 固定时可达的 x_h 上的全部确定性策略

    不可达的 x_h 一律选动作 0。数量超过 cap 时抛出 TooLargeError。
    """
    slots = []
    for h in range(1, horizon + 1):
        shape = history_shape(num_obs, num_actions, h)[:-1]
        for index in np.ndindex(*shape):
            if index[0] == o1:
                slots.append((h, index))
    count = num_actions ** len(slots)
    if count > cap:
        raise TooLargeError(f"确定性策略数 {count} 超过上限 {cap}")

    policies = []
    for choice in itertools.product(range(num_actions), repeat=len(slots)):
        tables = [np.zeros(history_shape(num_obs, num_actions, h)) for h in range(1, horizon + 1)]
        for table in tables:
            table[..., 0] = 1.0
        for (h, index), action in zip(slots, choice):
            tables[h - 1][index] = 0.0
            tables[h - 1][index + (action,)] = 1.0
        policies.append(Policy(horizon, num_obs, num_actions, tuple(tables)))
    return policies


def mixtures(policies: Sequence[Policy], steps=3) -> List[Policy]:
    """原策略加上两两之间的等间隔混合（不含端点）"""
    out = list(policies)
    weights = np.linspace(0.0, 1.0, steps + 2)[1:-1]
    for i, j in itertools.combinations(range(len(policies)), 2):
        for w in weights:
            out.append(Policy.mixture([policies[i], policies[j]], [1.0 - w, w]))
    return out
