#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
表格型非马尔可夫决策过程

历史 τ_h = (o_1, a_1, ..., o_h, a_h) 按 (o, a) 对的混合进制排名，
所有表都存成形如 (O, A, O, A, ..., O) 的稠密 numpy 数组，
展平后的行号即历史排名。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import ENUMERATION_CONFIG
from src.core.errors import ShapeError, TooLargeError
from src.utils.logger import get_logger

logger = get_logger(__name__)

PROB_TOL = 1e-12


def _freeze(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


def _check_rows(table, what, tol=PROB_TOL):
    """最后一维必须是概率分布"""
    if np.any(~np.isfinite(table)) or np.any(table < -tol):
        raise ShapeError(f"{what} 含有负数或非有限值")
    sums = table.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ShapeError(f"{what} 的行和偏离 1: {worst:.3e}")


def history_shape(num_obs, num_actions, h):
    """τ_h 的数组形状 (O, A) * h"""
    return (num_obs, num_actions) * h


def interleave(observations, actions):
    """(o_1..o_n), (a_1..a_n) -> (o_1, a_1, ..., o_n, a_n)"""
    out = []
    for o, a in zip(observations, actions):
        out.extend((int(o), int(a)))
    return tuple(out)


def check_enumeration(num_obs, num_actions, horizon, cap=None):
    """全量枚举前检查轨迹数是否超过上限"""
    cap = ENUMERATION_CONFIG["max_trajectories"] if cap is None else cap
    count = (num_obs * num_actions) ** horizon
    if count > cap:
        raise TooLargeError(f"轨迹数 {count} 超过枚举上限 {cap}")
    return count


@dataclass(frozen=True)
class Trajectory:
    """长度为 H 的观测序列与动作序列"""

    o: Tuple[int, ...]
    a: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "o", tuple(int(x) for x in self.o))
        object.__setattr__(self, "a", tuple(int(x) for x in self.a))
        if len(self.o) != len(self.a):
            raise ShapeError(f"观测长度 {len(self.o)} 与动作长度 {len(self.a)} 不一致")

    @property
    def horizon(self):
        return len(self.o)

    def index(self):
        """完整轨迹在 (O, A)^H 表中的下标"""
        return interleave(self.o, self.a)

    def history(self, h):
        """τ_h 的下标 (o_1, a_1, ..., o_h, a_h)"""
        return interleave(self.o[:h], self.a[:h])

    def prefix_x(self, h):
        """x_h = (o_1:h, a_1:h-1) 的下标"""
        return interleave(self.o[:h - 1], self.a[:h - 1]) + (self.o[h - 1],)


@dataclass(frozen=True, eq=False)
class TabularModel:
    """
    表格型非马尔可夫动态 {T_h(·|τ_h)}

    用途:
    - 模型 θ / D_θ：给定完整历史的下一观测分布，初始观测 o_1 固定。

    实现方式:
    - transitions[h-1] 形状为 (O, A)^h + (O,)；联合分布 P(o_1:h | a_1:h-1)
      通过逐步广播相乘得到并缓存。

    优点:
    - 所有概率精确可枚举；构造后只读，可在线程/进程间共享

    局限:
    - 规模为 (|O||A|)^H，只适合桌面规模实例

    维护建议:
    - 新增派生量请基于 joint_table / dynamics_table，不要重复实现乘积
    """

    horizon: int
    num_obs: int
    num_actions: int
    o1: int
    transitions: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.horizon < 1 or self.num_obs < 1 or self.num_actions < 1:
            raise ShapeError("H、|O|、|A| 必须为正整数")
        if not 0 <= self.o1 < self.num_obs:
            raise ShapeError(f"初始观测 o1={self.o1} 越界")
        tables = tuple(_freeze(t) for t in self.transitions)
        if len(tables) != self.horizon - 1:
            raise ShapeError(f"需要 {self.horizon - 1} 层转移表，实际 {len(tables)}")
        for h, table in enumerate(tables, start=1):
            expected = history_shape(self.num_obs, self.num_actions, h) + (self.num_obs,)
            if table.shape != expected:
                raise ShapeError(f"T_{h} 形状应为 {expected}，实际 {table.shape}")
            _check_rows(table, f"T_{h}")
        object.__setattr__(self, "transitions", tables)

    @classmethod
    def from_rows(cls, horizon, num_obs, num_actions, o1, rows):
        """rows[h-1] 为 ((O·A)^h, O) 的二维表（按历史排名）"""
        tables = []
        for h, block in enumerate(rows, start=1):
            shape = history_shape(num_obs, num_actions, h) + (num_obs,)
            tables.append(np.asarray(block, dtype=np.float64).reshape(shape))
        return cls(horizon, num_obs, num_actions, o1, tuple(tables))

    def transition_rows(self, h):
        """T_h 展平为 ((O·A)^h, O)"""
        return self.transitions[h - 1].reshape(-1, self.num_obs)

    def num_histories(self, h):
        return (self.num_obs * self.num_actions) ** h

    def same_dimensions(self, other):
        return (self.horizon, self.num_obs, self.num_actions) == \
            (other.horizon, other.num_obs, other.num_actions)

    def check_trajectory(self, traj: Trajectory):
        if traj.horizon != self.horizon:
            raise ShapeError(f"轨迹长度 {traj.horizon} 与 H={self.horizon} 不一致")
        if any(not 0 <= o < self.num_obs for o in traj.o) or \
                any(not 0 <= a < self.num_actions for a in traj.a):
            raise ShapeError("轨迹中的观测或动作越界")

    @cached_property
    def _joint_tables(self) -> List[np.ndarray]:
        joint = np.zeros(self.num_obs)
        joint[self.o1] = 1.0
        tables = [joint]
        for h in range(1, self.horizon):
            joint = joint[..., None, None] * self.transitions[h - 1]
            tables.append(joint)
        for table in tables:
            table.setflags(write=False)
        return tables

    def joint_table(self, h):
        """P(o_1:h | a_1:h-1)，形状 (O, A)^(h-1) + (O,)，h ∈ {1..H}"""
        return self._joint_tables[h - 1]

    def history_prob_table(self, h):
        """P(τ_h^o | τ_h^a) 按 τ_h 排列，形状 (O, A)^h；h=0 时为标量 1"""
        if h == 0:
            return np.ones(())
        joint = self.joint_table(h)
        return np.broadcast_to(joint[..., None], joint.shape + (self.num_actions,))

    def dynamics_table(self):
        """完整轨迹上的 P(o_1:H | a_1:H-1)，a_H 不影响"""
        check_enumeration(self.num_obs, self.num_actions, self.horizon)
        return np.array(self.history_prob_table(self.horizon))

    def check_consistency(self, tol=1e-10):
        """Σ_{o_h+1:H} P(o_1:H|a_1:H-1) 与 a_h:H-1 无关"""
        marginal = self.joint_table(self.horizon)
        for _ in range(self.horizon - 1):
            # 消去最后的观测后，被暴露出来的动作维度上取值必须一致
            marginal = marginal.sum(axis=-1)
            spread = marginal.max(axis=-1) - marginal.min(axis=-1)
            if np.any(spread > tol):
                return False
            marginal = marginal[..., 0]
        return True


@dataclass(frozen=True, eq=False)
class Policy:
    """
    历史依赖策略 π_h(·|x_h)，x_h = (o_1:h, a_1:h-1)

    probabilities[h-1] 的形状为 (O, A)^h，最后一维为动作分布。
    """

    horizon: int
    num_obs: int
    num_actions: int
    probabilities: Tuple[np.ndarray, ...]
    deterministic: bool = field(init=False)

    def __post_init__(self):
        tables = tuple(_freeze(t) for t in self.probabilities)
        if len(tables) != self.horizon:
            raise ShapeError(f"策略需要 {self.horizon} 层，实际 {len(tables)}")
        for h, table in enumerate(tables, start=1):
            expected = history_shape(self.num_obs, self.num_actions, h)
            if table.shape != expected:
                raise ShapeError(f"π_{h} 形状应为 {expected}，实际 {table.shape}")
            _check_rows(table, f"π_{h}")
        object.__setattr__(self, "probabilities", tables)
        deterministic = all(np.all((t == 0.0) | (t == 1.0)) for t in tables)
        object.__setattr__(self, "deterministic", bool(deterministic))

    @classmethod
    def from_rows(cls, horizon, num_obs, num_actions, rows):
        tables = []
        for h, block in enumerate(rows, start=1):
            shape = history_shape(num_obs, num_actions, h)
            tables.append(np.asarray(block, dtype=np.float64).reshape(shape))
        return cls(horizon, num_obs, num_actions, tuple(tables))

    @classmethod
    def uniform(cls, horizon, num_obs, num_actions):
        tables = [np.full(history_shape(num_obs, num_actions, h), 1.0 / num_actions)
                  for h in range(1, horizon + 1)]
        return cls(horizon, num_obs, num_actions, tuple(tables))

    @classmethod
    def constant(cls, horizon, num_obs, num_actions, action):
        """每一步都选同一个动作"""
        tables = []
        for h in range(1, horizon + 1):
            table = np.zeros(history_shape(num_obs, num_actions, h))
            table[..., action] = 1.0
            tables.append(table)
        return cls(horizon, num_obs, num_actions, tuple(tables))

    @classmethod
    def mixture(cls, policies: Sequence["Policy"], weights: Sequence[float]):
        """逐步混合（每个 x_h 上的动作分布取加权平均）"""
        first = policies[0]
        weights = np.asarray(weights, dtype=np.float64)
        weights = weights / weights.sum()
        tables = []
        for h in range(first.horizon):
            tables.append(sum(w * p.probabilities[h] for w, p in zip(weights, policies)))
        return cls(first.horizon, first.num_obs, first.num_actions, tuple(tables))

    def decision_rows(self, h):
        """π_h 展平为 ((O·A)^(h-1)·O, A)"""
        return self.probabilities[h - 1].reshape(-1, self.num_actions)

    def action_prob(self, traj: Trajectory, h):
        return float(self.probabilities[h - 1][traj.history(h)])

    def weight_table(self):
        """Π_h π_h(a_h|x_h)，形状 (O, A)^H"""
        weights = np.ones(())
        for h in range(1, self.horizon + 1):
            pad = (1, 1) * (self.horizon - h)
            weights = weights * self.probabilities[h - 1].reshape(
                self.probabilities[h - 1].shape + pad)
        return weights

    def history_weight_table(self, h):
        """Π_{j≤h} π_j(a_j|x_j)，按 τ_h 排列"""
        weights = np.ones(())
        for j in range(1, h + 1):
            pad = (1, 1) * (h - j)
            weights = weights * self.probabilities[j - 1].reshape(
                self.probabilities[j - 1].shape + pad)
        return weights


@dataclass(frozen=True, eq=False)
class RewardSpec:
    """终端奖励 R(τ_H) ∈ [0, 1]，形状 (O, A)^H"""

    horizon: int
    num_obs: int
    num_actions: int
    table: np.ndarray

    def __post_init__(self):
        table = _freeze(self.table)
        expected = history_shape(self.num_obs, self.num_actions, self.horizon)
        if table.shape != expected and table.size == int(np.prod(expected)):
            table = _freeze(table.reshape(expected))
        if table.shape != expected:
            raise ShapeError(f"奖励表形状应为 {expected}，实际 {table.shape}")
        if np.any(~np.isfinite(table)) or np.any(table < 0.0) or np.any(table > 1.0):
            raise ShapeError("奖励必须位于 [0, 1]")
        object.__setattr__(self, "table", table)

    @classmethod
    def constant(cls, horizon, num_obs, num_actions, c):
        return cls(horizon, num_obs, num_actions,
                   np.full(history_shape(num_obs, num_actions, horizon), float(c)))

    @classmethod
    def observation_indicator(cls, horizon, num_obs, num_actions, step, obs):
        """R = 1{o_step = obs}，step 从 1 开始计数"""
        table = np.zeros(history_shape(num_obs, num_actions, horizon))
        index = [slice(None)] * (2 * horizon)
        index[2 * (step - 1)] = obs
        table[tuple(index)] = 1.0
        return cls(horizon, num_obs, num_actions, table)

    @classmethod
    def from_step_rewards(cls, horizon, num_obs, num_actions, step_tables, normalize=False):
        """
        将逐步奖励 r_h(τ_h) 预先求和为终端奖励

        Args:
            step_tables: 长度为 H 的列表，第 h 个形状为 (O, A)^h
            normalize: 是否除以 H 以保证落在 [0, 1]
        """
        total = np.zeros(history_shape(num_obs, num_actions, horizon))
        for h, step in enumerate(step_tables, start=1):
            step = np.asarray(step, dtype=np.float64)
            if step.shape != history_shape(num_obs, num_actions, h):
                raise ShapeError(f"第 {h} 步奖励形状不正确: {step.shape}")
            total = total + step.reshape(step.shape + (1, 1) * (horizon - h))
        if normalize:
            total = total / horizon
        return cls(horizon, num_obs, num_actions, total)

    def reward(self, traj: Trajectory):
        return float(self.table[traj.index()])


def _check_pair(model: TabularModel, policy: Policy):
    if (model.horizon, model.num_obs, model.num_actions) != \
            (policy.horizon, policy.num_obs, policy.num_actions):
        raise ShapeError("模型与策略的维度不一致")


def _check_reward(model: TabularModel, reward: RewardSpec):
    if (model.horizon, model.num_obs, model.num_actions) != \
            (reward.horizon, reward.num_obs, reward.num_actions):
        raise ShapeError("模型与奖励的维度不一致")


def traj_prob_dynamics(model: TabularModel, traj: Trajectory) -> float:
    """Π_h T_h(o_h+1|τ_h)；o_1 与模型不符时为 0"""
    model.check_trajectory(traj)
    return float(model.joint_table(model.horizon)[traj.prefix_x(model.horizon)])


def traj_prob_policy(model: TabularModel, policy: Policy, traj: Trajectory) -> float:
    _check_pair(model, policy)
    prob = traj_prob_dynamics(model, traj)
    for h in range(1, model.horizon + 1):
        prob *= policy.action_prob(traj, h)
    return prob


def trajectory_distribution(model: TabularModel, policy: Policy) -> np.ndarray:
    """D_θ^π 在全部轨迹上的稠密表，形状 (O, A)^H"""
    _check_pair(model, policy)
    return model.dynamics_table() * policy.weight_table()


def history_distribution(model: TabularModel, policy: Policy, h) -> np.ndarray:
    """D_θ^π(τ_h)，形状 (O, A)^h"""
    _check_pair(model, policy)
    return model.history_prob_table(h) * policy.history_weight_table(h)


def value(model: TabularModel, policy: Policy, reward: RewardSpec) -> float:
    """V_θ,R^π = Σ_τ D_θ^π(τ) R(τ)"""
    _check_reward(model, reward)
    return float(np.sum(trajectory_distribution(model, policy) * reward.table))


def sample_trajectory(model: TabularModel, policy: Policy, rng_seed) -> Trajectory:
    """按 D_θ^π 顺序采样一条轨迹"""
    _check_pair(model, policy)
    rng = np.random.default_rng(rng_seed)
    observations = [model.o1]
    actions = []
    for h in range(1, model.horizon + 1):
        x_h = interleave(observations[:-1], actions) + (observations[-1],)
        probs = policy.probabilities[h - 1][x_h]
        actions.append(int(rng.choice(model.num_actions, p=probs)))
        if h < model.horizon:
            row = model.transitions[h - 1][interleave(observations, actions)]
            observations.append(int(rng.choice(model.num_obs, p=row)))
    return Trajectory(tuple(observations), tuple(actions))


def sample_dataset(model: TabularModel, policy: Policy, n, rng_seed) -> Tuple[np.ndarray, np.ndarray]:
    """
    一次性采样 n 条轨迹

    Returns:
        (observations, actions)，形状均为 (n, H) 的整型数组
    """
    table = trajectory_distribution(model, policy)
    probs = table.ravel()
    probs = probs / probs.sum()
    rng = np.random.default_rng(rng_seed)
    flat = rng.choice(probs.size, size=int(n), p=probs)
    columns = np.stack(np.unravel_index(flat, table.shape), axis=1)
    return columns[:, 0::2].astype(np.int64), columns[:, 1::2].astype(np.int64)


def l1_model_distance(model_a: TabularModel, model_b: TabularModel, policy: Policy) -> float:
    """||D_a^π - D_b^π||_1"""
    if not model_a.same_dimensions(model_b):
        raise ShapeError("两个模型维度不一致")
    p = trajectory_distribution(model_a, policy)
    q = trajectory_distribution(model_b, policy)
    return float(np.abs(p - q).sum())


def hellinger_sq(model_a: TabularModel, model_b: TabularModel, policy: Policy) -> float:
    """½ Σ (√p - √q)²"""
    if not model_a.same_dimensions(model_b):
        raise ShapeError("两个模型维度不一致")
    p = trajectory_distribution(model_a, policy)
    q = trajectory_distribution(model_b, policy)
    return distribution_hellinger_sq(p, q)


def distribution_hellinger_sq(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))


def tv_hellinger_bounds(p, q) -> dict:
    """
    TV 与 Hellinger 的辅助不等式（用作性质检查）

    对概率分布有 D_H² ≤ TV ≤ √2·D_H，以及有界测度上
    ||P-Q||_1² ≤ 4(|P|+|Q|)·D_H²。
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    l1 = float(np.abs(p - q).sum())
    h2 = distribution_hellinger_sq(p, q)
    tv = 0.5 * l1
    return {
        "l1": l1,
        "tv": tv,
        "hellinger_sq": h2,
        "lower_holds": h2 <= tv + 1e-12,
        "upper_holds": tv <= np.sqrt(2.0 * h2) + 1e-12,
        "mass_holds": l1 ** 2 <= 4.0 * (p.sum() + q.sum()) * h2 + 1e-12,
    }


def trajectory_probabilities(table: np.ndarray, observations: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """在 (O, A)^H 表上批量查询 (n, H) 轨迹的取值"""
    horizon = observations.shape[1]
    index = []
    for h in range(horizon):
        index.append(observations[:, h])
        index.append(actions[:, h])
    return table[tuple(index)]


def all_trajectories(num_obs, num_actions, horizon, o1: Optional[int] = None):
    """按排名顺序枚举全部轨迹（o1 给定时只保留该初始观测）"""
    shape = history_shape(num_obs, num_actions, horizon)
    for index in np.ndindex(*shape):
        if o1 is not None and index[0] != o1:
            continue
        yield Trajectory(index[0::2], index[1::2])
