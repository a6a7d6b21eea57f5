#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
鲁棒期望的对偶求解器

- 标量 TV / KL 对偶（逐行内层问题）
- P 型 TV：线性规划原问题 P1 及其对偶（各层乘子自由）
- P 型 KL：逐动作序列的一维凹最大化
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from config.settings import DUAL_CONFIG
from src.analyzers.simplex_lp import LinearProgram, dump_lp, simplex_lp_solve
from src.core.decision_process import Policy, RewardSpec, TabularModel, check_enumeration
from src.core.errors import ShapeError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class DualSolution:
    """
    对偶解

    multiplier: 标量对偶的 λ，或 P 型 KL 的逐序列 η 向量
    gamma / lam: P 型 TV 的 γ(x_H) 与 λ(τ_H-1)
    degenerate: 乘子落在 0 的极限（目标在相关区域平坦）
    """

    value: float
    multiplier: Optional[object] = None
    gamma: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    iterations: int = 0
    residual: float = 0.0
    degenerate: bool = False


# ---------------------------------------------------------------- 标量对偶

def tv_dual_rows(p0, ell, radii):
    """
    逐行求 max_λ {λ - E[(λ-ℓ)+] - ξ·max(λ-ℓ)+}

    目标是 λ 的分段线性凹函数，断点在 ℓ 的取值处，逐个断点求值即得精确最优。

    Args:
        p0, ell: (m, n) 数组
        radii: (m,) 半径
    Returns:
        (values, lambdas)
    """
    p0 = np.atleast_2d(np.asarray(p0, dtype=np.float64))
    ell = np.atleast_2d(np.asarray(ell, dtype=np.float64))
    radii = np.broadcast_to(np.asarray(radii, dtype=np.float64), p0.shape[:1])
    lam = ell[:, :, None]
    excess = np.maximum(lam - ell[:, None, :], 0.0)
    expected = (p0[:, None, :] * excess).sum(axis=-1)
    worst = np.maximum(lam[:, :, 0] - ell.min(axis=1, keepdims=True), 0.0)
    objective = lam[:, :, 0] - expected - radii[:, None] * worst
    best = objective.argmax(axis=1)
    rows = np.arange(p0.shape[0])
    return objective[rows, best], lam[rows, best, 0]


def tv_dual_expectation(p0, ell, xi) -> DualSolution:
    """TV 球上 E_P[ℓ] 的下确界（半 ℓ1 半径 ξ）"""
    p0 = np.asarray(p0, dtype=np.float64)
    ell = np.asarray(ell, dtype=np.float64)
    if p0.shape != ell.shape:
        raise ShapeError(f"p0 与 ℓ 的长度不一致: {p0.shape} vs {ell.shape}")
    values, lams = tv_dual_rows(p0[None, :], ell[None, :], np.array([xi]))
    return DualSolution(value=float(values[0]), multiplier=float(lams[0]))


def _kl_dual_mixture(weights, rows, values, xi, tol=None) -> DualSolution:
    """
    max_{η≥0} -η Σ_k w_k log E_{rows_k}[exp(-values_k/η)] - ηξ

    按支撑上的最小值平移后求值；η→0 的极限单独比较。
    单行 (k=1) 即标量 KL 对偶。
    """
    tol = DUAL_CONFIG["golden_tol"] if tol is None else tol
    weights = np.asarray(weights, dtype=np.float64)
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    keep = weights > 0
    weights, rows, values = weights[keep], rows[keep], values[keep]
    if weights.size == 0:
        return DualSolution(value=0.0, multiplier=0.0, degenerate=True)

    support = rows > 0
    expectation = float(np.sum(weights * np.sum(rows * np.where(support, values, 0.0), axis=1)))
    if xi == 0.0:
        return DualSolution(value=expectation, multiplier=math.inf)

    lo = float(values[support].min())
    mass = float(weights.sum())
    hi = float(values[support].max())
    # η→0：每行取支撑上的最小值
    limit = float(np.sum(weights * np.where(support, values, np.inf).min(axis=1)))
    if hi - lo <= 0.0:
        return DualSolution(value=lo * mass, multiplier=0.0, degenerate=True)

    shifted = np.where(support, values - lo, 0.0)

    def objective(eta):
        lse = logsumexp(-shifted / eta, b=rows, axis=1)
        return lo * mass - eta * float(np.sum(weights * lse)) - eta * xi

    upper = (hi - lo) / xi + 1.0
    result = minimize_scalar(lambda eta: -objective(eta),
                             bounds=(DUAL_CONFIG["kl_lambda_floor"], upper),
                             method="bounded", options={"xatol": tol})
    eta = float(result.x)
    best = objective(eta)
    if limit >= best:
        return DualSolution(value=limit, multiplier=0.0, iterations=int(result.nfev), degenerate=True)
    return DualSolution(value=best, multiplier=eta, iterations=int(result.nfev))


def kl_dual_expectation(p0, ell, xi, tol=None) -> DualSolution:
    """KL 球上 E_P[ℓ] 的下确界：sup_{λ≥0} {-λ log E[exp(-ℓ/λ)] - λξ}"""
    p0 = np.asarray(p0, dtype=np.float64)
    ell = np.asarray(ell, dtype=np.float64)
    if p0.shape != ell.shape:
        raise ShapeError(f"p0 与 ℓ 的长度不一致: {p0.shape} vs {ell.shape}")
    return _kl_dual_mixture(np.ones(1), p0[None, :], ell[None, :], float(xi), tol)


# ---------------------------------------------------------------- P 型公共部分

def terminal_payoff(model: TabularModel, policy: Policy, reward: RewardSpec) -> np.ndarray:
    """
    f(x_H) = Π_{h<H} π_h(a_h|x_h) · Σ_{a_H} π_H(a_H|x_H) R(τ_H)

    形状 (O, A)^(H-1) + (O,)，与 joint_table(H) 对齐。
    """
    if not (model.same_dimensions(policy) and model.same_dimensions(reward)):
        raise ShapeError("模型、策略与奖励的维度不一致")
    check_enumeration(model.num_obs, model.num_actions, model.horizon)
    return (policy.weight_table() * reward.table).sum(axis=-1)


def group_by_sequence(sliced) -> np.ndarray:
    """
    o_1 固定后的 x 表 (a_1, o_2, a_2, ..., o_k) 重排为 (动作序列排名, 观测路径排名)
    """
    sliced = np.asarray(sliced)
    act_axes = list(range(0, sliced.ndim, 2))
    obs_axes = list(range(1, sliced.ndim, 2))
    ordered = np.transpose(sliced, act_axes + obs_axes)
    n_seq = int(np.prod([sliced.shape[a] for a in act_axes]))
    return ordered.reshape(n_seq, -1)


def sequence_budgets(num_sequences, xi, convention=None, sequence_radii=None) -> np.ndarray:
    """每个动作序列的 LP 预算（tv 约定下为 2ξ）"""
    convention = DUAL_CONFIG["tv_budget_convention"] if convention is None else convention
    radii = np.full(num_sequences, float(xi)) if sequence_radii is None \
        else np.asarray(sequence_radii, dtype=np.float64)
    if radii.shape != (num_sequences,):
        raise ShapeError(f"序列半径长度应为 {num_sequences}")
    return 2.0 * radii if convention == "tv" else radii


# ---------------------------------------------------------------- P 型 TV 原问题

def build_p_tv_lp(model: TabularModel, policy: Policy, reward: RewardSpec, xi,
                  convention=None, sequence_radii=None) -> LinearProgram:
    """
    构造 P1：变量为 o_1 固定后的 P(x_h) (h=2..H) 与松弛 s(x_H)

    - 流守恒：Σ_{o_h+1} P(x_h, a_h, o_h+1) = P(x_h)，h=1 时右端为 1
    - 绝对偏差：±(P(x_H) - P*(x_H)) ≤ s(x_H)
    - 预算：每个动作序列上 Σ s ≤ budget
    """
    horizon, num_obs, num_actions = model.horizon, model.num_obs, model.num_actions
    f = terminal_payoff(model, policy, reward)[model.o1]
    pstar = model.joint_table(horizon)[model.o1]

    ids = {}
    counter = 0
    for h in range(2, horizon + 1):
        shape = (num_actions,) + (num_obs, num_actions) * (h - 2) + (num_obs,)
        size = int(np.prod(shape))
        ids[h] = np.arange(counter, counter + size).reshape(shape)
        counter += size
    slack = np.arange(counter, counter + ids[horizon].size).reshape(ids[horizon].shape)
    n_vars = counter + slack.size

    eq_rows, eq_rhs = [], []
    for a1 in range(num_actions):
        row = np.zeros(n_vars)
        row[ids[2][a1].ravel()] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)
    for h in range(2, horizon):
        parent, child = ids[h], ids[h + 1]
        for index in np.ndindex(*parent.shape):
            for a in range(num_actions):
                row = np.zeros(n_vars)
                row[child[index + (a,)]] = 1.0
                row[parent[index]] = -1.0
                eq_rows.append(row)
                eq_rhs.append(0.0)

    terminal = ids[horizon].ravel()
    s_flat = slack.ravel()
    p_flat = pstar.ravel()
    n_term = terminal.size
    le = np.zeros((2 * n_term, n_vars))
    le[np.arange(n_term), terminal] = 1.0
    le[np.arange(n_term), s_flat] = -1.0
    le[n_term + np.arange(n_term), terminal] = -1.0
    le[n_term + np.arange(n_term), s_flat] = -1.0
    le_rhs = np.concatenate([p_flat, -p_flat])

    grouped_slack = group_by_sequence(slack)
    budgets = sequence_budgets(grouped_slack.shape[0], xi, convention, sequence_radii)
    budget_rows = np.zeros((grouped_slack.shape[0], n_vars))
    for seq, members in enumerate(grouped_slack):
        budget_rows[seq, members] = 1.0

    c = np.zeros(n_vars)
    c[terminal] = f.ravel()
    return LinearProgram(
        c=c,
        a_eq=np.array(eq_rows),
        b_eq=np.array(eq_rhs),
        a_le=np.vstack([le, budget_rows]),
        b_le=np.concatenate([le_rhs, budgets]),
    )


def p_tv_primal(model: TabularModel, policy: Policy, reward: RewardSpec, xi,
                convention=None, sequence_radii=None, dump_path=None) -> float:
    """P 型 TV 鲁棒值的精确线性规划解"""
    if model.horizon == 1:
        return float(terminal_payoff(model, policy, reward)[model.o1])
    lp = build_p_tv_lp(model, policy, reward, xi, convention, sequence_radii)
    if dump_path:
        dump_lp(lp, dump_path)
    solution = simplex_lp_solve(lp)
    logger.debug(f"P1 求解完成: value={solution.value:.12g}, 迭代 {solution.iterations}, "
                 f"互补松弛残差 {solution.cs_residual:.2e}")
    return solution.value


# ---------------------------------------------------------------- P 型 TV 对偶

def _multiplier_ids(horizon, num_obs, num_actions):
    """各层流守恒乘子 μ_h(τ_h) 的变量编号，h=1..H-1"""
    ids = {}
    counter = 0
    for h in range(1, horizon):
        shape = (num_actions,) + (num_obs, num_actions) * (h - 1)
        size = int(np.prod(shape))
        ids[h] = np.arange(counter, counter + size).reshape(shape)
        counter += size
    return ids, counter


def build_p_tv_dual_lp(model: TabularModel, policy: Policy, reward: RewardSpec, xi,
                       convention=None, sequence_radii=None) -> LinearProgram:
    """
    P1 的对偶（最小化形式），变量依次为 μ_1..μ_H-1（自由）、γ(x_H) ≥ 0、t(动作序列) ≥ 0

        min  Σ P*(x_H)γ(x_H) + Σ budget·t
        s.t. |f(x_H) + λ(τ_H-1) - γ(x_H)| ≤ t(a_1:H-1)，λ = μ_H-1
             μ_h-1(τ_h-1) = Σ_{a_h} μ_h(τ_h-1, o_h, a_h)，h = 2..H-1

    对偶值 = Σ P*f - 最优值。
    """
    horizon, num_obs, num_actions = model.horizon, model.num_obs, model.num_actions
    f = terminal_payoff(model, policy, reward)[model.o1]
    pstar = model.joint_table(horizon)[model.o1]

    mu_ids, n_mu = _multiplier_ids(horizon, num_obs, num_actions)
    n_term = f.size
    terminal_seq = group_by_sequence(np.arange(n_term).reshape(f.shape))
    n_seq = terminal_seq.shape[0]
    seq_of = np.empty(n_term, dtype=np.int64)
    for seq, members in enumerate(terminal_seq):
        seq_of[members] = seq
    n_vars = n_mu + n_term + n_seq
    gamma_ids = n_mu + np.arange(n_term)
    t_ids = n_mu + n_term + seq_of
    lam_ids = np.broadcast_to(mu_ids[horizon - 1][..., None], f.shape).ravel()

    rows = np.arange(n_term)
    le = np.zeros((2 * n_term, n_vars))
    le[rows, lam_ids] = 1.0
    le[rows, gamma_ids] = -1.0
    le[rows, t_ids] = -1.0
    le[n_term + rows, lam_ids] = -1.0
    le[n_term + rows, gamma_ids] = 1.0
    le[n_term + rows, t_ids] = -1.0
    le_rhs = np.concatenate([-f.ravel(), f.ravel()])

    eq_rows = []
    for h in range(2, horizon):
        parent, child = mu_ids[h - 1], mu_ids[h]
        for index in np.ndindex(*parent.shape):
            for o in range(num_obs):
                row = np.zeros(n_vars)
                row[parent[index]] = 1.0
                row[child[index + (o,)].ravel()] -= 1.0
                eq_rows.append(row)

    c = np.zeros(n_vars)
    c[gamma_ids] = pstar.ravel()
    c[n_mu + n_term:] = sequence_budgets(n_seq, xi, convention, sequence_radii)
    lower = np.concatenate([np.full(n_mu, -np.inf), np.zeros(n_term + n_seq)])
    a_eq = np.array(eq_rows) if eq_rows else None
    b_eq = np.zeros(len(eq_rows)) if eq_rows else None
    return LinearProgram(c=c, a_eq=a_eq, b_eq=b_eq, a_le=le, b_le=le_rhs, lower=lower)


class _PolishedTvDual:
    """
    给定 λ 时对 γ ≥ 0 精确最大化后的对偶目标

    每个动作序列上，令 t = max|γ - c|，c = f + λ_p(x)，则最优 γ = (c - t)+，
    t ≥ max(0, max(-c))；目标对 t 分段线性凹，只需在断点处求值。
    """

    def __init__(self, f_grouped, p_grouped, parent_grouped, budgets):
        self.f = f_grouped
        self.p = p_grouped
        self.parent = parent_grouped
        self.budgets = budgets
        self.rows = np.arange(f_grouped.shape[0])

    def evaluate(self, lam_flat):
        c = self.f + lam_flat[self.parent]
        t_min = np.maximum(0.0, (-c).max(axis=1))
        candidates = np.maximum(np.concatenate([t_min[:, None], c], axis=1), t_min[:, None])
        gamma = np.maximum(0.0, c[:, None, :] - candidates[:, :, None])
        values = (self.p[:, None, :] * (self.f[:, None, :] - gamma)).sum(axis=-1) \
            - self.budgets[:, None] * candidates
        best = values.argmax(axis=1)
        return float(values[self.rows, best].sum()), gamma[self.rows, best]


def p_tv_dual(model: TabularModel, policy: Policy, reward: RewardSpec, xi,
              convention=None, sequence_radii=None) -> DualSolution:
    """
    P 型 TV 对偶：各层乘子全部作为自由变量，单纯形求对偶线性规划

    取出最后一层乘子 λ 后按断点公式重新求最优 γ，返回值不超过 P1
    （弱对偶逐点成立）；residual 为重求值与线性规划目标之差。
    """
    horizon = model.horizon
    f_full = terminal_payoff(model, policy, reward)
    if horizon == 1:
        return DualSolution(value=float(f_full[model.o1]))

    f = f_full[model.o1]
    pstar = model.joint_table(horizon)[model.o1]
    lam_shape = f.shape[:-1]
    n_lam = int(np.prod(lam_shape))

    lp = build_p_tv_dual_lp(model, policy, reward, xi, convention, sequence_radii)
    solution = simplex_lp_solve(lp)
    lp_value = float(np.sum(pstar * f)) - solution.value

    mu_ids, _ = _multiplier_ids(horizon, model.num_obs, model.num_actions)
    lam = solution.x[mu_ids[horizon - 1].ravel()]
    parent = np.broadcast_to(np.arange(n_lam).reshape(lam_shape)[..., None], f.shape)
    f_grouped = group_by_sequence(f)
    budgets = sequence_budgets(f_grouped.shape[0], xi, convention, sequence_radii)
    dual = _PolishedTvDual(f_grouped, group_by_sequence(pstar), group_by_sequence(parent), budgets)
    value, gamma = dual.evaluate(lam)
    logger.debug(f"P 型 TV 对偶: LP={lp_value:.12g}, 重求 γ 后={value:.12g}, 迭代 {solution.iterations}")

    gamma_full = np.zeros(f_full.shape)
    gamma_full[model.o1] = _ungroup(gamma, f.shape)
    lam_full = np.zeros(f_full.shape[:-1])
    lam_full[model.o1] = lam.reshape(lam_shape)
    return DualSolution(value=value, gamma=gamma_full, lam=lam_full,
                        iterations=solution.iterations, residual=abs(value - lp_value))


def _ungroup(grouped, sliced_shape):
    """group_by_sequence 的逆变换"""
    ndim = len(sliced_shape)
    act_axes = list(range(0, ndim, 2))
    obs_axes = list(range(1, ndim, 2))
    order = act_axes + obs_axes
    ordered = grouped.reshape([sliced_shape[a] for a in order])
    return np.transpose(ordered, np.argsort(order))


# ---------------------------------------------------------------- P 型 KL 对偶

def p_kl_dual(model: TabularModel, policy: Policy, reward: RewardSpec, xi,
              sequence_radii=None, tol=None) -> DualSolution:
    """
    逐动作序列 a_1:H-1 最大化
    g(η) = -η Σ_{x_H-1} P*(x_H-1) log E_{o_H~T*_H-1}[exp(-f(x_H)/η)] - ηξ

    H=2 时精确；H≥3 时只扰动最后一步转移，是完整 P 型 KL 鲁棒值的上界。
    """
    horizon = model.horizon
    f_full = terminal_payoff(model, policy, reward)
    if horizon == 1:
        return DualSolution(value=float(f_full[model.o1]), multiplier=np.zeros(0))

    num_actions = model.num_actions
    # P*(x_H-1) 沿 a_H-1 复制到 τ_H-1 上
    prev = model.joint_table(horizon - 1)[model.o1]
    prev = np.broadcast_to(prev[..., None], prev.shape + (num_actions,))
    transitions = model.transitions[horizon - 2][model.o1]
    f = f_full[model.o1]

    weights = group_by_sequence(prev)
    n_seq = weights.shape[0]
    rows = _group_rows(transitions)
    values = _group_rows(f)
    radii = np.full(n_seq, float(xi)) if sequence_radii is None \
        else np.asarray(sequence_radii, dtype=np.float64)

    total = 0.0
    etas = np.zeros(n_seq)
    degenerate = False
    evaluations = 0
    for seq in range(n_seq):
        solution = _kl_dual_mixture(weights[seq], rows[seq], values[seq], float(radii[seq]), tol)
        total += solution.value
        etas[seq] = solution.multiplier
        degenerate = degenerate or solution.degenerate
        evaluations += solution.iterations
    return DualSolution(value=total, multiplier=etas, iterations=evaluations, degenerate=degenerate)


def _group_rows(table):
    """(a_1, o_2, ..., a_H-1, o_H) 的表重排为 (序列, 观测路径 o_2:H-1, o_H)"""
    n_obs = table.shape[-1]
    return np.stack([group_by_sequence(table[..., o]) for o in range(n_obs)], axis=-1)
