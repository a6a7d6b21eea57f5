#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
鲁棒值计算：四类不确定集、暴力枚举参照、η*/λ* 估计与缩放常数
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional

import numpy as np

from config.settings import AMBIGUITY_CONFIG, LEARNER_CONFIG
from src.analyzers.ambiguity_analyzer import (
    Divergence, SetKind, SimplexGrid, UncertaintySpec, ball_rows, enumerate_ball,
)
from src.analyzers.dual_solvers import (
    DualSolution, kl_dual_expectation, p_kl_dual, p_tv_dual, p_tv_primal, tv_dual_rows,
)
from src.core.decision_process import Policy, RewardSpec, TabularModel, value
from src.core.errors import ConfigError, ShapeError, UndefinedScalingError
from src.utils.logger import get_logger, log_performance

logger = get_logger(__name__)

METHODS = ("auto", "dual", "lp", "brute")


@dataclass
class RobustValueReport:
    """
    鲁棒值结果

    - inner_multipliers: T 型逐层内层对偶的最优乘子，形状同 τ_h
    - dual: P 型的对偶解（TV 为 γ/λ，KL 为逐序列 η）
    - cross_check: P 型 TV 下另一条路径（P1 或其对偶）的值
    """

    value: float
    method: str
    label: str
    inner_multipliers: Dict[int, np.ndarray] = field(default_factory=dict)
    dual: Optional[DualSolution] = None
    cross_check: Optional[float] = None

    def to_dict(self):
        doc = {"value": self.value, "method": self.method, "set": self.label}
        if self.cross_check is not None:
            doc["cross_check"] = self.cross_check
        if self.dual is not None:
            doc["dual_iterations"] = self.dual.iterations
            doc["dual_residual"] = self.dual.residual
            if isinstance(self.dual.multiplier, np.ndarray):
                doc["eta"] = self.dual.multiplier.tolist()
        return doc


class ScalingInputs(NamedTuple):
    eta: float
    lam: float
    c_b: float
    xi: float


class MultiplierEstimate(NamedTuple):
    """η*（P 型 KL）与 λ*（T 型 KL）的下界估计；degenerate 表示触底"""
    eta: float
    lam: float
    degenerate: bool


def _check_inputs(model: TabularModel, policy: Policy, reward: RewardSpec):
    if not (model.same_dimensions(policy) and model.same_dimensions(reward)):
        raise ShapeError("模型、策略与奖励的维度不一致")


def _policy_average(policy: Policy, h, q_table):
    """V_h(x_h) = Σ_a π_h(a|x_h) Q_h(τ_h)"""
    return (policy.probabilities[h - 1] * q_table).sum(axis=-1)


def robust_value_t(model: TabularModel, policy: Policy, reward: RewardSpec,
                   spec: UncertaintySpec) -> RobustValueReport:
    """
    T 型（矩形）不确定集上的 Bellman 递推

    Q_H = R；Q_h(τ_h) = 内层对偶 inf_{T ∈ ball(T_h(·|τ_h))} E_T[V_h+1]；
    V_h(x_h) = Σ_a π(a|x_h) Q_h(τ_h)。历史即状态，在完整历史表上逐层计算。
    """
    if spec.set_kind is not SetKind.T_TYPE:
        raise ConfigError("robust_value_t 只处理 T 型不确定集")
    _check_inputs(model, policy, reward)
    horizon = model.horizon

    v_next = _policy_average(policy, horizon, reward.table)
    multipliers = {}
    for h in range(horizon - 1, 0, -1):
        rows = model.transition_rows(h)
        ell = v_next.reshape(rows.shape)
        radii = spec.row_radii(h, rows.shape[0])
        if spec.divergence is Divergence.TV:
            q_flat, lam = tv_dual_rows(rows, ell, radii)
        else:
            q_flat = np.empty(rows.shape[0])
            lam = np.empty(rows.shape[0])
            for i in range(rows.shape[0]):
                solution = kl_dual_expectation(rows[i], ell[i], radii[i])
                q_flat[i] = solution.value
                lam[i] = solution.multiplier
        shape = model.transitions[h - 1].shape[:-1]
        multipliers[h] = lam.reshape(shape)
        v_next = _policy_average(policy, h, q_flat.reshape(shape))

    return RobustValueReport(
        value=float(v_next[model.o1]),
        method="bellman-dual",
        label=spec.label,
        inner_multipliers=multipliers,
    )


def robust_value_p(model: TabularModel, policy: Policy, reward: RewardSpec,
                   spec: UncertaintySpec, method="auto", cross_check=False) -> RobustValueReport:
    """
    P 型不确定集

    TV：auto/lp 以线性规划 P1 为准，dual 走对偶线性规划；cross_check 时两条都算。
    KL：逐动作序列的一维对偶。
    """
    if spec.set_kind is not SetKind.P_TYPE:
        raise ConfigError("robust_value_p 只处理 P 型不确定集")
    _check_inputs(model, policy, reward)
    n_seq = model.num_actions ** max(model.horizon - 1, 0)
    radii = spec.sequence_radii(n_seq) if spec.radius_overrides else None

    if spec.divergence is Divergence.KL:
        if method == "lp":
            raise ConfigError("lp 方法只适用于 P 型 TV")
        dual = p_kl_dual(model, policy, reward, spec.xi, sequence_radii=radii)
        return RobustValueReport(value=dual.value, method="p-dual", label=spec.label, dual=dual)

    primal_value = None
    dual = None
    if method in ("auto", "lp") or cross_check:
        primal_value = p_tv_primal(model, policy, reward, spec.xi,
                                   convention=spec.budget_convention, sequence_radii=radii)
    if method == "dual" or cross_check:
        dual = p_tv_dual(model, policy, reward, spec.xi,
                         convention=spec.budget_convention, sequence_radii=radii)

    if method == "dual":
        return RobustValueReport(value=dual.value, method="p-dual", label=spec.label, dual=dual,
                                 cross_check=primal_value)
    report = RobustValueReport(value=primal_value, method="p-lp", label=spec.label, dual=dual,
                               cross_check=None if dual is None else dual.value)
    if dual is not None and abs(dual.value - primal_value) > 1e-3:
        logger.warning(f"P 型 TV 对偶与原问题不一致: dual={dual.value:.6f}, primal={primal_value:.6f}")
    return report


def robust_value(model: TabularModel, policy: Policy, reward: RewardSpec,
                 spec: UncertaintySpec, method="auto", grid: Optional[SimplexGrid] = None) -> RobustValueReport:
    """
    统一入口

    method:
        auto  - T 型 Bellman 对偶；P 型 TV 线性规划；P 型 KL 对偶
        dual  - 同 auto，但 P 型 TV 改用对偶线性规划
        lp    - 仅 P 型 TV
        brute - 网格暴力枚举
    """
    if method not in METHODS:
        raise ConfigError(f"未知的鲁棒值方法: {method}")
    if method == "brute":
        grid = grid or SimplexGrid(AMBIGUITY_CONFIG["default_grid_k"], model.num_obs)
        brute = robust_value_bruteforce(model, policy, reward, spec, grid)
        return RobustValueReport(value=brute, method="brute-force", label=spec.label)
    if spec.set_kind is SetKind.T_TYPE:
        if method == "lp":
            raise ConfigError("lp 方法只适用于 P 型 TV")
        return robust_value_t(model, policy, reward, spec)
    return robust_value_p(model, policy, reward, spec, method=method)


@log_performance(logger)
def robust_value_bruteforce(model: TabularModel, policy: Policy, reward: RewardSpec,
                            spec: UncertaintySpec, grid: SimplexGrid) -> float:
    """
    网格暴力参照

    T 型：Bellman 递推，内层在每个历史的网格球（并上中心行）上取最小；
    P 型：在 enumerate_ball 的全部网格模型（并上中心模型）上取价值最小。
    """
    _check_inputs(model, policy, reward)
    if spec.set_kind is SetKind.P_TYPE:
        best = value(model, policy, reward)
        for candidate in enumerate_ball(model, spec, grid):
            best = min(best, value(candidate, policy, reward))
        return float(best)

    points = grid.points()
    v_next = _policy_average(policy, model.horizon, reward.table)
    for h in range(model.horizon - 1, 0, -1):
        rows = model.transition_rows(h)
        ell = v_next.reshape(rows.shape)
        radii = spec.row_radii(h, rows.shape[0])
        q_flat = np.empty(rows.shape[0])
        for i, (row, radius) in enumerate(zip(rows, radii)):
            members = ball_rows(row, radius, spec.divergence, grid, points)
            q_flat[i] = min(float(row @ ell[i]), float(np.min(members @ ell[i], initial=np.inf)))
        v_next = _policy_average(policy, h, q_flat.reshape(model.transitions[h - 1].shape[:-1]))
    return float(v_next[model.o1])


def estimate_eta_lambda(model_hat: TabularModel, policy: Policy, reward: RewardSpec, xi,
                        floor=None) -> MultiplierEstimate:
    """
    η* = 各动作序列 P 型 KL 对偶最优 η 的最小值
    λ* = 各可达历史 T 型 KL 内层对偶最优 λ 的最小值

    目标平坦（乘子退化为 0）的子问题不参与取最小；都退化或低于 floor 时取 floor 并标记。
    """
    floor = LEARNER_CONFIG["multiplier_floor"] if floor is None else floor
    if xi <= 0:
        raise ConfigError("估计 η*/λ* 需要 ξ > 0")
    degenerate = False

    p_dual = p_kl_dual(model_hat, policy, reward, xi)
    etas = np.atleast_1d(np.asarray(p_dual.multiplier, dtype=np.float64))
    valid = etas[np.isfinite(etas) & (etas > 0)]
    if valid.size == 0 or valid.min() < floor:
        eta, degenerate = floor, True
    else:
        eta = float(valid.min())

    t_report = robust_value_t(model_hat, policy, reward,
                              UncertaintySpec(SetKind.T_TYPE, Divergence.KL, xi))
    lams = []
    for h, table in t_report.inner_multipliers.items():
        reachable = model_hat.history_prob_table(h) > 0
        chosen = table[reachable]
        lams.extend(chosen[np.isfinite(chosen) & (chosen > 0)].tolist())
    if not lams or min(lams) < floor:
        lam, degenerate = floor, True
    else:
        lam = float(min(lams))

    if degenerate:
        logger.warning(f"η*/λ* 估计触底 (floor={floor})，目标在相关区域可能是平坦的")
    return MultiplierEstimate(eta=eta, lam=lam, degenerate=degenerate)


def scaling_constant(spec: UncertaintySpec, inputs: ScalingInputs) -> float:
    """
    C_P^1 = 1，C_T^1 = C_B，C_P^2 = 3·exp(1/η*)，
    C_T^2 = C_B·max{exp(ξ)/ξ, λ*·exp(1/λ*)}
    """
    if inputs.c_b < 1.0:
        raise ConfigError(f"C_B 必须 ≥ 1: {inputs.c_b}")
    if spec.divergence is Divergence.TV:
        return 1.0 if spec.set_kind is SetKind.P_TYPE else float(inputs.c_b)

    with np.errstate(over="ignore"):
        if spec.set_kind is SetKind.P_TYPE:
            if inputs.eta <= 0:
                raise ConfigError("η* 必须为正")
            return float(3.0 * np.exp(1.0 / inputs.eta))
        xi = inputs.xi
        if xi <= 0:
            raise UndefinedScalingError("T 型 KL 在 ξ=0 时 exp(ξ)/ξ 发散")
        if inputs.lam <= 0:
            raise ConfigError("λ* 必须为正")
        first = np.exp(xi) / xi
        second = inputs.lam * np.exp(1.0 / inputs.lam)
        result = float(inputs.c_b * max(first, second))
    return result if math.isfinite(result) else math.inf
