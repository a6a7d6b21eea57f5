#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
诊断量：集中系数、良态数 C_B、次优间隙与理论界
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import linalg

from config.settings import DIAGNOSTICS_CONFIG
from src.analyzers.ambiguity_analyzer import SetKind, SimplexGrid, UncertaintySpec, ball_rows, enumerate_ball
from src.analyzers.psr_analyzer import CoreTests, feature_table
from src.analyzers.robust_value_analyzer import robust_value
from src.core.decision_process import Policy, RewardSpec, TabularModel, hellinger_sq, history_distribution
from src.core.errors import ConfigError, ShapeError
from src.utils.logger import get_logger, log_performance

logger = get_logger(__name__)


@dataclass
class CoverageReport:
    """
    覆盖诊断

    - type1: max_h 广义特征值（特征二阶矩之比），可能为 +inf
    - type2: Σ_h E_ρ[(D^π/D^ρ)²]，可能为 +inf
    - pointwise: max_h,τ_h D^π(τ_h)/D^ρ(τ_h)
    """

    type1: float
    type2: float
    pointwise: float
    type1_per_h: List[float] = field(default_factory=list)
    type2_per_h: List[float] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _check_policies(model: TabularModel, *policies: Policy):
    for policy in policies:
        if not model.same_dimensions(policy):
            raise ShapeError("策略与模型维度不一致")


def _second_moment(weights, features):
    mask = weights > 0
    rows = features[mask]
    return rows.T @ (weights[mask, None] * rows)


def _generalized_max(numerator, denominator, cutoff):
    """
    max_x (x^T A x)/(x^T B x)，限制在 B 的值域上求解；A 在值域外有质量时返回 +inf
    """
    eigvals, eigvecs = linalg.eigh(denominator)
    keep = eigvals > cutoff
    basis = eigvecs[:, keep]
    outside = numerator - basis @ (basis.T @ numerator @ basis) @ basis.T
    if np.trace(outside) > cutoff * max(1, numerator.shape[0]):
        return math.inf
    if basis.shape[1] == 0:
        return 0.0
    reduced_a = basis.T @ numerator @ basis
    reduced_b = np.diag(eigvals[keep])
    return float(linalg.eigh(reduced_a, reduced_b, eigvals_only=True).max())


def type1_per_h(target: Policy, behavior: Policy, model: TabularModel, tests: CoreTests) -> List[float]:
    _check_policies(model, target, behavior)
    cutoff = DIAGNOSTICS_CONFIG["eig_cutoff"]
    out = []
    for h in range(model.horizon):
        features = feature_table(model, tests, h, normalized=True)
        w_pi = np.asarray(history_distribution(model, target, h), dtype=np.float64).reshape(-1)
        w_rho = np.asarray(history_distribution(model, behavior, h), dtype=np.float64).reshape(-1)
        sigma_pi = _second_moment(w_pi, features)
        sigma_rho = _second_moment(w_rho, features)
        out.append(_generalized_max(sigma_pi, sigma_rho, cutoff))
    return out


def type1_coeff(target: Policy, behavior: Policy, model: TabularModel, tests: CoreTests) -> float:
    """C_p(π|ρ) = max_h max_x x^T E_π[ψ̄ψ̄^T] x / x^T E_ρ[ψ̄ψ̄^T] x"""
    return max(type1_per_h(target, behavior, model, tests))


def _ratio_terms(target: Policy, behavior: Policy, model: TabularModel, h):
    d_pi = np.asarray(history_distribution(model, target, h), dtype=np.float64).reshape(-1)
    d_rho = np.asarray(history_distribution(model, behavior, h), dtype=np.float64).reshape(-1)
    return d_pi, d_rho


def type2_per_h(target: Policy, behavior: Policy, model: TabularModel) -> List[float]:
    _check_policies(model, target, behavior)
    out = []
    for h in range(1, model.horizon + 1):
        d_pi, d_rho = _ratio_terms(target, behavior, model, h)
        if np.any((d_pi > 0) & (d_rho <= 0)):
            out.append(math.inf)
            continue
        mask = d_rho > 0
        out.append(float(np.sum(d_pi[mask] ** 2 / d_rho[mask])))
    return out


def type2_coeff(target: Policy, behavior: Policy, model: TabularModel) -> float:
    """C(π|ρ) = Σ_{h=1}^H E_ρ[(D^π/D^ρ)²]"""
    return float(sum(type2_per_h(target, behavior, model)))


def pointwise_ratio(target: Policy, behavior: Policy, model: TabularModel) -> float:
    _check_policies(model, target, behavior)
    best = 1.0
    for h in range(1, model.horizon + 1):
        d_pi, d_rho = _ratio_terms(target, behavior, model, h)
        if np.any((d_pi > 0) & (d_rho <= 0)):
            return math.inf
        mask = d_rho > 0
        if mask.any():
            best = max(best, float(np.max(d_pi[mask] / d_rho[mask])))
    return best


def coverage_report(target: Policy, behavior: Policy, model: TabularModel, tests: CoreTests) -> CoverageReport:
    per_h1 = type1_per_h(target, behavior, model, tests)
    per_h2 = type2_per_h(target, behavior, model)
    return CoverageReport(
        type1=max(per_h1),
        type2=float(sum(per_h2)),
        pointwise=pointwise_ratio(target, behavior, model),
        type1_per_h=per_h1,
        type2_per_h=per_h2,
    )


def _safe_ratio(numerator, denominator):
    """0/0 = 1，x/0 = +inf"""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denominator > 0, numerator / np.where(denominator > 0, denominator, 1.0), 1.0)
        ratio = np.where((denominator <= 0) & (numerator > 0), np.inf, ratio)
    return ratio


@log_performance(logger)
def wellness_cb(center: TabularModel, spec: UncertaintySpec, grid: SimplexGrid) -> float:
    """
    C_B = max_{θ∈球, h, τ_h} P^θ(τ_h)/P^θ*(τ_h)（网格上的下界）

    T 型：矩形性使每行独立取最大比值，沿路径相乘；
    P 型：对 enumerate_ball 逐个模型计算。
    """
    if spec.set_kind is SetKind.P_TYPE:
        best = 1.0
        for candidate in enumerate_ball(center, spec, grid):
            for h in range(2, center.horizon + 1):
                ratio = _safe_ratio(candidate.joint_table(h)[center.o1], center.joint_table(h)[center.o1])
                best = max(best, float(ratio.max()))
        return best

    points = grid.points()
    path = np.ones(())
    best = 1.0
    for h in range(1, center.horizon):
        rows = center.transition_rows(h)
        radii = spec.row_radii(h, rows.shape[0])
        step = np.ones_like(rows)
        for i, (row, radius) in enumerate(zip(rows, radii)):
            candidates = np.vstack([row[None, :], ball_rows(row, radius, spec.divergence, grid, points)])
            step[i] = _safe_ratio(candidates, np.broadcast_to(row, candidates.shape)).max(axis=0)
        step = step.reshape(center.transitions[h - 1].shape)[center.o1]
        path = path[..., None, None] * step
        best = max(best, float(path.max()))
    return best


def suboptimality_gap(chosen: Policy, policies: Sequence[Policy], model: TabularModel,
                      reward: RewardSpec, spec: UncertaintySpec, method="auto",
                      grid: Optional[SimplexGrid] = None) -> float:
    """
    max_π V_B^π - V_B^π̂，鲁棒值由 robust_value 计算（method="brute" 时为网格参照）
    """
    if not policies:
        raise ConfigError("策略列表为空")
    values = [robust_value(model, p, reward, spec, method=method, grid=grid).value for p in policies]
    chosen_value = robust_value(model, chosen, reward, spec, method=method, grid=grid).value
    return max(values) - chosen_value


def gap_bound(algorithm, *, horizon, n, c_u, coverage, beta,
              rank=None, dimension=None, q_a=None, iota=None, gamma=None) -> float:
    """
    次优间隙的阶数界（首项常数取 1）

    算法 1：C_0·C_u·√(C_p/N)，C_0 = H²Q_A√(r d β)/(ιγ²)·(√r + Q_A√H/γ)
    算法 2：H·C_u·√(C·β/N)
    """
    if n <= 0:
        raise ConfigError("N 必须为正")
    if int(algorithm) == 2:
        return float(horizon * c_u * math.sqrt(coverage * beta / n))
    if None in (rank, dimension, q_a, iota, gamma):
        raise ConfigError("算法 1 的界需要 r、d、Q_A、ι、γ")
    if iota <= 0 or gamma <= 0:
        return math.inf
    c0 = horizon ** 2 * q_a * math.sqrt(rank * dimension * beta) / (iota * gamma ** 2) \
        * (math.sqrt(rank) + q_a * math.sqrt(horizon) / gamma)
    return float(c0 * c_u * math.sqrt(coverage / n))


class HellingerCheck(NamedTuple):
    holds: bool
    hellinger_sq: float
    bound: float


def mle_hellinger_check(model_hat: TabularModel, model_true: TabularModel, behavior: Policy,
                        n, class_size, delta) -> HellingerCheck:
    """D_H²(D_θ̂^ρ, D_θ*^ρ) ≤ 4·log(|Θ|/δ)/N"""
    h2 = hellinger_sq(model_hat, model_true, behavior)
    bound = 4.0 * math.log(class_size / delta) / n
    return HellingerCheck(holds=bool(h2 <= bound), hellinger_sq=h2, bound=bound)
