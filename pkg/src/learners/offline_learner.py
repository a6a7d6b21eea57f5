#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
离线鲁棒策略学习

算法 1：极大似然 → 数据蒸馏 → 椭圆奖励项 → 下置信界选策略
算法 2：似然置信集 → 双重悲观（置信集最差模型 × 不确定集最差成员）
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from config.settings import LEARNER_CONFIG
from src.analyzers.ambiguity_analyzer import Divergence, SetKind, SimplexGrid, UncertaintySpec
from src.analyzers.diagnostics_analyzer import wellness_cb
from src.analyzers.psr_analyzer import CoreTests, default_core_tests, feature_table, gamma_condition
from src.analyzers.robust_value_analyzer import (
    ScalingInputs, estimate_eta_lambda, robust_value, scaling_constant,
)
from src.core.decision_process import (
    Policy, RewardSpec, TabularModel, Trajectory, history_shape, interleave,
    trajectory_probabilities, value,
)
from src.core.errors import AlphaUndefinedError, ClassIncompatibleError, ConfigError, ShapeError
from src.core.model_io import model_from_dict, model_to_dict, policy_from_dict, policy_to_dict
from src.utils.logger import get_logger, log_performance

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ModelClass:
    """
    有限模型类 Θ

    nominal 仅供实验记录真值下标，学习流程不读取。
    """

    models: tuple
    tests: Optional[CoreTests] = None
    nominal: Optional[int] = None

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ConfigError("模型类为空")
        first = models[0]
        for model in models[1:]:
            if not model.same_dimensions(first) or model.o1 != first.o1:
                raise ShapeError("模型类成员维度不一致")
        object.__setattr__(self, "models", models)
        if self.tests is None:
            object.__setattr__(self, "tests", default_core_tests(first))
        if self.nominal is not None and not 0 <= self.nominal < len(models):
            raise ConfigError(f"真值下标越界: {self.nominal}")

    def __len__(self):
        return len(self.models)

    def __getitem__(self, index) -> TabularModel:
        return self.models[index]

    def to_dict(self):
        doc = {"models": [model_to_dict(m) for m in self.models], "tests": self.tests.to_dict()}
        if self.nominal is not None:
            doc["nominal"] = self.nominal
        return doc

    @classmethod
    def from_dict(cls, doc):
        try:
            models = tuple(model_from_dict(m) for m in doc["models"])
            tests = CoreTests.from_dict(doc["tests"]) if "tests" in doc else None
            return cls(models, tests, doc.get("nominal"))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"模型类无法解析: {e}") from e


@dataclass(frozen=True, eq=False)
class OfflineDataset:
    """
    离线数据集 D = {τ^n}，由行为策略 ρ 采集

    observations / actions 为 (N, H) 整型数组；fitted_probs 为拟合后缓存的 D_θ̂^ρ(τ^n)。
    """

    observations: np.ndarray
    actions: np.ndarray
    behavior: Policy
    fitted_probs: Optional[np.ndarray] = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.int64)
        acts = np.asarray(self.actions, dtype=np.int64)
        if obs.ndim != 2 or obs.shape != acts.shape:
            raise ShapeError(f"观测 {obs.shape} 与动作 {acts.shape} 形状不一致")
        if obs.shape[0] < 1:
            raise ShapeError("数据集至少包含一条轨迹")
        if obs.shape[1] != self.behavior.horizon:
            raise ShapeError(f"轨迹长度 {obs.shape[1]} 与 H={self.behavior.horizon} 不一致")
        if obs.min() < 0 or obs.max() >= self.behavior.num_obs or \
                acts.min() < 0 or acts.max() >= self.behavior.num_actions:
            raise ShapeError("轨迹中的观测或动作越界")
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "actions", acts)

    @property
    def size(self):
        return self.observations.shape[0]

    @property
    def horizon(self):
        return self.observations.shape[1]

    def trajectory(self, n) -> Trajectory:
        return Trajectory(tuple(self.observations[n]), tuple(self.actions[n]))

    def with_fitted(self, model: TabularModel) -> "OfflineDataset":
        table = model.dynamics_table() * self.behavior.weight_table()
        probs = trajectory_probabilities(table, self.observations, self.actions)
        return replace(self, fitted_probs=probs)

    def to_dict(self):
        return {
            "observations": self.observations.tolist(),
            "actions": self.actions.tolist(),
            "behavior": policy_to_dict(self.behavior),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(np.asarray(doc["observations"]), np.asarray(doc["actions"]),
                       policy_from_dict(doc["behavior"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"数据集无法解析: {e}") from e


@dataclass(frozen=True, eq=False)
class DistilledDataset:
    """D^g 与其随机均分出的 H 个子集 D_0^g..D_H-1^g"""

    observations: np.ndarray
    actions: np.ndarray
    splits: tuple
    p_min: float

    @property
    def size(self):
        return self.observations.shape[0]

    @property
    def empty(self):
        return self.size == 0


@dataclass(frozen=True, eq=False)
class BonusFn:
    """
    b̂(τ_H) = min{α·√(Σ_h ||ψ̄̂(τ_h)||²_{Û_h^-1}), 1}

    matrices[h] 为 Û_h = λI + Σ_{τ_h∈D_h^g} ψ̄̂ψ̄̂^T；table 为全部轨迹上的 b̂。
    """

    matrices: tuple
    ridge: float
    alpha: float
    table: np.ndarray

    def quadratic(self, h, feature) -> float:
        """||ψ̄||²_{Û_h^-1}"""
        feature = np.asarray(feature, dtype=np.float64)
        factor = cho_factor(self.matrices[h])
        return float(feature @ cho_solve(factor, feature))

    def __call__(self, traj: Trajectory) -> float:
        return float(self.table[traj.index()])

    def as_reward(self) -> RewardSpec:
        shape = self.table.shape
        horizon = len(shape) // 2
        return RewardSpec(horizon, shape[0], shape[1], self.table)


@dataclass(frozen=True)
class LearnerParams:
    """学习超参数；None 表示按理论默认值计算"""

    p_min: Optional[float] = None
    ridge: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    delta: float = LEARNER_CONFIG["delta"]
    c_u: Optional[float] = None
    c_b: Optional[float] = None
    split_seed: int = LEARNER_CONFIG["split_seed"]

    def overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass
class LearnerResult:
    """算法输出：所选策略及诊断信息"""

    index: int
    policy: Policy
    objectives: List[float]
    theta_hat: int
    dg_size: int = 0
    conf_size: int = 0
    robust_values: List[float] = field(default_factory=list)
    penalties: List[float] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)

    def diagnostics(self):
        return {
            "selected": self.index,
            "theta_hat": self.theta_hat,
            "dg_size": self.dg_size,
            "conf_size": self.conf_size,
            "objectives": self.objectives,
            "robust_values": self.robust_values,
            "penalties": self.penalties,
            "params": self.params,
        }


# ---------------------------------------------------------------- 极大似然

def log_likelihoods(data: OfflineDataset, cls: ModelClass) -> np.ndarray:
    """每个模型对整个数据集的对数似然 Σ_n log D_θ^ρ(τ^n)（可能为 -inf）"""
    behavior_probs = trajectory_probabilities(data.behavior.weight_table(), data.observations, data.actions)
    with np.errstate(divide="ignore"):
        behavior_log = float(np.sum(np.log(behavior_probs)))
        totals = []
        for model in cls.models:
            dyn = trajectory_probabilities(model.dynamics_table(), data.observations, data.actions)
            totals.append(float(np.sum(np.log(dyn))) + behavior_log)
    return np.array(totals)


def mle_fit(data: OfflineDataset, cls: ModelClass) -> int:
    """
    argmin_θ L(θ|D) = -(1/N) Σ_n log D_θ^ρ(τ^n)，同值取最小下标

    ρ 的因子与 θ 无关，只平移所有损失，不改变 argmin。
    """
    losses = -log_likelihoods(data, cls) / data.size
    if not np.any(np.isfinite(losses)):
        raise ClassIncompatibleError("模型类中没有成员能以正概率生成全部数据")
    return int(np.argmin(losses))


# ---------------------------------------------------------------- 蒸馏

def default_p_min(n, num_obs, num_actions, horizon, delta=None):
    """p_min = δ / (N·(|O||A|)^(2H))"""
    delta = LEARNER_CONFIG["delta"] if delta is None else delta
    return delta / (n * float(num_obs * num_actions) ** (2 * horizon))


def distill(data: OfflineDataset, model_hat: TabularModel, p_min, rng_seed) -> DistilledDataset:
    """
    保留 D_θ̂^ρ(τ) ≥ p_min 的轨迹，再按种子随机均分为 H 份

    保留的轨迹先按字典序排好，使结果与输入顺序无关。
    """
    if p_min < 0:
        raise ConfigError(f"p_min 必须非负: {p_min}")
    fitted = data.with_fitted(model_hat)
    keep = fitted.fitted_probs >= p_min
    obs = data.observations[keep]
    acts = data.actions[keep]

    columns = np.empty((obs.shape[0], 2 * data.horizon), dtype=np.int64)
    columns[:, 0::2] = obs
    columns[:, 1::2] = acts
    order = np.lexsort(columns.T[::-1])
    obs, acts = obs[order], acts[order]

    rng = np.random.default_rng(rng_seed)
    permutation = rng.permutation(obs.shape[0])
    groups = np.array_split(permutation, data.horizon)
    splits = tuple((obs[g], acts[g]) for g in groups)

    if obs.shape[0] == 0:
        logger.warning(f"蒸馏后数据集为空 (p_min={p_min:.3e})")
    return DistilledDataset(obs, acts, splits, float(p_min))


# ---------------------------------------------------------------- 奖励项

def _history_ranks(model: TabularModel, observations, actions, h):
    if h == 0:
        return np.zeros(observations.shape[0], dtype=np.int64)
    index = []
    for j in range(h):
        index.append(observations[:, j])
        index.append(actions[:, j])
    return np.ravel_multi_index(tuple(index), history_shape(model.num_obs, model.num_actions, h))


def build_bonus(model_hat: TabularModel, tests: CoreTests, distilled: DistilledDataset,
                ridge, alpha) -> BonusFn:
    """
    构造 Û_h 与 b̂ 表

    Û_h 用 Cholesky 分解求逆二次型；θ̂ 下不可达的前缀直接跳过（p_min > 0 时不会发生）。
    """
    if ridge <= 0:
        raise ConfigError(f"岭参数 λ 必须为正: {ridge}")
    if alpha < 0:
        raise ConfigError(f"α 必须非负: {alpha}")
    horizon = model_hat.horizon
    matrices = []
    total = np.zeros(history_shape(model_hat.num_obs, model_hat.num_actions, horizon))
    for h in range(horizon):
        features = feature_table(model_hat, tests, h, normalized=True)
        obs, acts = distilled.splits[h] if h < len(distilled.splits) else (None, None)
        gram = ridge * np.eye(features.shape[1])
        if obs is not None and obs.shape[0]:
            rows = features[_history_ranks(model_hat, obs, acts, h)]
            finite = np.all(np.isfinite(rows), axis=1)
            if not np.all(finite):
                logger.warning(f"h={h}: 跳过 {int(np.sum(~finite))} 条 θ̂ 下不可达的样本")
            rows = rows[finite]
            gram = gram + rows.T @ rows
        matrices.append(gram)

        factor = cho_factor(gram)
        reachable = np.all(np.isfinite(features), axis=1)
        quad = np.full(features.shape[0], np.inf)
        if reachable.any():
            solved = cho_solve(factor, features[reachable].T)
            quad[reachable] = np.einsum("ij,ji->i", features[reachable], solved)
        quad = quad.reshape(history_shape(model_hat.num_obs, model_hat.num_actions, h))
        total = total + quad.reshape(quad.shape + (1, 1) * (horizon - h))

    if alpha == 0:
        table = np.zeros_like(total)
    else:
        with np.errstate(invalid="ignore"):
            table = np.where(np.isfinite(total), np.minimum(alpha * np.sqrt(np.maximum(total, 0.0)), 1.0), 1.0)
    return BonusFn(tuple(matrices), float(ridge), float(alpha), table)


def behavior_iota(behavior: Policy, tests: CoreTests) -> float:
    """
    ι = min_{h, τ_h, q} ρ(q^a | τ_h)

    测试的动作沿测试自身的观测逐步计算概率。
    """
    best = 1.0
    for h in range(tests.horizon):
        for qo, qa in tests.tests[h]:
            prob = np.ones(())
            for j in range(1, len(qo) + 1):
                table = behavior.probabilities[h + j - 1]
                prob = prob * table[(Ellipsis,) + interleave(qo[:j], qa[:j])]
            best = min(best, float(np.min(prob)))
    return best


def default_learner_params(model_hat: TabularModel, tests: CoreTests, data: OfflineDataset,
                           class_size, params: Optional[LearnerParams] = None) -> LearnerParams:
    """
    理论默认值（首项常数由配置给出）

    p_min = δ/(N(|O||A|)^(2H))，λ = H²Q_A²，β = log(|Θ|/δ)，
    α = √(4λHQ_A²d/γ⁴ + 7β/(ι²γ²))
    """
    params = params or LearnerParams()
    horizon = model_hat.horizon
    q_a = tests.max_action_sequences
    p_min = params.p_min if params.p_min is not None else \
        default_p_min(data.size, model_hat.num_obs, model_hat.num_actions, horizon, params.delta)
    ridge = params.ridge if params.ridge is not None else float(horizon ** 2 * q_a ** 2)
    beta = params.beta if params.beta is not None else \
        LEARNER_CONFIG["beta_scale"] * math.log(class_size / params.delta)
    alpha = params.alpha
    if alpha is None:
        iota = behavior_iota(data.behavior, tests)
        if iota <= 0:
            raise AlphaUndefinedError("ι = 0，默认 α 无定义，请显式给出 α")
        gamma = 1.0 / gamma_condition(model_hat, tests)
        d = tests.dimension
        alpha = LEARNER_CONFIG["alpha_scale"] * math.sqrt(
            4.0 * ridge * horizon * q_a ** 2 * d / gamma ** 4 + 7.0 * beta / (iota ** 2 * gamma ** 2))
    return replace(params, p_min=p_min, ridge=ridge, beta=beta, alpha=alpha)


def learner_scaling(model_hat: TabularModel, policies: Sequence[Policy], reward: RewardSpec,
                    spec: UncertaintySpec, params: LearnerParams) -> float:
    """C_u^i；ξ=0 时球退化为中心，取 1"""
    if params.c_u is not None:
        return float(params.c_u)
    if spec.xi == 0:
        return 1.0
    if spec.divergence is Divergence.TV and spec.set_kind is SetKind.P_TYPE:
        return 1.0

    c_b = 1.0
    if spec.set_kind is SetKind.T_TYPE:
        c_b = params.c_b if params.c_b is not None else \
            wellness_cb(model_hat, spec, SimplexGrid(LEARNER_CONFIG["wellness_grid_k"], model_hat.num_obs))
    eta = lam = 1.0
    if spec.divergence is Divergence.KL:
        estimates = [estimate_eta_lambda(model_hat, p, reward, spec.xi) for p in policies]
        eta = min(e.eta for e in estimates)
        lam = min(e.lam for e in estimates)
    return scaling_constant(spec, ScalingInputs(eta=eta, lam=lam, c_b=c_b, xi=spec.xi))


def _penalty(c_u, bonus_value):
    return 0.0 if bonus_value == 0.0 else c_u * bonus_value


# ---------------------------------------------------------------- 算法 1

@log_performance(logger)
def algorithm1(data: OfflineDataset, cls: ModelClass, policies: Sequence[Policy], reward: RewardSpec,
               spec: UncertaintySpec, params: Optional[LearnerParams] = None,
               method="auto") -> LearnerResult:
    """
    π̂ = argmax_π V_{B(θ̂),R}^π - C_u·V_{θ̂,b̂}^π，同值取最小下标
    """
    if not policies:
        raise ConfigError("策略列表为空")
    theta_hat = mle_fit(data, cls)
    model_hat = cls[theta_hat]
    params = default_learner_params(model_hat, cls.tests, data, len(cls), params)
    distilled = distill(data, model_hat, params.p_min, params.split_seed)
    bonus = build_bonus(model_hat, cls.tests, distilled, params.ridge, params.alpha)
    c_u = learner_scaling(model_hat, policies, reward, spec, params)
    bonus_reward = bonus.as_reward()

    robust_values, penalties, objectives = [], [], []
    for policy in policies:
        robust = robust_value(model_hat, policy, reward, spec, method=method).value
        penalty = _penalty(c_u, value(model_hat, policy, bonus_reward))
        robust_values.append(robust)
        penalties.append(penalty)
        objectives.append(robust - penalty)

    index = int(np.argmax(objectives))
    return LearnerResult(
        index=index,
        policy=policies[index],
        objectives=objectives,
        theta_hat=theta_hat,
        dg_size=distilled.size,
        conf_size=0,
        robust_values=robust_values,
        penalties=penalties,
        params={"p_min": params.p_min, "ridge": params.ridge, "alpha": params.alpha,
                "beta": params.beta, "c_u": c_u},
    )


# ---------------------------------------------------------------- 算法 2

def confidence_set(data: OfflineDataset, cls: ModelClass, beta) -> List[int]:
    """C = {θ : Σ_n log D_θ^ρ(τ^n) ≥ max_θ' Σ_n log D_θ'^ρ(τ^n) - β}"""
    if beta < 0:
        raise ConfigError(f"β 必须非负: {beta}")
    totals = log_likelihoods(data, cls)
    best = float(np.max(totals))
    if not math.isfinite(best):
        raise ClassIncompatibleError("模型类中没有成员能以正概率生成全部数据")
    threshold = best - beta
    return [i for i, ll in enumerate(totals) if ll >= threshold]


@log_performance(logger)
def algorithm2(data: OfflineDataset, cls: ModelClass, policies: Sequence[Policy], reward: RewardSpec,
               spec: UncertaintySpec, beta=None, method="auto") -> LearnerResult:
    """
    π̂ = argmax_π min_{θ∈C} V_{B(θ),R}^π（双重悲观），同值取最小下标
    """
    if not policies:
        raise ConfigError("策略列表为空")
    if beta is None:
        beta = LEARNER_CONFIG["beta_scale"] * math.log(len(cls) / LEARNER_CONFIG["delta"])
    members = confidence_set(data, cls, beta)
    theta_hat = mle_fit(data, cls)

    objectives = []
    for policy in policies:
        worst = min(robust_value(cls[i], policy, reward, spec, method=method).value for i in members)
        objectives.append(worst)
    index = int(np.argmax(objectives))
    return LearnerResult(
        index=index,
        policy=policies[index],
        objectives=objectives,
        theta_hat=theta_hat,
        dg_size=data.size,
        conf_size=len(members),
        robust_values=list(objectives),
        params={"beta": beta},
    )
