#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
预测状态表示（PSR）分析

- 动态矩阵与数值秩
- 核心测试、预测特征 ψ / ψ̄
- 最小二乘提取 M_h(o,a)、φ_h、ψ_0 与自洽残差
- γ 良态条件（1/γ 的精确值）
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.linalg

from config.settings import PSR_CONFIG
from src.core.decision_process import TabularModel, history_shape, interleave
from src.core.errors import CoreTestsInsufficientError, ShapeError, UnreachableHistoryError
from src.utils.logger import get_logger

logger = get_logger(__name__)

Test = Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass(frozen=True)
class CoreTests:
    """
    每个 h ∈ {0..H-1} 的核心测试列表 Q_h

    每个测试是 (观测序列, 动作序列)，长度 k ≤ H-h；k=0 表示概率恒为 1 的空测试。
    """

    horizon: int
    num_obs: int
    num_actions: int
    tests: Tuple[Tuple[Test, ...], ...]

    def __post_init__(self):
        normalized = []
        if len(self.tests) != self.horizon:
            raise ShapeError(f"需要 {self.horizon} 组核心测试，实际 {len(self.tests)}")
        for h, group in enumerate(self.tests):
            if len(group) == 0:
                raise ShapeError(f"Q_{h} 为空")
            items = []
            for qo, qa in group:
                qo = tuple(int(o) for o in qo)
                qa = tuple(int(a) for a in qa)
                if len(qo) != len(qa) or len(qo) > self.horizon - h:
                    raise ShapeError(f"Q_{h} 中的测试长度非法: {qo}, {qa}")
                if any(not 0 <= o < self.num_obs for o in qo) or \
                        any(not 0 <= a < self.num_actions for a in qa):
                    raise ShapeError(f"Q_{h} 中的测试越界: {qo}, {qa}")
                items.append((qo, qa))
            normalized.append(tuple(items))
        object.__setattr__(self, "tests", tuple(normalized))

    @property
    def dimension(self):
        """d = max_h |Q_h|"""
        return max(len(group) for group in self.tests)

    def size(self, h):
        return len(self.tests[h])

    def action_sequences(self, h) -> List[Tuple[int, ...]]:
        """Q_h^A：动作部分去重（保持首次出现顺序）"""
        return list(dict.fromkeys(qa for _, qa in self.tests[h]))

    @property
    def max_action_sequences(self):
        """Q_A = max_h |Q_h^A|"""
        return max(len(self.action_sequences(h)) for h in range(self.horizon))

    def to_dict(self):
        return {
            "H": self.horizon,
            "num_obs": self.num_obs,
            "num_actions": self.num_actions,
            "tests": [[[list(qo), list(qa)] for qo, qa in group] for group in self.tests],
        }

    @classmethod
    def from_dict(cls, doc):
        groups = tuple(tuple((tuple(qo), tuple(qa)) for qo, qa in group) for group in doc["tests"])
        return cls(int(doc["H"]), int(doc["num_obs"]), int(doc["num_actions"]), groups)


class DynamicsMatrix(NamedTuple):
    matrix: np.ndarray
    rank: int
    singular_values: np.ndarray


@dataclass(frozen=True, eq=False)
class PsrView:
    """
    PSR 参数：ψ_0、M_h(o,a)、φ_h、m(ω_h) 以及自洽残差

    operators[h] 形状为 (O, A, |Q_h|, |Q_h-1|)（h ≥ 1，operators[0] 为 None）；
    m_vectors[h] 形状为 (|Q_h|, (O·A)^(H-h))，列按未来轨迹排名。
    """

    tests: CoreTests
    psi0: np.ndarray
    operators: Tuple[np.ndarray, ...]
    phis: Tuple[np.ndarray, ...]
    m_vectors: Tuple[np.ndarray, ...]
    features: Tuple[np.ndarray, ...]
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self):
        return max(self.residuals.values()) if self.residuals else 0.0

    def state(self, history: Sequence[int]) -> np.ndarray:
        """ψ(τ_h) = M_h(o_h,a_h)···M_1(o_1,a_1) ψ_0"""
        psi = self.psi0
        pairs = list(zip(history[0::2], history[1::2]))
        for h, (o, a) in enumerate(pairs, start=1):
            psi = self.operators[h][o, a] @ psi
        return psi


def numerical_rank(matrix, rtol=None) -> Tuple[int, np.ndarray]:
    """奇异值 > rtol·σ_max 的个数"""
    rtol = PSR_CONFIG["rank_rtol"] if rtol is None else rtol
    if matrix.size == 0:
        return 0, np.zeros(0)
    singular_values = scipy.linalg.svdvals(matrix)
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0, singular_values
    return int(np.sum(singular_values > rtol * singular_values[0])), singular_values


def dynamics_matrix(model: TabularModel, h) -> DynamicsMatrix:
    """
    历史 τ_h × 未来 ω_h 的动态矩阵

    Args:
        model: 表格模型
        h: 分割位置，0 ≤ h ≤ H-1

    Returns:
        DynamicsMatrix(matrix, rank, singular_values)
    """
    if not 0 <= h <= model.horizon - 1:
        raise ShapeError(f"h={h} 超出 [0, {model.horizon - 1}]")
    full = model.dynamics_table()
    matrix = full.reshape(model.num_histories(h), -1)
    rank, singular_values = numerical_rank(matrix)
    return DynamicsMatrix(matrix, rank, singular_values)


def psr_rank(model: TabularModel) -> int:
    """r = max_h rank(动态矩阵)"""
    return max(dynamics_matrix(model, h).rank for h in range(model.horizon))


def default_core_tests(model: TabularModel, length=None) -> CoreTests:
    """
    全部长度为 min(H-h, length) 的短未来作为核心测试

    最后一个动作固定为 0：它不进入动态，去掉重复列。
    """
    length = PSR_CONFIG["default_test_length"] if length is None else length
    groups = []
    for h in range(model.horizon):
        k = min(model.horizon - h, length)
        group = []
        for qo in itertools.product(range(model.num_obs), repeat=k):
            for prefix in itertools.product(range(model.num_actions), repeat=k - 1):
                group.append((qo, prefix + (0,)))
        groups.append(tuple(group))
    return CoreTests(model.horizon, model.num_obs, model.num_actions, tuple(groups))


def complete_core_tests(model: TabularModel) -> CoreTests:
    """每个 h 取全部长度为 H-h 的未来（动作全排列）"""
    groups = []
    for h in range(model.horizon):
        k = model.horizon - h
        group = []
        for qo in itertools.product(range(model.num_obs), repeat=k):
            for qa in itertools.product(range(model.num_actions), repeat=k):
                group.append((qo, qa))
        groups.append(tuple(group))
    return CoreTests(model.horizon, model.num_obs, model.num_actions, tuple(groups))


def _check_tests(model: TabularModel, tests: CoreTests):
    if (tests.horizon, tests.num_obs, tests.num_actions) != \
            (model.horizon, model.num_obs, model.num_actions):
        raise ShapeError("核心测试与模型维度不一致")


def feature_table(model: TabularModel, tests: CoreTests, h, normalized=False) -> np.ndarray:
    """
    所有 τ_h 的特征，形状 ((O·A)^h, |Q_h|)

    normalized=False 时为 ψ（联合概率）；True 时为 ψ̄，不可达历史的行为 NaN。
    """
    _check_tests(model, tests)
    n_hist = model.num_histories(h)
    denominator = np.asarray(model.history_prob_table(h), dtype=np.float64).reshape(-1)
    columns = []
    for qo, qa in tests.tests[h]:
        k = len(qo)
        if k == 0:
            columns.append(denominator.copy())
            continue
        joint = model.joint_table(h + k).reshape(n_hist, -1)
        local_shape = history_shape(model.num_obs, model.num_actions, k - 1) + (model.num_obs,)
        col = np.ravel_multi_index(interleave(qo[:k - 1], qa[:k - 1]) + (qo[k - 1],), local_shape)
        columns.append(joint[:, col])
    psi = np.stack(columns, axis=1)
    if not normalized:
        return psi
    out = np.full_like(psi, np.nan)
    reachable = denominator > 0.0
    out[reachable] = psi[reachable] / denominator[reachable, None]
    return out


def history_rank(model: TabularModel, history: Sequence[int]) -> int:
    h = len(history) // 2
    if h == 0:
        return 0
    return int(np.ravel_multi_index(tuple(history), history_shape(model.num_obs, model.num_actions, h)))


def prediction_feature(model: TabularModel, tests: CoreTests, history: Sequence[int]) -> np.ndarray:
    """
    ψ̄(τ_h)：给定历史后各核心测试的条件概率

    Args:
        history: 交织形式 (o_1, a_1, ..., o_h, a_h)
    """
    if len(history) % 2 != 0 or len(history) // 2 >= model.horizon + 1:
        raise ShapeError(f"历史长度非法: {len(history)}")
    h = len(history) // 2
    if h >= model.horizon:
        raise ShapeError(f"h={h} 没有对应的核心测试")
    denominator = float(np.asarray(model.history_prob_table(h))[tuple(history)]) if h else 1.0
    if denominator <= 0.0:
        raise UnreachableHistoryError(f"历史 {tuple(history)} 的概率为 0")
    psi = feature_table(model, tests, h)[history_rank(model, history)]
    return psi / denominator


def _lstsq(a, b):
    solution, _, _, _ = scipy.linalg.lstsq(a, b, lapack_driver="gelsd")
    return solution


def extract_psr(model: TabularModel, tests: CoreTests) -> PsrView:
    """
    由核心测试特征最小二乘提取 PSR 参数

    秩条件：rank(Ψ_h) 必须等于动态矩阵 rank(M_h)，否则抛出
    CoreTestsInsufficientError。残差在特征张成的空间上计算。
    """
    _check_tests(model, tests)
    tol = PSR_CONFIG["residual_tol"]
    n_pairs = model.num_obs * model.num_actions
    features, phis, m_vectors = [], [], []
    operators = [None]
    residuals = {"reconstruction": 0.0, "normalization": 0.0, "consistency": 0.0, "prediction": 0.0}

    for h in range(model.horizon):
        psi = feature_table(model, tests, h)
        dyn = dynamics_matrix(model, h)
        feature_rank, _ = numerical_rank(psi)
        if feature_rank < dyn.rank:
            raise CoreTestsInsufficientError(
                f"h={h}: 核心测试秩 {feature_rank} < 动态矩阵秩 {dyn.rank}")
        features.append(psi)

        probs = np.asarray(model.history_prob_table(h), dtype=np.float64).reshape(-1)
        phi = _lstsq(psi, probs)
        phis.append(phi)
        residuals["normalization"] = max(residuals["normalization"],
                                         float(np.max(np.abs(psi @ phi - probs))))

        m = _lstsq(psi, dyn.matrix)
        m_vectors.append(m)
        residuals["prediction"] = max(residuals["prediction"],
                                      float(np.max(np.abs(psi @ m - dyn.matrix))))

        if h == 0:
            continue
        prev = features[h - 1]
        stacked = psi.reshape(prev.shape[0], n_pairs * psi.shape[1])
        solution = _lstsq(prev, stacked)
        residuals["reconstruction"] = max(residuals["reconstruction"],
                                          float(np.max(np.abs(prev @ solution - stacked))))
        # (d_h-1, O, A, d_h) -> (O, A, d_h, d_h-1)
        ops = solution.reshape(prev.shape[1], model.num_obs, model.num_actions, psi.shape[1])
        ops = np.transpose(ops, (1, 2, 3, 0))
        operators.append(ops)

        # Σ_o φ_h^T M_h(o,a) = φ_h-1^T，在 Ψ_h-1 的行上检验
        for a in range(model.num_actions):
            lhs = np.einsum("j,ojk->k", phi, ops[:, a])
            gap = prev @ (lhs - phis[h - 1])
            residuals["consistency"] = max(residuals["consistency"], float(np.max(np.abs(gap))))

    view = PsrView(
        tests=tests,
        psi0=features[0][0].copy(),
        operators=tuple(operators),
        phis=tuple(phis),
        m_vectors=tuple(m_vectors),
        features=tuple(features),
        residuals=residuals,
    )
    if view.max_residual > tol:
        logger.warning(f"PSR 自洽残差 {view.max_residual:.3e} 超过 {tol:.0e}")
    return view


def _suffix_policy_max(weights: np.ndarray, num_axes: int) -> np.ndarray:
    """
    对形如 (d,) + (O, A)^k 的非负表做后向动态规划：
    动作维取 max（策略选择），观测维求和。
    """
    table = weights
    for axis in range(num_axes, 0, -1):
        # 轴号 1..2k：奇数为观测，偶数为动作
        if axis % 2 == 0:
            table = table.max(axis=-1)
        else:
            table = table.sum(axis=-1)
    return table


def gamma_condition(model: TabularModel, tests: CoreTests, psr: PsrView = None) -> float:
    """
    1/γ = max_{h, x∈单位ℓ1球, π} Σ_ω π(ω|τ_h)|m(ω)^T x|

    ℓ1 球的最大值在 ±e_i 处取得；策略最大化通过后缀树上的后向 DP 精确求出。
    """
    psr = extract_psr(model, tests) if psr is None else psr
    best = 0.0
    for h in range(model.horizon):
        k = model.horizon - h
        m = np.abs(psr.m_vectors[h])
        table = m.reshape((m.shape[0],) + history_shape(model.num_obs, model.num_actions, k))
        per_coordinate = _suffix_policy_max(table, 2 * k)
        best = max(best, float(per_coordinate.max()))
    return best
