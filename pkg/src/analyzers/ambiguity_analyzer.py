#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
不确定集：规格、f 散度、成员判定与网格枚举
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.special import rel_entr

from config.settings import AMBIGUITY_CONFIG, DUAL_CONFIG, ENUMERATION_CONFIG
from src.core.decision_process import TabularModel
from src.core.errors import ConfigError, ShapeError, TooLargeError
from src.utils.logger import get_logger

logger = get_logger(__name__)


class SetKind(str, Enum):
    T_TYPE = "T"
    P_TYPE = "P"


class Divergence(str, Enum):
    TV = "tv"
    KL = "kl"


BUDGET_CONVENTIONS = ("tv", "l1")


@dataclass(frozen=True)
class UncertaintySpec:
    """
    不确定集规格 (集合类型 × 散度 × 半径 ξ)

    radius_overrides 可按下标覆盖半径：
    - T 型键为 (h, 历史排名)
    - P 型键为动作序列 a_1:H-1 的排名
    budget_convention 只影响 P 型 TV 的线性规划预算（见 lp_budget）。
    """

    set_kind: SetKind
    divergence: Divergence
    xi: float
    radius_overrides: Dict = field(default_factory=dict, compare=False)
    budget_convention: str = DUAL_CONFIG["tv_budget_convention"]

    def __post_init__(self):
        object.__setattr__(self, "set_kind", SetKind(self.set_kind))
        object.__setattr__(self, "divergence", Divergence(self.divergence))
        xi = float(self.xi)
        if not math.isfinite(xi) or xi < 0.0:
            raise ConfigError(f"半径 ξ 必须为有限非负数: {self.xi}")
        object.__setattr__(self, "xi", xi)
        if self.budget_convention not in BUDGET_CONVENTIONS:
            raise ConfigError(f"未知的预算约定: {self.budget_convention}")
        for radius in self.radius_overrides.values():
            if not math.isfinite(float(radius)) or float(radius) < 0.0:
                raise ConfigError(f"覆盖半径必须为有限非负数: {radius}")

    @property
    def label(self):
        return f"{self.set_kind.value}-{self.divergence.value.upper()}"

    def with_xi(self, xi):
        return replace(self, xi=xi)

    def row_radii(self, h, count) -> np.ndarray:
        """T_h 各行的半径"""
        radii = np.full(count, self.xi)
        for key, radius in self.radius_overrides.items():
            if isinstance(key, tuple) and key[0] == h and 0 <= key[1] < count:
                radii[key[1]] = float(radius)
        return radii

    def sequence_radii(self, count) -> np.ndarray:
        """每个动作序列 a_1:H-1 的半径"""
        radii = np.full(count, self.xi)
        for key, radius in self.radius_overrides.items():
            if not isinstance(key, tuple) and 0 <= int(key) < count:
                radii[int(key)] = float(radius)
        return radii

    def lp_budget(self, radius):
        """P1 中 Σ s ≤ budget 的预算；tv 约定下为 2ξ（半 ℓ1 半径换算为 ℓ1）"""
        return 2.0 * radius if self.budget_convention == "tv" else radius

    def to_dict(self):
        doc = {"set": self.set_kind.value, "div": self.divergence.value, "xi": self.xi}
        if self.radius_overrides:
            overrides = []
            for key, radius in self.radius_overrides.items():
                if isinstance(key, tuple):
                    overrides.append({"h": key[0], "index": key[1], "xi": radius})
                else:
                    overrides.append({"index": key, "xi": radius})
            doc["overrides"] = overrides
        if self.budget_convention != DUAL_CONFIG["tv_budget_convention"]:
            doc["convention"] = self.budget_convention
        return doc

    @classmethod
    def from_dict(cls, doc):
        try:
            overrides = {}
            for item in doc.get("overrides", []):
                key = (int(item["h"]), int(item["index"])) if "h" in item else int(item["index"])
                overrides[key] = float(item["xi"])
            return cls(
                SetKind(str(doc["set"]).upper()),
                Divergence(str(doc["div"]).lower()),
                float(doc["xi"]),
                overrides,
                doc.get("convention", DUAL_CONFIG["tv_budget_convention"]),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigError(f"不确定集规格无法解析: {doc} ({e})") from e


def f_divergence(p, q, divergence) -> float:
    """
    TV = ½Σ|p-q|；KL = Σ p log(p/q)，0·log0 = 0，支撑不满足时为 +∞
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"分布长度不一致: {p.shape} vs {q.shape}")
    return float(row_divergence(p, q, divergence))


def row_divergence(p, q, divergence):
    """沿最后一维的散度（向量化）"""
    divergence = Divergence(divergence)
    if divergence is Divergence.TV:
        return 0.5 * np.abs(p - q).sum(axis=-1)
    return rel_entr(p, q).sum(axis=-1)


def joint_by_sequence(model: TabularModel) -> np.ndarray:
    """
    P(o_1:H | a_1:H-1) 重排为 (动作序列排名, 观测序列排名)
    """
    joint = model.joint_table(model.horizon)
    horizon = model.horizon
    obs_axes = list(range(0, 2 * horizon - 1, 2))
    act_axes = list(range(1, 2 * horizon - 1, 2))
    ordered = np.transpose(joint, act_axes + obs_axes)
    n_seq = model.num_actions ** (horizon - 1)
    return ordered.reshape(n_seq, -1)


def membership(candidate: TabularModel, center: TabularModel, spec: UncertaintySpec) -> bool:
    """
    判断 candidate 是否属于以 center 为中心的不确定集

    T 型逐 (h, τ_h) 行检查；P 型逐动作序列检查联合分布并检查一致性约束。
    """
    if not candidate.same_dimensions(center) or candidate.o1 != center.o1:
        raise ShapeError("候选模型与中心模型维度不一致")
    tol = AMBIGUITY_CONFIG["membership_tol"]
    if spec.set_kind is SetKind.T_TYPE:
        for h in range(1, center.horizon):
            rows_c = candidate.transition_rows(h)
            rows_0 = center.transition_rows(h)
            radii = spec.row_radii(h, rows_0.shape[0])
            if np.any(row_divergence(rows_c, rows_0, spec.divergence) > radii + tol):
                return False
        return True

    joint_c = joint_by_sequence(candidate)
    joint_0 = joint_by_sequence(center)
    radii = spec.sequence_radii(joint_0.shape[0])
    if np.any(row_divergence(joint_c, joint_0, spec.divergence) > radii + tol):
        return False
    return candidate.check_consistency()


def compositions(total, parts) -> Iterator[Tuple[int, ...]]:
    """total 个单位分到 parts 个格子的全部方式（字典序）"""
    if parts == 1:
        yield (total,)
        return
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        previous = -1
        out = []
        for bar in bars:
            out.append(bar - previous - 1)
            previous = bar
        out.append(total + parts - 1 - previous - 1)
        yield tuple(out)


@dataclass(frozen=True)
class SimplexGrid:
    """
    分辨率为 1/k 的单纯形网格，点数为 C(k+n-1, n-1)
    """

    k: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ConfigError(f"网格参数非法: k={self.k}, n={self.n}")

    @property
    def count(self):
        return math.comb(self.k + self.n - 1, self.n - 1)

    def points(self) -> np.ndarray:
        counts = np.array(list(compositions(self.k, self.n)), dtype=np.float64)
        return counts / self.k

    def round(self, p) -> np.ndarray:
        """最大余数法取整到网格"""
        p = np.asarray(p, dtype=np.float64)
        scaled = p * self.k
        base = np.floor(scaled)
        remainder = int(round(self.k - base.sum()))
        order = np.argsort(-(scaled - base), kind="stable")
        base[order[:remainder]] += 1
        return base / self.k


def ball_rows(center_row, radius, divergence, grid: SimplexGrid, points=None) -> np.ndarray:
    """网格中落在单行球内的点"""
    points = grid.points() if points is None else points
    tol = AMBIGUITY_CONFIG["membership_tol"]
    divs = row_divergence(points, np.broadcast_to(center_row, points.shape), divergence)
    return points[divs <= radius + tol]


def _t_type_ball(center: TabularModel, spec: UncertaintySpec, grid: SimplexGrid):
    points = grid.points()
    per_row: List[np.ndarray] = []
    for h in range(1, center.horizon):
        rows = center.transition_rows(h)
        radii = spec.row_radii(h, rows.shape[0])
        for row, radius in zip(rows, radii):
            candidates = ball_rows(row, radius, spec.divergence, grid, points)
            if candidates.shape[0] == 0:
                logger.warning("网格上没有落在球内的行（中心不在网格上且半径过小），返回空枚举")
                return
            per_row.append(candidates)

    total = math.prod(c.shape[0] for c in per_row)
    if total > ENUMERATION_CONFIG["max_ball_models"]:
        raise TooLargeError(f"T 型球网格模型数 {total} 超过上限 {ENUMERATION_CONFIG['max_ball_models']}")

    sizes = [center.num_histories(h) for h in range(1, center.horizon)]
    for choice in itertools.product(*per_row):
        tables, start = [], 0
        for h, size in enumerate(sizes, start=1):
            block = np.stack(choice[start:start + size])
            tables.append(block)
            start += size
        yield TabularModel.from_rows(center.horizon, center.num_obs, center.num_actions,
                                     center.o1, tables)


def _count_trees(center: TabularModel, k):
    """
    枚举满足一致性约束的联合网格分布：每个 τ_h 把 x_h 的计数拆给下一观测
    产出 splits[h-1]（形状 (O,A)^h + (O,) 的整数计数）
    """
    num_obs, num_actions, horizon = center.num_obs, center.num_actions, center.horizon
    first = np.zeros(num_obs, dtype=np.int64)
    first[center.o1] = k

    def level(h, parent_counts, splits):
        if h == horizon:
            yield list(splits)
            return
        # 父计数 c(x_h) 对每个 a_h 复制一份
        node_counts = np.broadcast_to(parent_counts[..., None],
                                      parent_counts.shape + (num_actions,))
        nodes = [idx for idx in np.ndindex(*node_counts.shape) if node_counts[idx] > 0]
        options = [list(compositions(int(node_counts[idx]), num_obs)) for idx in nodes]
        for choice in itertools.product(*options):
            split = np.zeros(node_counts.shape + (num_obs,), dtype=np.int64)
            for idx, parts in zip(nodes, choice):
                split[idx] = parts
            yield from level(h + 1, split, splits + [split])

    yield from level(1, first, [])


def _p_type_ball(center: TabularModel, spec: UncertaintySpec, grid: SimplexGrid):
    # o_1 固定后 τ_h 的个数为 |A|·(|O||A|)^(h-1)，每个 τ_h 拆给 |O| 个变量
    variables = sum(center.num_actions * (center.num_obs * center.num_actions) ** (h - 1) * center.num_obs
                    for h in range(1, center.horizon))
    if variables > ENUMERATION_CONFIG["max_ball_variables"]:
        raise TooLargeError(f"P 型球变量数 {variables} 超过上限 {ENUMERATION_CONFIG['max_ball_variables']}")
    cap = ENUMERATION_CONFIG["max_ball_models"]
    examined = 0
    yielded = 0
    for splits in _count_trees(center, grid.k):
        examined += 1
        if examined > cap:
            raise TooLargeError(f"P 型球候选数超过上限 {cap}")
        tables = []
        for h, split in enumerate(splits, start=1):
            totals = split.sum(axis=-1, keepdims=True)
            table = np.array(center.transitions[h - 1], dtype=np.float64)
            # 计数为 0 的历史不影响联合分布，沿用中心行
            mask = totals[..., 0] > 0
            table[mask] = split[mask] / totals[mask]
            tables.append(table)
        candidate = TabularModel(center.horizon, center.num_obs, center.num_actions,
                                 center.o1, tuple(tables))
        if membership(candidate, center, spec):
            yielded += 1
            yield candidate
    if yielded == 0:
        logger.warning("P 型球在网格上没有成员（中心不在网格上且半径过小），返回空枚举")


def enumerate_ball(center: TabularModel, spec: UncertaintySpec, grid: SimplexGrid) -> Iterator[TabularModel]:
    """
    惰性枚举网格上属于不确定集的全部模型

    T 型按历史行的笛卡尔积展开（矩形性）；P 型按一致性计数树展开后过滤。
    """
    if grid.n != center.num_obs:
        raise ShapeError(f"网格维度 {grid.n} 与 |O|={center.num_obs} 不一致")
    if spec.set_kind is SetKind.T_TYPE:
        return _t_type_ball(center, spec, grid)
    return _p_type_ball(center, spec, grid)
