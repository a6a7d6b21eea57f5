#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
稠密两阶段单纯形法（Bland 规则防循环）

只服务桌面规模的线性规划（P 型 TV 原问题的精确解），
大规模或稀疏问题不在考虑范围内。
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import linalg

from config.settings import DUAL_CONFIG
from src.core.errors import InfeasibleError, ShapeError, TooLargeError, UnboundedError
from src.utils.common_utils import atomic_write_text
from src.utils.logger import get_logger

logger = get_logger(__name__)

MAX_PIVOTS = 200000


@dataclass(frozen=True)
class LinearProgram:
    """
    min c·x  s.t.  A_eq x = b_eq,  A_le x ≤ b_le,  x ≥ lower

    lower 缺省为 0；取 -inf 表示自由变量。
    """

    c: np.ndarray
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    a_le: Optional[np.ndarray] = None
    b_le: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64).ravel()
        n = c.size
        object.__setattr__(self, "c", c)
        for mat_name, rhs_name in (("a_eq", "b_eq"), ("a_le", "b_le")):
            mat, rhs = getattr(self, mat_name), getattr(self, rhs_name)
            if mat is None:
                mat, rhs = np.zeros((0, n)), np.zeros(0)
            mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
            rhs = np.asarray(rhs, dtype=np.float64).ravel()
            if mat.size == 0:
                mat = mat.reshape(0, n)
            if mat.shape[1] != n or mat.shape[0] != rhs.size:
                raise ShapeError(f"{mat_name} 形状 {mat.shape} 与 c({n}) / {rhs_name}({rhs.size}) 不匹配")
            if not (np.all(np.isfinite(mat)) and np.all(np.isfinite(rhs))):
                raise ShapeError(f"{mat_name} / {rhs_name} 含有非有限值")
            object.__setattr__(self, mat_name, mat)
            object.__setattr__(self, rhs_name, rhs)
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=np.float64).ravel()
        if lower.size != n or np.any(np.isnan(lower)) or np.any(lower == np.inf):
            raise ShapeError("下界向量非法")
        if not np.all(np.isfinite(c)):
            raise ShapeError("目标向量含有非有限值")
        object.__setattr__(self, "lower", lower)

    @property
    def num_vars(self):
        return self.c.size

    @property
    def nonzeros(self):
        return int(np.count_nonzero(self.a_eq) + np.count_nonzero(self.a_le))


@dataclass(frozen=True)
class LPSolution:
    value: float
    x: np.ndarray
    dual_eq: np.ndarray
    dual_le: np.ndarray
    iterations: int
    residual: float
    cs_residual: float


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _run_simplex(tableau, basis: List[int], allowed: int, tol, counter):
    """在前 allowed 列上迭代到最优；目标行为最后一行（约化费用）"""
    m = len(basis)
    while True:
        costs = tableau[-1, :allowed]
        candidates = np.flatnonzero(costs < -tol)
        if candidates.size == 0:
            return
        col = int(candidates[0])
        column = tableau[:m, col]
        positive = np.flatnonzero(column > tol)
        if positive.size == 0:
            raise UnboundedError("线性规划无界")
        ratios = tableau[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + tol * max(1.0, abs(best))]
        # Bland：比值相同时选基变量下标最小的行
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tableau, row, col)
        basis[row] = col
        counter[0] += 1
        if counter[0] > MAX_PIVOTS:
            raise TooLargeError(f"单纯形迭代次数超过 {MAX_PIVOTS}")


def simplex_lp_solve(lp: LinearProgram, tol=None) -> LPSolution:
    """
    两阶段稠密单纯形

    Returns:
        LPSolution: 最优值、原始解、对偶变量、迭代次数与互补松弛残差
    Raises:
        InfeasibleError / UnboundedError / TooLargeError
    """
    tol = DUAL_CONFIG["lp_tol"] if tol is None else tol
    if lp.nonzeros > DUAL_CONFIG["lp_max_nonzeros"]:
        raise TooLargeError(f"线性规划非零元 {lp.nonzeros} 超过上限 {DUAL_CONFIG['lp_max_nonzeros']}")

    n = lp.num_vars
    free = np.isinf(lp.lower)
    shift = np.where(free, 0.0, lp.lower)
    # x = shift + y⁺ - y⁻（y⁻ 只对自由变量存在）
    free_idx = np.flatnonzero(free)
    expand = np.hstack([np.eye(n), -np.eye(n)[:, free_idx]])

    m_eq, m_le = lp.a_eq.shape[0], lp.a_le.shape[0]
    a_eq = lp.a_eq @ expand
    a_le = lp.a_le @ expand
    b_eq = lp.b_eq - lp.a_eq @ shift
    b_le = lp.b_le - lp.a_le @ shift
    n_struct = expand.shape[1]

    a_std = np.zeros((m_eq + m_le, n_struct + m_le))
    a_std[:m_eq, :n_struct] = a_eq
    a_std[m_eq:, :n_struct] = a_le
    a_std[m_eq:, n_struct:] = np.eye(m_le)
    b_std = np.concatenate([b_eq, b_le])
    c_std = np.concatenate([lp.c @ expand, np.zeros(m_le)])
    row_sign = np.where(b_std < 0, -1.0, 1.0)
    a_std *= row_sign[:, None]
    b_std = b_std * row_sign

    m, n_std = a_std.shape
    counter = [0]

    # 第一阶段：每行一个人工变量
    tableau = np.zeros((m + 1, n_std + m + 1))
    tableau[:m, :n_std] = a_std
    tableau[:m, n_std:n_std + m] = np.eye(m)
    tableau[:m, -1] = b_std
    tableau[-1, :n_std] = -a_std.sum(axis=0)
    tableau[-1, -1] = -b_std.sum()
    basis = list(range(n_std, n_std + m))
    _run_simplex(tableau, basis, n_std + m, tol, counter)
    infeasibility = -tableau[-1, -1]
    if infeasibility > max(tol, 1e-7) * max(1.0, float(np.abs(b_std).sum())):
        raise InfeasibleError(f"线性规划不可行 (第一阶段残差 {infeasibility:.3e})")

    # 把残留在基里的人工变量换出；换不出的行是冗余约束
    keep_rows = []
    for row in range(m):
        if basis[row] >= n_std:
            candidates = np.flatnonzero(np.abs(tableau[row, :n_std]) > tol)
            if candidates.size == 0:
                continue
            _pivot(tableau, row, int(candidates[0]))
            basis[row] = int(candidates[0])
        keep_rows.append(row)
    if len(keep_rows) < m:
        logger.debug(f"删除 {m - len(keep_rows)} 条冗余等式")

    # 第二阶段
    phase2 = np.zeros((len(keep_rows) + 1, n_std + 1))
    phase2[:-1, :n_std] = tableau[keep_rows, :n_std]
    phase2[:-1, -1] = tableau[keep_rows, -1]
    basis = [basis[r] for r in keep_rows]
    phase2[-1, :n_std] = c_std
    for i, col in enumerate(basis):
        phase2[-1] -= c_std[col] * phase2[i]
    _run_simplex(phase2, basis, n_std, tol, counter)

    y = np.zeros(n_std)
    y[basis] = phase2[:-1, -1]
    y = np.maximum(y, 0.0)
    x = shift + expand @ y[:n_struct]

    # 对偶：B^T w = c_B（仅保留的行），冗余行对偶取 0
    w = np.zeros(m)
    if basis:
        b_mat = a_std[np.ix_(keep_rows, basis)]
        w_kept, *_ = linalg.lstsq(b_mat.T, c_std[basis])
        w[keep_rows] = w_kept
    reduced = c_std - a_std.T @ w
    cs_residual = float(np.max(np.abs(reduced * y))) if n_std else 0.0
    residual = float(np.max(np.abs(a_std @ y - b_std))) if m else 0.0
    w = w * row_sign

    return LPSolution(
        value=float(lp.c @ x),
        x=x,
        dual_eq=w[:m_eq],
        dual_le=w[m_eq:],
        iterations=counter[0],
        residual=residual,
        cs_residual=cs_residual,
    )


def dump_lp(lp: LinearProgram, file_path):
    """纯文本稠密格式输出，便于调试"""
    buffer = io.StringIO()
    buffer.write(f"# vars {lp.num_vars} eq {lp.a_eq.shape[0]} le {lp.a_le.shape[0]}\n")
    buffer.write("# c\n")
    np.savetxt(buffer, lp.c[None, :], fmt="%.17g")
    buffer.write("# lower\n")
    np.savetxt(buffer, lp.lower[None, :], fmt="%.17g")
    buffer.write("# A_eq | b_eq\n")
    if lp.a_eq.shape[0]:
        np.savetxt(buffer, np.hstack([lp.a_eq, lp.b_eq[:, None]]), fmt="%.17g")
    buffer.write("# A_le | b_le\n")
    if lp.a_le.shape[0]:
        np.savetxt(buffer, np.hstack([lp.a_le, lp.b_le[:, None]]), fmt="%.17g")
    atomic_write_text(buffer.getvalue(), file_path)
    logger.info(f"线性规划已写出: {file_path}")
