#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
扫参执行器：按 (N, seed) 生成离线数据、运行学习算法、计算次优间隙

每行只依赖 (master_seed, N, seed 序号)，与进程数和调度顺序无关。
"""

from __future__ import annotations

import math
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from config.settings import MULTIPROCESS_CONFIG
from src.analyzers.ambiguity_analyzer import SimplexGrid
from src.analyzers.robust_value_analyzer import robust_value
from src.core.decision_process import sample_dataset
from src.core.errors import InsufficientPointsError, RobustPsrError
from src.harness.experiment_config import ExperimentConfig, ExperimentSetup, SweepRow, build_setup
from src.learners.offline_learner import OfflineDataset, algorithm1, algorithm2
from src.utils.common_utils import spawn_seed
from src.utils.logger import get_logger, log_performance

logger = get_logger(__name__)

# LCB 有效性判定的浮点余量
LCB_SLACK = 1e-12


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)
    errors: List[Dict] = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors


class SweepRunner:
    """
    扫参执行器

    用途:
    - 对配置中的每个 (N, seed) 独立跑一遍离线学习，并用裁判鲁棒值计算间隙

    实现方式:
    - 构造时在父进程中一次性算好每个候选策略在真值模型上的裁判鲁棒值
      （默认网格暴力枚举）和精确鲁棒值（用于 LCB 有效性判定）
    - run_single_row 是纯函数式的单行任务，multiprocessing.Pool 直接映射

    优点:
    - 行之间完全独立，进程数不影响结果

    局限:
    - 每行都重新做 MLE、蒸馏与全部候选策略的鲁棒值，N 很大时耗时主要在采样与似然

    维护建议:
    - 新增行字段时同步修改 SweepRow 与 csv_generator.CSV_COLUMNS
    """

    def __init__(self, config: ExperimentConfig, setup: Optional[ExperimentSetup] = None):
        self.config = config
        self.setup = setup or build_setup(config)
        self.referee_values = self._robust_values(config.referee)
        if config.referee == "auto":
            self.truth_values = list(self.referee_values)
        else:
            self.truth_values = self._robust_values("auto")

    def _robust_values(self, method) -> List[float]:
        setup = self.setup
        grid = SimplexGrid(self.config.grid_k, setup.truth.num_obs) if method == "brute" else None
        return [
            robust_value(setup.truth, policy, setup.reward, self.config.uncertainty,
                         method=method, grid=grid).value
            for policy in setup.policies
        ]

    def tasks(self) -> List[Tuple[int, int]]:
        return [(n, s) for n in self.config.n_schedule for s in range(self.config.seeds)]

    def run_single_row(self, task):
        """
        单行任务

        Returns:
            ("ok", SweepRow) 或 ("error", 错误记录)
        """
        n, s = task
        config, setup = self.config, self.setup
        start = time.perf_counter()
        try:
            data_seed = spawn_seed(config.master_seed, n, s)
            split_seed = spawn_seed(config.master_seed, n, s, 1)
            observations, actions = sample_dataset(setup.truth, setup.behavior, n, data_seed)
            data = OfflineDataset(observations, actions, setup.behavior)

            if config.algorithm == 1:
                result = algorithm1(data, setup.model_class, setup.policies, setup.reward,
                                    config.uncertainty, params=config.learner_params(split_seed))
            else:
                result = algorithm2(data, setup.model_class, setup.policies, setup.reward,
                                    config.uncertainty, beta=config.overrides.get("beta"))

            gap = max(self.referee_values) - self.referee_values[result.index]
            lcb_valid = all(obj <= truth + LCB_SLACK
                            for obj, truth in zip(result.objectives, self.truth_values))
            ms = (time.perf_counter() - start) * 1000.0 if config.record_timing else 0.0
            return "ok", SweepRow(
                n=n,
                seed=s,
                gap=float(max(gap, 0.0)),
                dg_size=int(result.dg_size),
                theta_hat=int(result.theta_hat),
                conf_size=int(result.conf_size),
                lcb_valid=bool(lcb_valid),
                ms=float(ms),
            )
        except RobustPsrError as e:
            record = {"N": n, "seed": s}
            record.update(e.to_record())
            return "error", record
        except Exception as e:
            # 数值库异常只作废本行，扫参继续
            logger.exception(f"行内部错误 N={n} seed={s}")
            return "error", {"N": n, "seed": s, "kind": "internal",
                             "message": f"{type(e).__name__}: {e}"}

    @log_performance(logger)
    def run(self, workers: Optional[int] = None, progress=True) -> SweepResult:
        tasks = self.tasks()
        workers = MULTIPROCESS_CONFIG["max_workers"] if workers is None else max(1, int(workers))
        workers = min(workers, len(tasks))
        logger.info(f"开始扫参: {len(tasks)} 行, {workers} 个进程, 集合 {self.config.uncertainty.label}")

        if workers <= 1:
            outcomes = [self.run_single_row(t) for t in tqdm(tasks, desc="扫参", disable=not progress)]
        else:
            with mp.Pool(processes=workers) as pool:
                outcomes = list(tqdm(
                    pool.imap(self.run_single_row, tasks, chunksize=MULTIPROCESS_CONFIG["chunksize"]),
                    total=len(tasks), desc="扫参", disable=not progress,
                ))

        result = SweepResult()
        for status, payload in outcomes:
            if status == "ok":
                result.rows.append(payload)
            else:
                logger.warning(f"行失败 N={payload['N']} seed={payload['seed']}: "
                               f"{payload['kind']} {payload['message']}")
                result.errors.append(payload)
        result.rows.sort(key=lambda r: (r.n, r.seed))
        result.errors.sort(key=lambda r: (r["N"], r["seed"]))
        logger.info(f"扫参完成: 成功 {len(result.rows)} 行, 失败 {len(result.errors)} 行")
        return result


def run_sweep(config: ExperimentConfig, workers: Optional[int] = None, progress=True) -> SweepResult:
    return SweepRunner(config).run(workers=workers, progress=progress)


def median_gaps(rows: Sequence[SweepRow]) -> Dict[int, float]:
    by_n: Dict[int, List[float]] = {}
    for row in rows:
        by_n.setdefault(row.n, []).append(row.gap)
    return {n: float(np.median(gaps)) for n, gaps in sorted(by_n.items())}


def fit_slope(rows: Sequence[SweepRow]) -> Tuple[float, float, float]:
    """
    对 (log N, log 中位数间隙) 做最小二乘

    中位数非正的 N 被排除；剩余少于 3 个点时抛出 InsufficientPointsError。
    """
    medians = {n: g for n, g in median_gaps(rows).items() if g > 0 and math.isfinite(g)}
    if len(medians) < 3:
        raise InsufficientPointsError(f"正中位数间隙的 N 只有 {len(medians)} 个，至少需要 3 个")
    log_n = np.log(np.array(list(medians.keys()), dtype=np.float64))
    log_gap = np.log(np.array(list(medians.values()), dtype=np.float64))
    fit = stats.linregress(log_n, log_gap)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
