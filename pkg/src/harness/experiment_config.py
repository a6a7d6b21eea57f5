#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验配置（JSON）与扫参结果行

配置示例见 config/ring2_sweep.json。所有字段错误统一抛出 ConfigError。
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

from config.settings import PROJECT_ROOT
from src.analyzers.ambiguity_analyzer import UncertaintySpec
from src.core.decision_process import Policy, RewardSpec, TabularModel
from src.core.errors import ConfigError, RobustPsrError
from src.core.model_io import load_model, load_policies, load_policy, load_reward
from src.generators import instance_generator
from src.learners.offline_learner import LearnerParams, ModelClass
from src.utils.common_utils import load_json

OVERRIDE_KEYS = ("p_min", "alpha", "lambda", "beta", "delta", "c_u", "c_b")
REFEREES = ("brute", "auto")


@dataclass(frozen=True)
class SweepRow:
    """扫参结果的一行"""

    n: int
    seed: int
    gap: float
    dg_size: int
    theta_hat: int
    conf_size: int
    lcb_valid: bool
    ms: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    """
    扫参实验配置

    instance / behavior / policies / model_class 为生成器描述或文件路径描述，
    相对路径以配置文件所在目录解析。
    """

    instance: Dict[str, Any]
    behavior: Dict[str, Any]
    policies: Dict[str, Any]
    model_class: Dict[str, Any]
    uncertainty: UncertaintySpec
    n_schedule: Tuple[int, ...]
    seeds: int
    master_seed: int = 0
    algorithm: int = 1
    overrides: Dict[str, float] = field(default_factory=dict)
    referee: str = "brute"
    grid_k: int = 50
    record_timing: bool = False
    output: Optional[str] = None
    base_dir: str = PROJECT_ROOT

    def __post_init__(self):
        schedule = tuple(self.n_schedule)
        if not schedule or any(not isinstance(n, int) or n < 1 for n in schedule):
            raise ConfigError(f"N 序列必须为正整数: {self.n_schedule}")
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigError(f"N 序列必须严格递增: {self.n_schedule}")
        object.__setattr__(self, "n_schedule", schedule)
        if not isinstance(self.seeds, int) or self.seeds < 1:
            raise ConfigError(f"seeds 必须 ≥ 1: {self.seeds}")
        if self.algorithm not in (1, 2):
            raise ConfigError(f"algorithm 只能是 1 或 2: {self.algorithm}")
        unknown = set(self.overrides) - set(OVERRIDE_KEYS)
        if unknown:
            raise ConfigError(f"未知的参数覆盖: {sorted(unknown)}")
        if self.referee not in REFEREES:
            raise ConfigError(f"未知的裁判方法: {self.referee}")
        if self.grid_k < 1:
            raise ConfigError(f"grid_k 必须为正: {self.grid_k}")

    @classmethod
    def from_dict(cls, doc, base_dir=PROJECT_ROOT):
        if not isinstance(doc, dict):
            raise ConfigError("实验配置必须是 JSON 对象")
        missing = [k for k in ("instance", "policies", "model_class", "uncertainty", "n_schedule", "seeds")
                   if k not in doc]
        if missing:
            raise ConfigError(f"实验配置缺少字段: {missing}")
        try:
            return cls(
                instance=dict(doc["instance"]),
                behavior=dict(doc.get("behavior", {"generator": "uniform"})),
                policies=dict(doc["policies"]),
                model_class=dict(doc["model_class"]),
                uncertainty=UncertaintySpec.from_dict(doc["uncertainty"]),
                n_schedule=tuple(doc["n_schedule"]),
                seeds=doc["seeds"],
                master_seed=int(doc.get("master_seed", 0)),
                algorithm=int(doc.get("algorithm", 1)),
                overrides={k: float(v) for k, v in doc.get("overrides", {}).items()},
                referee=str(doc.get("referee", "brute")),
                grid_k=int(doc.get("grid_k", 50)),
                record_timing=bool(doc.get("record_timing", False)),
                output=doc.get("output"),
                base_dir=base_dir,
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"实验配置字段类型错误: {e}") from e

    def resolve_path(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def learner_params(self, split_seed=0) -> LearnerParams:
        o = self.overrides
        return LearnerParams(
            p_min=o.get("p_min"),
            ridge=o.get("lambda"),
            alpha=o.get("alpha"),
            beta=o.get("beta"),
            delta=o.get("delta", LearnerParams().delta),
            c_u=o.get("c_u"),
            c_b=o.get("c_b"),
            split_seed=split_seed,
        )


def load_experiment_config(path) -> ExperimentConfig:
    try:
        doc = load_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"无法读取实验配置 {path}: {e}") from e
    return ExperimentConfig.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


class ExperimentSetup(NamedTuple):
    truth: TabularModel
    reward: RewardSpec
    behavior: Policy
    policies: List[Policy]
    model_class: ModelClass


def _generator_name(section, what):
    name = section.get("generator")
    if name is None and "file" not in section:
        raise ConfigError(f"{what} 需要 generator 或 file 字段")
    return name


def build_setup(config: ExperimentConfig) -> ExperimentSetup:
    """按配置构造真值模型、奖励、行为策略、候选策略与模型类"""
    try:
        return _build_setup(config)
    except RobustPsrError:
        raise
    except (OSError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"实验配置无法构造实例: {e}") from e


def _build_setup(config: ExperimentConfig) -> ExperimentSetup:
    inst = config.instance
    name = inst.get("generator")
    if name == "ring2":
        truth, reward = instance_generator.ring2(), instance_generator.ring2_reward()
    elif name == "random":
        dims = (int(inst["H"]), int(inst["num_obs"]), int(inst["num_actions"]))
        seed = int(inst.get("seed", 0))
        truth = instance_generator.random_model(*dims, rng_seed=seed)
        reward = instance_generator.random_reward(*dims, rng_seed=seed + 1)
    elif name is None and "model" in inst:
        truth = load_model(config.resolve_path(inst["model"]))
        reward = load_reward(config.resolve_path(inst["reward"]))
    else:
        raise ConfigError(f"未知的实例生成器: {name}")
    dims = (truth.horizon, truth.num_obs, truth.num_actions)

    beh = config.behavior
    if _generator_name(beh, "behavior") == "uniform":
        behavior = instance_generator.uniform_behavior(*dims)
    elif "file" in beh:
        behavior = load_policy(config.resolve_path(beh["file"]))
    else:
        raise ConfigError(f"未知的行为策略生成器: {beh.get('generator')}")

    pol = config.policies
    pname = _generator_name(pol, "policies")
    if pname == "constant_actions":
        policies = instance_generator.constant_actions(*dims)
    elif pname == "deterministic_all":
        policies = instance_generator.deterministic_all(*dims, o1=truth.o1)
    elif pname == "mixtures":
        policies = instance_generator.mixtures(instance_generator.constant_actions(*dims),
                                               steps=int(pol.get("steps", 3)))
    elif "file" in pol:
        policies = load_policies(config.resolve_path(pol["file"]))
    else:
        raise ConfigError(f"未知的策略类生成器: {pname}")

    mc = config.model_class
    mname = _generator_name(mc, "model_class")
    if mname == "ring2_family":
        truth_index = int(mc.get("truth_index", 0))
        members = instance_generator.ring2_family(int(mc.get("size", 8)), truth_index)
        model_class = ModelClass(tuple(members), nominal=truth_index)
    elif mname == "singleton":
        model_class = ModelClass((truth,), nominal=0)
    elif "file" in mc:
        model_class = ModelClass.from_dict(load_json(config.resolve_path(mc["file"])))
    else:
        raise ConfigError(f"未知的模型类生成器: {mname}")

    for policy in policies:
        if not truth.same_dimensions(policy):
            raise ConfigError("候选策略与实例维度不一致")
    if not truth.same_dimensions(model_class[0]):
        raise ConfigError("模型类与实例维度不一致")
    return ExperimentSetup(truth, reward, behavior, policies, model_class)
