#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
模型 / 策略 / 奖励的 JSON 读写

浮点数按 repr 输出（最短可逆十进制表示），读回后逐位相同。
"""

from __future__ import annotations

from typing import Any, Dict, List

import numpy as np

from src.core.decision_process import Policy, RewardSpec, TabularModel
from src.core.errors import ConfigError, RobustPsrError
from src.utils.common_utils import load_json, save_json_atomic


def _require(doc: Dict[str, Any], keys, what):
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ConfigError(f"{what} 缺少字段: {missing}")


def model_to_dict(model: TabularModel) -> Dict[str, Any]:
    return {
        "H": model.horizon,
        "num_obs": model.num_obs,
        "num_actions": model.num_actions,
        "o1": model.o1,
        "transitions": [model.transition_rows(h).tolist() for h in range(1, model.horizon)],
    }


def model_from_dict(doc: Dict[str, Any]) -> TabularModel:
    _require(doc, ["H", "num_obs", "num_actions", "o1", "transitions"], "模型")
    try:
        return TabularModel.from_rows(int(doc["H"]), int(doc["num_obs"]), int(doc["num_actions"]),
                                      int(doc["o1"]), doc["transitions"])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"模型表无法解析: {e}") from e


def policy_to_dict(policy: Policy) -> Dict[str, Any]:
    return {
        "H": policy.horizon,
        "num_obs": policy.num_obs,
        "num_actions": policy.num_actions,
        "probabilities": [policy.decision_rows(h).tolist() for h in range(1, policy.horizon + 1)],
    }


def policy_from_dict(doc: Dict[str, Any]) -> Policy:
    _require(doc, ["H", "num_obs", "num_actions", "probabilities"], "策略")
    try:
        return Policy.from_rows(int(doc["H"]), int(doc["num_obs"]), int(doc["num_actions"]),
                                doc["probabilities"])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"策略表无法解析: {e}") from e


def reward_to_dict(reward: RewardSpec) -> Dict[str, Any]:
    return {
        "H": reward.horizon,
        "num_obs": reward.num_obs,
        "num_actions": reward.num_actions,
        "values": reward.table.ravel().tolist(),
    }


def reward_from_dict(doc: Dict[str, Any]) -> RewardSpec:
    _require(doc, ["H", "num_obs", "num_actions", "values"], "奖励")
    try:
        return RewardSpec(int(doc["H"]), int(doc["num_obs"]), int(doc["num_actions"]),
                          np.asarray(doc["values"], dtype=np.float64))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"奖励表无法解析: {e}") from e


def policies_to_dict(policies: List[Policy]) -> Dict[str, Any]:
    return {"policies": [policy_to_dict(p) for p in policies]}


def policies_from_dict(doc) -> List[Policy]:
    items = doc["policies"] if isinstance(doc, dict) else doc
    if not items:
        raise ConfigError("策略列表为空")
    return [policy_from_dict(p) for p in items]


def load_model(path) -> TabularModel:
    return model_from_dict(_load(path))


def load_policy(path) -> Policy:
    return policy_from_dict(_load(path))


def load_reward(path) -> RewardSpec:
    return reward_from_dict(_load(path))


def load_policies(path) -> List[Policy]:
    return policies_from_dict(_load(path))


def save_model(model: TabularModel, path):
    save_json_atomic(model_to_dict(model), path)


def save_policy(policy: Policy, path):
    save_json_atomic(policy_to_dict(policy), path)


def save_reward(reward: RewardSpec, path):
    save_json_atomic(reward_to_dict(reward), path)


def _load(path):
    try:
        return load_json(path)
    except RobustPsrError:
        raise
    except (OSError, ValueError) as e:
        raise ConfigError(f"无法读取 {path}: {e}") from e
