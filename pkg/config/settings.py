"""
项目配置文件
"""

import os

"""全局配置与标准输出目录管理"""

# 项目根目录
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# 输出目录配置（统一到 output/* 子目录）
OUTPUT_DIR = os.path.join(PROJECT_ROOT, "output")
SWEEP_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "sweep")
FIT_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "fit")
LP_DUMP_DIR = os.path.join(OUTPUT_DIR, "lp")

# 日志目录
LOG_DIR = os.path.join(PROJECT_ROOT, "logs")

# 内置实验配置
DEFAULT_SWEEP_CONFIG = os.path.join(PROJECT_ROOT, "config", "ring2_sweep.json")

# 全量枚举上限
ENUMERATION_CONFIG = {
    "max_trajectories": 10 ** 7,
    # P 型球枚举的变量数上限（历史数 × |O|）
    "max_ball_variables": 64,
    # 单个 T 型球的笛卡尔积模型数上限
    "max_ball_models": 10 ** 6,
}

# PSR 配置
PSR_CONFIG = {
    "rank_rtol": 1e-9,
    "residual_tol": 1e-8,
    "default_test_length": 2,
}

# 不确定集配置
AMBIGUITY_CONFIG = {
    "membership_tol": 1e-12,
    "default_grid_k": 10,
}

# 对偶求解配置
DUAL_CONFIG = {
    "kl_lambda_floor": 1e-8,
    "golden_tol": 1e-10,
    "lp_max_nonzeros": 50000,
    "lp_tol": 1e-9,
    # tv: 与成员判定一致的半 ℓ1 半径（LP 预算 2ξ）；l1: 按 P1 原式（预算 ξ）
    "tv_budget_convention": "tv",
}

# 离线学习配置
LEARNER_CONFIG = {
    "delta": 0.1,
    "alpha_scale": 1.0,
    "beta_scale": 1.0,
    "multiplier_floor": 1e-6,
    "wellness_grid_k": 10,
    "split_seed": 0,
}

# 诊断配置
DIAGNOSTICS_CONFIG = {
    "eig_cutoff": 1e-10,
}

# 日志配置
LOGGING_CONFIG = {
    "log_to_file": os.environ.get("ROBUSTPSR_LOG_TO_FILE", "1") != "0",
    "level": os.environ.get("ROBUSTPSR_LOG_LEVEL", "INFO").upper(),
    # 扫参会在子进程里记日志，格式里带上进程名
    "format": "%(asctime)s - %(processName)s - %(name)s - %(levelname)s - %(message)s",
    "datefmt": "%Y-%m-%d %H:%M:%S",
    "max_bytes": 10 * 1024 * 1024,
    "backup_count": 5,
}


def _thread_cap(default=8):
    """读取 ROBUSTPSR_THREADS 环境变量作为进程池上限"""
    raw = os.environ.get("ROBUSTPSR_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


# 多进程配置
MULTIPROCESS_CONFIG = {
    "max_workers": _thread_cap(),
    "chunksize": 1,
}


def ensure_directories():
    """确保所有必要的目录都存在（标准化输出结构）"""
    directories = [
        OUTPUT_DIR,
        SWEEP_OUTPUT_DIR,
        FIT_OUTPUT_DIR,
        LP_DUMP_DIR,
        LOG_DIR,
    ]

    for directory in directories:
        os.makedirs(directory, exist_ok=True)
