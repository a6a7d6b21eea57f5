# -*- coding: utf-8 -*-
"""
统一异常类型

每个异常都带有 kind 字段，与命令行错误记录、扫参错误文件中的字符串一致。
"""


class RobustPsrError(Exception):
    """所有领域错误的基类"""

    kind = "error"

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message

    def to_record(self):
        return {"kind": self.kind, "message": self.message}


class ShapeError(RobustPsrError):
    """维度不一致（模型/策略/轨迹/奖励之间）"""
    kind = "shape"


class TooLargeError(RobustPsrError):
    """枚举规模超过配置上限"""
    kind = "too-large"


class UnreachableHistoryError(RobustPsrError):
    """条件历史的概率为 0，预测特征无定义"""
    kind = "unreachable-history"


class CoreTestsInsufficientError(RobustPsrError):
    """核心测试张成的秩不足"""
    kind = "core-tests-insufficient"


class InfeasibleError(RobustPsrError):
    """线性规划没有可行点"""
    kind = "infeasible"


class UnboundedError(RobustPsrError):
    """线性规划目标无下界"""
    kind = "unbounded"


class UndefinedScalingError(RobustPsrError):
    """缩放常数在给定输入下无定义（如 T 型 KL 且 ξ=0）"""
    kind = "undefined-scaling"


class ClassIncompatibleError(RobustPsrError):
    """模型类中所有成员对数据的似然均为 0"""
    kind = "class-incompatible"


class InsufficientPointsError(RobustPsrError):
    """斜率拟合可用点数不足 3"""
    kind = "insufficient-points"


class AlphaUndefinedError(RobustPsrError):
    """ι=0 时默认 α 无定义，需要用户显式给出"""
    kind = "alpha-undefined"


class ConfigError(RobustPsrError):
    """实验配置或输入文件不合法"""
    kind = "config"
