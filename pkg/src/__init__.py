# -*- coding: utf-8 -*-
"""
Robust PSR Package
表格型非马尔可夫决策过程的分布鲁棒离线强化学习工具包
"""

__version__ = "1.0.0"
__author__ = "Robust PSR Team"
