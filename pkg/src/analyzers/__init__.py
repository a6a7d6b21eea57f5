# -*- coding: utf-8 -*-
"""
分析模块：PSR 视角、不确定集、对偶求解、鲁棒值与诊断
"""
