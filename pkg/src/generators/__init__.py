# -*- coding: utf-8 -*-
"""
生成器：实验实例、CSV 与报告输出
"""
