# -*- coding: utf-8 -*-
"""
核心模块：表格决策过程、JSON 读写与错误类型
"""
