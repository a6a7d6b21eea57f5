# -*- coding: utf-8 -*-
"""
实验编排：配置解析、样本量扫参、对偶校验
"""
