# -*- coding: utf-8 -*-
"""
离线学习算法
"""
