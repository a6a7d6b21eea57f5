# -*- coding: utf-8 -*-
"""PSR 视图：秩、核心测试、预测特征与算子自洽"""

import unittest

import numpy as np

from src.analyzers.psr_analyzer import (
    CoreTests, complete_core_tests, default_core_tests, dynamics_matrix, extract_psr,
    feature_table, gamma_condition, numerical_rank, prediction_feature, psr_rank,
)
from src.core.errors import CoreTestsInsufficientError, ShapeError, UnreachableHistoryError
from src.generators.instance_generator import random_model, ring2


class TestRank(unittest.TestCase):

    def test_ring2_rank(self):
        model = ring2()
        self.assertEqual(dynamics_matrix(model, 0).rank, 1)
        self.assertEqual(dynamics_matrix(model, 1).rank, 2)
        self.assertEqual(psr_rank(model), 2)

    def test_zero_matrix(self):
        rank, _ = numerical_rank(np.zeros((3, 3)))
        self.assertEqual(rank, 0)

    def test_split_out_of_range(self):
        with self.assertRaises(ShapeError):
            dynamics_matrix(ring2(), 2)


class TestCoreTests(unittest.TestCase):

    def test_default_tests_ring2(self):
        tests = default_core_tests(ring2())
        self.assertEqual(tests.size(0), 8)
        self.assertEqual(tests.size(1), 2)
        self.assertEqual(tests.dimension, 8)
        self.assertEqual(tests.max_action_sequences, 2)

    def test_complete_tests_size(self):
        tests = complete_core_tests(ring2())
        self.assertEqual(tests.size(0), 16)
        self.assertEqual(tests.size(1), 4)

    def test_dict_reload(self):
        tests = default_core_tests(random_model(3, 2, 2, rng_seed=0))
        self.assertEqual(CoreTests.from_dict(tests.to_dict()), tests)

    def test_invalid_groups(self):
        with self.assertRaises(ShapeError):
            CoreTests(2, 2, 2, ((((0,), (0,)),), ()))
        with self.assertRaises(ShapeError):
            CoreTests(2, 2, 2, ((((0, 0, 0), (0, 0, 0)),), (((0,), (0,)),)))
        with self.assertRaises(ShapeError):
            CoreTests(2, 2, 2, ((((3,), (0,)),), (((0,), (0,)),)))


class TestPredictionFeature(unittest.TestCase):

    def setUp(self):
        self.model = ring2()
        self.tests = default_core_tests(self.model)

    def test_conditional_probabilities(self):
        feature = prediction_feature(self.model, self.tests, (0, 1))
        self.assertTrue(np.allclose(feature, [0.2, 0.8]))
        feature = prediction_feature(self.model, self.tests, (0, 0))
        self.assertTrue(np.allclose(feature, [0.3, 0.7]))

    def test_unreachable_history(self):
        with self.assertRaises(UnreachableHistoryError):
            prediction_feature(self.model, self.tests, (1, 0))

    def test_normalized_table_marks_unreachable(self):
        table = feature_table(self.model, self.tests, 1, normalized=True)
        self.assertTrue(np.all(np.isnan(table[2:])))
        self.assertTrue(np.allclose(table[:2].sum(axis=1), 1.0))


class TestExtractPsr(unittest.TestCase):

    def test_ring2_residuals(self):
        model = ring2()
        view = extract_psr(model, default_core_tests(model))
        self.assertLess(view.max_residual, 1e-8)
        self.assertTrue(np.allclose(view.state((0, 1)), [0.2, 0.8]))

    def test_random_model_residuals(self):
        model = random_model(3, 2, 2, rng_seed=4)
        view = extract_psr(model, default_core_tests(model))
        self.assertLess(view.max_residual, 1e-8)
        for history in [(0, 0), (0, 1, 1, 0)]:
            h = len(history) // 2
            row = feature_table(model, view.tests, h)[int(np.ravel_multi_index(history, (2, 2) * h))]
            self.assertTrue(np.allclose(view.state(history), row, atol=1e-10))

    def test_insufficient_tests(self):
        model = ring2()
        default = default_core_tests(model)
        # h=1 只保留空测试，秩 1 < 2
        tests = CoreTests(2, 2, 2, (default.tests[0], (((), ()),)))
        with self.assertRaises(CoreTestsInsufficientError):
            extract_psr(model, tests)

    def test_gamma_condition(self):
        model = ring2()
        inverse_gamma = gamma_condition(model, default_core_tests(model))
        self.assertTrue(np.isfinite(inverse_gamma))
        self.assertGreaterEqual(inverse_gamma, 1.0 - 1e-9)


if __name__ == '__main__':
    unittest.main()
