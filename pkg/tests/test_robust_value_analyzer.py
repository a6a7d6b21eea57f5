# -*- coding: utf-8 -*-
"""鲁棒值：四种不确定集、方法分派、暴力参照与缩放常数"""

import math
import unittest

import numpy as np

from src.analyzers.ambiguity_analyzer import SimplexGrid, UncertaintySpec
from src.analyzers.robust_value_analyzer import (
    ScalingInputs, estimate_eta_lambda, robust_value, robust_value_bruteforce, robust_value_p,
    robust_value_t, scaling_constant,
)
from src.core.decision_process import Policy, value
from src.core.errors import ConfigError, UndefinedScalingError
from src.generators.instance_generator import (
    random_model, random_policy, random_reward, ring2, ring2_reward,
)


class TestRing2RobustValues(unittest.TestCase):

    def setUp(self):
        self.model = ring2()
        self.reward = ring2_reward()
        self.always_zero = Policy.constant(2, 2, 2, 0)
        self.always_one = Policy.constant(2, 2, 2, 1)

    def test_t_tv(self):
        spec = UncertaintySpec("T", "tv", 0.1)
        self.assertAlmostEqual(robust_value(self.model, self.always_one, self.reward, spec).value, 0.7)
        self.assertAlmostEqual(robust_value(self.model, self.always_zero, self.reward, spec).value, 0.6)

    def test_p_tv_conventions(self):
        spec = UncertaintySpec("P", "tv", 0.2)
        report = robust_value(self.model, self.always_one, self.reward, spec)
        self.assertEqual(report.method, "p-lp")
        self.assertAlmostEqual(report.value, 0.6)
        l1 = UncertaintySpec("P", "tv", 0.2, budget_convention="l1")
        self.assertAlmostEqual(robust_value(self.model, self.always_one, self.reward, l1).value, 0.7)

    def test_p_tv_dual_method(self):
        spec = UncertaintySpec("P", "tv", 0.2)
        report = robust_value(self.model, self.always_one, self.reward, spec, method="dual")
        self.assertEqual(report.method, "p-dual")
        self.assertAlmostEqual(report.value, 0.6, delta=1e-3)

    def test_cross_check(self):
        spec = UncertaintySpec("P", "tv", 0.2)
        report = robust_value_p(self.model, self.always_one, self.reward, spec, method="lp", cross_check=True)
        self.assertAlmostEqual(report.value, 0.6)
        self.assertAlmostEqual(report.cross_check, 0.6, delta=1e-3)
        self.assertIn("cross_check", report.to_dict())

    def test_brute_force(self):
        grid = SimplexGrid(10, 2)
        t_spec = UncertaintySpec("T", "tv", 0.1)
        p_spec = UncertaintySpec("P", "tv", 0.1)
        self.assertAlmostEqual(robust_value_bruteforce(self.model, self.always_one, self.reward, t_spec, grid), 0.7)
        self.assertAlmostEqual(robust_value_bruteforce(self.model, self.always_one, self.reward, p_spec, grid), 0.7)
        report = robust_value(self.model, self.always_one, self.reward, t_spec, method="brute", grid=grid)
        self.assertEqual(report.method, "brute-force")

    def test_brute_force_default_grid(self):
        spec = UncertaintySpec("T", "tv", 0.1)
        report = robust_value(self.model, self.always_one, self.reward, spec, method="brute")
        self.assertEqual(report.method, "brute-force")
        self.assertAlmostEqual(report.value, 0.7)

    def test_zero_radius_is_nominal(self):
        for kind in ("T", "P"):
            for div in ("tv", "kl"):
                spec = UncertaintySpec(kind, div, 0.0)
                self.assertAlmostEqual(robust_value(self.model, self.always_one, self.reward, spec).value, 0.8)

    def test_inner_multipliers_shape(self):
        report = robust_value_t(self.model, self.always_one, self.reward, UncertaintySpec("T", "kl", 0.1))
        self.assertEqual(set(report.inner_multipliers), {1})
        self.assertEqual(report.inner_multipliers[1].shape, (2, 2))


class TestDispatch(unittest.TestCase):

    def test_invalid_methods(self):
        model, reward, policy = ring2(), ring2_reward(), Policy.uniform(2, 2, 2)
        with self.assertRaises(ConfigError):
            robust_value(model, policy, reward, UncertaintySpec("T", "tv", 0.1), method="lp")
        with self.assertRaises(ConfigError):
            robust_value(model, policy, reward, UncertaintySpec("P", "kl", 0.1), method="lp")
        with self.assertRaises(ConfigError):
            robust_value(model, policy, reward, UncertaintySpec("T", "tv", 0.1), method="newton")
        with self.assertRaises(ConfigError):
            robust_value_t(model, policy, reward, UncertaintySpec("P", "tv", 0.1))


class TestRandomInstances(unittest.TestCase):

    def test_bellman_against_brute(self):
        grid = SimplexGrid(50, 2)
        for seed in range(3):
            model = random_model(2, 2, 2, rng_seed=seed)
            policy = random_policy(2, 2, 2, rng_seed=seed + 100)
            reward = random_reward(2, 2, 2, rng_seed=seed + 200)
            for div in ("tv", "kl"):
                spec = UncertaintySpec("T", div, 0.2)
                exact = robust_value_t(model, policy, reward, spec).value
                brute = robust_value_bruteforce(model, policy, reward, spec, grid)
                self.assertGreaterEqual(brute, exact - 1e-9)
                self.assertLessEqual(brute - exact, 2.0 / 50)

    def test_monotone_in_radius(self):
        model = random_model(3, 2, 2, rng_seed=7)
        policy = random_policy(3, 2, 2, rng_seed=8)
        reward = random_reward(3, 2, 2, rng_seed=9)
        nominal = value(model, policy, reward)
        for kind in ("T", "P"):
            for div in ("tv", "kl"):
                values = [robust_value(model, policy, reward, UncertaintySpec(kind, div, xi)).value
                          for xi in (0.0, 0.05, 0.2)]
                self.assertAlmostEqual(values[0], nominal, places=9)
                self.assertLessEqual(values[1], values[0] + 1e-9)
                self.assertLessEqual(values[2], values[1] + 1e-9)

    def test_cross_check_agrees_at_h3(self):
        spec = UncertaintySpec("P", "tv", 0.2)
        for seed in (1, 2):
            model = random_model(3, 2, 2, rng_seed=seed)
            policy = random_policy(3, 2, 2, rng_seed=seed + 100)
            reward = random_reward(3, 2, 2, rng_seed=seed + 200)
            with self.assertNoLogs("src.analyzers.robust_value_analyzer", level="WARNING"):
                report = robust_value_p(model, policy, reward, spec, method="lp", cross_check=True)
            self.assertAlmostEqual(report.cross_check, report.value, delta=1e-3)


class TestScaling(unittest.TestCase):

    def test_tv_constants(self):
        inputs = ScalingInputs(eta=1.0, lam=1.0, c_b=2.5, xi=0.1)
        self.assertEqual(scaling_constant(UncertaintySpec("P", "tv", 0.1), inputs), 1.0)
        self.assertEqual(scaling_constant(UncertaintySpec("T", "tv", 0.1), inputs), 2.5)

    def test_kl_constants(self):
        inputs = ScalingInputs(eta=1.0, lam=1.0, c_b=1.0, xi=0.5)
        self.assertAlmostEqual(scaling_constant(UncertaintySpec("P", "kl", 0.5), inputs), 3.0 * math.e)
        self.assertAlmostEqual(scaling_constant(UncertaintySpec("T", "kl", 0.5), inputs), math.exp(0.5) / 0.5)

    def test_overflow_is_infinite(self):
        inputs = ScalingInputs(eta=1e-3, lam=1.0, c_b=1.0, xi=0.1)
        self.assertEqual(scaling_constant(UncertaintySpec("P", "kl", 0.1), inputs), math.inf)

    def test_undefined_and_invalid(self):
        with self.assertRaises(UndefinedScalingError):
            scaling_constant(UncertaintySpec("T", "kl", 0.0), ScalingInputs(1.0, 1.0, 1.0, 0.0))
        with self.assertRaises(ConfigError):
            scaling_constant(UncertaintySpec("T", "tv", 0.1), ScalingInputs(1.0, 1.0, 0.5, 0.1))

    def test_multiplier_estimate(self):
        estimate = estimate_eta_lambda(ring2(), Policy.constant(2, 2, 2, 1), ring2_reward(), 0.05)
        self.assertFalse(estimate.degenerate)
        self.assertGreater(estimate.eta, 0.0)
        self.assertGreater(estimate.lam, 0.0)
        self.assertTrue(np.isfinite(estimate.eta) and np.isfinite(estimate.lam))
        with self.assertRaises(ConfigError):
            estimate_eta_lambda(ring2(), Policy.constant(2, 2, 2, 1), ring2_reward(), 0.0)


if __name__ == '__main__':
    unittest.main()
