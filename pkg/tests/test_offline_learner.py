# -*- coding: utf-8 -*-
"""离线学习：MLE、蒸馏、奖励项、算法 1 与算法 2"""

import math
import unittest

import numpy as np

from src.analyzers.ambiguity_analyzer import UncertaintySpec
from src.analyzers.diagnostics_analyzer import mle_hellinger_check
from src.analyzers.psr_analyzer import default_core_tests
from src.analyzers.robust_value_analyzer import robust_value
from src.core.decision_process import Policy, TabularModel, sample_dataset
from src.core.errors import AlphaUndefinedError, ClassIncompatibleError, ConfigError, ShapeError
from src.generators.instance_generator import (
    constant_actions, random_model, ring2, ring2_family, ring2_reward,
)
from src.learners.offline_learner import (
    LearnerParams, ModelClass, OfflineDataset, algorithm1, algorithm2, behavior_iota, build_bonus,
    confidence_set, default_learner_params, default_p_min, distill, learner_scaling, log_likelihoods,
    mle_fit,
)


def exact_ring2_data(behavior=None):
    """经验频率与 ring2 完全一致的 200 条轨迹"""
    counts = {0: (30, 70), 1: (20, 80)}
    observations, actions = [], []
    for a1, (zeros, ones) in counts.items():
        for o2, repeat in ((0, zeros), (1, ones)):
            observations.extend([(0, o2)] * repeat)
            actions.extend([(a1, 0)] * repeat)
    return OfflineDataset(np.array(observations), np.array(actions), behavior or Policy.uniform(2, 2, 2))


def ring2_class(size=8):
    return ModelClass(tuple(ring2_family(size)), nominal=0)


class TestContainers(unittest.TestCase):

    def test_model_class_validation(self):
        with self.assertRaises(ConfigError):
            ModelClass(())
        with self.assertRaises(ShapeError):
            ModelClass((ring2(), random_model(3, 2, 2, rng_seed=0)))
        with self.assertRaises(ConfigError):
            ModelClass((ring2(),), nominal=3)

    def test_model_class_reload(self):
        cls = ring2_class(3)
        reloaded = ModelClass.from_dict(cls.to_dict())
        self.assertEqual(len(reloaded), 3)
        self.assertEqual(reloaded.nominal, 0)
        self.assertEqual(reloaded.tests, cls.tests)

    def test_dataset_validation(self):
        behavior = Policy.uniform(2, 2, 2)
        with self.assertRaises(ShapeError):
            OfflineDataset(np.zeros((3, 2)), np.zeros((3, 3)), behavior)
        with self.assertRaises(ShapeError):
            OfflineDataset(np.full((3, 2), 2), np.zeros((3, 2)), behavior)
        with self.assertRaises(ConfigError):
            OfflineDataset.from_dict({"observations": [[0, 0]]})

    def test_params_overrides(self):
        params = LearnerParams(alpha=1.0).overrides(alpha=None, beta=2.0)
        self.assertEqual(params.alpha, 1.0)
        self.assertEqual(params.beta, 2.0)


class TestMaximumLikelihood(unittest.TestCase):

    def test_exact_frequencies_pick_truth(self):
        data = exact_ring2_data()
        cls = ring2_class()
        self.assertEqual(mle_fit(data, cls), 0)
        self.assertTrue(np.all(np.isfinite(log_likelihoods(data, cls))))

    def test_incompatible_class(self):
        never_one = TabularModel(2, 2, 2, 0, (np.tile([1.0, 0.0], (2, 2, 1)),))
        with self.assertRaises(ClassIncompatibleError):
            mle_fit(exact_ring2_data(), ModelClass((never_one,)))
        with self.assertRaises(ClassIncompatibleError):
            confidence_set(exact_ring2_data(), ModelClass((never_one,)), 1.0)

    def test_confidence_set(self):
        data = exact_ring2_data()
        cls = ring2_class()
        self.assertEqual(confidence_set(data, cls, 0.0), [0])
        self.assertEqual(confidence_set(data, cls, 1e9), list(range(8)))
        with self.assertRaises(ConfigError):
            confidence_set(data, cls, -1.0)


class TestDistillation(unittest.TestCase):

    def test_threshold(self):
        data = exact_ring2_data()
        kept = distill(data, ring2(), 0.0, rng_seed=0)
        self.assertEqual(kept.size, 200)
        self.assertEqual(len(kept.splits), 2)
        self.assertEqual(sum(obs.shape[0] for obs, _ in kept.splits), 200)
        self.assertTrue(distill(data, ring2(), 1.0, rng_seed=0).empty)
        with self.assertRaises(ConfigError):
            distill(data, ring2(), -1.0, rng_seed=0)

    def test_input_order_does_not_matter(self):
        data = exact_ring2_data()
        order = np.random.default_rng(5).permutation(data.size)
        shuffled = OfflineDataset(data.observations[order], data.actions[order], data.behavior)
        first = distill(data, ring2(), 0.0, rng_seed=3)
        second = distill(shuffled, ring2(), 0.0, rng_seed=3)
        for (obs_a, acts_a), (obs_b, acts_b) in zip(first.splits, second.splits):
            self.assertTrue(np.array_equal(obs_a, obs_b))
            self.assertTrue(np.array_equal(acts_a, acts_b))

    def test_default_threshold(self):
        self.assertAlmostEqual(default_p_min(100, 2, 2, 2, 0.1), 0.1 / 25600)


class TestBonus(unittest.TestCase):

    def setUp(self):
        self.model = ring2()
        self.tests = default_core_tests(self.model)
        self.data = exact_ring2_data()

    def test_zero_alpha(self):
        bonus = build_bonus(self.model, self.tests, distill(self.data, self.model, 0.0, 0), 1.0, 0.0)
        self.assertTrue(np.all(bonus.table == 0.0))

    def test_empty_data_uses_ridge(self):
        empty = distill(self.data, self.model, 1.0, 0)
        bonus = build_bonus(self.model, self.tests, empty, 2.0, 0.1)
        self.assertAlmostEqual(bonus.quadratic(0, np.ones(8)), 4.0)

    def test_more_data_shrinks_bonus(self):
        empty = build_bonus(self.model, self.tests, distill(self.data, self.model, 1.0, 0), 1.0, 0.1)
        full = build_bonus(self.model, self.tests, distill(self.data, self.model, 0.0, 0), 1.0, 0.1)
        self.assertTrue(np.all(full.table <= empty.table + 1e-12))
        self.assertTrue(np.all(full.table <= 1.0))

    def test_large_alpha_saturates(self):
        bonus = build_bonus(self.model, self.tests, distill(self.data, self.model, 0.0, 0), 1.0, 1e6)
        self.assertTrue(np.all(bonus.table == 1.0))
        self.assertEqual(bonus.as_reward().horizon, 2)

    def test_invalid_ridge(self):
        with self.assertRaises(ConfigError):
            build_bonus(self.model, self.tests, distill(self.data, self.model, 0.0, 0), 0.0, 1.0)


class TestDefaults(unittest.TestCase):

    def test_behavior_iota(self):
        tests = default_core_tests(ring2())
        self.assertAlmostEqual(behavior_iota(Policy.uniform(2, 2, 2), tests), 0.25)
        self.assertEqual(behavior_iota(Policy.constant(2, 2, 2, 0), tests), 0.0)

    def test_default_params(self):
        data = exact_ring2_data()
        tests = default_core_tests(ring2())
        params = default_learner_params(ring2(), tests, data, 8, LearnerParams(alpha=0.5))
        self.assertEqual(params.alpha, 0.5)
        self.assertEqual(params.ridge, 16.0)
        self.assertAlmostEqual(params.beta, math.log(80.0))
        self.assertAlmostEqual(params.p_min, default_p_min(200, 2, 2, 2, 0.1))
        computed = default_learner_params(ring2(), tests, data, 8)
        self.assertTrue(math.isfinite(computed.alpha) and computed.alpha > 0)

    def test_alpha_undefined(self):
        data = exact_ring2_data(Policy.constant(2, 2, 2, 0))
        with self.assertRaises(AlphaUndefinedError):
            default_learner_params(ring2(), default_core_tests(ring2()), data, 8)

    def test_scaling(self):
        policies = constant_actions(2, 2, 2)
        reward = ring2_reward()
        params = LearnerParams()
        self.assertEqual(learner_scaling(ring2(), policies, reward, UncertaintySpec("T", "tv", 0.0), params), 1.0)
        self.assertEqual(learner_scaling(ring2(), policies, reward, UncertaintySpec("P", "tv", 0.1), params), 1.0)
        self.assertEqual(learner_scaling(ring2(), policies, reward, UncertaintySpec("T", "tv", 0.1),
                                         LearnerParams(c_u=7.0)), 7.0)
        self.assertAlmostEqual(learner_scaling(ring2(), policies, reward, UncertaintySpec("T", "tv", 0.1), params),
                               1.5, places=9)


class TestAlgorithms(unittest.TestCase):

    def setUp(self):
        self.data = exact_ring2_data()
        self.cls = ring2_class()
        self.policies = constant_actions(2, 2, 2)
        self.reward = ring2_reward()
        self.spec = UncertaintySpec("T", "tv", 0.1)

    def test_algorithm1_without_bonus(self):
        result = algorithm1(self.data, self.cls, self.policies, self.reward, self.spec,
                            params=LearnerParams(alpha=0.0))
        self.assertEqual(result.index, 1)
        self.assertEqual(result.theta_hat, 0)
        self.assertEqual(result.dg_size, 200)
        self.assertEqual(result.conf_size, 0)
        self.assertTrue(np.allclose(result.objectives, [0.6, 0.7]))
        self.assertEqual(result.penalties, [0.0, 0.0])

    def test_algorithm1_saturated_bonus(self):
        result = algorithm1(self.data, self.cls, self.policies, self.reward, self.spec,
                            params=LearnerParams(alpha=1e6, c_u=1.0))
        self.assertEqual(result.index, 1)
        self.assertTrue(np.allclose(result.penalties, [1.0, 1.0]))
        self.assertTrue(np.allclose(result.objectives, [-0.4, -0.3]))

    def test_algorithm1_kl(self):
        result = algorithm1(self.data, self.cls, self.policies, self.reward, UncertaintySpec("P", "kl", 0.05),
                            params=LearnerParams(alpha=0.0))
        self.assertEqual(result.index, 1)
        self.assertGreater(result.params["c_u"], 0.0)

    def test_algorithm1_on_samples(self):
        obs, acts = sample_dataset(ring2(), Policy.uniform(2, 2, 2), 500, rng_seed=1)
        data = OfflineDataset(obs, acts, Policy.uniform(2, 2, 2))
        result = algorithm1(data, self.cls, self.policies, self.reward, self.spec,
                            params=LearnerParams(c_u=1.0))
        self.assertIn(result.index, (0, 1))
        self.assertLessEqual(result.dg_size, 500)
        self.assertEqual(set(result.diagnostics()), {
            "selected", "theta_hat", "dg_size", "conf_size", "objectives", "robust_values",
            "penalties", "params"})

    def test_algorithm2_confidence_sizes(self):
        tight = algorithm2(self.data, self.cls, self.policies, self.reward, self.spec, beta=0.0)
        self.assertEqual(tight.index, 1)
        self.assertEqual(tight.conf_size, 1)
        self.assertEqual(tight.dg_size, 200)
        self.assertTrue(np.allclose(tight.objectives, [0.6, 0.7]))

        loose = algorithm2(self.data, self.cls, self.policies, self.reward, self.spec, beta=1e9)
        self.assertEqual(loose.conf_size, 8)
        self.assertEqual(loose.index, 1)
        self.assertTrue(np.allclose(loose.objectives, [0.4, 0.5]))

    def test_empty_policies(self):
        with self.assertRaises(ConfigError):
            algorithm1(self.data, self.cls, [], self.reward, self.spec)
        with self.assertRaises(ConfigError):
            algorithm2(self.data, self.cls, [], self.reward, self.spec)


class TestStatisticalGuarantees(unittest.TestCase):
    """固定种子、缩减次数的蒙特卡洛检查（真值为 ring2，模型类为 8 个扰动成员）"""

    seeds = range(20)

    def setUp(self):
        self.cls = ring2_class()
        self.truth = ring2()
        self.behavior = Policy.uniform(2, 2, 2)
        self.policies = constant_actions(2, 2, 2)
        self.reward = ring2_reward()

    def sample(self, n, seed):
        obs, acts = sample_dataset(self.truth, self.behavior, n, rng_seed=seed)
        return OfflineDataset(obs, acts, self.behavior)

    def test_mle_recovers_truth(self):
        hits = sum(mle_fit(self.sample(2000, s), self.cls) == 0 for s in self.seeds)
        self.assertGreaterEqual(hits, 19)

    def test_distillation_keeps_half(self):
        n = 500
        kept = 0
        for s in self.seeds:
            data = self.sample(n, s)
            model_hat = self.cls[mle_fit(data, self.cls)]
            distilled = distill(data, model_hat, default_p_min(n, 2, 2, 2), rng_seed=s)
            kept += distilled.size >= n / 2
        self.assertGreaterEqual(kept, 19)

    def test_confidence_set_covers_truth(self):
        beta = math.log(len(self.cls) / 0.1)
        covered = sum(0 in confidence_set(self.sample(500, s), self.cls, beta) for s in self.seeds)
        self.assertGreaterEqual(covered, 18)

    def test_mle_hellinger_bound(self):
        n = 2000
        holds = 0
        for s in self.seeds:
            model_hat = self.cls[mle_fit(self.sample(n, s), self.cls)]
            holds += mle_hellinger_check(model_hat, self.truth, self.behavior, n, len(self.cls), 0.1).holds
        self.assertGreaterEqual(holds, 19)

    def test_lower_confidence_bound_is_valid(self):
        for spec in (UncertaintySpec("T", "tv", 0.1), UncertaintySpec("T", "kl", 0.1),
                     UncertaintySpec("P", "tv", 0.1), UncertaintySpec("P", "kl", 0.1)):
            truth_values = [robust_value(self.truth, p, self.reward, spec).value for p in self.policies]
            valid = 0
            for s in range(10):
                result = algorithm1(self.sample(2000, s), self.cls, self.policies, self.reward, spec)
                valid += all(obj <= v + 1e-12 for obj, v in zip(result.objectives, truth_values))
            with self.subTest(spec=spec.label):
                self.assertGreaterEqual(valid, 9)

    def test_algorithms_pick_robust_optimum(self):
        spec = UncertaintySpec("P", "tv", 0.1)
        first = second = 0
        for s in range(10):
            data = self.sample(2000, s)
            first += algorithm1(data, self.cls, self.policies, self.reward, spec).index == 1
            second += algorithm2(data, self.cls, self.policies, self.reward, spec).index == 1
        self.assertGreaterEqual(first, 9)
        self.assertGreaterEqual(second, 9)


if __name__ == '__main__':
    unittest.main()
