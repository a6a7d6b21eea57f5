# -*- coding: utf-8 -*-
"""扫参：实验配置、CSV 读写、斜率拟合、执行器与对偶校验"""

import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from config.settings import PROJECT_ROOT
from src.analyzers.ambiguity_analyzer import UncertaintySpec
from src.core.decision_process import Policy, TabularModel, sample_dataset
from src.core.errors import ConfigError, InsufficientPointsError
from src.generators.csv_generator import CSV_COLUMNS, emit_csv, format_csv, read_csv
from src.generators.instance_generator import constant_actions, ring2, ring2_family, ring2_reward
from src.harness.dual_validation import SUITES, validate_duals
from src.harness.experiment_config import (
    ExperimentConfig, ExperimentSetup, SweepRow, build_setup, load_experiment_config,
)
from src.harness.sweep_runner import SweepRunner, fit_slope, median_gaps
from src.learners.offline_learner import LearnerParams, ModelClass, OfflineDataset, algorithm1
from src.utils.common_utils import spawn_seed


def small_config(**changes):
    fields = dict(
        instance={"generator": "ring2"},
        behavior={"generator": "uniform"},
        policies={"generator": "constant_actions"},
        model_class={"generator": "singleton"},
        uncertainty=UncertaintySpec("T", "tv", 0.1),
        n_schedule=(64, 128),
        seeds=2,
        master_seed=7,
        overrides={"alpha": 0.0},
        referee="auto",
    )
    fields.update(changes)
    return ExperimentConfig(**fields)


def _row(n, seed, gap):
    return SweepRow(n=n, seed=seed, gap=gap, dg_size=n, theta_hat=0, conf_size=0, lcb_valid=True)


class TestExperimentConfig(unittest.TestCase):

    def test_invalid_fields(self):
        with self.assertRaises(ConfigError):
            small_config(n_schedule=(128, 64))
        with self.assertRaises(ConfigError):
            small_config(n_schedule=())
        with self.assertRaises(ConfigError):
            small_config(seeds=0)
        with self.assertRaises(ConfigError):
            small_config(algorithm=3)
        with self.assertRaises(ConfigError):
            small_config(overrides={"gamma": 1.0})
        with self.assertRaises(ConfigError):
            small_config(referee="oracle")

    def test_from_dict_errors(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict([])
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"instance": {"generator": "ring2"}})
        with self.assertRaises(ConfigError):
            load_experiment_config(os.path.join(PROJECT_ROOT, "config", "missing.json"))

    def test_shipped_config(self):
        config = load_experiment_config(os.path.join(PROJECT_ROOT, "config", "ring2_sweep.json"))
        self.assertEqual(config.n_schedule, (128, 512, 2048, 8192))
        self.assertEqual(config.seeds, 20)
        self.assertEqual(config.algorithm, 1)
        self.assertEqual(config.resolve_path("x.json"), os.path.join(config.base_dir, "x.json"))

        setup = build_setup(config)
        self.assertEqual(len(setup.policies), 4)
        self.assertEqual(len(setup.model_class), 8)
        self.assertEqual(setup.model_class.nominal, 0)

    def test_learner_params_from_overrides(self):
        params = small_config(overrides={"alpha": 0.5, "lambda": 3.0}).learner_params(split_seed=9)
        self.assertEqual(params.alpha, 0.5)
        self.assertEqual(params.ridge, 3.0)
        self.assertIsNone(params.beta)
        self.assertEqual(params.split_seed, 9)

    def test_unknown_generator(self):
        with self.assertRaises(ConfigError):
            build_setup(small_config(instance={"generator": "ring3"}))
        with self.assertRaises(ConfigError):
            build_setup(small_config(policies={}))


class TestCsv(unittest.TestCase):

    def test_empty_rows_write_header(self):
        self.assertEqual(format_csv([]), ",".join(CSV_COLUMNS) + "\n")

    def test_rows_are_sorted_and_reloaded(self):
        rows = [_row(128, 1, 0.1 + 0.2), _row(64, 1, 0.0), _row(128, 0, 1.0 / 3.0), _row(64, 0, 0.25)]
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_csv(rows, os.path.join(tmp, "sweep.csv"))
            with open(path, encoding="utf-8") as f:
                lines = f.read().split("\n")
            reloaded = read_csv(path)
        self.assertEqual(lines[0], "N,seed,gap,dg_size,theta_hat,conf_size,lcb_valid,ms")
        self.assertTrue(lines[1].startswith("64,0,"))
        self.assertTrue(lines[1].endswith(",1,0"))
        self.assertEqual([(r.n, r.seed) for r in reloaded], [(64, 0), (64, 1), (128, 0), (128, 1)])
        self.assertEqual(reloaded[3].gap, 0.1 + 0.2)
        self.assertEqual(reloaded[2].gap, 1.0 / 3.0)
        self.assertTrue(all(r.lcb_valid for r in reloaded))


class TestSlope(unittest.TestCase):

    def test_inverse_square_root(self):
        rows = [_row(n, s, 3.0 / np.sqrt(n)) for n in (100, 400, 1600, 6400) for s in range(3)]
        slope, _, r2 = fit_slope(rows)
        self.assertAlmostEqual(slope, -0.5, places=9)
        self.assertAlmostEqual(r2, 1.0, places=9)

    def test_constant_gap(self):
        rows = [_row(n, 0, 0.2) for n in (100, 400, 1600)]
        self.assertAlmostEqual(fit_slope(rows)[0], 0.0, places=12)

    def test_median_per_n(self):
        rows = [_row(100, 0, 0.1), _row(100, 1, 0.3), _row(100, 2, 0.2), _row(400, 0, 0.05)]
        self.assertEqual(median_gaps(rows), {100: 0.2, 400: 0.05})

    def test_insufficient_points(self):
        with self.assertRaises(InsufficientPointsError):
            fit_slope([_row(100, 0, 0.1), _row(400, 0, 0.05)])
        with self.assertRaises(InsufficientPointsError):
            fit_slope([_row(100, 0, 0.1), _row(400, 0, 0.05), _row(1600, 0, 0.0)])

    def test_pessimism_width_rate(self):
        """算法 1 所选策略的惩罚项随 N 近似按 N^(-1/2) 收缩"""
        cls = ModelClass(tuple(ring2_family(8)), nominal=0)
        behavior = Policy.uniform(2, 2, 2)
        spec = UncertaintySpec("P", "tv", 0.1)
        rows = []
        for n in (128, 512, 2048, 8192):
            for s in range(3):
                obs, acts = sample_dataset(ring2(), behavior, n, rng_seed=spawn_seed(5, n, s))
                result = algorithm1(OfflineDataset(obs, acts, behavior), cls, constant_actions(2, 2, 2),
                                    ring2_reward(), spec, params=LearnerParams(alpha=1.0, c_u=1.0))
                rows.append(_row(n, s, result.penalties[result.index]))
        slope, _, r2 = fit_slope(rows)
        self.assertGreaterEqual(slope, -0.7)
        self.assertLessEqual(slope, -0.3)
        self.assertGreater(r2, 0.9)


class TestSweepRunner(unittest.TestCase):

    def test_singleton_class_has_zero_gap(self):
        runner = SweepRunner(small_config())
        self.assertEqual(runner.referee_values, runner.truth_values)
        self.assertTrue(np.allclose(runner.truth_values, [0.6, 0.7]))

        result = runner.run(workers=1, progress=False)
        self.assertTrue(result.ok)
        self.assertEqual([(r.n, r.seed) for r in result.rows], [(64, 0), (64, 1), (128, 0), (128, 1)])
        for row in result.rows:
            self.assertEqual(row.gap, 0.0)
            self.assertTrue(row.lcb_valid)
            self.assertEqual(row.theta_hat, 0)
            self.assertEqual(row.conf_size, 0)
            self.assertEqual(row.ms, 0.0)
            self.assertLessEqual(row.dg_size, row.n)

    def test_rows_do_not_depend_on_workers(self):
        config = small_config()
        serial = SweepRunner(config).run(workers=1, progress=False)
        again = SweepRunner(config).run(workers=1, progress=False)
        parallel = SweepRunner(config).run(workers=2, progress=False)
        self.assertEqual(format_csv(serial.rows), format_csv(again.rows))
        self.assertEqual(format_csv(serial.rows), format_csv(parallel.rows))

    def test_algorithm2_with_loose_confidence_set(self):
        config = small_config(algorithm=2, overrides={"beta": 1e9},
                              model_class={"generator": "ring2_family", "size": 8}, seeds=1)
        result = SweepRunner(config).run(workers=1, progress=False)
        self.assertTrue(result.ok)
        for row in result.rows:
            self.assertEqual(row.conf_size, 8)
            self.assertEqual(row.dg_size, row.n)
            self.assertEqual(row.gap, 0.0)
            self.assertTrue(row.lcb_valid)

    def test_failed_rows_become_records(self):
        never_one = TabularModel(2, 2, 2, 0, (np.tile([1.0, 0.0], (2, 2, 1)),))
        setup = ExperimentSetup(ring2(), ring2_reward(), Policy.uniform(2, 2, 2),
                                constant_actions(2, 2, 2), ModelClass((never_one,)))
        result = SweepRunner(small_config(), setup).run(workers=1, progress=False)
        self.assertFalse(result.ok)
        self.assertEqual(result.rows, [])
        self.assertEqual(len(result.errors), 4)
        self.assertEqual({e["kind"] for e in result.errors}, {"class-incompatible"})
        self.assertEqual((result.errors[0]["N"], result.errors[0]["seed"]), (64, 0))

    def test_internal_errors_do_not_stop_sweep(self):
        def singular_on_large_n(data, *args, **kwargs):
            if data.size == 128:
                raise np.linalg.LinAlgError("Singular matrix")
            return algorithm1(data, *args, **kwargs)

        with mock.patch("src.harness.sweep_runner.algorithm1", side_effect=singular_on_large_n):
            with self.assertLogs("src.harness.sweep_runner", level="ERROR") as logs:
                result = SweepRunner(small_config()).run(workers=1, progress=False)
        self.assertFalse(result.ok)
        self.assertEqual([(r.n, r.seed) for r in result.rows], [(64, 0), (64, 1)])
        self.assertEqual([(e["N"], e["seed"]) for e in result.errors], [(128, 0), (128, 1)])
        self.assertEqual({e["kind"] for e in result.errors}, {"internal"})
        self.assertTrue(all(e["message"].startswith("LinAlgError") for e in result.errors))
        self.assertTrue(any("Traceback" in line for line in logs.output))


class TestDualValidation(unittest.TestCase):

    def test_small_run(self):
        counts = {"scalar-tv": 5, "scalar-kl": 0, "p-tv-duality": 0, "p-kl-grid": 0, "bellman-brute": 0}
        results = validate_duals(counts, seed=1)
        self.assertEqual([r["suite"] for r in results], ["scalar-tv"])
        self.assertEqual(results[0]["cases"], 5)
        self.assertLessEqual(results[0]["max_error"], 2.0 * results[0]["tolerance"])
        self.assertEqual(set(results[0]), {"suite", "cases", "failures", "max_error", "tolerance", "seconds"})

    def test_p_tv_duality_includes_depth_three(self):
        counts = dict.fromkeys(SUITES, 0)
        counts["p-tv-duality"] = 6
        results = validate_duals(counts, seed=3)
        self.assertEqual([r["suite"] for r in results], ["p-tv-duality"])
        self.assertEqual(results[0]["failures"], 0)
        self.assertLessEqual(results[0]["max_error"], results[0]["tolerance"])

    def test_unknown_suite(self):
        with self.assertRaises(ValueError):
            validate_duals({"p-chi2": 1})


if __name__ == '__main__':
    unittest.main()
