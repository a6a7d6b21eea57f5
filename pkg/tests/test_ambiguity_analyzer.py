# -*- coding: utf-8 -*-
"""不确定集：散度、成员判定、单纯形网格与球枚举"""

import math
import unittest

import numpy as np

from src.analyzers.ambiguity_analyzer import (
    Divergence, SetKind, SimplexGrid, UncertaintySpec, ball_rows, compositions, enumerate_ball,
    f_divergence, membership,
)
from src.core.errors import ConfigError, ShapeError, TooLargeError
from src.generators.instance_generator import random_model, ring2, ring2_family


class TestDivergences(unittest.TestCase):

    def test_tv(self):
        self.assertAlmostEqual(f_divergence([0.5, 0.5], [1.0, 0.0], "tv"), 0.5)

    def test_kl(self):
        self.assertEqual(f_divergence([0.5, 0.5], [0.5, 0.5], "kl"), 0.0)
        self.assertAlmostEqual(f_divergence([1.0, 0.0], [0.5, 0.5], "kl"), math.log(2.0))
        self.assertEqual(f_divergence([0.5, 0.5], [1.0, 0.0], "kl"), math.inf)

    def test_length_mismatch(self):
        with self.assertRaises(ShapeError):
            f_divergence([0.5, 0.5], [0.2, 0.3, 0.5], "tv")


class TestUncertaintySpec(unittest.TestCase):

    def test_label_and_parsing(self):
        spec = UncertaintySpec.from_dict({"set": "p", "div": "TV", "xi": 0.2})
        self.assertIs(spec.set_kind, SetKind.P_TYPE)
        self.assertIs(spec.divergence, Divergence.TV)
        self.assertEqual(spec.label, "P-TV")
        self.assertAlmostEqual(spec.lp_budget(0.2), 0.4)

    def test_l1_convention(self):
        spec = UncertaintySpec.from_dict({"set": "P", "div": "tv", "xi": 0.2, "convention": "l1"})
        self.assertAlmostEqual(spec.lp_budget(0.2), 0.2)

    def test_overrides_survive_dict(self):
        doc = {"set": "T", "div": "kl", "xi": 0.1,
               "overrides": [{"h": 1, "index": 1, "xi": 0.0}]}
        spec = UncertaintySpec.from_dict(doc)
        self.assertEqual(UncertaintySpec.from_dict(spec.to_dict()).to_dict(), spec.to_dict())
        self.assertTrue(np.allclose(spec.row_radii(1, 4), [0.1, 0.0, 0.1, 0.1]))

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            UncertaintySpec("T", "tv", -0.1)
        with self.assertRaises(ConfigError):
            UncertaintySpec.from_dict({"set": "X", "div": "tv", "xi": 0.1})
        with self.assertRaises(ConfigError):
            UncertaintySpec.from_dict({"set": "T", "div": "tv"})
        with self.assertRaises(ConfigError):
            UncertaintySpec("P", "tv", 0.1, budget_convention="half")


class TestMembership(unittest.TestCase):

    def test_center_is_member(self):
        center = random_model(3, 2, 2, rng_seed=0)
        for kind in ("T", "P"):
            for div in ("tv", "kl"):
                self.assertTrue(membership(center, center, UncertaintySpec(kind, div, 0.0)))

    def test_t_type_radius(self):
        truth, shifted = ring2_family(2)
        self.assertTrue(membership(shifted, truth, UncertaintySpec("T", "tv", 0.1)))
        self.assertFalse(membership(shifted, truth, UncertaintySpec("T", "tv", 0.05)))

    def test_p_type_radius(self):
        truth, shifted = ring2_family(2)
        self.assertTrue(membership(shifted, truth, UncertaintySpec("P", "tv", 0.1)))
        self.assertFalse(membership(shifted, truth, UncertaintySpec("P", "tv", 0.05)))

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            membership(random_model(3, 2, 2, rng_seed=1), ring2(), UncertaintySpec("T", "tv", 0.1))


class TestSimplexGrid(unittest.TestCase):

    def test_count_and_points(self):
        grid = SimplexGrid(2, 3)
        self.assertEqual(grid.count, 6)
        points = grid.points()
        self.assertEqual(points.shape, (6, 3))
        self.assertTrue(np.allclose(points.sum(axis=1), 1.0))

    def test_compositions_order(self):
        self.assertEqual(list(compositions(2, 2)), [(0, 2), (1, 1), (2, 0)])

    def test_round_largest_remainder(self):
        rounded = SimplexGrid(10, 3).round([0.33, 0.33, 0.34])
        self.assertTrue(np.allclose(rounded, [0.3, 0.3, 0.4]))

    def test_ball_rows(self):
        rows = ball_rows(np.array([0.3, 0.7]), 0.1, "tv", SimplexGrid(10, 2))
        self.assertTrue(np.allclose(sorted(rows[:, 0]), [0.2, 0.3, 0.4]))

    def test_invalid_grid(self):
        with self.assertRaises(ConfigError):
            SimplexGrid(0, 2)


class TestEnumerateBall(unittest.TestCase):

    def test_t_type_product(self):
        center = ring2()
        spec = UncertaintySpec("T", "tv", 0.1)
        models = list(enumerate_ball(center, spec, SimplexGrid(10, 2)))
        self.assertEqual(len(models), 81)
        self.assertTrue(all(membership(m, center, spec) for m in models))

    def test_t_type_override(self):
        spec = UncertaintySpec("T", "tv", 0.1, radius_overrides={(1, 1): 0.0})
        self.assertEqual(len(list(enumerate_ball(ring2(), spec, SimplexGrid(10, 2)))), 27)

    def test_p_type_filtered(self):
        center = ring2()
        spec = UncertaintySpec("P", "tv", 0.1)
        models = list(enumerate_ball(center, spec, SimplexGrid(10, 2)))
        self.assertEqual(len(models), 9)
        self.assertTrue(all(m.check_consistency() for m in models))

    def test_off_grid_center_is_empty(self):
        spec = UncertaintySpec("T", "kl", 0.0)
        self.assertEqual(list(enumerate_ball(ring2(), spec, SimplexGrid(3, 2))), [])
        self.assertEqual(len(list(enumerate_ball(ring2(), spec, SimplexGrid(10, 2)))), 1)

    def test_grid_dimension(self):
        with self.assertRaises(ShapeError):
            enumerate_ball(ring2(), UncertaintySpec("T", "tv", 0.1), SimplexGrid(10, 3))

    def test_p_type_variable_cap(self):
        center = random_model(4, 2, 2, rng_seed=0)
        with self.assertRaises(TooLargeError):
            next(iter(enumerate_ball(center, UncertaintySpec("P", "tv", 0.1), SimplexGrid(4, 2))))


if __name__ == '__main__':
    unittest.main()
