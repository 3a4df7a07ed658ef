import os
import unittest
from fractions import Fraction

import numpy as np


class TestUtil(unittest.TestCase):
    def test_as_fraction(self):
        from polyflow.util import as_fraction

        self.assertEqual(as_fraction("1/3"), Fraction(1, 3))
        self.assertEqual(as_fraction("0.25"), Fraction(1, 4))
        self.assertEqual(as_fraction(0.1), Fraction(1, 10))
        self.assertEqual(as_fraction(3), Fraction(3))
        for invalid in ("one", True, float("inf"), None):
            with self.assertRaises(ValueError):
                as_fraction(invalid)

    def test_primitive_integers(self):
        from polyflow.util import primitive_integers

        self.assertEqual(primitive_integers([Fraction(1, 2), Fraction(-1, 3), 0]), (3, -2, 0))
        self.assertEqual(primitive_integers([Fraction(-2), Fraction(4)]), (1, -2))
        self.assertEqual(primitive_integers([0, 0]), (0, 0))

    def test_get_n_threads(self):
        from polyflow.util import get_n_threads

        self.assertEqual(get_n_threads(3), 3)
        with self.assertRaises(ValueError):
            get_n_threads(0)

        old_value = os.environ.get("POLYFLOW_THREADS")
        os.environ["POLYFLOW_THREADS"] = "2"
        try:
            self.assertEqual(get_n_threads(), 2)
        finally:
            if old_value is None:
                os.environ.pop("POLYFLOW_THREADS")
            else:
                os.environ["POLYFLOW_THREADS"] = old_value

    def test_parallel_map(self):
        from polyflow.util import parallel_map

        items = list(range(17))
        expected = [item ** 2 for item in items]
        self.assertEqual(parallel_map(lambda x: x ** 2, items, n_threads=1), expected)
        self.assertEqual(parallel_map(lambda x: x ** 2, items, n_threads=4), expected)

    def test_low_discrepancy_points(self):
        from polyflow.util import low_discrepancy_points

        points = low_discrepancy_points(256, 3, seed=1)
        self.assertEqual(points.shape, (256, 3))
        self.assertTrue(((points > 0) & (points < 1)).all())
        # reproducible for a fixed seed, different for another one
        self.assertTrue(np.array_equal(points, low_discrepancy_points(256, 3, seed=1)))
        self.assertFalse(np.allclose(points, low_discrepancy_points(256, 3, seed=2)))
        # roughly uniform
        self.assertTrue(np.allclose(points.mean(axis=0), 0.5, atol=0.02))

    def test_points_in_ball(self):
        from polyflow.util import points_in_ball

        for dim in (2, 3):
            points = points_in_ball(500, dim, seed=0)
            self.assertEqual(points.shape, (500, dim))
            self.assertTrue((np.linalg.norm(points, axis=1) < 1).all())
            self.assertTrue(np.allclose(points.mean(axis=0), 0.0, atol=0.05))
        with self.assertRaises(ValueError):
            points_in_ball(10, 4)

    def test_golden_sequence(self):
        from polyflow.util import GOLDEN_RATIO, golden_sequence

        values = golden_sequence(5)
        self.assertTrue(np.isclose(values[0], GOLDEN_RATIO))
        self.assertTrue(((values >= 0) & (values < 1)).all())
        self.assertEqual(len(np.unique(values)), 5)


if __name__ == "__main__":
    unittest.main()
