import math
import unittest
import warnings

import numpy as np
import pytest

from polyflow.util import GOLDEN_RATIO


class TestStats(unittest.TestCase):
    def _golden(self):
        from polyflow.tracer import Direction
        return Direction.from_slope(GOLDEN_RATIO)

    def test_target_set(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.stats import TargetSet

        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.25)
        self.assertTrue(target.contains(ManifoldPoint(CellId(0, 0), (0.6, 0.6))))
        self.assertFalse(target.contains(ManifoldPoint(CellId(0, 0), (0.9, 0.9))))
        self.assertFalse(target.contains(ManifoldPoint(CellId(1, 0), (0.5, 0.5))))
        self.assertEqual(target.half().radius, 0.125)

        whole = TargetSet.whole()
        self.assertTrue(whole.contains(ManifoldPoint(CellId(3, 0), (0.0, 0.0))))
        self.assertIs(whole.half(), whole)

        with self.assertRaises(ValueError):
            TargetSet(ManifoldPoint(CellId(0, 0), (0.1, 0.5)), 0.25)
        with self.assertRaises(ValueError):
            TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.0)

    def test_hitting_time(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import NotHitByHorizon, StartPathological, TargetSet, hitting_time
        from polyflow.tracer import Direction

        torus = get_fixture("torus2")
        diagonal = Direction.from_slope(1.0)
        start = ManifoldPoint(CellId(0, 0), (0.1, 0.1))
        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.25)
        t = hitting_time(torus, start, diagonal, target, horizon=10.0)
        self.assertTrue(np.isclose(t, 0.4 - 0.25 / math.sqrt(2)))
        self.assertEqual(hitting_time(torus, ManifoldPoint(CellId(0, 0), (0.5, 0.6)), diagonal, target, 10.0), 0.0)

        # the diagonal from (0.1, 0.1) never comes close to (0.5, 0.85)
        away = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.85)), 0.1)
        self.assertEqual(hitting_time(torus, start, diagonal, away, horizon=10.0), NotHitByHorizon(10.0))

        marked = get_fixture("torus2_marked")
        with self.assertRaises(StartPathological) as context:
            hitting_time(marked, start, diagonal, away, horizon=10.0)
        self.assertTrue(np.isclose(float(context.exception.t_hit), 0.9))
        self.assertTrue(context.exception.element.marked)
        # the target is reached before the singular vertex
        self.assertTrue(np.isclose(hitting_time(marked, start, diagonal, target, 10.0), 0.4 - 0.25 / math.sqrt(2)))

    def test_classify_start(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import NonPathological, Pathological, classify_start
        from polyflow.tracer import Direction

        marked = get_fixture("torus2_marked")
        start = ManifoldPoint(CellId(0, 0), (0.1, 0.1))
        verdict = classify_start(marked, start, Direction.from_slope(1.0), horizon=5.0)
        self.assertIsInstance(verdict, Pathological)
        self.assertTrue(np.isclose(float(verdict.t_hit), 0.9))

        verdict = classify_start(marked, start, self._golden(), horizon=5.0)
        self.assertEqual(verdict, NonPathological(5.0))
        with self.assertRaises(ValueError):
            classify_start(marked, start, self._golden(), horizon=0.0)

    def test_classify_start_torus(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import NonPathological, classify_start

        # the tori have no singular set, starts on the lattice included
        torus = get_fixture("torus3")
        for local in ((0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (0.3, 0.4, 0.2)):
            verdict = classify_start(torus, ManifoldPoint(CellId(0, 0, 0), local), self._torus3_direction(), 100.0)
            self.assertEqual(verdict, NonPathological(100.0))

        verdict = classify_start(get_fixture("torus2"), ManifoldPoint(CellId(0, 0), (0.0, 0.0)), self._golden(), 100.0)
        self.assertEqual(verdict, NonPathological(100.0))

    def test_chord_length(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import TargetSet, chord_length
        from polyflow.tracer import Direction, trace

        torus = get_fixture("torus2")
        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.25)
        horizontal = trace(torus, ManifoldPoint(CellId(0, 0), (0.1, 0.5)), Direction.from_slope(0.0), 2.0)
        # the segment passes the centre twice
        self.assertTrue(np.isclose(chord_length(horizontal, target), 1.0))
        self.assertTrue(np.isclose(chord_length(horizontal, TargetSet.whole()), 2.0))

    def test_sample_starts(self):
        from polyflow.sample_data import get_fixture
        from polyflow.stats import sample_starts

        manifold = get_fixture("barrier_manifold")
        starts = sample_starts(manifold, 400, seed=3)
        self.assertEqual(len(starts), 400)
        counts = {cell: 0 for cell in manifold.cells}
        for start in starts:
            counts[start.cell] += 1
            self.assertTrue(all(0 < x < 1 for x in start.local))
        self.assertTrue(all(80 <= count <= 120 for count in counts.values()))

    def test_estimate_t_star(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import HorizonTooSmall, TargetSet, estimate_t_star

        torus = get_fixture("torus2")
        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.2).half()
        report = estimate_t_star(torus, self._golden(), target, n_starts=100, horizon=100.0, n_threads=2)
        self.assertTrue(0 < report.t_star < 100)
        self.assertEqual(report.t_star, max(report.t_star_forward, report.t_star_backward))
        self.assertEqual(report.n_pathological, 0)
        self.assertEqual(report.not_hit_fraction, 0.0)

        table = report.to_dataframe()
        self.assertEqual(len(table), 200)
        self.assertEqual(set(table["sign"]), {1, -1})
        self.assertTrue(np.isclose(table["hitting_time"].max(), report.t_star))

        with self.assertRaises(HorizonTooSmall) as context:
            estimate_t_star(torus, self._golden(), target, n_starts=100, horizon=0.05)
        partial = context.exception.report
        self.assertGreater(partial.not_hit_fraction, 0)
        self.assertTrue(np.isinf(partial.to_dataframe()["hitting_time"]).any())

        with self.assertRaises(ValueError):
            estimate_t_star(torus, self._golden(), target, n_starts=10)

    def test_frequency_bound(self):
        from polyflow.stats import check_frequency_chain, frequency_bound

        self.assertTrue(np.isclose(frequency_bound(0.2, 10.0), 0.0025))
        with self.assertRaises(ValueError):
            frequency_bound(0.2, 0.0)
        self.assertTrue(check_frequency_chain(1.0, 10.0, 0.2, 1.0))
        self.assertFalse(check_frequency_chain(0.5, 10.0, 0.2, 1.0))

    def test_visiting_frequency(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import TargetSet, visiting_frequency

        torus = get_fixture("torus2")
        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.2)
        report = visiting_frequency(torus, self._golden(), target, n_segments=50, n_threads=2)
        self.assertEqual(len(report.samples), 50)
        self.assertTrue(np.isclose(report.t_star_length, report.t_star * self._golden().speed))
        self.assertTrue(np.isclose(report.min_length, 2 * report.t_star_length))
        self.assertTrue(np.isclose(report.bound, 0.2 / (8 * report.t_star_length)))
        self.assertTrue(report.bound_holds)
        self.assertTrue(report.chain_holds)
        self.assertEqual(report.to_dict()["n_segments"], 50)
        self.assertEqual(len(report.to_dataframe()), 50)

        with self.assertRaises(ValueError):
            visiting_frequency(torus, self._golden(), target, t_star=1.0, segment_length=0.5)

    def test_visiting_frequency_mean(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import TargetSet, visiting_frequency

        torus = get_fixture("torus2")
        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.25)
        report = visiting_frequency(torus, self._golden(), target, n_segments=100, n_threads=2)
        self.assertTrue(np.isclose(report.volume_fraction, math.pi / 16))
        self.assertLess(abs(report.mean_ratio - math.pi / 16), 0.05)
        self.assertGreaterEqual(report.mean_ratio, report.frequency)
        self.assertEqual(report.to_dict()["mean_ratio"], report.mean_ratio)

        cases = [
            ("barrier_surface", self._golden(), (0.5, 0.5), math.pi * 0.25 ** 2 / 4),
            ("barrier_manifold", self._torus3_direction(), (0.5, 0.5, 0.5), 4 / 3 * math.pi * 0.25 ** 3 / 4),
        ]
        for name, direction, center, fraction in cases:
            manifold = get_fixture(name)
            target = TargetSet(ManifoldPoint(manifold.cells[0], center), 0.25)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                report = visiting_frequency(manifold, direction, target, t_star=10.0, n_segments=100, n_threads=2)
            self.assertTrue(np.isclose(report.volume_fraction, fraction), name)
            self.assertLess(abs(report.mean_ratio - fraction), 0.05, name)

    def test_visiting_frequency_whole(self):
        from polyflow.sample_data import get_fixture
        from polyflow.stats import TargetSet, visiting_frequency

        report = visiting_frequency(get_fixture("torus3"), self._torus3_direction(), TargetSet.whole(), n_segments=20)
        self.assertEqual(report.bound, 1.0)
        self.assertTrue(np.isclose(report.frequency, 1.0))
        self.assertTrue(report.bound_holds)

    def _torus3_direction(self):
        from polyflow.tracer import Direction
        return Direction.parse("sqrt:2,sqrt:3,1")

    def test_coverage_time(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import coverage_time

        torus = get_fixture("torus2")
        start = ManifoldPoint(CellId(0, 0), (0.1, 0.2))
        report = coverage_time(torus, start, self._golden(), eps=0.25, horizon=1000.0)
        self.assertEqual(report.n_sub, 4)
        self.assertEqual(report.visited.shape, (1, 4, 4))
        self.assertTrue(report.complete)
        self.assertEqual(report.n_visited, 16)
        self.assertEqual(report.visited_count_at(report.t_cover), 16)
        self.assertEqual(report.visited[0, 0, 0], 0.0)
        self.assertEqual(report.to_dict()["status"], "complete")

        short = coverage_time(torus, start, self._golden(), eps=0.25, horizon=0.5)
        self.assertFalse(short.complete)
        self.assertIsNone(short.t_cover)
        self.assertLess(short.n_visited, 16)

        whole = coverage_time(torus, start, self._golden(), eps=1.0, horizon=1.0)
        self.assertEqual(whole.t_cover, 0.0)

        with self.assertRaises(ValueError):
            coverage_time(torus, start, self._golden(), eps=0.0, horizon=1.0)

    def test_coverage_time_pathological(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import StartPathological, coverage_time
        from polyflow.tracer import Direction

        marked = get_fixture("torus2_marked")
        with self.assertRaises(StartPathological):
            coverage_time(marked, ManifoldPoint(CellId(0, 0), (0.1, 0.1)), Direction.from_slope(1.0), 0.25, 10.0)

    @pytest.mark.slow
    def test_coverage_time_3d(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import coverage_time

        manifold = get_fixture("holed_manifold")
        start = ManifoldPoint(CellId(0, 0, 0), (0.3, 0.4, 0.2))
        report = coverage_time(manifold, start, self._torus3_direction(), eps=0.5, horizon=2000.0)
        self.assertEqual(report.visited.shape, (6, 2, 2, 2))
        self.assertTrue(report.complete)

    @pytest.mark.slow
    def test_coverage_time_fixtures(self):
        from polyflow.sample_data import get_fixture
        from polyflow.stats import coverage_time, sample_starts
        from polyflow.tracer import Direction

        for name in ("torus3", "barrier_manifold", "holed_manifold"):
            manifold = get_fixture(name)
            for start in sample_starts(manifold, 10, seed=11):
                report = coverage_time(manifold, start, self._torus3_direction(), eps=0.25, horizon=5000.0)
                self.assertTrue(report.complete, f"{name} from {start}")
                self.assertEqual(report.n_visited, 64 * manifold.s)

            # the vertical flow stays on one lattice line
            vertical = coverage_time(manifold, sample_starts(manifold, 1, seed=11)[0], Direction.parse("0,0,1"),
                                     eps=0.25, horizon=500.0)
            self.assertFalse(vertical.complete)
            self.assertIsNone(vertical.t_cover)

    @pytest.mark.slow
    def test_stabilize_t_star(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.stats import TargetSet, stabilize_t_star

        torus = get_fixture("torus2")
        target = TargetSet(ManifoldPoint(CellId(0, 0), (0.5, 0.5)), 0.1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report, history = stabilize_t_star(torus, self._golden(), target, n_starts=100, max_doublings=3)
        self.assertEqual(history[0][0], 100)
        self.assertEqual(history[-1][1], report.t_star)
        self.assertTrue(all(n2 == 2 * n1 for (n1, _), (n2, _) in zip(history, history[1:])))


if __name__ == "__main__":
    unittest.main()
