import unittest
from fractions import Fraction

import numpy as np
import pytest


class TestSplitting(unittest.TestCase):
    def _direction(self):
        from polyflow.tracer import Direction
        return Direction.parse("sqrt:2,sqrt:3,1")

    def test_ball(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.splitting import Ball, sample_ball

        ball = Ball(ManifoldPoint(CellId(0, 0, 0), (0.5, 0.5, 0.5)), 0.25)
        samples = sample_ball(ball, 200, seed=1)
        self.assertEqual(samples.shape, (200, 3))
        self.assertTrue((np.linalg.norm(samples - 0.5, axis=1) < 0.25).all())

        with self.assertRaises(ValueError):
            Ball(ManifoldPoint(CellId(0, 0, 0), (0.2, 0.5, 0.5)), 0.25)
        with self.assertRaises(ValueError):
            Ball(ManifoldPoint(CellId(0, 0, 0), (0.5, 0.5, 0.5)), 0.25, colour="red")

    def test_clean_checkpoints(self):
        from polyflow.splitting import clean_checkpoints
        from polyflow.tracer import Direction

        # the ball of radius 1/8 is off every face for |x - 1/2| < 3/8
        checkpoints = clean_checkpoints((0.5, 0.5), Direction.from_slope(0.0), 0.125, 2.0)
        self.assertEqual(checkpoints[0], 0.0)
        self.assertEqual(len(checkpoints), 3)
        self.assertTrue(np.allclose(checkpoints[1:], [0.625, 1.625], atol=0.04))

    def test_evolve_ball(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import Ball, evolve_ball, fragments_to_dataframe

        manifold = get_fixture("barrier_manifold")
        ball = Ball(ManifoldPoint(CellId(0, 0, 0), (0.5, 0.5, 0.5)), 0.125)
        evolution = evolve_ball(manifold, ball, self._direction(), 0.75, n_samples=200, n_threads=2)

        # the barrier splits the ball: samples crossing x before y stay left of it
        self.assertEqual(len(evolution), 2)
        self.assertEqual(evolution.lost, [])
        self.assertEqual({fragment.itinerary[-1] for fragment in evolution}, {CellId(0, 1, 0), CellId(1, 1, 0)})
        self.assertEqual(sum(fragment.n_samples for fragment in evolution), 200)
        for fragment in evolution:
            self.assertEqual(fragment.itinerary[0], CellId(0, 0, 0))
            self.assertEqual(set(fragment.end_cells), {fragment.itinerary[-1]})

        table = fragments_to_dataframe(evolution)
        self.assertEqual(len(table), 200)
        self.assertEqual(set(table["fragment"]), {0, 1})
        self.assertEqual(list(table["sample"]), list(range(200)))

        with self.assertRaises(ValueError):
            evolve_ball(manifold, ball, self._direction(), 0.75, n_samples=50)

    def test_evolve_ball_torus(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import Ball, evolve_ball

        manifold = get_fixture("torus3")
        ball = Ball(ManifoldPoint(CellId(0, 0, 0), (0.5, 0.5, 0.5)), 0.125)
        evolution = evolve_ball(manifold, ball, self._direction(), 3.0, n_samples=100)
        self.assertEqual(len(evolution), 1)
        self.assertEqual(evolution.fragments[0].n_samples, 100)

    def test_cutting_planes(self):
        from polyflow.geometry import CUBE_EDGE, SplittingEdge
        from polyflow.splitting import are_separated, cut_normals, cutting_plane
        from polyflow.tracer import Direction

        direction = Direction.parse("1/2,1/3,1")
        normals = cut_normals(direction)
        self.assertEqual(normals.shape, (3, 3))
        velocity = np.array([0.5, 1 / 3, 1.0])
        self.assertTrue(np.allclose(normals @ velocity, 0.0))
        self.assertTrue(np.allclose(normals[1], np.cross(velocity, [0, 1, 0])))

        zero, one = Fraction(0), Fraction(1)
        edge = SplittingEdge(CUBE_EDGE, "y", ((one, zero, zero), (one, one, zero)))
        normal, offset = cutting_plane(direction, edge)
        self.assertTrue(np.isclose(normal @ np.array([1.0, 0.5, 0.0]), offset))
        self.assertTrue(np.isclose(normal @ (np.array([1.0, 0.0, 0.0]) + velocity), offset))

        left = np.array([[0.5, 0.5, 0.5]]) - normal[None] * 0.1
        right = np.array([[0.5, 0.5, 0.5]]) + normal[None] * 0.1
        self.assertTrue(are_separated(left, right, normal))
        self.assertFalse(are_separated(np.concatenate([left, right]), right, normal))

        with self.assertRaises(ValueError):
            cut_normals(Direction.parse("1/3"))
        parallel = SplittingEdge(CUBE_EDGE, "z", ((zero, zero, zero), (zero, zero, one)))
        with self.assertRaises(ValueError):
            cutting_plane(Direction.parse("0,0,1"), parallel)

    def test_colour_experiment_split(self):
        from polyflow.geometry import CellId
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import colour_experiment

        manifold = get_fixture("barrier_manifold")
        result = colour_experiment(manifold, self._direction(), 0.75, ball_radius=0.25, n_samples=200, n_threads=2)
        self.assertEqual(result.case, "Case1")
        witness = result.witness
        self.assertTrue(0.6 < witness.t < 0.75)
        self.assertEqual(witness.itinerary_length, 2)
        self.assertGreaterEqual(witness.white_fraction, 0.05)
        self.assertGreaterEqual(witness.silver_fraction, 0.05)
        self.assertEqual(result.white_cells, (CellId(0, 0, 0),))
        self.assertEqual(result.to_dict()["case"], "Case1")
        # the witness is one of the cells of the census at its checkpoint
        self.assertEqual(result.colour_census[witness.cell], (witness.white_fraction, witness.silver_fraction))
        for white, silver in result.colour_census.values():
            self.assertTrue(np.isclose(white + silver, 1.0))

    def test_colour_experiment_monochromatic(self):
        from polyflow.geometry import CellId
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import SILVER, WHITE, colour_experiment

        manifold = get_fixture("stacked_torus")
        result = colour_experiment(manifold, self._direction(), 0.75, n_samples=100)
        self.assertEqual(result.case, "Case2")
        self.assertIsNone(result.witness)
        self.assertEqual(result.samples_lost, 0.0)
        # both balls crossed one z face
        self.assertEqual(result.per_cube_colours, {CellId(0, 0, 1): WHITE, CellId(0, 0, 0): SILVER})
        self.assertEqual(result.colour_census, {CellId(0, 0, 1): (1.0, 0.0), CellId(0, 0, 0): (0.0, 1.0)})
        self.assertEqual(result.to_dict()["colour_census"]["(0,0,1)"], {WHITE: 1.0, SILVER: 0.0})

        with self.assertRaises(ValueError):
            colour_experiment(get_fixture("torus3"), self._direction(), 0.75)
        with self.assertRaises(ValueError):
            colour_experiment(manifold, self._direction(), 0.75, white=[(5, 5, 5)])

    def test_estimate_multiplicity(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import Ball, estimate_multiplicity

        ball = Ball(ManifoldPoint(CellId(0, 0, 0), (0.5, 0.5, 0.5)), 0.125)
        report = estimate_multiplicity(get_fixture("torus3"), ball, self._direction(), 2.0, grid_n=4, n_samples=100, dt=0.25)
        self.assertEqual(report.m0, 1)
        self.assertEqual(report.m_hat.shape, (4, 4, 4))
        self.assertGreater(report.counts.sum(), 100 * 8)
        self.assertLessEqual(report.counts.sum(), 100 * 9)
        self.assertLessEqual(report.m_hat.max(), 1)

        # the stacked torus is a double cover of the unit torus
        report = estimate_multiplicity(get_fixture("stacked_torus"), ball, self._direction(), 20.0, grid_n=4, n_samples=100)
        self.assertEqual(report.m0, 2)

        with self.assertRaises(ValueError):
            estimate_multiplicity(get_fixture("torus3"), ball, self._direction(), 2.0, grid_n=2)

    @pytest.mark.slow
    def test_spread_horizon(self):
        from polyflow.geometry import CellId, ManifoldPoint
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import Ball, spread_horizon

        ball = Ball(ManifoldPoint(CellId(0, 0, 0), (0.5, 0.5, 0.5)), 0.125)
        report = spread_horizon(get_fixture("torus3"), ball, self._direction(), grid_n=4, n_samples=100)
        self.assertTrue(report.stabilized)
        self.assertEqual(report.covered[-1], 64)
        self.assertEqual(report.n_grid_cells, 64)

    def test_check_no_return(self):
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import NoReturn, ReturnAt, check_no_return, y_edges
        from polyflow.tracer import Direction

        manifold = get_fixture("torus3")
        edges = y_edges(manifold)
        self.assertEqual(len(edges), 4)

        verdict = check_no_return(manifold, Direction.parse("1/2,1/3,1"), edges[0], 3, n_samples=8)
        self.assertIsInstance(verdict, ReturnAt)
        self.assertEqual(verdict.t, Fraction(2))
        self.assertEqual(verdict.edge.direction, "y")

        verdict = check_no_return(manifold, self._direction(), edges[0], 0.5, n_samples=8)
        self.assertEqual(verdict, NoReturn(0.5, 8))

        with self.assertRaises(ValueError):
            check_no_return(manifold, self._direction(), manifold.cube_edge((0, 0, 0), 0), 1.0)
        with self.assertRaises(ValueError):
            check_no_return(get_fixture("torus2"), self._direction(), edges[0], 1.0)

    def test_check_no_return_across_faces(self):
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import ReturnAt, check_no_return, y_edges
        from polyflow.tracer import Direction

        # an edge at the far corner of the cube, the start point has to cross to the near side first
        manifold = get_fixture("torus3")
        edge = next(edge for edge in y_edges(manifold) if edge.support[0] == (1, 0, 1))
        verdict = check_no_return(manifold, Direction.parse("1/2,1/3,1"), edge, 3, n_samples=4)
        self.assertIsInstance(verdict, ReturnAt)
        self.assertEqual(verdict.t, Fraction(2))
        self.assertEqual(verdict.start.local[0], 0)
        self.assertEqual(verdict.start.local[2], 0)

    def test_check_no_return_lost_samples(self):
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import NoReturn, check_no_return, y_edges
        from polyflow.tracer import Direction

        # from (0, 1/2, 0) the flow meets the end of the barrier at (1, 1, 1/2), a vertical edge
        manifold = get_fixture("barrier_manifold")
        edge = next(edge for edge in y_edges(manifold) if edge.support[0] == (0, 0, 0))
        self.assertTrue(edge.regular)
        with self.assertWarns(UserWarning):
            verdict = check_no_return(manifold, Direction.parse("2,1,1"), edge, Fraction(3, 4), n_samples=1)
        self.assertEqual(verdict, NoReturn(0.75, 1, n_lost=1))
        self.assertEqual(verdict.n_checked, 0)

    def test_edge_start_on_face_edge(self):
        from polyflow.geometry import CellId
        from polyflow.sample_data import get_fixture
        from polyflow.splitting import _edge_start, y_edges
        from polyflow.tracer import Direction

        # the top side of the gate, it runs inside the cells along z
        manifold = get_fixture("gated_pair")
        edge = next(
            edge for edge in y_edges(manifold)
            if edge.kind == "face-edge" and edge.support[0][0] == 1 and edge.support[0][2] == Fraction(1, 2)
        )
        start = _edge_start(manifold, edge, Fraction(1, 2), Direction.parse("2,1,1"))
        self.assertEqual(start.cell, CellId(1, 0, 0))
        self.assertEqual(start.local[0], 0)
        self.assertEqual(start.local[1], Fraction(1, 4))
        self.assertEqual(start.local[2], Fraction(1, 2))

    @pytest.mark.slow
    def test_check_no_return_fixtures(self):
        from polyflow.sample_data import fixture_names, get_fixture
        from polyflow.splitting import NoReturn, check_no_return, y_edges

        for name in fixture_names():
            manifold = get_fixture(name)
            if manifold.dim != 3:
                continue
            for edge in y_edges(manifold):
                verdict = check_no_return(manifold, self._direction(), edge, 1000.0, n_samples=4, n_threads=4)
                self.assertIsInstance(verdict, NoReturn, f"{name} {edge}")
                self.assertEqual(verdict.n_samples, 4)


if __name__ == "__main__":
    unittest.main()
