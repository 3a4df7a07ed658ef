"""
Ball spreading and colour splitting experiments.

A ball inside one atomic cube is represented by a deterministic cloud of sample points. All samples
are flowed with the same direction. Whenever the flowed ball lies inside a single cell again
(its projected centre is further than the radius from every face), each sample is in one cell,
and samples that went through different identifications end up in different cells. The sequence
of these cells is the itinerary of a sample; samples with equal itineraries form a fragment.
"""

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from tqdm import tqdm

from .geometry import AXES, CellId, FaceRef, Manifold, ManifoldPoint, SplittingEdge, _tangential_axes
from .tracer import SINGULAR_HIT, Direction, iter_segments
from .util import (
    DEFAULT_TOLERANCE, golden_sequence, is_exact, parallel_map, points_in_ball
)

WHITE = "white"
SILVER = "silver"
UNCOLOURED = "uncoloured"
_LOST = "lost"

#: Both colours must reach this fraction of a fragment for a colour split.
MIXED_THRESHOLD = 0.05

#: Experiments with a larger fraction of samples lost to singular hits are inconclusive.
LOSS_THRESHOLD = 0.01

#: The default radius of the balls.
DEFAULT_RADIUS = 0.25


@dataclass(frozen=True)
class Ball:
    """An open ball inside a single atomic cube.

    Attributes:
        center: The centre.
        radius: The radius; the centre must be further than the radius from every face of its cell.
        colour: One of 'white', 'silver' or 'uncoloured'.
    """
    center: ManifoldPoint
    radius: float
    colour: str = UNCOLOURED

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"The radius must be positive, got {self.radius}.")
        if self.colour not in (WHITE, SILVER, UNCOLOURED):
            raise ValueError(f"Invalid colour {self.colour}.")
        distance = min(min(float(x), 1 - float(x)) for x in self.center.local)
        if distance <= self.radius:
            raise ValueError(
                f"The ball with centre {self.center.local} and radius {self.radius} is not contained in its cell."
            )


@dataclass
class BallFragment:
    """The samples of one ball that share an itinerary.

    Attributes:
        parent: The ball.
        itinerary: The cells occupied at the checkpoint times.
        sample_indices: The indices of the member samples.
        samples: The start points (local coordinates) of the member samples.
        end_cells: The cell of each member sample at the end of the flow.
    """
    parent: Ball
    itinerary: Tuple[CellId, ...]
    sample_indices: np.ndarray
    samples: np.ndarray
    end_cells: List[CellId] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.sample_indices)


@dataclass
class BallEvolution:
    """The fragments of a flowed ball and the samples lost to singular hits."""
    ball: Ball
    direction: Direction
    t_max: float
    checkpoints: np.ndarray
    fragments: List[BallFragment]
    lost: List[Tuple[int, float]]
    n_samples: int

    def __iter__(self):
        return iter(self.fragments)

    def __len__(self):
        return len(self.fragments)


#
# Sampling and checkpoints
#


def sample_ball(ball: Ball, n_samples: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy samples inside a ball, in local coordinates of its cell."""
    center = np.array([float(x) for x in ball.center.local])
    offsets = points_in_ball(n_samples, len(center), seed=seed)
    return center[None] + ball.radius * offsets


def clean_checkpoints(center_local: Sequence[Any], direction: Direction, radius: float, t_max: float) -> np.ndarray:
    """The first time of each interval in which the flowed ball lies inside a single cell.

    Args:
        center_local: The local coordinates of the ball centre.
        direction: The direction.
        radius: The radius of the ball.
        t_max: The flow time.

    Returns:
        The checkpoint times.
    """
    velocity = np.array([float(val) for val in direction.components])
    center = np.array([float(val) for val in center_local])
    step = radius / (4 * np.abs(velocity).max())
    times = np.arange(0.0, float(t_max) + 0.5 * step, step)
    times = times[times <= float(t_max)]
    positions = np.mod(center[None] + times[:, None] * velocity[None], 1.0)
    distances = np.minimum(positions, 1.0 - positions).min(axis=1)
    clean = distances > radius
    starts = clean & np.concatenate([[True], ~clean[:-1]])
    return times[starts]


def _positions_at(manifold, start, direction, times, tolerance):
    """Cells and local coordinates of a geodesic at increasing times, until it hits the singular set."""
    cells, locals_ = [], []
    velocity = direction.components
    index = 0
    t_stop = times[-1] if len(times) else 0.0
    for segment, event in iter_segments(manifold, start, direction, t_stop, check_start=False, tolerance=tolerance):
        while index < len(times) and times[index] <= segment.t_exit:
            if event is not None and event.kind == SINGULAR_HIT and times[index] >= segment.t_exit:
                break
            dt = times[index] - float(segment.t_enter)
            cells.append(segment.cell)
            locals_.append(tuple(float(x) + dt * float(v) for x, v in zip(segment.entry, velocity)))
            index += 1
        if event is not None and event.kind == SINGULAR_HIT:
            return cells, locals_, float(event.time)
    return cells, locals_, None


def _flow_samples(manifold, cell, samples, direction, times, tolerance, n_threads, verbose, desc):
    def flow_one(index):
        start = ManifoldPoint(cell, tuple(float(x) for x in samples[index]))
        return _positions_at(manifold, start, direction, times, tolerance)

    return parallel_map(flow_one, list(range(len(samples))), n_threads=n_threads, verbose=verbose, desc=desc)


#
# Functionality for evolving balls
#


def evolve_ball(
    manifold: Manifold,
    ball: Ball,
    direction: Direction,
    t_max: float,
    n_samples: int = 1000,
    seed: int = 0,
    n_threads: Optional[int] = None,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> BallEvolution:
    """Flow a ball and split its samples into fragments by itinerary.

    Args:
        manifold: The manifold.
        ball: The ball.
        direction: The direction.
        t_max: The flow time.
        n_samples: The number of samples, at least 100.
        seed: The seed of the low-discrepancy samples.
        n_threads: The number of threads.
        verbose: Whether to show progress.
        tolerance: The geometric tolerance.

    Returns:
        The evolution, with the fragments and the samples lost to singular hits.
    """
    if n_samples < 100:
        raise ValueError(f"At least 100 samples are needed, got {n_samples}.")
    if t_max < 0:
        raise ValueError(f"t_max must be non-negative, got {t_max}.")
    direction = direction.as_float()
    samples = sample_ball(ball, n_samples, seed=seed)
    checkpoints = clean_checkpoints(ball.center.local, direction, ball.radius, t_max)
    times = np.concatenate([checkpoints, [float(t_max)]])
    results = _flow_samples(
        manifold, ball.center.cell, samples, direction, times, tolerance, n_threads, verbose, "Evolve ball"
    )

    groups, lost = {}, []
    for index, (cells, _, hit_time) in enumerate(results):
        if hit_time is not None:
            lost.append((index, hit_time))
            continue
        itinerary = tuple(cells[:len(checkpoints)])
        groups.setdefault(itinerary, []).append(index)

    fragments = []
    for itinerary in sorted(groups):
        indices = np.array(groups[itinerary])
        fragments.append(BallFragment(
            parent=ball, itinerary=itinerary, sample_indices=indices, samples=samples[indices],
            end_cells=[results[i][0][-1] for i in indices],
        ))
    if lost:
        warnings.warn(f"{len(lost)} / {n_samples} samples hit the singular set before t={t_max}.")
    return BallEvolution(ball, direction, float(t_max), checkpoints, fragments, lost, n_samples)


def fragments_to_dataframe(evolution: BallEvolution) -> pd.DataFrame:
    """Tabulate the fragment membership of every sample; lost samples have fragment -1."""
    dim = evolution.ball.center.dim
    columns = ["sample", "fragment", "colour"] + [f"x{d}" for d in range(dim)] + ["hit_time"]
    rows = []
    for fragment_id, fragment in enumerate(evolution.fragments):
        for index, sample in zip(fragment.sample_indices, fragment.samples):
            rows.append([int(index), fragment_id, fragment.parent.colour] + [float(x) for x in sample] + [np.nan])
    samples = sample_ball(evolution.ball, evolution.n_samples)
    for index, hit_time in evolution.lost:
        rows.append([index, -1, evolution.ball.colour] + [float(x) for x in samples[index]] + [hit_time])
    frame = pd.DataFrame(rows, columns=columns)
    return frame.sort_values("sample").reset_index(drop=True)


#
# Cutting planes
#


def cut_normals(direction: Direction) -> np.ndarray:
    """The normals v x e_x, v x e_y and v x e_z of the planes cut by x-, y- and z-direction edges."""
    velocity = np.array([float(val) for val in direction.components])
    if len(velocity) != 3:
        raise ValueError("Cutting planes are defined for 3-manifolds.")
    return np.stack([np.cross(velocity, axis) for axis in np.eye(3)])


def cutting_plane(direction: Direction, edge: SplittingEdge) -> Tuple[np.ndarray, float]:
    """The plane containing the direction and a splitting edge, as normal n and offset d of n . x = d."""
    velocity = np.array([float(val) for val in direction.components])
    start, stop = (np.array([float(val) for val in point]) for point in edge.support)
    normal = np.cross(velocity, stop - start)
    if np.allclose(normal, 0):
        raise ValueError(f"The direction {direction} is parallel to the edge {edge}.")
    return normal, float(normal @ start)


def are_separated(samples_a: np.ndarray, samples_b: np.ndarray, normal: np.ndarray) -> bool:
    """Check whether two sample clouds lie on opposite sides of a plane with the given normal."""
    proj_a, proj_b = samples_a @ normal, samples_b @ normal
    return bool(proj_a.max() < proj_b.min() or proj_b.max() < proj_a.min())


#
# Functionality for the colour experiment
#


@dataclass
class ColourSplitWitness:
    t: float
    cell: CellId
    itinerary_length: int
    white_fraction: float
    silver_fraction: float
    n_samples: int


@dataclass
class ColourExperimentResult:
    """The outcome of a colour experiment.

    Attributes:
        case: 'Case1' if a colour split ball was found, 'Case2' if all balls stayed monochromatic
            and 'Inconclusive' if too many samples were lost to singular hits.
        witness: The earliest colour split ball, for 'Case1'.
        per_cube_colours: The colour of each cube at the last checkpoint, for 'Case2'.
        samples_lost: The fraction of samples lost to singular hits.
        n_samples: The total number of samples.
        horizon: The flow time.
        checkpoints: The checkpoint times.
        white_cells: The cells whose balls were coloured white.
        colour_census: The white and silver fractions of the samples in each cell at the checkpoint
            that decided the case: the witness checkpoint for 'Case1' and the end of the flow for 'Case2'.
    """
    case: str
    witness: Optional[ColourSplitWitness]
    per_cube_colours: Dict[CellId, str]
    samples_lost: float
    n_samples: int
    horizon: float
    checkpoints: np.ndarray
    white_cells: Tuple[CellId, ...]
    colour_census: Dict[CellId, Tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        witness = None
        if self.witness is not None:
            witness = {
                "t": self.witness.t, "cell": list(self.witness.cell),
                "itinerary_length": self.witness.itinerary_length,
                "white_fraction": self.witness.white_fraction, "silver_fraction": self.witness.silver_fraction,
                "n_samples": self.witness.n_samples,
            }
        return {
            "case": self.case,
            "witness": witness,
            "per_cube_colours": {str(cell): colour for cell, colour in sorted(self.per_cube_colours.items())},
            "samples_lost": self.samples_lost,
            "n_samples": self.n_samples,
            "horizon": self.horizon,
            "checkpoints": [float(t) for t in self.checkpoints],
            "white_cells": [list(cell) for cell in self.white_cells],
            "colour_census": {
                str(cell): {WHITE: white, SILVER: silver} for cell, (white, silver) in sorted(self.colour_census.items())
            },
        }


def colour_experiment(
    manifold: Manifold,
    direction: Direction,
    t_max: float,
    ball_radius: float = DEFAULT_RADIUS,
    n_samples: int = 1000,
    white: Optional[Iterable[CellId]] = None,
    local_position: Optional[Sequence[Any]] = None,
    seed: int = 0,
    n_threads: Optional[int] = None,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> ColourExperimentResult:
    """Run the colour splitting experiment.

    One ball is placed in every cube at the same local position. The balls of the cubes in `white`
    are white, the others silver. The balls are flowed with half of the radius; at every checkpoint
    the samples of all balls are grouped by the cell they are in, and a group in which both colours
    reach `MIXED_THRESHOLD` is a colour split ball.

    Args:
        manifold: The manifold, with at least two cells.
        direction: The direction.
        t_max: The flow time.
        ball_radius: The radius r of the balls; the balls are flowed with radius r / 2.
        n_samples: The number of samples per ball.
        white: The cells with white balls. By default the first cell.
        local_position: The common local position of the ball centres, by default the cube centre.
        seed: The seed of the samples.
        n_threads: The number of threads.
        verbose: Whether to show progress.
        tolerance: The geometric tolerance.

    Returns:
        The result.
    """
    if manifold.s < 2:
        raise ValueError("The colour experiment needs a manifold with at least two cells.")
    if n_samples < 100:
        raise ValueError(f"At least 100 samples per ball are needed, got {n_samples}.")
    direction = direction.as_float()
    white_cells = tuple(sorted(white)) if white is not None else (manifold.cells[0],)
    white_cells = tuple(CellId(*cell) for cell in white_cells)
    for cell in white_cells:
        if not manifold.has_cell(cell):
            raise ValueError(f"The white cell {cell} is not a cell of {manifold.name}.")
    if local_position is None:
        local_position = (0.5,) * manifold.dim

    # the coverage radius r is checked, the balls are flowed with r / 2
    for cell in manifold.cells:
        Ball(ManifoldPoint(cell, tuple(local_position)), ball_radius)
    radius = ball_radius / 2
    balls = [
        Ball(ManifoldPoint(cell, tuple(local_position)), radius, WHITE if cell in white_cells else SILVER)
        for cell in manifold.cells
    ]

    checkpoints = clean_checkpoints(local_position, direction, radius, t_max)
    times = np.concatenate([checkpoints, [float(t_max)]])
    flowed = []
    for ball in tqdm(balls, disable=not verbose, desc="Colour experiment"):
        samples = sample_ball(ball, n_samples, seed=seed)
        flowed.append(_flow_samples(
            manifold, ball.center.cell, samples, direction, times, tolerance, n_threads, False, None
        ))

    total = n_samples * len(balls)
    n_lost = sum(1 for results in flowed for _, _, hit_time in results if hit_time is not None)
    lost_fraction = n_lost / total

    def census(k, t_k):
        counts = {}
        for ball, results in zip(balls, flowed):
            for cells, _, hit_time in results:
                if hit_time is not None and hit_time <= t_k:
                    continue
                if k >= len(cells):
                    continue
                entry = counts.setdefault(cells[k], [0, 0])
                entry[0 if ball.colour == WHITE else 1] += 1
        return counts

    def fractions(counts):
        return {cell: (n_white / (n_white + n_silver), n_silver / (n_white + n_silver))
                for cell, (n_white, n_silver) in counts.items()}

    for k, t_k in enumerate(checkpoints):
        counts = census(k, t_k)
        for cell in sorted(counts):
            n_white, n_silver = counts[cell]
            n = n_white + n_silver
            if n_white / n >= MIXED_THRESHOLD and n_silver / n >= MIXED_THRESHOLD:
                witness = ColourSplitWitness(float(t_k), cell, k + 1, n_white / n, n_silver / n, n)
                return ColourExperimentResult(
                    "Case1", witness, {}, lost_fraction, total, float(t_max), checkpoints, white_cells,
                    fractions(counts),
                )

    if lost_fraction > LOSS_THRESHOLD:
        warnings.warn(f"{n_lost} / {total} samples hit the singular set, the colour experiment is inconclusive.")
        return ColourExperimentResult(
            "Inconclusive", None, {}, lost_fraction, total, float(t_max), checkpoints, white_cells
        )

    per_cube = {cell: UNCOLOURED for cell in manifold.cells}
    final = len(times) - 1
    counts = census(final, float(t_max))
    for cell, (n_white, n_silver) in counts.items():
        per_cube[cell] = WHITE if n_white >= n_silver else SILVER
    return ColourExperimentResult(
        "Case2", None, per_cube, lost_fraction, total, float(t_max), checkpoints, white_cells, fractions(counts)
    )


#
# Functionality for the multiplicity function
#


@dataclass
class MultiplicityReport:
    """The estimated multiplicity function on a torus grid.

    Attributes:
        grid_n: The grid resolution per axis.
        m_hat: The number of distinct cells seen in each torus grid cell.
        counts: The number of recorded positions in each torus grid cell.
        m0: The modal value of m_hat over grid cells with at least `min_count` positions.
        n_samples: The number of samples.
        t_max: The flow time.
        min_count: The minimal number of positions for a grid cell to count towards m0.
    """
    grid_n: int
    m_hat: np.ndarray
    counts: np.ndarray
    m0: int
    n_samples: int
    t_max: float
    min_count: int = 10


def _record_positions(manifold, ball, direction, t_max, n_samples, dt, seed, n_threads, verbose, tolerance):
    samples = sample_ball(ball, n_samples, seed=seed)
    n_steps = int(np.floor(float(t_max) / dt + 1e-9))
    times = np.arange(n_steps + 1) * dt
    return _flow_samples(
        manifold, ball.center.cell, samples, direction, times, tolerance, n_threads, verbose, "Record positions"
    )


def estimate_multiplicity(
    manifold: Manifold,
    ball: Ball,
    direction: Direction,
    t_max: float,
    grid_n: int = 8,
    n_samples: int = 200,
    dt: Optional[float] = None,
    seed: int = 0,
    min_count: int = 10,
    n_threads: Optional[int] = None,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> MultiplicityReport:
    """Estimate the multiplicity function of the flowed ball.

    The positions of the flowed samples are recorded every `dt`; m_hat of a torus grid cell is the
    number of distinct cells of the manifold whose recorded positions project into it.

    Args:
        manifold: The manifold.
        ball: The ball.
        direction: The direction.
        t_max: The flow time.
        grid_n: The grid resolution per axis, at least 4.
        n_samples: The number of samples.
        dt: The recording interval, by default half of a grid cell per flow time unit.
        seed: The seed of the samples.
        min_count: The minimal number of positions in a grid cell to count towards m0.
        n_threads: The number of threads.
        verbose: Whether to show progress.
        tolerance: The geometric tolerance.

    Returns:
        The report.
    """
    if grid_n < 4:
        raise ValueError(f"The grid resolution must be at least 4, got {grid_n}.")
    direction = direction.as_float()
    if dt is None:
        dt = 0.5 / (grid_n * max(abs(val) for val in direction.components))
    dim = manifold.dim
    cell_index = {cell: i for i, cell in enumerate(manifold.cells)}
    shape = (grid_n,) * dim
    presence = np.zeros((grid_n ** dim, manifold.s), dtype=bool)
    counts = np.zeros(grid_n ** dim, dtype="int64")

    results = _record_positions(manifold, ball, direction, t_max, n_samples, dt, seed, n_threads, verbose, tolerance)
    for cells, locals_, _ in results:
        if not cells:
            continue
        coords = np.clip((np.mod(np.array(locals_), 1.0) * grid_n).astype("int64"), 0, grid_n - 1)
        flat = np.ravel_multi_index(tuple(coords.T), shape)
        cell_ids = np.array([cell_index[cell] for cell in cells])
        presence[flat, cell_ids] = True
        np.add.at(counts, flat, 1)

    m_hat = presence.sum(axis=1)
    valid = counts >= min_count
    if valid.any():
        values, occurrences = np.unique(m_hat[valid], return_counts=True)
        m0 = int(values[np.argmax(occurrences)])
    else:
        m0 = 0
    return MultiplicityReport(
        grid_n=grid_n, m_hat=m_hat.reshape(shape), counts=counts.reshape(shape), m0=m0,
        n_samples=n_samples, t_max=float(t_max), min_count=min_count,
    )


@dataclass
class SpreadReport:
    """The horizon after which the flowed ball covers the whole torus grid.

    Attributes:
        horizon: The last horizon that was tried.
        covered: The number of covered grid cells at each tried horizon.
        n_grid_cells: The total number of grid cells.
        stabilized: Whether full coverage was reached and stayed unchanged over two doublings.
    """
    horizon: float
    covered: List[int]
    n_grid_cells: int
    stabilized: bool


def spread_horizon(
    manifold: Manifold,
    ball: Ball,
    direction: Direction,
    grid_n: int = 8,
    t_start: float = 1.0,
    max_doublings: int = 10,
    n_samples: int = 200,
    seed: int = 0,
    n_threads: Optional[int] = None,
    verbose: bool = False,
) -> SpreadReport:
    """Double the flow time until the projected ball covers every cell of the torus grid.

    The horizon is accepted when the coverage is complete and unchanged over two doublings.
    """
    covered = []
    horizon = float(t_start)
    n_grid_cells = grid_n ** manifold.dim
    for _ in tqdm(range(max_doublings), disable=not verbose, desc="Spread horizon"):
        report = estimate_multiplicity(
            manifold, ball, direction, horizon, grid_n=grid_n, n_samples=n_samples, seed=seed,
            min_count=1, n_threads=n_threads,
        )
        covered.append(int((report.counts > 0).sum()))
        if len(covered) >= 3 and covered[-1] == covered[-2] == covered[-3] == n_grid_cells:
            return SpreadReport(horizon, covered, n_grid_cells, True)
        horizon *= 2
    warnings.warn(f"The spread horizon did not stabilize after {max_doublings} doublings.")
    return SpreadReport(horizon / 2, covered, n_grid_cells, False)


#
# Functionality for the no-return check
#


@dataclass(frozen=True)
class NoReturn:
    """No sampled geodesic from the edge meets a y-direction edge up to t_max.

    Attributes:
        t_max: The flow time.
        n_samples: The number of sampled points on the edge.
        n_lost: The samples whose geodesic hit another part of the singular set first and were not followed further.
    """
    t_max: float
    n_samples: int
    n_lost: int = 0

    @property
    def n_checked(self) -> int:
        """The samples that were followed up to t_max."""
        return self.n_samples - self.n_lost


@dataclass(frozen=True)
class ReturnAt:
    """A geodesic from the edge that meets a y-direction splitting edge again."""
    t: Any
    edge: SplittingEdge
    start: ManifoldPoint


def _edge_start(manifold, edge, s, direction):
    """The start point on an edge, in the cell that the flow leaves the edge into."""
    start, stop = edge.support
    ambient = [a + s * (b - a) for a, b in zip(start, stop)]
    along = "xyz".index(edge.direction)
    v = direction.components
    # a face edge lies inside the cells on its off-lattice axis
    across = [a for a in range(3) if a != along and start[a] == math.floor(start[a])]
    desired = {a: 0 if v[a] > 0 else 1 for a in across}
    lattice = [math.floor(ambient[a]) for a in range(3)]
    lattice[along] = math.floor(start[along])

    containing = []
    for offsets in itertools.product((0, -1), repeat=len(across)):
        index = list(lattice)
        for a, offset in zip(across, offsets):
            index[a] += offset
        cell = CellId(*index)
        if manifold.has_cell(cell):
            containing.append(cell)
    if not containing:
        raise ValueError(f"The edge {edge} does not lie on any cell of {manifold.name}.")

    def local_in(cell):
        return [type(s)(ambient[a] - cell[a]) for a in range(3)]

    for cell in containing:
        local = local_in(cell)
        if all(local[a] == desired[a] for a in across):
            return ManifoldPoint(cell, tuple(local))

    # cross the faces that separate a containing cell from the sector of the flow
    cell = containing[0]
    local = local_in(cell)
    for a in across:
        if local[a] == desired[a]:
            continue
        face = FaceRef(cell, AXES[a], "+" if local[a] == 1 else "-")
        # the other coordinate is on a face of the cell as well, look up the portal just inside of it
        tangent = _tangential_axes(a, 3)
        nudged = tuple(
            float(local[b]) if b == along else float(local[b]) + (1e-7 if local[b] == 0 else -1e-7) for b in tangent
        )
        portal = next(p for p in manifold.portals(face) if p.contains(nudged))
        cell = portal.target.cell
        local[a] = type(s)(portal.target.normal_coordinate)
    return ManifoldPoint(cell, tuple(local))


def check_no_return(
    manifold: Manifold,
    direction: Direction,
    edge: SplittingEdge,
    t_max: float,
    n_samples: int = 64,
    seed: int = 0,
    n_threads: Optional[int] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Union[NoReturn, ReturnAt]:
    """Check that geodesics leaving a y-direction splitting edge never meet a y-direction edge again.

    Points on the edge are sampled at rational positions for rational directions (exact tracing)
    and with the golden-ratio sequence otherwise.

    Args:
        manifold: The 3-manifold.
        direction: The direction.
        edge: The splitting edge, running in y-direction.
        t_max: The flow time.
        n_samples: The number of points on the edge.
        seed: The seed of the golden-ratio sequence.
        n_threads: The number of threads.
        tolerance: The geometric tolerance.

    Returns:
        NoReturn, or the earliest return with the edge that was met.
    """
    if manifold.dim != 3:
        raise ValueError("The no-return check is defined for 3-manifolds.")
    if edge.direction != "y":
        raise ValueError(f"Expected a y-direction splitting edge, got {edge}.")
    if direction.components[0] == 0 and direction.components[2] == 0:
        raise ValueError(f"The direction {direction} is parallel to the edge.")
    if t_max <= 0:
        return NoReturn(float(t_max), 0)

    exact = direction.mode == "rational" and is_exact([t_max])
    if exact:
        positions = [Fraction(2 * k + 1, 2 * n_samples) for k in range(n_samples)]
    else:
        direction = direction.as_float()
        positions = [float(s) for s in golden_sequence(n_samples, seed=seed)]

    tol = 0 if exact else tolerance

    def crossed_y_edge(segment):
        x, _, z = segment.exit
        if segment.t_exit == 0 or not (_on_lattice(x, tol) and _on_lattice(z, tol)):
            return None
        cell = segment.cell
        return manifold.cube_edge((cell.i + round(x), cell.j, cell.k + round(z)), 1)

    def check(s):
        start = _edge_start(manifold, edge, s, direction)
        for segment, event in iter_segments(manifold, start, direction, t_max, check_start=False, tolerance=tolerance):
            if event is not None and event.kind == SINGULAR_HIT:
                if event.edge is not None and event.edge.direction == "y":
                    return ReturnAt(event.time, event.edge, start)
                return _LOST
            # regular edges are crossed without an event
            other = crossed_y_edge(segment)
            if other is not None:
                return ReturnAt(segment.t_exit, other, start)
        return None

    verdicts = parallel_map(check, positions, n_threads=n_threads)
    returns = [ret for ret in verdicts if isinstance(ret, ReturnAt)]
    if returns:
        return min(returns, key=lambda ret: ret.t)
    n_lost = sum(ret is _LOST for ret in verdicts)
    if n_lost:
        warnings.warn(f"{n_lost} / {n_samples} geodesics from {edge} hit the singular set before t={t_max}.")
    return NoReturn(float(t_max), n_samples, n_lost)


def _on_lattice(value, tol):
    return value <= tol or value >= 1 - tol


def y_edges(manifold: Manifold) -> List[SplittingEdge]:
    """All y-direction splitting edges of a manifold."""
    return [edge for edge in manifold.splitting_edges if edge.direction == "y"]
