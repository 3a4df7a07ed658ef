"""
Density and visiting frequency measurements for geodesics.

Hitting times and the bound T* are measured in flow time. Chord measures and segment lengths are
geodesic lengths; the frequency bound converts T* to geodesic length with the speed of the direction.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from tqdm import tqdm

from ._vendored import mark_subcells
from .geometry import Manifold, ManifoldPoint, SplittingEdge, Vertex
from .tracer import SINGULAR_HIT, Direction, Trace, iter_segments, trace
from .util import DEFAULT_TOLERANCE, low_discrepancy_points, parallel_map


class StartPathological(RuntimeError):
    """The geodesic from a start point hits the singular set before the measurement is complete."""
    def __init__(self, message, t_hit=None, element=None):
        super().__init__(message)
        self.t_hit = t_hit
        self.element = element


class HorizonTooSmall(RuntimeError):
    """Some sampled start did not hit the target set within the horizon."""
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


#
# Target sets
#


@dataclass(frozen=True)
class TargetSet:
    """An open ball inside one atomic cell, or the whole manifold.

    Attributes:
        center: The centre of the ball.
        radius: The radius of the ball.
        is_whole: Whether the target is the whole manifold.
    """
    center: Optional[ManifoldPoint]
    radius: float
    is_whole: bool = False

    def __post_init__(self):
        if self.is_whole:
            return
        if self.center is None or not self.radius > 0:
            raise ValueError(f"A target ball needs a centre and a positive radius, got {self.radius}.")
        distance = min(min(float(x), 1 - float(x)) for x in self.center.local)
        if self.radius > distance:
            raise ValueError(
                f"The target ball with centre {self.center.local} and radius {self.radius} leaves its cell."
            )

    @classmethod
    def whole(cls) -> "TargetSet":
        return cls(None, math.inf, is_whole=True)

    def half(self) -> "TargetSet":
        """The ball with the same centre and half of the radius."""
        if self.is_whole:
            return self
        return TargetSet(self.center, self.radius / 2)

    def volume_fraction(self, manifold: Manifold) -> float:
        """The share of the volume (area for surfaces) of the manifold taken by the target."""
        if self.is_whole:
            return 1.0
        dim = len(self.center.local)
        ball = math.pi * self.radius ** 2 if dim == 2 else 4 / 3 * math.pi * self.radius ** 3
        return ball / manifold.volume

    def contains(self, point: ManifoldPoint) -> bool:
        if self.is_whole:
            return True
        if point.cell != self.center.cell:
            return False
        distance = math.dist([float(x) for x in point.local], [float(x) for x in self.center.local])
        return distance < self.radius

    def flow_time_intervals(self, segment, velocity) -> List[Tuple[float, float]]:
        """The flow time intervals in which a straight segment lies inside the ball."""
        t0, t1 = float(segment.t_enter), float(segment.t_exit)
        if self.is_whole:
            return [(t0, t1)] if t1 > t0 else []
        if segment.cell != self.center.cell or t1 <= t0:
            return []
        offset = np.array([float(x) for x in segment.entry]) - np.array([float(x) for x in self.center.local])
        v = np.array([float(x) for x in velocity])
        a, b, c = v @ v, 2 * offset @ v, offset @ offset - self.radius ** 2
        discriminant = b * b - 4 * a * c
        if discriminant <= 0:
            return []
        root = math.sqrt(discriminant)
        lo, hi = (-b - root) / (2 * a), (-b + root) / (2 * a)
        lo, hi = max(lo, 0.0), min(hi, t1 - t0)
        if hi <= lo:
            return []
        return [(t0 + lo, t0 + hi)]


#
# Pathological starts and hitting times
#


@dataclass(frozen=True)
class NonPathological:
    """No singular hit within the horizon; the verdict is relative to the horizon."""
    horizon: float


@dataclass(frozen=True)
class Pathological:
    t_hit: Any
    element: Union[SplittingEdge, Vertex, None]


@dataclass(frozen=True)
class NotHitByHorizon:
    horizon: float


def classify_start(
    manifold: Manifold,
    start: ManifoldPoint,
    direction: Direction,
    horizon: float,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Union[NonPathological, Pathological]:
    """Check whether the geodesic from a start point hits the singular set within the horizon."""
    if not horizon > 0:
        raise ValueError(f"The horizon must be positive, got {horizon}.")
    for _, event in iter_segments(manifold, start, direction, horizon, tolerance=tolerance):
        if event is not None and event.kind == SINGULAR_HIT:
            return Pathological(event.time, event.edge if event.edge is not None else event.vertex)
    return NonPathological(float(horizon))


def hitting_time(
    manifold: Manifold,
    start: ManifoldPoint,
    direction: Direction,
    target: TargetSet,
    horizon: float,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Union[float, NotHitByHorizon]:
    """The first flow time at which the geodesic from a start point enters the target set.

    Args:
        manifold: The manifold.
        start: The start point.
        direction: The direction.
        target: The target set.
        horizon: The maximal flow time.
        tolerance: The geometric tolerance.

    Returns:
        The hitting time, or NotHitByHorizon.

    Raises:
        StartPathological: If the geodesic hits the singular set before it enters the target.
    """
    if target.contains(start):
        return 0.0
    for segment, event in iter_segments(manifold, start, direction, horizon, tolerance=tolerance):
        intervals = target.flow_time_intervals(segment, direction.components)
        if intervals:
            return intervals[0][0]
        if event is not None and event.kind == SINGULAR_HIT:
            element = event.edge if event.edge is not None else event.vertex
            raise StartPathological(
                f"The geodesic from {start} hits the singular set at t={event.time} before reaching the target.",
                t_hit=event.time, element=element,
            )
    return NotHitByHorizon(float(horizon))


def chord_length(trace_: Trace, target: TargetSet) -> float:
    """The geodesic length of the part of a trace inside the target set."""
    if target.is_whole:
        return trace_.length
    total = 0.0
    for segment in trace_.segments:
        for lo, hi in target.flow_time_intervals(segment, trace_.direction.components):
            total += hi - lo
    return total * trace_.direction.speed


#
# Functionality for estimating T*
#


def sample_starts(manifold: Manifold, n_starts: int, seed: int = 0) -> List[ManifoldPoint]:
    """Low-discrepancy start points, uniformly distributed over the cells of a manifold."""
    points = low_discrepancy_points(n_starts, manifold.dim, seed=seed)
    scaled = points[:, 0] * manifold.s
    cell_ids = np.minimum(np.floor(scaled).astype("int64"), manifold.s - 1)
    points[:, 0] = scaled - cell_ids
    return [
        ManifoldPoint(manifold.cells[cell_id], tuple(float(x) for x in point))
        for cell_id, point in zip(cell_ids, points)
    ]


@dataclass
class TStarEstimate:
    """The estimated bound of the hitting times of a target set.

    Attributes:
        t_star: The maximal observed hitting time in both directions, in flow time.
        t_star_forward: The maximal hitting time for the direction.
        t_star_backward: The maximal hitting time for the negated direction.
        samples: The hitting time samples, see `to_dataframe`.
        n_starts: The number of starts.
        not_hit_fraction: The fraction of non-pathological starts that did not hit within the horizon.
        n_pathological: The number of rejected pathological starts.
        horizon: The horizon.
        seed: The seed of the starts.
    """
    t_star: float
    t_star_forward: float
    t_star_backward: float
    samples: List[Dict[str, Any]]
    n_starts: int
    not_hit_fraction: float
    n_pathological: int
    horizon: float
    seed: int

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(self.samples, columns=["cell", "x0", "x1", "x2", "sign", "hitting_time"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t_star": self.t_star, "t_star_forward": self.t_star_forward, "t_star_backward": self.t_star_backward,
            "n_starts": self.n_starts, "not_hit_fraction": self.not_hit_fraction,
            "n_pathological": self.n_pathological, "horizon": self.horizon, "seed": self.seed,
        }


def estimate_t_star(
    manifold: Manifold,
    direction: Direction,
    target: TargetSet,
    n_starts: int = 100,
    horizon: float = 100.0,
    seed: int = 0,
    n_threads: Optional[int] = None,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> TStarEstimate:
    """Estimate the bound T* of the hitting times of a target set.

    The hitting time is measured from every start in the direction and in the negated direction;
    starts that are pathological in one direction are skipped for that direction only.

    Args:
        manifold: The manifold.
        direction: The direction.
        target: The target set, usually the half ball `TargetSet.half()`.
        n_starts: The number of starts, at least 100.
        horizon: The maximal flow time per start.
        seed: The seed of the starts.
        n_threads: The number of threads.
        verbose: Whether to show progress.
        tolerance: The geometric tolerance.

    Returns:
        The estimate.

    Raises:
        HorizonTooSmall: If a non-pathological start does not hit the target within the horizon.
    """
    if n_starts < 100:
        raise ValueError(f"At least 100 starts are needed, got {n_starts}.")
    direction = direction.as_float()
    starts = sample_starts(manifold, n_starts, seed=seed)
    jobs = [(start, sign) for start in starts for sign in (1, -1)]

    def measure(job):
        start, sign = job
        flow = direction if sign == 1 else direction.negated()
        try:
            return hitting_time(manifold, start, flow, target, horizon, tolerance=tolerance)
        except StartPathological:
            return None

    results = parallel_map(measure, jobs, n_threads=n_threads, verbose=verbose, desc="Estimate T*")

    samples, hits = [], {1: [], -1: []}
    n_pathological, n_missed = 0, 0
    for (start, sign), result in zip(jobs, results):
        local = list(start.local) + [0.0] * (3 - start.dim)
        if result is None:
            n_pathological += 1
            value = np.nan
        elif isinstance(result, NotHitByHorizon):
            n_missed += 1
            value = np.inf
        else:
            hits[sign].append(result)
            value = result
        samples.append({
            "cell": str(start.cell), "x0": local[0], "x1": local[1], "x2": local[2], "sign": sign,
            "hitting_time": value,
        })
    if n_pathological:
        warnings.warn(f"Rejected {n_pathological} pathological starts.")

    n_valid = len(jobs) - n_pathological
    forward = max(hits[1], default=0.0)
    backward = max(hits[-1], default=0.0)
    report = TStarEstimate(
        t_star=max(forward, backward), t_star_forward=forward, t_star_backward=backward, samples=samples,
        n_starts=n_starts, not_hit_fraction=n_missed / max(n_valid, 1), n_pathological=n_pathological,
        horizon=float(horizon), seed=seed,
    )
    if n_missed:
        raise HorizonTooSmall(
            f"{n_missed} / {n_valid} starts did not hit the target within the horizon {horizon}.", report=report
        )
    if verbose:
        print("Estimated T* =", report.t_star, "from", n_valid, "measurements")
    return report


def stabilize_t_star(
    manifold: Manifold,
    direction: Direction,
    target: TargetSet,
    n_starts: int = 100,
    horizon: float = 100.0,
    relative_change: float = 0.01,
    max_doublings: int = 6,
    seed: int = 0,
    n_threads: Optional[int] = None,
    verbose: bool = False,
) -> Tuple[TStarEstimate, List[Tuple[int, float]]]:
    """Double the number of starts until the estimated T* changes by less than `relative_change`.

    Returns:
        The last estimate and the history of (n_starts, t_star).
    """
    history = []
    report = estimate_t_star(manifold, direction, target, n_starts, horizon, seed=seed, n_threads=n_threads)
    history.append((n_starts, report.t_star))
    for _ in tqdm(range(max_doublings), disable=not verbose, desc="Stabilize T*"):
        n_starts *= 2
        new_report = estimate_t_star(manifold, direction, target, n_starts, horizon, seed=seed, n_threads=n_threads)
        history.append((n_starts, new_report.t_star))
        previous, report = report.t_star, new_report
        if abs(report.t_star - previous) <= relative_change * max(previous, 1e-12):
            return report, history
    warnings.warn(f"The estimate of T* did not stabilize after {max_doublings} doublings.")
    return report, history


#
# Functionality for the visiting frequency
#


def frequency_bound(radius: float, t_star: float) -> float:
    """The lower bound r / (8 T*) of the visiting frequency."""
    if not t_star > 0:
        raise ValueError(f"T* must be positive, got {t_star}.")
    return radius / (8 * t_star)


def check_frequency_chain(
    measure: float, length: float, radius: float, t_star: float, tolerance: float = 1e-9
) -> bool:
    """Check measure >= (r / 2) (floor(|L| / T*) - 1) >= (r / (8 T*)) |L| term by term.

    All arguments are geodesic lengths.
    """
    middle = radius / 2 * (math.floor(length / t_star) - 1)
    lower = frequency_bound(radius, t_star) * length
    return measure >= middle - tolerance and middle >= lower - tolerance


@dataclass
class FrequencyReport:
    """The visiting frequency of a target set along sampled geodesic segments.

    Attributes:
        target: The target set G.
        direction: The direction.
        samples: Per segment the start, its direction sign, the length |L| and the measure of G in L.
        t_star: The estimated T* of the half target, in flow time.
        t_star_length: T* converted to geodesic length.
        min_length: The minimal segment length 2 T*, in geodesic length.
        frequency: The minimal observed ratio of measure and length.
        mean_ratio: The mean observed ratio. It approaches the volume fraction of the target
            when the geodesics are uniformly distributed.
        volume_fraction: The share of the volume of the manifold taken by the target.
        bound: The lower bound r / (8 T*), 1 for the whole manifold.
        bound_holds: Whether every ratio is at least the bound.
        chain_holds: Whether every segment satisfies the inequality chain.
    """
    target: TargetSet
    direction: Direction
    samples: List[Dict[str, Any]]
    t_star: float
    t_star_length: float
    min_length: float
    frequency: float
    bound: float
    bound_holds: bool
    chain_holds: bool
    mean_ratio: float = math.nan
    volume_fraction: float = math.nan

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(self.samples)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction": str(self.direction),
            "radius": None if self.target.is_whole else self.target.radius,
            "t_star": self.t_star, "t_star_length": self.t_star_length, "min_length": self.min_length,
            "frequency": self.frequency, "mean_ratio": self.mean_ratio, "volume_fraction": self.volume_fraction,
            "bound": self.bound, "bound_holds": self.bound_holds,
            "chain_holds": self.chain_holds, "n_segments": len(self.samples),
        }


def _anchored_trace(manifold, start, direction, t_flow, tolerance):
    """Trace a segment from a start point, or the backward segment through it if the forward one is pathological."""
    for sign, flow in ((1, direction), (-1, direction.negated())):
        result = trace(manifold, start, flow, t_flow, tolerance=tolerance)
        if result.terminated_by != SINGULAR_HIT:
            return sign, result
    return None, None


def visiting_frequency(
    manifold: Manifold,
    direction: Direction,
    target: TargetSet,
    t_star: Optional[float] = None,
    segment_length: Optional[float] = None,
    n_segments: int = 100,
    horizon: float = 100.0,
    seed: int = 0,
    n_threads: Optional[int] = None,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> FrequencyReport:
    """Measure the visiting frequency of a target set along geodesic segments.

    Args:
        manifold: The manifold.
        direction: The direction.
        target: The target set G; T* is estimated for its half ball.
        t_star: A known estimate of T* in flow time. Estimated with `estimate_t_star` if not given.
        segment_length: The geodesic length of the segments, at least 2 T*. By default 2 T*,
            or 1 for the whole manifold.
        n_segments: The number of segments.
        horizon: The horizon for estimating T*.
        seed: The seed of the segment starts.
        n_threads: The number of threads.
        verbose: Whether to show progress.
        tolerance: The geometric tolerance.

    Returns:
        The report.
    """
    direction = direction.as_float()
    speed = direction.speed
    if t_star is None:
        t_star = estimate_t_star(
            manifold, direction, target.half(), horizon=horizon, seed=seed, n_threads=n_threads, verbose=verbose,
        ).t_star
    t_star_length = t_star * speed
    min_length = 2 * t_star_length
    if segment_length is None:
        segment_length = min_length if min_length > 0 else 1.0
    if segment_length < min_length or segment_length <= 0:
        raise ValueError(f"The segment length must be positive and at least 2 T* = {min_length}, got {segment_length}.")

    # spare starts for re-sampling segments that are pathological in both directions
    starts = sample_starts(manifold, 2 * n_segments, seed=seed)
    t_flow = segment_length / speed

    def measure(start):
        sign, segment = _anchored_trace(manifold, start, direction, t_flow, tolerance)
        if segment is None:
            return None
        return sign, chord_length(segment, target)

    results = parallel_map(measure, starts, n_threads=n_threads, verbose=verbose, desc="Visiting frequency")
    samples = []
    for start, result in zip(starts, results):
        if result is None:
            continue
        sign, chord = result
        samples.append({
            "cell": str(start.cell), **{f"x{d}": float(x) for d, x in enumerate(start.local)},
            "sign": sign, "length": segment_length, "measure": chord, "ratio": chord / segment_length,
        })
        if len(samples) == n_segments:
            break
    if len(samples) < n_segments:
        warnings.warn(f"Only {len(samples)} / {n_segments} segments avoid the singular set.")

    frequency = min((sample["ratio"] for sample in samples), default=math.nan)
    mean_ratio = float(np.mean([sample["ratio"] for sample in samples])) if samples else math.nan
    if target.is_whole:
        bound, chain_holds = 1.0, True
    elif t_star_length > 0:
        bound = frequency_bound(target.radius, t_star_length)
        chain_holds = all(
            check_frequency_chain(sample["measure"], sample["length"], target.radius, t_star_length)
            for sample in samples
        )
    else:
        bound, chain_holds = math.inf, False
    bound_holds = bool(samples) and frequency >= bound - 1e-12
    if not bound_holds:
        warnings.warn(f"The visiting frequency {frequency} is below the bound {bound}.")
    return FrequencyReport(
        target=target, direction=direction, samples=samples, t_star=t_star, t_star_length=t_star_length,
        min_length=min_length, frequency=frequency, bound=bound, bound_holds=bound_holds, chain_holds=chain_holds,
        mean_ratio=mean_ratio, volume_fraction=target.volume_fraction(manifold),
    )


#
# Functionality for the coverage time
#


@dataclass
class CoverageReport:
    """First-visit times of the sub-cells of a regular grid in every atomic cell.

    Attributes:
        eps: The grid resolution.
        n_sub: The number of sub-cells per axis and atomic cell.
        visited: The first-visit times, of shape (s,) + (n_sub,) * dim; inf for unvisited sub-cells.
        t_cover: The maximal first-visit time, or None if the coverage is incomplete at the horizon.
        horizon: The horizon.
        cells: The cells of the manifold, in the order of the first axis of `visited`.
    """
    eps: float
    n_sub: int
    visited: np.ndarray
    t_cover: Optional[float]
    horizon: float
    cells: List[Any] = field(default_factory=list)

    @property
    def n_visited(self) -> int:
        return int(np.isfinite(self.visited).sum())

    @property
    def n_total(self) -> int:
        return self.visited.size

    @property
    def complete(self) -> bool:
        return self.t_cover is not None

    def visited_count_at(self, t: float) -> int:
        """The number of sub-cells visited up to flow time t."""
        return int((self.visited <= t).sum())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps, "n_sub": self.n_sub, "t_cover": self.t_cover,
            "status": "complete" if self.complete else "incomplete at horizon",
            "n_visited": self.n_visited, "n_total": self.n_total, "horizon": self.horizon,
        }


def coverage_time(
    manifold: Manifold,
    start: ManifoldPoint,
    direction: Direction,
    eps: float,
    horizon: float,
    batch_size: int = 4096,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> CoverageReport:
    """Record the first visit of a geodesic in every sub-cell of an eps-grid.

    Args:
        manifold: The manifold.
        start: The start point.
        direction: The direction.
        eps: The grid resolution in (0, 1]; every atomic cell is split into ceil(1 / eps) ** dim sub-cells.
        horizon: The maximal flow time.
        batch_size: The number of segments that are marked at once.
        verbose: Whether to print a summary.
        tolerance: The geometric tolerance.

    Returns:
        The report.

    Raises:
        StartPathological: If the geodesic hits the singular set before the horizon.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"The grid resolution must be in (0, 1], got {eps}.")
    if not horizon > 0:
        raise ValueError(f"The horizon must be positive, got {horizon}.")
    n_sub = int(math.ceil(1.0 / eps - 1e-12))
    dim = manifold.dim
    cell_index = {cell: i for i, cell in enumerate(manifold.cells)}
    first_visit = np.full(manifold.s * n_sub ** dim, np.inf)

    batch = []

    def flush():
        if not batch:
            return
        cells, entries, exits, t_enters, t_exits = zip(*batch)
        mark_subcells(
            first_visit, np.array(cells), np.array(entries), np.array(exits), np.array(t_enters), np.array(t_exits),
            n_sub,
        )
        batch.clear()

    n_visited = 0
    for segment, event in iter_segments(manifold, start, direction, horizon, tolerance=tolerance):
        batch.append((
            cell_index[segment.cell], [float(x) for x in segment.entry], [float(x) for x in segment.exit],
            float(segment.t_enter), float(segment.t_exit),
        ))
        if len(batch) >= batch_size:
            flush()
            n_visited = int(np.isfinite(first_visit).sum())
            if n_visited == first_visit.size:
                break
        if event is not None and event.kind == SINGULAR_HIT:
            flush()
            element = event.edge if event.edge is not None else event.vertex
            raise StartPathological(
                f"The geodesic from {start} hits the singular set at t={event.time}.", t_hit=event.time,
                element=element,
            )
    flush()

    complete = bool(np.isfinite(first_visit).all())
    report = CoverageReport(
        eps=float(eps), n_sub=n_sub, visited=first_visit.reshape((manifold.s,) + (n_sub,) * dim),
        t_cover=float(first_visit.max()) if complete else None, horizon=float(horizon), cells=list(manifold.cells),
    )
    if verbose:
        print("Visited", report.n_visited, "/", report.n_total, "sub-cells, T_cover =", report.t_cover)
    return report
