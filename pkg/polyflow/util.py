"""
Helper functions shared by the geometry, tracing and experiment modules:
exact number handling, worker parallelism and deterministic sample sequences.
"""

import math
import multiprocessing as mp
import os
from concurrent import futures
from fractions import Fraction
from functools import reduce
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from tqdm import tqdm

from ._vendored import halton_points

Number = Union[int, float, Fraction]

#: Geometric tolerance (in ambient units) used in float mode.
DEFAULT_TOLERANCE = 1e-9

#: The golden ratio conjugate, the slope of the default badly approximable direction.
GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0

_THREAD_ENV = "POLYFLOW_THREADS"


#
# Exact numbers
#


def as_fraction(value: Any) -> Fraction:
    """Convert a value from a description file or the command line to an exact fraction.

    Strings like "1/2", "0.25" and "3", integers and fractions are converted exactly.
    Floats are converted via their shortest decimal representation, so 0.1 becomes 1/10.

    Args:
        value: The value to convert.

    Returns:
        The exact rational value.
    """
    if isinstance(value, bool):
        raise ValueError(f"Expected a rational number, got {value}.")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"Expected a finite rational number, got {value}.")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"Could not parse '{value}' as a rational number.")
    raise ValueError(f"Expected a rational number, got {type(value).__name__} {value}.")


def is_exact(values: Iterable[Any]) -> bool:
    """Check whether all values are exact rationals (ints or fractions)."""
    return all(isinstance(val, (int, Fraction)) and not isinstance(val, bool) for val in values)


def primitive_integers(values: Sequence[Fraction]) -> Tuple[int, ...]:
    """Scale rationals to the primitive integer vector with the same direction.

    The first non-zero entry of the result is positive.
    """
    values = [Fraction(val) for val in values]
    if all(val == 0 for val in values):
        return tuple(0 for _ in values)
    denominator = reduce(lambda a, b: a * b // math.gcd(a, b), [val.denominator for val in values], 1)
    integers = [int(val * denominator) for val in values]
    divisor = reduce(math.gcd, [abs(val) for val in integers])
    integers = [val // divisor for val in integers]
    first = next(val for val in integers if val != 0)
    if first < 0:
        integers = [-val for val in integers]
    return tuple(integers)


def to_float(values: Iterable[Number]) -> Tuple[float, ...]:
    return tuple(float(val) for val in values)


#
# Parallelism
#


def get_n_threads(n_threads: Optional[int] = None) -> int:
    """Resolve the number of worker threads.

    Args:
        n_threads: The requested number of threads. If None, the environment variable
            POLYFLOW_THREADS is used if it is set, otherwise the number of cpus.

    Returns:
        The number of threads.
    """
    if n_threads is None:
        env_value = os.environ.get(_THREAD_ENV)
        if env_value is not None:
            try:
                n_threads = int(env_value)
            except ValueError:
                raise ValueError(f"Invalid value '{env_value}' for {_THREAD_ENV}, expected an integer.")
        else:
            n_threads = mp.cpu_count()
    if n_threads < 1:
        raise ValueError(f"The number of threads must be at least 1, got {n_threads}.")
    return n_threads


def parallel_map(
    function: Callable,
    items: Sequence[Any],
    n_threads: Optional[int] = None,
    verbose: bool = False,
    desc: Optional[str] = None,
) -> List[Any]:
    """Apply a function to all items with a thread pool.

    The results are returned in the order of the items, independent of the number of threads.

    Args:
        function: The function to apply.
        items: The items.
        n_threads: The number of threads, see `get_n_threads`.
        verbose: Whether to show a progress bar.
        desc: The description of the progress bar.

    Returns:
        The results.
    """
    n_threads = get_n_threads(n_threads)
    if n_threads == 1 or len(items) < 2:
        return [function(item) for item in tqdm(items, total=len(items), disable=not verbose, desc=desc)]
    with futures.ThreadPoolExecutor(n_threads) as tp:
        results = list(tqdm(tp.map(function, items), total=len(items), disable=not verbose, desc=desc))
    return results


#
# Deterministic sample sequences
#


def low_discrepancy_points(n_points: int, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points in the open unit cube.

    The seed selects a stretch of the Halton sequence, so different seeds give different
    but reproducible point sets.

    Args:
        n_points: The number of points.
        dim: The dimension.
        seed: The seed.

    Returns:
        Array of shape (n_points, dim).
    """
    if seed < 0:
        raise ValueError(f"The seed must be non-negative, got {seed}.")
    return halton_points(n_points, dim, start=seed * 7919)


def golden_sequence(n_points: int, seed: int = 0) -> np.ndarray:
    """The additive golden-ratio sequence (seed + k) * GOLDEN_RATIO mod 1 in one dimension."""
    indices = np.arange(1, n_points + 1, dtype="float64") + seed * 7919
    return np.mod(indices * GOLDEN_RATIO, 1.0)


def points_in_ball(n_points: int, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic points in the open unit ball, by mapping low-discrepancy points.

    Points of the unit cube are mapped with a radial transform so that they are uniform in the ball.
    """
    cube = low_discrepancy_points(n_points, dim, seed=seed)
    if dim == 2:
        radius, angle = np.sqrt(cube[:, 0]), 2 * np.pi * cube[:, 1]
        return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    elif dim == 3:
        radius = np.cbrt(cube[:, 0])
        cos_theta = 1.0 - 2.0 * cube[:, 1]
        sin_theta = np.sqrt(1.0 - cos_theta ** 2)
        phi = 2 * np.pi * cube[:, 2]
        return np.stack(
            [radius * sin_theta * np.cos(phi), radius * sin_theta * np.sin(phi), radius * cos_theta], axis=1
        )
    raise ValueError(f"Only dimensions 2 and 3 are supported, got {dim}.")
