"""
Numeric kernels that are compiled with numba when it is available.

The kernels are written so that they also run as plain python functions;
numba only makes them faster. They are kept in this module so that the
compiled and the interpreted code paths share one implementation.
"""
import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except (ImportError, SystemError):
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func
        return decorator


_JIT_OPTIONS = dict(cache=True, nogil=True, error_model="numpy")

# the first primes, one radical-inverse base per sampled dimension
HALTON_BASES = (2, 3, 5, 7, 11, 13)


@njit(**_JIT_OPTIONS)
def _radical_inverse(index, base):
    inverse = 0.0
    denominator = 1.0
    while index > 0:
        index, remainder = divmod(index, base)
        denominator *= base
        inverse += remainder / denominator
    return inverse


@njit(**_JIT_OPTIONS)
def _halton_numba(start, n_points, bases):
    points = np.empty((n_points, len(bases)))
    for i in range(n_points):
        for d in range(len(bases)):
            points[i, d] = _radical_inverse(start + i + 1, bases[d])
    return points


def _halton_numpy(start, n_points, bases):
    indices = np.arange(start + 1, start + n_points + 1, dtype="int64")
    points = np.zeros((n_points, len(bases)))
    for d, base in enumerate(bases):
        remaining = indices.copy()
        denominator = np.ones(n_points)
        while np.any(remaining > 0):
            remaining, remainder = np.divmod(remaining, base)
            denominator *= base
            points[:, d] += remainder / denominator
    return points


def halton_points(n_points: int, dim: int, start: int = 0, implementation: str = "default") -> np.ndarray:
    """Compute points of the Halton sequence in the unit cube.

    Args:
        n_points: The number of points.
        dim: The dimension of the points, at most `len(HALTON_BASES)`.
        start: The index of the first point; different starts give disjoint stretches of the sequence.
        implementation: Either 'numba', 'numpy' or 'default', which picks numba if it is installed.

    Returns:
        Array of shape (n_points, dim) with entries in (0, 1).
    """
    if dim > len(HALTON_BASES):
        raise ValueError(f"Halton points are supported up to dimension {len(HALTON_BASES)}, got {dim}.")
    bases = np.array(HALTON_BASES[:dim], dtype="int64")

    if implementation == "default":
        implementation = "numba" if HAVE_NUMBA else "numpy"

    if implementation == "numba":
        assert HAVE_NUMBA
        return _halton_numba(start, n_points, bases)
    elif implementation == "numpy":
        return _halton_numpy(start, n_points, bases)
    else:
        raise ValueError(f"Halton implementation {implementation} is not available. Has to be one of 'numpy' or 'numba'.")


@njit(**_JIT_OPTIONS)
def _mark_subcells_numba(first_visit, cell_index, entries, exits, t_enters, t_exits, n_sub):
    # every crossing of a sub-grid plane starts a new piece of the segment
    n_new = 0
    for s in range(len(t_enters)):
        t0, t1 = t_enters[s], t_exits[s]
        if t1 <= t0:
            continue
        dim = entries.shape[1]
        cuts = [0.0, 1.0]
        for d in range(dim):
            a, b = entries[s, d] * n_sub, exits[s, d] * n_sub
            lo, hi = min(a, b), max(a, b)
            k = int(np.floor(lo)) + 1
            while k < hi:
                cuts.append((k - a) / (b - a))
                k += 1
        cuts.sort()
        for c in range(len(cuts) - 1):
            if cuts[c + 1] - cuts[c] <= 0.0:
                continue
            mid = 0.5 * (cuts[c] + cuts[c + 1])
            flat = cell_index[s]
            for d in range(dim):
                x = entries[s, d] + mid * (exits[s, d] - entries[s, d])
                sub = min(int(x * n_sub), n_sub - 1)
                flat = flat * n_sub + sub
            if np.isinf(first_visit[flat]):
                first_visit[flat] = t0 + cuts[c] * (t1 - t0)
                n_new += 1
    return n_new


def mark_subcells(
    first_visit: np.ndarray,
    cell_index: np.ndarray,
    entries: np.ndarray,
    exits: np.ndarray,
    t_enters: np.ndarray,
    t_exits: np.ndarray,
    n_sub: int,
) -> int:
    """Record first-visit times of the sub-cells that straight segments pass through.

    Args:
        first_visit: Flat array of first-visit times, `inf` for unvisited sub-cells. Updated in place.
        cell_index: The index of the atomic cell of each segment.
        entries: The local entry point of each segment.
        exits: The local exit point of each segment.
        t_enters: The flow time at the entry of each segment.
        t_exits: The flow time at the exit of each segment.
        n_sub: The number of sub-cells per axis and atomic cell.

    Returns:
        The number of sub-cells that were visited for the first time.
    """
    return _mark_subcells_numba(
        first_visit, np.asarray(cell_index, dtype="int64"), np.asarray(entries, dtype="float64"),
        np.asarray(exits, dtype="float64"), np.asarray(t_enters, dtype="float64"),
        np.asarray(t_exits, dtype="float64"), int(n_sub)
    )
