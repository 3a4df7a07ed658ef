"""
Classification of flow directions.

- `kronecker_test` looks for integer relations a * a1 + b * a2 + c = 0 among the components
  of a direction. Without such a relation the direction is a Kronecker direction.
- `saddle_connections` enumerates the geodesic segments between singular vertices of a surface;
  their slopes are the bad directions of the surface.
- `exceptional_lines` lists the lines of directions for which a geodesic leaving a face edge
  can return to a parallel copy of it.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Any, List, Optional, Sequence, Tuple, Union

import mpmath as mp
import numpy as np
import pandas as pd
import sympy

from .geometry import FACE_EDGE, Manifold, ManifoldPoint, SplittingEdge
from .tracer import SINGULAR_HIT, Direction, iter_segments, parse_component
from .util import DEFAULT_TOLERANCE, is_exact, parallel_map, primitive_integers

#: Up to this coefficient bound integer relations are searched exhaustively.
EXHAUSTIVE_BOUND = 10 ** 3

#: The default coefficient bound of the Kronecker test.
DEFAULT_BOUND = 10 ** 6

#: Residual tolerance of the PSLQ stage. Double precision inputs carry no relation information below it,
#: so float certificates beyond the exhaustive bound are heuristic.
PSLQ_TOLERANCE = 1e-14


class DegenerateEdge(ValueError):
    pass


#
# Kronecker test
#


@dataclass(frozen=True)
class RationalRelation:
    """The integer relation a * a1 + b * a2 + c = 0."""
    a: int
    b: int
    c: int

    @property
    def height(self) -> int:
        return max(abs(self.a), abs(self.b), abs(self.c))

    @property
    def is_kronecker(self) -> bool:
        return False


@dataclass(frozen=True)
class NoRelationUpTo:
    """No integer relation with coefficients bounded by `bound` exists.

    Attributes:
        bound: The coefficient bound.
        proven: Whether the absence was established exactly. Otherwise it is a bounded numerical certificate.
    """
    bound: int
    proven: bool = False

    @property
    def is_kronecker(self) -> bool:
        return True


KroneckerVerdict = Union[RationalRelation, NoRelationUpTo]
"""@private"""


def parse_alpha(value: Any) -> Tuple[Union[Fraction, float], Any]:
    """Parse a direction component given as a string, number or sympy expression.

    Returns:
        The value (a fraction for exact rationals, a float otherwise) and its exact
        sympy expression, or None if it is only known numerically.
    """
    if isinstance(value, str):
        return parse_component(value)
    if isinstance(value, sympy.Basic):
        if value.is_Rational:
            return Fraction(int(value.p), int(value.q)), value
        return float(value), value
    if is_exact([value]):
        return Fraction(value), sympy.Rational(Fraction(value).numerator, Fraction(value).denominator)
    return float(value), None


def _canonical(a, b, c):
    sign = -1 if next(val for val in (a, b, c) if val != 0) < 0 else 1
    return RationalRelation(sign * int(a), sign * int(b), sign * int(c))


def _signed_range(bound):
    yield 0
    for val in range(1, bound + 1):
        yield val
        yield -val


def _shell_search(residual_of, bound):
    """Search the smallest relation, by height and then by l1 norm, with |a|, |b|, |c| <= bound.

    `residual_of(a, bs)` returns the candidate values of c for the integer array bs (or nan if
    there is no integer c).
    """
    best, best_key = None, None
    bs = np.arange(-bound, bound + 1, dtype="int64")
    for a in _signed_range(bound):
        if best_key is not None and abs(a) > best_key[0]:
            break
        cs = residual_of(a, bs)
        valid = np.isfinite(cs) & (np.abs(cs) <= bound)
        if a == 0:
            valid &= bs != 0
        if not valid.any():
            continue
        b_valid, c_valid = bs[valid], cs[valid].astype("int64")
        heights = np.maximum(np.maximum(np.abs(b_valid), np.abs(c_valid)), abs(a))
        norms = np.abs(b_valid) + np.abs(c_valid) + abs(a)
        order = np.lexsort((norms, heights))
        b, c = int(b_valid[order[0]]), int(c_valid[order[0]])
        key = (int(heights[order[0]]), int(norms[order[0]]))
        if best_key is None or key < best_key:
            best, best_key = (a, b, c), key
    return None if best is None else _canonical(*best)


def _rational_search(alpha1, alpha2, bound):
    p1, q1 = alpha1.numerator, alpha1.denominator
    p2, q2 = alpha2.numerator, alpha2.denominator
    denominator = q1 * q2
    if denominator * (abs(p1) + abs(p2) + 1) * bound > 2 ** 62:
        return None

    def residual_of(a, bs):
        numerator = a * p1 * q2 + bs * p2 * q1
        cs = np.where(numerator % denominator == 0, -(numerator // denominator), 0).astype("float64")
        cs[numerator % denominator != 0] = np.nan
        return cs

    return _shell_search(residual_of, bound)


def _float_search(alpha1, alpha2, bound, tolerance):
    def residual_of(a, bs):
        values = a * alpha1 + bs * alpha2
        cs = -np.round(values)
        cs[np.abs(values + cs) > tolerance] = np.nan
        return cs

    return _shell_search(residual_of, bound)


def _pslq(alpha1, alpha2, bound, tolerance, dps):
    # the doubles are exact binary rationals, so the residual is evaluated without rounding
    with mp.workdps(dps):
        values = [mp.mpf(alpha1), mp.mpf(alpha2), mp.mpf(1)]
        relation = mp.pslq(values, tol=mp.mpf(tolerance), maxcoeff=bound, maxsteps=10 ** 5)
        if relation is None:
            return None
        a, b, c = relation
        if max(abs(a), abs(b), abs(c)) > bound or abs(a * values[0] + b * values[1] + c) > tolerance:
            return None
    return _canonical(a, b, c)


def _symbolic_basis(expressions):
    """Write quadratic irrationals over a common basis of square root monomials.

    Returns None if a coefficient is not rational, i.e. the expressions are not in a
    multi-quadratic field.
    """
    coefficients = [sympy.expand(sympy.radsimp(expr)).as_coefficients_dict() for expr in expressions]
    basis = sorted({term for coeffs in coefficients for term in coeffs}, key=sympy.default_sort_key)
    for term in basis:
        if not (term == 1 or (term.is_Pow and term.exp == sympy.Rational(1, 2) and term.base.is_Integer) or
                (term.is_Mul and all(f.is_Pow and f.exp == sympy.Rational(1, 2) for f in term.args))):
            return None
    matrix = sympy.Matrix([[coeffs.get(term, 0) for coeffs in coefficients] for term in basis])
    if not all(val.is_Rational for val in matrix):
        return None
    return matrix


def kronecker_test(
    alpha1: Any,
    alpha2: Any,
    bound: int = DEFAULT_BOUND,
    tolerance: float = DEFAULT_TOLERANCE,
    exhaustive_bound: int = EXHAUSTIVE_BOUND,
) -> KroneckerVerdict:
    """Test whether a1, a2 and 1 are linearly independent over the rationals.

    Three cases are distinguished:
    - Exact rationals: an exhaustive search returns the relation of smallest height.
    - Symbolic quadratic irrationals ('sqrt:2', sympy expressions): the relations are computed exactly
      by comparing coefficients over the square root basis. The absence of a relation is a proof.
    - Floats: an exhaustive search with absolute residual `tolerance` up to `exhaustive_bound`,
      then the PSLQ algorithm up to `bound` with residual `PSLQ_TOLERANCE`. The absence of a relation
      is a bounded certificate.

    Args:
        alpha1: The first component.
        alpha2: The second component.
        bound: The coefficient bound H.
        tolerance: The residual tolerance for float components.
        exhaustive_bound: The bound up to which coefficients are searched exhaustively.

    Returns:
        The verdict.
    """
    if bound < 1:
        raise ValueError(f"The coefficient bound must be at least 1, got {bound}.")
    value1, expr1 = parse_alpha(alpha1)
    value2, expr2 = parse_alpha(alpha2)
    search_bound = min(bound, exhaustive_bound)

    if isinstance(value1, Fraction) and isinstance(value2, Fraction):
        relation = _rational_search(value1, value2, search_bound)
        if relation is not None:
            return relation
        # a rational pair always has the relations (q1, 0, -p1) and (0, q2, -p2)
        candidates = [(value1.denominator, 0, -value1.numerator), (0, value2.denominator, -value2.numerator)]
        candidates = [_canonical(*cand) for cand in candidates if max(map(abs, cand)) <= bound]
        if candidates:
            return min(candidates, key=lambda rel: (rel.height, abs(rel.a) + abs(rel.b) + abs(rel.c)))
        return NoRelationUpTo(bound)

    if expr1 is not None and expr2 is not None:
        matrix = _symbolic_basis([expr1, expr2, sympy.Integer(1)])
        if matrix is not None:
            nullspace = matrix.nullspace()
            if not nullspace:
                return NoRelationUpTo(bound, proven=True)
            if len(nullspace) == 1:
                relation = _canonical(*primitive_integers([Fraction(int(v.p), int(v.q)) for v in nullspace[0]]))
                return relation if relation.height <= bound else NoRelationUpTo(bound, proven=True)

    value1, value2 = float(value1), float(value2)
    relation = _float_search(value1, value2, search_bound, tolerance)
    if relation is not None:
        return relation
    if bound > exhaustive_bound:
        relation = _pslq(value1, value2, bound, PSLQ_TOLERANCE, dps=30)
        if relation is not None:
            return relation
    return NoRelationUpTo(bound)


def check_relation(relation: RationalRelation, alpha1: Any, alpha2: Any, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    """Substitute the components into a relation, exactly for rationals and up to tolerance otherwise."""
    value1, expr1 = parse_alpha(alpha1)
    value2, expr2 = parse_alpha(alpha2)
    if isinstance(value1, Fraction) and isinstance(value2, Fraction):
        return relation.a * value1 + relation.b * value2 + relation.c == 0
    if expr1 is not None and expr2 is not None:
        return sympy.simplify(relation.a * expr1 + relation.b * expr2 + relation.c) == 0
    residual = abs(relation.a * float(value1) + relation.b * float(value2) + relation.c)
    return residual <= tolerance * max(relation.height, 1)


#
# Saddle connections
#


@dataclass(frozen=True)
class SaddleConnection:
    """A geodesic segment between two singular vertices with no singular vertex in between.

    Attributes:
        start: The index of the start vertex.
        end: The index of the end vertex.
        vector: The holonomy vector (dx, dy) of the segment in the unfolded plane.
        start_cell: The cell the segment leaves the start vertex into.
        start_local: The local coordinates of the start vertex in that cell.
    """
    start: int
    end: int
    vector: Tuple[Fraction, Fraction]
    start_cell: Any
    start_local: Tuple[Fraction, Fraction]

    @property
    def endpoints(self) -> Tuple[int, int]:
        return (self.start, self.end)

    @property
    def length(self) -> float:
        return math.hypot(float(self.vector[0]), float(self.vector[1]))

    @property
    def slope(self) -> Union[Fraction, float]:
        """The slope dy / dx, infinite for vertical connections."""
        dx, dy = self.vector
        return math.inf if dx == 0 else Fraction(dy) / Fraction(dx)


def _quadrant(dx, dy):
    if dx > 0 and dy >= 0:
        return 0
    if dx <= 0 and dy > 0:
        return 1
    if dx < 0 and dy <= 0:
        return 2
    return 3


def _is_connection(surface, occurrence, vector, tolerance):
    start = ManifoldPoint(occurrence.cell, occurrence.local)
    velocity = Direction.velocity(vector)
    for segment, event in iter_segments(
        surface, start, velocity, Fraction(2), check_start=False, tolerance=tolerance, along_faces=True
    ):
        if event is not None and event.kind == SINGULAR_HIT:
            return event.vertex if event.time == 1 else None
        if segment.t_exit > 1:
            return None
    return None


def _connections_from(surface, vertex, occurrence, targets, max_length, tolerance):
    found = []
    px, py = occurrence.local
    for qx, qy in targets:
        dx0, dy0 = qx - px, qy - py
        for a in range(math.ceil(-max_length - dx0), math.floor(max_length - dx0) + 1):
            dx = dx0 + a
            reach = max_length ** 2 - float(dx) ** 2
            if reach < 0:
                continue
            reach = math.sqrt(reach)
            for b in range(math.ceil(-reach - dy0), math.floor(reach - dy0) + 1):
                dy = dy0 + b
                if dx == 0 and dy == 0:
                    continue
                if float(dx) ** 2 + float(dy) ** 2 > max_length ** 2:
                    continue
                if _quadrant(dx, dy) not in occurrence.quadrants:
                    continue
                end = _is_connection(surface, occurrence, (dx, dy), tolerance)
                if end is not None:
                    found.append(SaddleConnection(vertex.index, end.index, (dx, dy), occurrence.cell, occurrence.local))
    return found


def saddle_connections(
    surface: Manifold,
    max_length: float,
    n_threads: Optional[int] = None,
    verbose: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
) -> List[SaddleConnection]:
    """Enumerate the saddle connections of a polysquare surface up to a length.

    The candidates are the vectors from each sector of a singular vertex to the lattice translates
    of the torus images of all singular vertices. Each candidate is traced exactly and kept if the
    first singular vertex it meets is at its end. Connections are oriented, so every connection
    appears once in each direction.

    Args:
        surface: The surface.
        max_length: The maximal length L.
        n_threads: The number of threads.
        verbose: Whether to show a progress bar.
        tolerance: The geometric tolerance.

    Returns:
        The saddle connections, sorted by length and vector.
    """
    if surface.dim != 2:
        raise ValueError(f"Saddle connections are only defined for surfaces, got a {surface.dim}d manifold.")
    singular = surface.singular_vertices
    targets = sorted({point for vertex in singular for point in vertex.torus_points})
    sectors = [(vertex, occurrence) for vertex in singular for occurrence in vertex.occurrences]

    def search(sector):
        vertex, occurrence = sector
        return _connections_from(surface, vertex, occurrence, targets, max_length, tolerance)

    results = parallel_map(search, sectors, n_threads=n_threads, verbose=verbose, desc="Saddle connections")
    unique = {}
    for connection in (conn for result in results for conn in result):
        key = (connection.start_cell, connection.start_local, connection.end, connection.vector)
        unique[key] = connection
    return sorted(unique.values(), key=lambda conn: (conn.length, conn.vector, conn.start, conn.end, conn.start_cell))


def is_bad_slope(surface: Manifold, alpha: Any, max_length: float, tolerance: float = 1e-12) -> bool:
    """Check whether a slope is the slope of a saddle connection of length at most `max_length`.

    Exact slopes are compared exactly, float slopes with the given tolerance.
    """
    value, _ = parse_alpha(alpha)
    for connection in saddle_connections(surface, max_length, n_threads=1):
        slope = connection.slope
        if slope == math.inf:
            continue
        if isinstance(value, Fraction):
            if slope == value:
                return True
        elif abs(float(slope) - value) <= tolerance:
            return True
    return False


def saddle_connections_to_dataframe(connections: Sequence[SaddleConnection]) -> pd.DataFrame:
    rows = []
    for conn in connections:
        dx, dy = conn.vector
        if dx == 0:
            slope_num, slope_den = "1", "0"
        else:
            slope = Fraction(dy) / Fraction(dx)
            slope_num, slope_den = str(slope.numerator), str(slope.denominator)
        rows.append({
            "slope_num": slope_num, "slope_den": slope_den, "length": conn.length,
            "v0": conn.start, "v1": conn.end, "dx": str(dx), "dy": str(dy),
        })
    return pd.DataFrame(rows, columns=["slope_num", "slope_den", "length", "v0", "v1", "dx", "dy"])


#
# Exceptional lines
#


@dataclass(frozen=True)
class ExceptionalLine:
    """The line a * a1 + b * a2 = c of directions, with a = c1 * dm, b = c2 * dm and c = c1 * n2 + c2 * q2.

    The integers (dm, n2, q2) are the lattice offsets between two copies of a face edge with
    line coefficients (c1, c2).
    """
    c1: int
    c2: int
    dm: int
    n2: int
    q2: int

    @property
    def coefficients(self) -> Tuple[int, int, int]:
        return (self.c1 * self.dm, self.c2 * self.dm, self.c1 * self.n2 + self.c2 * self.q2)

    def contains(self, alpha1: Any, alpha2: Any, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        a, b, c = self.coefficients
        residual = a * alpha1 + b * alpha2 - c
        return residual == 0 if is_exact([alpha1, alpha2]) else abs(residual) <= tolerance

    def sample_points(self, n_points: int, seed: int = 0) -> List[Tuple[Fraction, Fraction]]:
        """Exact rational points on the line.

        The free coordinate runs over k / (n_points + 1) shifted by the seed.
        """
        a, b, c = self.coefficients
        points = []
        for k in range(1, n_points + 1):
            t = Fraction(k, n_points + 1) + seed
            if b != 0:
                points.append((t, (c - a * t) / b))
            else:
                points.append((Fraction(c, a), t))
        return points


def exceptional_lines(edge: Union[SplittingEdge, Sequence[int]], bound: int) -> List[ExceptionalLine]:
    """List the lines of exceptional directions of a face edge.

    Args:
        edge: A face edge, or its line coefficients (c1, c2, c3).
        bound: The bound B with |dm|, |n2|, |q2| <= B.

    Returns:
        One line per triple (dm, n2, q2) with dm != 0.

    Raises:
        DegenerateEdge: If c1 = c2 = 0.
    """
    if isinstance(edge, SplittingEdge):
        if edge.kind != FACE_EDGE:
            raise ValueError(f"Exceptional lines are defined for face edges, got a {edge.kind}.")
        c1, c2 = edge.coefficients[0], edge.coefficients[1]
    else:
        c1, c2 = int(edge[0]), int(edge[1])
    if c1 == 0 and c2 == 0:
        raise DegenerateEdge("The edge coefficients c1 and c2 are both zero.")
    if bound < 1:
        raise ValueError(f"The bound must be at least 1, got {bound}.")
    lines = []
    for dm, n2, q2 in product(range(-bound, bound + 1), repeat=3):
        if dm == 0:
            continue
        lines.append(ExceptionalLine(c1, c2, dm, n2, q2))
    return lines


def exceptional_lines_to_dataframe(lines: Sequence[ExceptionalLine]) -> pd.DataFrame:
    rows = [
        dict(c1=line.c1, c2=line.c2, dm=line.dm, n2=line.n2, q2=line.q2,
             a=line.coefficients[0], b=line.coefficients[1], c=line.coefficients[2])
        for line in lines
    ]
    return pd.DataFrame(rows, columns=["c1", "c2", "dm", "n2", "q2", "a", "b", "c"])
