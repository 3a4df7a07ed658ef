"""
Event-driven tracing of geodesics with a constant direction.

A geodesic starting at the point p with direction v is the straight line p + t * v inside each cell.
Since all identifications preserve face-local coordinates, the local coordinates along the
geodesic are (p + t * v) mod 1 at all times, and only the cell changes when a face is crossed.
The tracer therefore computes every crossing time from the start point directly, which is exact
for rational directions and does not accumulate rounding errors for floating point directions.
"""

import math
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, NamedTuple, Optional, Sequence, Tuple, Union

import pandas as pd
import sympy

from .geometry import (
    AXES, FaceRef, Manifold, ManifoldPoint, OnSplittingEdge, SplittingEdge, Vertex, _tangential_axes
)
from .util import DEFAULT_TOLERANCE, as_fraction, is_exact

SINGULAR_HIT = "singular-hit"
TERMINATED_T_MAX = "t_max"

_TERM_PATTERN = re.compile(r"^[0-9+\-*/(). ]*$")


class DegenerateDirection(ValueError):
    """A geodesic that would run inside a face plane."""


class NotReversible(RuntimeError):
    pass


#
# Directions
#


def parse_component(term: str) -> Tuple[Union[Fraction, float], Any]:
    """Parse one component of a direction.

    Supported are integers, fractions like '1/3', decimals like '0.25' and expressions
    with square roots written as 'sqrt:2', for example '1-sqrt:2' or '(1+sqrt:5)/2'.

    Args:
        term: The component.

    Returns:
        The value, a fraction for exact rational components and a float otherwise,
        and the exact sympy expression (None for decimals).
    """
    text = term.strip()
    if not text:
        raise ValueError("Empty direction component.")
    if "." in text and "sqrt" not in text:
        try:
            return float(text), None
        except ValueError:
            raise ValueError(f"Could not parse direction component '{term}'.")
    expression_text = re.sub(r"sqrt:(\d+)", r"sqrt(\1)", text)
    if not _TERM_PATTERN.match(expression_text.replace("sqrt", "")):
        raise ValueError(f"Could not parse direction component '{term}'.")
    try:
        expression = sympy.nsimplify(sympy.sympify(expression_text, rational=True))
    except (sympy.SympifyError, TypeError, SyntaxError):
        raise ValueError(f"Could not parse direction component '{term}'.")
    if expression.is_Rational:
        return Fraction(int(expression.p), int(expression.q)), expression
    if not expression.is_real:
        raise ValueError(f"The direction component '{term}' is not a real number.")
    return float(expression), expression


@dataclass(frozen=True)
class Direction:
    """A flow direction.

    In three dimensions the direction is (a1, a2, 1), on surfaces it is (1, a). The normalized
    component may also be -1 for the reversed flow.

    Attributes:
        components: The components, fractions in rational mode and floats in float mode.
        mode: Either 'rational' or 'float'.
        symbolic: Exact sympy expressions of the components, if known.
    """
    components: Tuple[Any, ...]
    mode: str = "float"
    symbolic: Optional[Tuple[Any, ...]] = field(default=None, compare=False, repr=False)
    normalized: bool = field(default=True, repr=False)

    def __post_init__(self):
        if len(self.components) not in (2, 3):
            raise ValueError(f"A direction has 2 or 3 components, got {len(self.components)}.")
        if self.mode not in ("rational", "float"):
            raise ValueError(f"Invalid direction mode {self.mode}, expected 'rational' or 'float'.")
        if self.mode == "rational":
            components = tuple(as_fraction(val) for val in self.components)
        else:
            components = tuple(float(val) for val in self.components)
        object.__setattr__(self, "components", components)
        if all(val == 0 for val in components):
            raise ValueError("A direction must not be the zero vector.")
        if not self.normalized:
            return
        normalized = components[-1] if len(components) == 3 else components[0]
        if abs(normalized) != 1:
            raise ValueError(
                f"The {'last' if len(components) == 3 else 'first'} component of a direction must be 1 or -1, "
                f"got {normalized}."
            )

    @classmethod
    def parse(cls, text: str) -> "Direction":
        """Parse a direction like 'sqrt:2,sqrt:3,1' or '1,1/3'.

        A single component is read as the slope of a surface direction (1, a).
        Directions with only rational components are in rational mode.
        """
        terms = text.split(",")
        values, expressions = zip(*(parse_component(term) for term in terms))
        if len(values) == 1:
            values, expressions = (Fraction(1),) + values, (sympy.Integer(1),) + expressions
        mode = "rational" if all(isinstance(val, Fraction) for val in values) else "float"
        symbolic = None if any(expr is None for expr in expressions) else tuple(expressions)
        return cls(tuple(values), mode=mode, symbolic=symbolic)

    @classmethod
    def velocity(cls, components: Sequence[Any]) -> "Direction":
        """An arbitrary non-zero velocity vector, for example the vector between two vertices."""
        mode = "rational" if is_exact(components) else "float"
        return cls(tuple(components), mode=mode, normalized=False)

    @classmethod
    def from_slope(cls, alpha: Any) -> "Direction":
        """The surface direction (1, alpha)."""
        if isinstance(alpha, str):
            return cls.parse(alpha)
        if is_exact([alpha]):
            return cls((Fraction(1), Fraction(alpha)), mode="rational")
        return cls((1.0, float(alpha)), mode="float")

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def alphas(self) -> Tuple[Any, ...]:
        """The free components, (a1, a2) in three dimensions and (a,) on surfaces."""
        return self.components[:2] if self.dim == 3 else self.components[1:]

    @property
    def speed(self) -> float:
        """The euclidean length of the direction vector, i.e. geodesic length per unit of flow time."""
        return math.sqrt(sum(float(val) ** 2 for val in self.components))

    def as_float(self) -> "Direction":
        return Direction(self.components, mode="float", symbolic=self.symbolic, normalized=self.normalized)

    def negated(self) -> "Direction":
        symbolic = None if self.symbolic is None else tuple(-expr for expr in self.symbolic)
        return Direction(
            tuple(-val for val in self.components), mode=self.mode, symbolic=symbolic, normalized=self.normalized
        )

    def __str__(self):
        if self.symbolic is not None:
            return "(" + ", ".join(str(expr) for expr in self.symbolic) + ")"
        return "(" + ", ".join(str(val) for val in self.components) + ")"


#
# Traces
#


@dataclass(frozen=True)
class Event:
    """A crossing of a face side, or the hit of the singular set that ends a trace."""
    time: Any
    face: FaceRef
    kind: str
    edge: Optional[SplittingEdge] = None
    vertex: Optional[Vertex] = None


class Segment(NamedTuple):
    """A straight piece of a geodesic inside one cell, in local coordinates."""
    cell: Any
    entry: Tuple[Any, ...]
    exit: Tuple[Any, ...]
    t_enter: Any
    t_exit: Any


@dataclass(frozen=True)
class Trace:
    """A traced geodesic.

    Attributes:
        start: The start point.
        direction: The direction.
        segments: The straight segments, contiguous in time.
        events: The crossing events, strictly ordered in time. A singular hit is always the last event.
        terminated_by: Either 't_max' or 'singular-hit'.
        t_max: The requested flow time.
        manifold: The manifold the geodesic was traced in.
    """
    start: ManifoldPoint
    direction: Direction
    segments: Tuple[Segment, ...]
    events: Tuple[Event, ...]
    terminated_by: str
    t_max: Any
    manifold: Manifold = field(repr=False, compare=False)

    @property
    def t_end(self) -> Any:
        return self.segments[-1].t_exit

    @property
    def singular_event(self) -> Optional[Event]:
        if self.terminated_by == SINGULAR_HIT:
            return self.events[-1]
        return None

    @property
    def end(self) -> ManifoldPoint:
        segment = self.segments[-1]
        return ManifoldPoint(segment.cell, segment.exit)

    @property
    def length(self) -> float:
        """The geodesic length of the trace."""
        return float(self.t_end) * self.direction.speed

    def _segment_index(self, t):
        if t < 0 or t > self.t_end:
            raise ValueError(f"The time {t} is outside of the traced interval [0, {self.t_end}].")
        index = bisect_right([seg.t_enter for seg in self.segments], t) - 1
        return max(index, 0)

    def position_at(self, t: Any) -> ManifoldPoint:
        """The point of the geodesic at flow time t."""
        segment = self.segments[self._segment_index(t)]
        local = tuple(
            x + (t - segment.t_enter) * v for x, v in zip(segment.entry, self.direction.components)
        )
        local = tuple(min(max(val, 0), 1) for val in local)
        return ManifoldPoint(segment.cell, local)

    def cell_at(self, t: Any):
        return self.segments[self._segment_index(t)].cell

    def itinerary(self) -> Tuple[Tuple[FaceRef, str], ...]:
        """The sequence of crossed face sides and crossing kinds."""
        return tuple((event.face, event.kind) for event in self.events)


def _on_boundary(value, tol):
    return value <= tol or value >= 1 - tol


def _start_singularity(manifold, start, tol):
    local = start.local
    on_faces = [a for a in range(manifold.dim) if _on_boundary(local[a], tol)]
    if not on_faces:
        return None
    a = on_faces[0]
    face = FaceRef(start.cell, AXES[a], "+" if local[a] >= 0.5 else "-")
    tangential = tuple(local[b] for b in _tangential_axes(a, manifold.dim))
    try:
        if manifold.dim == 3 and len(on_faces) == 1:
            manifold._check_face_edges(face.geometric(), face, tangential, tol)
        else:
            manifold.pass_through(face, tangential, tolerance=tol)
    except OnSplittingEdge as e:
        return Event(0, face, SINGULAR_HIT, e.edge, e.vertex)
    return None


def _prepare(manifold, start, direction, t_max):
    if direction.dim != manifold.dim:
        raise ValueError(f"The direction has {direction.dim} components, but {manifold.name} is {manifold.dim}d.")
    if start.dim != manifold.dim:
        raise ValueError(f"The start point has {start.dim} coordinates, but {manifold.name} is {manifold.dim}d.")
    if not manifold.has_cell(start.cell):
        raise ValueError(f"The start cell {start.cell} is not a cell of {manifold.name}.")
    exact = direction.mode == "rational" and is_exact(start.local) and is_exact([t_max])
    if exact:
        return tuple(Fraction(x) for x in start.local), direction.components, Fraction(t_max), True
    if t_max < 0 or not math.isfinite(float(t_max)):
        raise ValueError(f"t_max must be finite and non-negative, got {t_max}.")
    return tuple(float(x) for x in start.local), tuple(float(x) for x in direction.components), float(t_max), False


def iter_segments(
    manifold: Manifold,
    start: ManifoldPoint,
    direction: Direction,
    t_max: Any,
    check_start: bool = True,
    tolerance: float = DEFAULT_TOLERANCE,
    along_faces: bool = False,
) -> Iterator[Tuple[Segment, Optional[Event]]]:
    """Lazily trace a geodesic, one segment at a time.

    Args:
        manifold: The manifold.
        start: The start point.
        direction: The direction.
        t_max: The flow time.
        check_start: Whether a start point on the singular set ends the trace immediately.
        tolerance: The geometric tolerance in float mode.
        along_faces: Allow surface geodesics that run along the sides of the squares.
            Vertices inside the sides are checked on the way.

    Yields:
        The segments, each with the event at its end. The last segment ends at t_max with
        no event, or with a singular hit.
    """
    p, v, t_max, exact = _prepare(manifold, start, direction, t_max)
    if t_max < 0:
        raise ValueError(f"t_max must be non-negative, got {t_max}.")
    dim = manifold.dim
    tol = 0 if exact else tolerance

    running_along = []
    for a in range(dim):
        if v[a] == 0 and _on_boundary(p[a], tol):
            if not (along_faces and dim == 2):
                raise DegenerateDirection(
                    f"The direction {direction} runs inside the {AXES[a]} face plane of the start point {p}."
                )
            running_along.append(a)

    zero = Fraction(0) if exact else 0.0
    if check_start:
        event = _start_singularity(manifold, ManifoldPoint(start.cell, p), tol)
        if event is not None:
            yield Segment(start.cell, p, p, zero, zero), Event(zero, event.face, SINGULAR_HIT, event.edge, event.vertex)
            return

    cell = start.cell
    n = [0] * dim
    t_cur = zero
    entry = p

    def local_at(t):
        return tuple(p[b] + t * v[b] - n[b] for b in range(dim))

    while True:
        best_t, best_axis = None, None
        for a in range(dim):
            if v[a] == 0:
                continue
            ta = ((1 + n[a] - p[a]) if v[a] > 0 else (n[a] - p[a])) / v[a]
            if ta < t_cur:
                ta = t_cur
            if best_t is None or ta < best_t:
                best_t, best_axis = ta, a

        stop = t_max if best_t is None or best_t >= t_max else best_t

        if running_along:
            hit = _vertex_along_face(manifold, cell, entry, t_cur, stop, v, running_along[0], tol)
            if hit is not None:
                t_hit, face, vertex = hit
                local = local_at(t_hit)
                yield Segment(cell, entry, local, t_cur, t_hit), Event(t_hit, face, SINGULAR_HIT, None, vertex)
                return

        if best_t is None or best_t >= t_max:
            yield Segment(cell, entry, local_at(t_max), t_cur, t_max), None
            return

        a = best_axis
        forward = v[a] > 0
        local = list(local_at(best_t))
        local[a] = type(local[a])(1 if forward else 0)
        face = FaceRef(cell, AXES[a], "+" if forward else "-")
        tangent = _tangential_axes(a, dim)
        tangential = tuple(local[b] for b in tangent)
        bias = tuple(v[b] for b in tangent)
        if running_along and dim == 2:
            # the side of the square the geodesic runs along decides between regions
            b = running_along[0]
            bias = (1 if entry[b] <= tol else -1,)
        try:
            portal = manifold.pass_through(face, tangential, bias=bias, tolerance=tolerance)
        except OnSplittingEdge as e:
            yield Segment(cell, entry, tuple(local), t_cur, best_t), Event(best_t, face, SINGULAR_HIT, e.edge, e.vertex)
            return

        yield Segment(cell, entry, tuple(local), t_cur, best_t), Event(best_t, face, portal.kind)
        cell = portal.target.cell
        n[a] += 1 if forward else -1
        local[a] = type(local[a])(0 if forward else 1)
        entry = tuple(local)
        t_cur = best_t


def _vertex_along_face(manifold, cell, entry, t_cur, t_stop, v, a, tol):
    b = 1 - a
    face = FaceRef(cell, AXES[a], "+" if entry[a] >= 0.5 else "-")
    x0 = entry[b]
    x1 = x0 + (t_stop - t_cur) * v[b]
    lo, hi = min(x0, x1), max(x0, x1)
    candidates = [
        (u, vertex) for u, vertex in manifold.special_points(face) if vertex.singular and lo + tol < u < hi - tol
    ]
    if not candidates:
        return None
    u, vertex = min(candidates, key=lambda item: abs(item[0] - x0))
    return t_cur + (u - x0) / v[b], face, vertex


def trace(
    manifold: Manifold,
    start: ManifoldPoint,
    direction: Direction,
    t_max: Any,
    check_start: bool = True,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Trace:
    """Trace a geodesic through a manifold.

    Args:
        manifold: The manifold.
        start: The start point.
        direction: The direction. Rational directions with exact start points are traced exactly.
        t_max: The flow time.
        check_start: Whether a start point on the singular set ends the trace at time 0.
        tolerance: The geometric tolerance in float mode.

    Returns:
        The trace. It ends at t_max or at the first hit of a splitting edge or singular vertex.

    Raises:
        DegenerateDirection: If the geodesic would run inside a face plane.
    """
    segments, events = [], []
    for segment, event in iter_segments(manifold, start, direction, t_max, check_start=check_start, tolerance=tolerance):
        segments.append(segment)
        if event is not None:
            events.append(event)
    terminated_by = SINGULAR_HIT if events and events[-1].kind == SINGULAR_HIT else TERMINATED_T_MAX
    return Trace(
        start=start, direction=direction, segments=tuple(segments), events=tuple(events),
        terminated_by=terminated_by, t_max=t_max,
        manifold=manifold,
    )


def project_mod1(point: ManifoldPoint) -> Tuple[Any, ...]:
    """The image of a point under the modulo 1 projection to the unit torus."""
    return tuple(x % 1 for x in point.local)


def reverse(trace_: Trace, check_start: bool = False) -> Trace:
    """Trace back from the end of a trace with the negated direction.

    Args:
        trace_: The trace; it must have ended at t_max.
        check_start: Whether the end point may lie on the singular set.

    Returns:
        The reversed trace, which ends at the start of the input trace.

    Raises:
        NotReversible: If the trace ended in a singular hit.
    """
    if trace_.terminated_by != TERMINATED_T_MAX:
        event = trace_.singular_event
        raise NotReversible(f"The trace ended in a singular hit at t={event.time} on {event.face}.")
    return trace(trace_.manifold, trace_.end, trace_.direction.negated(), trace_.t_end, check_start=check_start)


def trace_to_dataframe(trace_: Trace) -> pd.DataFrame:
    """Tabulate the segments of a trace.

    The columns are t_enter, t_exit, cell_i, cell_j, cell_k, x0, y0, z0, x1, y1, z1 and
    event_kind, the kind of the event ending the segment ('' for the end of the trace).
    """
    rows = []
    events = iter(trace_.events)
    for index, segment in enumerate(trace_.segments):
        entry = tuple(float(x) for x in segment.entry) + (0.0,) * (3 - len(segment.entry))
        exit_ = tuple(float(x) for x in segment.exit) + (0.0,) * (3 - len(segment.exit))
        is_last = index == len(trace_.segments) - 1
        kind = ""
        if not is_last or trace_.terminated_by == SINGULAR_HIT:
            kind = next(events).kind
        rows.append({
            "t_enter": float(segment.t_enter), "t_exit": float(segment.t_exit),
            "cell_i": segment.cell.i, "cell_j": segment.cell.j, "cell_k": segment.cell.k,
            "x0": entry[0], "y0": entry[1], "z0": entry[2],
            "x1": exit_[0], "y1": exit_[1], "z1": exit_[2],
            "event_kind": kind,
        })
    columns = ["t_enter", "t_exit", "cell_i", "cell_j", "cell_k", "x0", "y0", "z0", "x1", "y1", "z1", "event_kind"]
    return pd.DataFrame(rows, columns=columns)
