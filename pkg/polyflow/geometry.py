"""
Polysquare surfaces and polycube 3-manifolds.

A manifold is built from a description: a finite set of unit cells on the integer lattice,
identifications of their boundary faces and optional face colourings. A coloured face is
split into green polygons, through which the flow passes into the neighbouring cell, and
red polygons, which are identified with the same polygon on another face. The boundaries of
these polygons and the edges of the cells form the splitting edges. The flow is singular on the
face edges and on the cube edges around which the transport is discontinuous.

All geometry is exact: polygon vertices are rationals and every identification preserves the
face-local (tangential) coordinates, so the modulo 1 projection of the flow is a straight line
on the unit torus.
"""

import json
import os
from dataclasses import dataclass, field, replace
from functools import cached_property
from fractions import Fraction
from itertools import product
from math import pi
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from shapely.geometry import Point, Polygon, box
from shapely.ops import unary_union
from shapely.prepared import prep

from .util import DEFAULT_TOLERANCE, as_fraction, is_exact, primitive_integers

AXES = ("X", "Y", "Z")
SIDES = ("-", "+")

#: The identification kinds of a face region.
INTERIOR_CROSSING = "interior-crossing"
GATE_CROSSING = "gate-crossing"
PAIRING_TRANSPORT = "pairing-transport"

CUBE_EDGE = "cube-edge"
FACE_EDGE = "face-edge"

PolygonType = Tuple[Tuple[Fraction, ...], ...]
"""@private"""

AmbientPoint = Tuple[Fraction, ...]
"""@private"""


#
# Errors
#


class GeometryError(ValueError):
    """Base class for invalid manifolds.

    Args:
        message: The error message.
        path: The location of the offending entry in the description document, if any.
    """
    def __init__(self, message: str, path: Optional[Tuple[Union[str, int], ...]] = None):
        super().__init__(message)
        self.path = path


class DescriptionError(GeometryError):
    """A manifold description that cannot be parsed."""
    def __init__(self, message: str, path: Optional[Tuple[Union[str, int], ...]] = None, line: Optional[int] = None):
        super().__init__(message, path)
        self.line = line

    def __str__(self):
        message = super().__str__()
        return message if self.line is None else f"line {self.line}: {message}"


class DisconnectedRegion(GeometryError):
    pass


class OverlappingCells(GeometryError):
    pass


class UnpairedBoundaryFace(GeometryError):
    pass


class IncongruentRedPairing(GeometryError):
    pass


class PolygonTilingGap(GeometryError):
    pass


class AmbiguousFace(GeometryError):
    """A face side that is identified twice, for example by a pairing and by a colouring."""


class NonInvolutivePairing(GeometryError):
    pass


class OnSplittingEdge(GeometryError):
    """A point on the singular set, i.e. on a splitting edge or a singular vertex."""
    def __init__(self, message: str, edge: Optional["SplittingEdge"] = None, vertex: Optional["Vertex"] = None):
        super().__init__(message)
        self.edge = edge
        self.vertex = vertex


#
# Domain types
#


class CellId(NamedTuple):
    """The lattice position of an atomic square or cube."""
    i: int
    j: int
    k: int = 0

    def shifted(self, axis_index: int, step: int) -> "CellId":
        index = list(self)
        index[axis_index] += step
        return CellId(*index)

    def __str__(self):
        return f"({self.i},{self.j},{self.k})"


class FaceRef(NamedTuple):
    """One side of one unit face of a cell. The '+' side is the face at local coordinate 1."""
    cell: CellId
    axis: str
    side: str

    @property
    def axis_index(self) -> int:
        return AXES.index(self.axis)

    @property
    def normal_coordinate(self) -> int:
        """The local coordinate of the face along its axis."""
        return 1 if self.side == "+" else 0

    @property
    def neighbour(self) -> CellId:
        """The lattice cell on the other side of the face."""
        return self.cell.shifted(self.axis_index, 1 if self.side == "+" else -1)

    def twin(self) -> "FaceRef":
        """The same geometric face seen from the neighbouring cell."""
        return FaceRef(self.neighbour, self.axis, _opposite(self.side))

    def geometric(self) -> "FaceRef":
        """The canonical name of the geometric face, which is always a '+' side."""
        return self if self.side == "+" else self.twin()

    def __str__(self):
        return f"cell={self.cell} {self.side}{self.axis}"


class FacePairing(NamedTuple):
    a: FaceRef
    b: FaceRef


class RedPart(NamedTuple):
    polygon: PolygonType
    target_face: FaceRef
    target_polygon: PolygonType


class GatedFace(NamedTuple):
    face: FaceRef
    green: Tuple[PolygonType, ...] = ()
    red: Tuple[RedPart, ...] = ()


@dataclass(frozen=True)
class SplittingEdge:
    """A cube edge or a boundary edge of a coloured polygon.

    Attributes:
        kind: Either 'cube-edge' or 'face-edge'.
        direction: The ambient axis ('x', 'y' or 'z') the edge runs along, None for oblique face edges.
        support: The two ambient end points of the edge.
        face: The geometric face containing a face edge.
        coefficients: The primitive integers (c1, c2, c3) of the line c1 * u + c2 * w = c3
            in the face-local coordinates of a face edge.
        regular: Whether the transport around a cube edge is continuous: the four cubes around it
            close up after one full turn through whole identifications. The flow crosses regular
            edges like any interior point.
    """
    kind: str
    direction: Optional[str]
    support: Tuple[AmbientPoint, AmbientPoint]
    face: Optional[FaceRef] = None
    coefficients: Optional[Tuple[int, int, int]] = None
    regular: bool = False

    def __str__(self):
        start, stop = (tuple(str(val) for val in point) for point in self.support)
        return f"{self.kind} {self.direction or 'oblique'} ({', '.join(start)}) -> ({', '.join(stop)})"


class VertexOccurrence(NamedTuple):
    """One sector of a surface vertex: a corner of a square or a point inside a square side.

    The quadrants are the closed-open quarter turns [q * pi / 2, (q + 1) * pi / 2) of directions
    that leave the vertex into this cell.
    """
    cell: CellId
    local: Tuple[Fraction, Fraction]
    quadrants: Tuple[int, ...]


@dataclass(frozen=True)
class Vertex:
    """A vertex of a polysquare surface.

    Attributes:
        index: The index of the vertex in `Manifold.vertices`.
        quarter_turns: The cone angle in units of pi / 2.
        marked: Whether the vertex was declared singular in the description.
        occurrences: The sectors making up the neighbourhood of the vertex.
    """
    index: int
    quarter_turns: int
    marked: bool
    occurrences: Tuple[VertexOccurrence, ...]

    @property
    def cone_angle(self) -> float:
        return self.quarter_turns * pi / 2

    @property
    def singular(self) -> bool:
        return self.marked or self.quarter_turns != 4

    @property
    def ambient_points(self) -> Tuple[AmbientPoint, ...]:
        return tuple(sorted({
            tuple(Fraction(c) + x for c, x in zip(occ.cell[:2], occ.local)) for occ in self.occurrences
        }))

    @property
    def torus_points(self) -> Tuple[Tuple[Fraction, Fraction], ...]:
        """The images of the vertex under the modulo 1 projection."""
        return tuple(sorted({tuple(x % 1 for x in occ.local) for occ in self.occurrences}))


@dataclass(frozen=True)
class ManifoldPoint:
    """A point of a manifold, given by its cell and local coordinates in the closed unit cube.

    A local coordinate of 1 names a point on the '+' face of the cell.
    """
    cell: CellId
    local: Tuple[Any, ...]

    def __post_init__(self):
        if not isinstance(self.cell, CellId):
            object.__setattr__(self, "cell", CellId(*self.cell))
        local = tuple(self.local)
        if len(local) not in (2, 3):
            raise ValueError(f"A manifold point needs 2 or 3 local coordinates, got {len(local)}.")
        if any(val < 0 or val > 1 for val in local):
            raise ValueError(f"Local coordinates must lie in [0, 1], got {local}.")
        object.__setattr__(self, "local", local)

    @property
    def dim(self) -> int:
        return len(self.local)

    @property
    def ambient(self) -> Tuple[Any, ...]:
        return tuple(c + x for c, x in zip(self.cell[:self.dim], self.local))


class Portal(NamedTuple):
    """A region of a face side together with the face side it is identified with."""
    region: PolygonType
    target: FaceRef
    kind: str
    whole: bool
    shape: Any = None

    def contains(self, tangential: Sequence[Any]) -> bool:
        if self.whole:
            return True
        if len(self.region[0]) == 1:
            return self.region[0][0] <= tangential[0] <= self.region[1][0]
        return self.shape.covers(Point(float(tangential[0]), float(tangential[1])))


@dataclass
class ManifoldDescription:
    """The parsed content of a manifold description document."""
    dim: int
    cells: List[CellId]
    pairings: List[FacePairing] = field(default_factory=list)
    wraparound: bool = False
    gated_faces: List[GatedFace] = field(default_factory=list)
    marked_points: List[AmbientPoint] = field(default_factory=list)
    name: str = "manifold"
    source: Optional[str] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the description to the JSON document format."""
        def face_to_dict(face):
            return {"cell": list(face.cell[:3]), "axis": face.axis, "side": face.side}

        def polygon_to_list(polygon):
            return [[str(val) for val in point] for point in polygon]

        return {
            "name": self.name,
            "dim": self.dim,
            "cells": [list(cell) for cell in self.cells],
            "pairings": [{"a": face_to_dict(p.a), "b": face_to_dict(p.b)} for p in self.pairings],
            "wraparound": self.wraparound,
            "gated_faces": [
                {
                    "face": face_to_dict(gated.face),
                    "green": [polygon_to_list(poly) for poly in gated.green],
                    "red": [
                        {
                            "polygon": polygon_to_list(red.polygon),
                            "target_face": face_to_dict(red.target_face),
                            "target_polygon": polygon_to_list(red.target_polygon),
                        } for red in gated.red
                    ],
                } for gated in self.gated_faces
            ],
            "marked_points": [[str(val) for val in point] for point in self.marked_points],
        }

    def line_of(self, path: Optional[Tuple[Union[str, int], ...]]) -> Optional[int]:
        """The line of the entry at `path` in the source document, if the source is known."""
        if self.source is None or not path:
            return None
        return _locate_line(self.source, path)


#
# Description parsing
#


_DESCRIPTION_KEYS = {"name", "dim", "cells", "pairings", "wraparound", "gated_faces", "marked_points"}


def _skip_whitespace(text, pos):
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


def _locate_line(text, path):
    decoder = json.JSONDecoder()
    pos = _skip_whitespace(text, 0)
    try:
        for key in path:
            if isinstance(key, str):
                if text[pos] != "{":
                    return None
                pos = _skip_whitespace(text, pos + 1)
                while True:
                    if text[pos] == "}":
                        return None
                    member, pos = decoder.raw_decode(text, pos)
                    pos = _skip_whitespace(text, pos)
                    pos = _skip_whitespace(text, pos + 1)
                    if member == key:
                        break
                    _, pos = decoder.raw_decode(text, pos)
                    pos = _skip_whitespace(text, pos)
                    if text[pos] == ",":
                        pos = _skip_whitespace(text, pos + 1)
            else:
                if text[pos] != "[":
                    return None
                pos = _skip_whitespace(text, pos + 1)
                for _ in range(key):
                    _, pos = decoder.raw_decode(text, pos)
                    pos = _skip_whitespace(text, pos)
                    if text[pos] != ",":
                        return None
                    pos = _skip_whitespace(text, pos + 1)
    except (ValueError, IndexError):
        return None
    return text.count("\n", 0, pos) + 1


def _parse_face(data, dim, path):
    if not isinstance(data, dict) or set(data) != {"cell", "axis", "side"}:
        raise DescriptionError("A face must be an object with the fields 'cell', 'axis' and 'side'.", path)
    cell = _parse_cell(data["cell"], dim, path + ("cell",))
    axis, side = data["axis"], data["side"]
    if axis not in AXES[:dim]:
        raise DescriptionError(f"Invalid axis {axis} for a {dim}d manifold, expected one of {AXES[:dim]}.", path)
    if side not in SIDES:
        raise DescriptionError(f"Invalid side {side}, expected one of {SIDES}.", path)
    return FaceRef(cell, axis, side)


def _parse_cell(data, dim, path):
    if not isinstance(data, (list, tuple)) or len(data) not in (dim, 3) or\
            not all(isinstance(val, int) and not isinstance(val, bool) for val in data):
        raise DescriptionError(f"A cell must be a list of {dim} or 3 integers, got {data}.", path)
    cell = CellId(*data)
    if dim == 2 and cell.k != 0:
        raise DescriptionError(f"Cells of a surface must have k = 0, got {cell}.", path)
    return cell


def _parse_polygon(data, dim, path):
    if not isinstance(data, (list, tuple)):
        raise DescriptionError(f"A polygon must be a list of points, got {data}.", path)
    try:
        if dim == 2:
            points = [tuple(as_fraction(val) for val in (point if isinstance(point, list) else [point])) for point in data]
        else:
            points = [tuple(as_fraction(val) for val in point) for point in data]
    except (ValueError, TypeError) as e:
        raise DescriptionError(str(e), path)
    try:
        return normalize_polygon(points)
    except ValueError as e:
        raise DescriptionError(str(e), path)


def parse_description(data: Dict[str, Any], source: Optional[str] = None) -> ManifoldDescription:
    """Parse a manifold description document.

    Args:
        data: The decoded JSON document.
        source: The text of the document, used to anchor errors to line numbers.

    Returns:
        The description.
    """
    def fail(message, path=None):
        line = None if (source is None or path is None) else _locate_line(source, path)
        raise DescriptionError(message, path, line)

    if not isinstance(data, dict):
        fail("A manifold description must be a JSON object.")
    unknown = set(data) - _DESCRIPTION_KEYS
    if unknown:
        fail(f"Unknown fields in manifold description: {sorted(unknown)}.", (sorted(unknown)[0],))
    if "dim" not in data or "cells" not in data:
        fail("A manifold description needs the fields 'dim' and 'cells'.")

    dim = data["dim"]
    if dim not in (2, 3):
        fail(f"The dimension must be 2 or 3, got {dim}.", ("dim",))

    try:
        cells = [_parse_cell(cell, dim, ("cells", i)) for i, cell in enumerate(data["cells"])]
        pairings = []
        for i, pairing in enumerate(data.get("pairings", [])):
            if not isinstance(pairing, dict) or set(pairing) != {"a", "b"}:
                raise DescriptionError("A pairing must be an object with the fields 'a' and 'b'.", ("pairings", i))
            pairings.append(FacePairing(
                _parse_face(pairing["a"], dim, ("pairings", i, "a")),
                _parse_face(pairing["b"], dim, ("pairings", i, "b")),
            ))

        gated_faces = []
        for i, gated in enumerate(data.get("gated_faces", [])):
            path = ("gated_faces", i)
            if not isinstance(gated, dict) or not set(gated) <= {"face", "green", "red"} or "face" not in gated:
                raise DescriptionError("A gated face needs the field 'face' and optionally 'green' and 'red'.", path)
            face = _parse_face(gated["face"], dim, path + ("face",))
            green = tuple(
                _parse_polygon(poly, dim, path + ("green", j)) for j, poly in enumerate(gated.get("green", []))
            )
            red = []
            for j, part in enumerate(gated.get("red", [])):
                red_path = path + ("red", j)
                if not isinstance(part, dict) or set(part) != {"polygon", "target_face", "target_polygon"}:
                    raise DescriptionError(
                        "A red part needs the fields 'polygon', 'target_face' and 'target_polygon'.", red_path
                    )
                red.append(RedPart(
                    _parse_polygon(part["polygon"], dim, red_path + ("polygon",)),
                    _parse_face(part["target_face"], dim, red_path + ("target_face",)),
                    _parse_polygon(part["target_polygon"], dim, red_path + ("target_polygon",)),
                ))
            gated_faces.append(GatedFace(face, green, tuple(red)))

        marked_points = []
        for i, point in enumerate(data.get("marked_points", [])):
            if dim != 2:
                raise DescriptionError("Marked points are only supported for surfaces.", ("marked_points", i))
            if not isinstance(point, list) or len(point) != 2:
                raise DescriptionError(f"A marked point needs two coordinates, got {point}.", ("marked_points", i))
            try:
                marked_points.append(tuple(as_fraction(val) for val in point))
            except ValueError as e:
                raise DescriptionError(str(e), ("marked_points", i))
    except DescriptionError as e:
        if source is not None and e.path is not None:
            e.line = _locate_line(source, e.path)
        raise

    wraparound = data.get("wraparound", False)
    if not isinstance(wraparound, bool):
        fail(f"The field 'wraparound' must be a boolean, got {wraparound}.", ("wraparound",))

    return ManifoldDescription(
        dim=dim, cells=cells, pairings=pairings, wraparound=wraparound, gated_faces=gated_faces,
        marked_points=marked_points, name=str(data.get("name", "manifold")), source=source,
    )


def load_description(path: Union[str, os.PathLike]) -> ManifoldDescription:
    """Load a manifold description from a JSON file.

    Args:
        path: The file path.

    Returns:
        The description.
    """
    with open(path) as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DescriptionError(f"Invalid JSON: {e.msg}", line=e.lineno)
    description = parse_description(data, source=text)
    if "name" not in data:
        description.name = os.path.splitext(os.path.basename(path))[0]
    return description


def describe(manifold: "Manifold") -> Dict[str, Any]:
    """Return the description document of a manifold."""
    return manifold.description.to_dict()


#
# Polygons
#


def _polygon_area(polygon):
    if len(polygon[0]) == 1:
        return polygon[1][0] - polygon[0][0]
    area = Fraction(0)
    for (x0, y0), (x1, y1) in zip(polygon, polygon[1:] + polygon[:1]):
        area += x0 * y1 - x1 * y0
    return area / 2


def normalize_polygon(points: Sequence[Sequence[Any]]) -> PolygonType:
    """Bring a polygon into canonical form.

    Polygons on square faces are returned counter-clockwise starting at the smallest vertex.
    Intervals on the sides of squares are returned as ((lo,), (hi,)).

    Args:
        points: The vertices of the polygon.

    Returns:
        The normalized polygon.
    """
    points = [tuple(Fraction(val) for val in point) for point in points]
    if points and len(points[0]) == 1:
        if len(points) != 2 or points[0] == points[1]:
            raise ValueError(f"An interval needs two distinct end points, got {points}.")
        return tuple(sorted(points))
    if len(points) < 3 or any(len(point) != 2 for point in points):
        raise ValueError(f"A polygon needs at least three points in the plane, got {points}.")
    if points[0] == points[-1]:
        points = points[:-1]
    area = _polygon_area(tuple(points))
    if area == 0:
        raise ValueError(f"The polygon {points} has zero area.")
    if area < 0:
        points = points[::-1]
    start = points.index(min(points))
    return tuple(points[start:] + points[:start])


def polygon_area(polygon: PolygonType) -> Fraction:
    """The exact area (or length, for intervals) of a normalized polygon."""
    return _polygon_area(polygon)


def _unit_region(dim):
    if dim == 2:
        return ((Fraction(0),), (Fraction(1),))
    zero, one = Fraction(0), Fraction(1)
    return ((zero, zero), (one, zero), (one, one), (zero, one))


def _make_portal(region, target, kind, dim):
    whole = region == _unit_region(dim)
    shape = None
    if dim == 3 and not whole:
        shape = prep(Polygon([(float(x), float(y)) for x, y in region]))
    return Portal(region, target, kind, whole, shape)


def _check_tiling(face, regions, dim):
    if dim == 2:
        intervals = sorted(regions)
        position = Fraction(0)
        for lo, hi in ((r[0][0], r[1][0]) for r in intervals):
            if lo != position:
                raise PolygonTilingGap(f"{face}: the coloured intervals do not tile the side, gap or overlap at {position}.")
            position = hi
        if position != 1:
            raise PolygonTilingGap(f"{face}: the coloured intervals do not tile the side, gap at {position}.")
        return

    for region in regions:
        if any(val < 0 or val > 1 for point in region for val in point):
            raise PolygonTilingGap(f"{face}: the polygon {_format_polygon(region)} leaves the unit face.")
    total = sum((_polygon_area(region) for region in regions), Fraction(0))
    union = unary_union([Polygon([(float(x), float(y)) for x, y in region]) for region in regions])
    uncovered = box(0.0, 0.0, 1.0, 1.0).difference(union).area
    if total != 1 or uncovered > 1e-12:
        raise PolygonTilingGap(
            f"{face}: the coloured polygons do not tile the face (total area {total}, uncovered area {uncovered:.3g})."
        )


def _format_polygon(polygon):
    return "[" + ", ".join("(" + ", ".join(str(val) for val in point) + ")" for point in polygon) + "]"


def _polygon_edges(polygon):
    """The edges of a square-face polygon that do not lie on the boundary of the face."""
    edges = []
    for p, q in zip(polygon, polygon[1:] + polygon[:1]):
        on_boundary = any(p[d] == q[d] and p[d] in (0, 1) for d in range(2))
        if not on_boundary:
            edges.append(tuple(sorted((p, q))))
    return edges


#
# The manifold
#


def _opposite(side):
    return "+" if side == "-" else "-"


def _tangential_axes(axis_index, dim):
    return tuple(b for b in range(dim) if b != axis_index)


@dataclass(frozen=True)
class Manifold:
    """A validated polysquare translation surface or polycube translation 3-manifold.

    Create it with `build_manifold`. The manifold is immutable and can be shared by concurrent traces.

    Attributes:
        dim: The dimension, 2 for surfaces and 3 for 3-manifolds.
        cells: The atomic squares or cubes.
        pairings: The whole-face pairings, both the declared ones and the ones generated by wraparound.
        gated: The coloured faces.
        splitting_edges: The cube edges and the face edges.
        name: The name of the manifold.
        vertices: The vertices of a surface with their cone angles. Empty for 3-manifolds.
        harmonized: Whether the face edges were harmonized over all faces of each axis.
        description: The description the manifold was built from.
    """
    dim: int
    cells: Tuple[CellId, ...]
    pairings: Tuple[FacePairing, ...]
    gated: Tuple[GatedFace, ...]
    splitting_edges: Tuple[SplittingEdge, ...]
    name: str
    vertices: Tuple[Vertex, ...]
    harmonized: bool
    description: ManifoldDescription = field(repr=False, compare=False)
    _portals: Dict[FaceRef, Tuple[Portal, ...]] = field(repr=False, compare=False)
    _origins: Dict[FaceRef, str] = field(repr=False, compare=False)
    _face_edges: Dict[FaceRef, Tuple[Tuple[Tuple[AmbientPoint, AmbientPoint], SplittingEdge], ...]] = field(
        repr=False, compare=False
    )
    _cube_edges: Dict[Tuple[AmbientPoint, AmbientPoint], SplittingEdge] = field(repr=False, compare=False)
    _special: Dict[FaceRef, Tuple[Tuple[Fraction, int], ...]] = field(repr=False, compare=False)
    _corners: Dict[Tuple[CellId, int, int], int] = field(repr=False, compare=False)

    @property
    def s(self) -> int:
        """The number of atomic cells."""
        return len(self.cells)

    @property
    def volume(self) -> int:
        """The total volume (area for surfaces), which equals the number of cells."""
        return len(self.cells)

    @property
    def axes(self) -> Tuple[str, ...]:
        return AXES[:self.dim]

    @property
    def singular_vertices(self) -> Tuple[Vertex, ...]:
        return tuple(vertex for vertex in self.vertices if vertex.singular)

    @property
    def face_edges(self) -> Tuple[SplittingEdge, ...]:
        return tuple(edge for edge in self.splitting_edges if edge.kind == FACE_EDGE)

    def has_cell(self, cell: CellId) -> bool:
        return cell in self._cell_set

    @cached_property
    def _cell_set(self):
        return frozenset(self.cells)

    def faces(self) -> Iterable[FaceRef]:
        """Iterate over all face sides of all cells."""
        for cell in self.cells:
            for axis in self.axes:
                for side in SIDES:
                    yield FaceRef(cell, axis, side)

    def portals(self, face: FaceRef) -> Tuple[Portal, ...]:
        """The identifications of a face side."""
        return self._portals[face]

    def face_census(self) -> Dict[FaceRef, str]:
        """Classify every face side as 'interior', 'gated' or 'paired'."""
        return dict(self._origins)

    def partner(self, face: FaceRef) -> FaceRef:
        """The face side that a whole face is identified with.

        Raises a ValueError for faces that are split into several coloured regions.
        """
        targets = {portal.target for portal in self._portals[face]}
        if len(targets) != 1:
            raise ValueError(f"The face {face} is identified with several faces: {sorted(map(str, targets))}.")
        return next(iter(targets))

    def cell_at(self, ambient: Sequence[Any]) -> ManifoldPoint:
        """Construct the manifold point at an ambient position of the region.

        Points on a face shared by two cells are assigned to the cell with the larger index.
        """
        if len(ambient) != self.dim:
            raise ValueError(f"Expected {self.dim} ambient coordinates, got {len(ambient)}.")
        floors = [int(val // 1) for val in ambient]
        candidates = [floors]
        for axis_index, val in enumerate(ambient):
            if val == floors[axis_index]:
                candidates = candidates + [
                    [c - 1 if a == axis_index else c for a, c in enumerate(cand)] for cand in candidates
                ]
        for cand in candidates:
            cell = CellId(*cand) if self.dim == 3 else CellId(cand[0], cand[1])
            if cell in self._cell_set:
                local = tuple(val - c for val, c in zip(ambient, cand))
                return ManifoldPoint(cell, local)
        raise ValueError(f"The ambient point {tuple(ambient)} does not lie in any cell of {self.name}.")

    def corner_vertex(self, cell: CellId, sx: int, sy: int) -> Vertex:
        return self.vertices[self._corners[(cell, sx, sy)]]

    def special_points(self, face: FaceRef) -> Tuple[Tuple[Fraction, Vertex], ...]:
        """The vertices lying inside a side of a square, with their position along the side."""
        return tuple((u, self.vertices[index]) for u, index in self._special.get(face, ()))

    def cube_edge(self, start: Sequence[int], direction: int) -> SplittingEdge:
        """The lattice edge starting at an ambient lattice point along an axis."""
        start = tuple(Fraction(val) for val in start)
        stop = tuple(val + 1 if a == direction else val for a, val in enumerate(start))
        return self._cube_edges[(start, stop)]

    def _cube_edges_on_face(self, face, tangential, tol):
        a = face.axis_index
        tangent = _tangential_axes(a, self.dim)
        base = [Fraction(c) for c in face.cell[:self.dim]]
        base[a] += face.normal_coordinate
        ends = []
        for val in tangential:
            if val <= tol:
                ends.append(0)
            elif val >= 1 - tol:
                ends.append(1)
            else:
                ends.append(None)

        edges = []
        for along, across in ((tangent[1], 0), (tangent[0], 1)):
            if ends[across] is None:
                continue
            start = list(base)
            start[tangent[across]] += ends[across]
            edges.append(self.cube_edge(start, along))
        if len(edges) == 2:
            # a cube vertex also lies on the edge that leaves the face
            start = list(base)
            for b, end in zip(tangent, ends):
                start[b] += end
            if face.normal_coordinate == 1:
                start[a] -= 1
            edges.append(self.cube_edge(start, a))
        return edges

    def pass_through(
        self,
        face: FaceRef,
        tangential: Sequence[Any],
        bias: Optional[Sequence[Any]] = None,
        tolerance: float = DEFAULT_TOLERANCE,
    ) -> Portal:
        """Find the identification that a geodesic crossing a face side at a point uses.

        Args:
            face: The face side that is crossed.
            tangential: The face-local coordinates of the crossing point.
            bias: The tangential velocity, used to choose the side of a regular vertex inside a square side.
            tolerance: The geometric tolerance in float mode. Exact coordinates are compared exactly.

        Returns:
            The portal.

        Raises:
            OnSplittingEdge: If the point lies on a face edge, on a cube edge that is not regular
                or on a singular vertex.
        """
        tol = 0 if is_exact(tangential) else tolerance
        portals = self._portals[face]

        if self.dim == 2:
            (u,) = tangential
            a = face.axis_index
            if u <= tol or u >= 1 - tol:
                end = 0 if u <= tol else 1
                corner = (face.cell, face.normal_coordinate, end) if a == 0 else (face.cell, end, face.normal_coordinate)
                vertex = self.vertices[self._corners[corner]]
                if vertex.singular:
                    raise OnSplittingEdge(f"Singular vertex {vertex.index} at {face}, u={u}.", vertex=vertex)
                return next(portal for portal in portals if portal.contains((Fraction(end),)))
            for s, index in self._special.get(face, ()):
                if abs(u - s) <= tol:
                    vertex = self.vertices[index]
                    if vertex.singular:
                        raise OnSplittingEdge(f"Singular vertex {vertex.index} at {face}, u={u}.", vertex=vertex)
                    direction = 0 if bias is None else bias[0]
                    for portal in portals:
                        lo, hi = portal.region[0][0], portal.region[1][0]
                        if (direction > 0 and lo <= s < hi) or (direction < 0 and lo < s <= hi) or\
                                (direction == 0 and lo <= s <= hi):
                            return portal
            return next(portal for portal in portals if portal.contains((u,)))

        u, w = tangential
        for edge in self._cube_edges_on_face(face, tangential, tol):
            if not edge.regular:
                raise OnSplittingEdge(f"Cube edge hit at {face}, ({u}, {w}).", edge=edge)
        self._check_face_edges(face.geometric(), face, tangential, tol)
        for portal in portals:
            if portal.contains(tangential):
                if portal.target.geometric() != face.geometric():
                    self._check_face_edges(portal.target.geometric(), face, tangential, tol)
                return portal
        raise AssertionError(f"No portal of {face} contains {tuple(tangential)}.")

    def _check_face_edges(self, geometric_face, face, tangential, tol):
        u, w = tangential
        for (p, q), edge in self._face_edges.get(geometric_face, ()):
            if _on_segment(u, w, p, q, tol):
                raise OnSplittingEdge(f"Face edge hit at {face}, ({u}, {w}): {edge}.", edge=edge)


def _on_segment(u, w, p, q, tol):
    du, dw = q[0] - p[0], q[1] - p[1]
    ru, rw = u - p[0], w - p[1]
    length_sq = du * du + dw * dw
    projection = ru * du + rw * dw
    if tol == 0:
        return ru * dw - rw * du == 0 and 0 <= projection <= length_sq
    du, dw, ru, rw = float(du), float(dw), float(ru), float(rw)
    length_sq, projection = float(length_sq), float(projection)
    lam = min(max(projection / length_sq, 0.0), 1.0)
    return ((ru - lam * du) ** 2 + (rw - lam * dw) ** 2) <= tol * tol


#
# Functionality for building a manifold
#


def _check_region_connected(cells):
    cell_set = set(cells)
    seen = {cells[0]}
    stack = [cells[0]]
    while stack:
        cell = stack.pop()
        for axis_index, step in product(range(3), (-1, 1)):
            neighbour = cell.shifted(axis_index, step)
            if neighbour in cell_set and neighbour not in seen:
                seen.add(neighbour)
                stack.append(neighbour)
    if len(seen) != len(cells):
        missing = sorted(set(cells) - seen)
        raise DisconnectedRegion(
            f"The cells {', '.join(map(str, missing))} are not joined to {cells[0]} by a chain of cells with common faces."
        )


def _check_traversable(cells, portals):
    seen = {cells[0]}
    stack = [cells[0]]
    adjacency = {}
    for face, face_portals in portals.items():
        for portal in face_portals:
            if _polygon_area(portal.region) > 0:
                adjacency.setdefault(face.cell, set()).add(portal.target.cell)
    while stack:
        cell = stack.pop()
        for neighbour in adjacency.get(cell, ()):
            if neighbour not in seen:
                seen.add(neighbour)
                stack.append(neighbour)
    if len(seen) != len(cells):
        missing = sorted(set(cells) - seen)
        raise DisconnectedRegion(
            f"The cells {', '.join(map(str, missing))} cannot be reached from {cells[0]} through the identified faces."
        )


def _wraparound_pairings(dim, cell_set, claimed):
    pairings = []
    for axis_index in range(dim):
        axis = AXES[axis_index]
        lines = {}
        for cell in sorted(cell_set):
            for side in SIDES:
                face = FaceRef(cell, axis, side)
                if face in claimed or face.neighbour in cell_set:
                    continue
                key = tuple(c for a, c in enumerate(cell) if a != axis_index)
                lines.setdefault(key, {"+": [], "-": []})[side].append(face)
        for key in sorted(lines):
            plus_faces = sorted(lines[key]["+"], key=lambda f: f.cell[axis_index])
            minus_faces = sorted(lines[key]["-"], key=lambda f: f.cell[axis_index])
            free = list(minus_faces)
            for face in plus_faces:
                if not free:
                    break
                position = face.cell[axis_index]
                further = [f for f in free if f.cell[axis_index] > position]
                partner = further[0] if further else free[0]
                free.remove(partner)
                pairings.append(FacePairing(face, partner))
    return pairings


def _collect_claims(description, cell_set):
    dim = description.dim
    unit = _unit_region(dim)
    claims: Dict[FaceRef, List[Tuple[PolygonType, FaceRef, str, str, Any]]] = {}

    def claim(face, region, target, kind, origin, path):
        entries = claims.setdefault(face, [])
        if any(e[0] == region and e[1] == target and e[2] == kind for e in entries):
            return
        entries.append((region, target, kind, origin, path))

    def check_face(face, path):
        if face.cell not in cell_set:
            raise GeometryError(f"The face {face} belongs to a cell that is not part of the manifold.", path)

    for g, gated in enumerate(description.gated_faces):
        path = ("gated_faces", g)
        face = gated.face
        check_face(face, path)
        for green in gated.green:
            if face.neighbour not in cell_set:
                raise UnpairedBoundaryFace(f"{face}: green polygon on a face without a neighbouring cell.", path)
            claim(face, green, face.twin(), GATE_CROSSING, "gated", path)
            claim(face.twin(), green, face, GATE_CROSSING, "gated", path)
        for r, red in enumerate(gated.red):
            red_path = path + ("red", r)
            target = red.target_face
            check_face(target, red_path)
            if target.axis != face.axis or target.side == face.side:
                raise IncongruentRedPairing(
                    f"{face}: the red target {target} must be a face with opposite inward normal.", red_path
                )
            if red.polygon != red.target_polygon:
                raise IncongruentRedPairing(
                    f"{face}: the red polygon {_format_polygon(red.polygon)} is not a translate of "
                    f"{_format_polygon(red.target_polygon)} on {target}.", red_path
                )
            claim(face, red.polygon, target, PAIRING_TRANSPORT, "gated", red_path)
            claim(target, red.polygon, face, PAIRING_TRANSPORT, "gated", red_path)

    pairings = []
    for p, pairing in enumerate(description.pairings):
        path = ("pairings", p)
        check_face(pairing.a, path)
        check_face(pairing.b, path)
        if pairing.a.axis != pairing.b.axis or pairing.a.side == pairing.b.side:
            raise IncongruentRedPairing(
                f"The pairing {pairing.a} <-> {pairing.b} must join faces with opposite inward normals.", path
            )
        for face in (pairing.a, pairing.b):
            if face in claims:
                raise AmbiguousFace(f"{face} is identified more than once.", path)
        claim(pairing.a, unit, pairing.b, PAIRING_TRANSPORT, "paired", path)
        claim(pairing.b, unit, pairing.a, PAIRING_TRANSPORT, "paired", path)
        pairings.append(pairing)

    if description.wraparound:
        for pairing in _wraparound_pairings(dim, cell_set, claims):
            claim(pairing.a, unit, pairing.b, PAIRING_TRANSPORT, "paired", None)
            claim(pairing.b, unit, pairing.a, PAIRING_TRANSPORT, "paired", None)
            pairings.append(pairing)

    for cell in sorted(cell_set):
        for axis, side in product(AXES[:dim], SIDES):
            face = FaceRef(cell, axis, side)
            if face not in claims and face.neighbour in cell_set:
                claim(face, unit, face.twin(), INTERIOR_CROSSING, "interior", None)

    return claims, pairings


def _face_census(claims, cells, dim):
    unit = _unit_region(dim)
    portals, origins = {}, {}
    for cell in cells:
        for axis, side in product(AXES[:dim], SIDES):
            face = FaceRef(cell, axis, side)
            entries = claims.get(face)
            if not entries:
                raise UnpairedBoundaryFace(str(face))
            if len(entries) > 1 and any(e[0] == unit for e in entries):
                raise AmbiguousFace(f"{face} is identified more than once.", entries[0][4])
            _check_tiling(face, [e[0] for e in entries], dim)
            portals[face] = tuple(_make_portal(region, target, kind, dim) for region, target, kind, _, _ in entries)
            origin_set = {e[3] for e in entries}
            origins[face] = "gated" if "gated" in origin_set else origin_set.pop()
    return portals, origins


def _check_involution(portals):
    for face, face_portals in portals.items():
        for portal in face_portals:
            back = portals.get(portal.target, ())
            if not any(b.region == portal.region and b.target == face for b in back):
                raise NonInvolutivePairing(
                    f"{face} is identified with {portal.target} on {_format_polygon(portal.region)}, "
                    "but not the other way around."
                )


def _face_to_ambient(geometric_face, point, dim):
    a = geometric_face.axis_index
    ambient = [Fraction(c) for c in geometric_face.cell[:dim]]
    ambient[a] += 1
    for b, val in zip(_tangential_axes(a, dim), point):
        ambient[b] += val
    return tuple(ambient)


def _face_edge(geometric_face, segment, dim):
    p, q = segment
    du, dw = q[0] - p[0], q[1] - p[1]
    tangent = _tangential_axes(geometric_face.axis_index, dim)
    if dw == 0:
        direction = "xyz"[tangent[0]]
    elif du == 0:
        direction = "xyz"[tangent[1]]
    else:
        direction = None
    c1, c2 = dw, -du
    c3 = c1 * p[0] + c2 * p[1]
    coefficients = primitive_integers((c1, c2, c3))
    support = (_face_to_ambient(geometric_face, p, dim), _face_to_ambient(geometric_face, q, dim))
    return SplittingEdge(FACE_EDGE, direction, support, geometric_face, coefficients)


def _collect_face_segments(portals, dim):
    segments = {}
    if dim == 2:
        return segments
    for face, face_portals in portals.items():
        key = face.geometric()
        bucket = segments.setdefault(key, set())
        for portal in face_portals:
            if not portal.whole:
                bucket.update(_polygon_edges(portal.region))
    return segments


def _cube_edges(cells, dim):
    edges = {}
    for cell in cells:
        origin = tuple(Fraction(c) for c in cell[:dim])
        for direction in range(dim):
            others = _tangential_axes(direction, dim)
            for offsets in product((0, 1), repeat=len(others)):
                start = list(origin)
                for b, offset in zip(others, offsets):
                    start[b] += offset
                stop = list(start)
                stop[direction] += 1
                support = (tuple(start), tuple(stop))
                if support not in edges:
                    edges[support] = SplittingEdge(CUBE_EDGE, "xyz"[direction], support)
    return edges


def _closes_around(cell, along, corner, portals):
    """@private
    Walk once around a cube edge, crossing the two faces of each cube that contain it.
    """
    tangent = _tangential_axes(along, 3)
    current, ends = cell, list(corner)
    for step in range(4):
        index = step % 2
        face = FaceRef(current, AXES[tangent[index]], SIDES[ends[index]])
        face_portals = portals.get(face, ())
        if len(face_portals) != 1 or not face_portals[0].whole:
            return False
        target = face_portals[0].target
        if target.axis != face.axis or target.side == face.side:
            return False
        current = target.cell
        ends[index] = target.normal_coordinate
    return current == cell and tuple(ends) == tuple(corner)


def _mark_regular_edges(cube_edges, cells, portals, dim):
    if dim == 2:
        return cube_edges
    irregular = set()
    for cell in cells:
        origin = tuple(Fraction(c) for c in cell)
        for along in range(3):
            tangent = _tangential_axes(along, 3)
            for corner in product((0, 1), repeat=2):
                if _closes_around(cell, along, corner, portals):
                    continue
                start = list(origin)
                for b, end in zip(tangent, corner):
                    start[b] += end
                stop = list(start)
                stop[along] += 1
                irregular.add((tuple(start), tuple(stop)))
    return {
        support: edge if support in irregular else replace(edge, regular=True) for support, edge in cube_edges.items()
    }


def _build_face_edges(segments, dim):
    face_edges = {}
    for key in sorted(segments):
        face_edges[key] = tuple(
            (segment, _face_edge(key, segment, dim)) for segment in sorted(segments[key])
        )
    return face_edges


def _splitting_edges(cube_edges, face_edges):
    edges = [cube_edges[key] for key in sorted(cube_edges)]
    for key in sorted(face_edges):
        edges.extend(edge for _, edge in face_edges[key])
    return tuple(edges)


def _quadrants_of_face(face):
    if face.axis == "X":
        return (3, 0) if face.side == "-" else (1, 2)
    return (0, 1) if face.side == "-" else (2, 3)


def _local_of_face_point(face, u):
    n = Fraction(face.normal_coordinate)
    return (n, u) if face.axis == "X" else (u, n)


def _vertex_census(cells, portals, marked_points):
    special = {face: set() for face in portals}
    for face, face_portals in portals.items():
        for portal in face_portals:
            for u in (portal.region[0][0], portal.region[1][0]):
                if 0 < u < 1:
                    special[face].add(u)
                    special[portal.target].add(u)

    marked_nodes = []
    for point in marked_points:
        found = False
        for face in portals:
            a = face.axis_index
            b = 1 - a
            plane = face.cell[a] + face.normal_coordinate
            if point[a] != plane or not (face.cell[b] <= point[b] <= face.cell[b] + 1):
                continue
            found = True
            u = point[b] - face.cell[b]
            marked_nodes.append(("face", face, u))
            if 0 < u < 1:
                special[face].add(u)
                for portal in portals[face]:
                    if portal.region[0][0] <= u <= portal.region[1][0]:
                        special[portal.target].add(u)
        if not found:
            raise GeometryError(f"The marked point {tuple(map(str, point))} does not lie on the side of a square.")

    parent = {}

    def find(node):
        parent.setdefault(node, node)
        while parent[node] != node:
            parent[node] = parent[parent[node]]
            node = parent[node]
        return node

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb, key=repr)] = min(ra, rb, key=repr)

    quarters, occurrences = {}, {}
    for cell in cells:
        for sx, sy in product((0, 1), (0, 1)):
            node = ("corner", cell, sx, sy)
            quarters[node] = 1
            quadrant = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(sx, sy)]
            occurrences[node] = VertexOccurrence(cell, (Fraction(sx), Fraction(sy)), (quadrant,))
            union(node, ("face", FaceRef(cell, "X", SIDES[sx]), Fraction(sy)))
            union(node, ("face", FaceRef(cell, "Y", SIDES[sy]), Fraction(sx)))

    for face, face_portals in portals.items():
        for u in {Fraction(0), Fraction(1)} | special[face]:
            node = ("face", face, u)
            find(node)
            if 0 < u < 1:
                quarters[node] = 2
                occurrences[node] = VertexOccurrence(face.cell, _local_of_face_point(face, u), _quadrants_of_face(face))
            for portal in face_portals:
                if portal.region[0][0] <= u <= portal.region[1][0]:
                    union(node, ("face", portal.target, u))

    classes = {}
    for node in list(parent):
        classes.setdefault(find(node), []).append(node)
    marked_roots = {find(node) for node in marked_nodes}

    def sort_key(root):
        return min(_occurrence_key(occurrences[n]) for n in classes[root] if n in occurrences)

    roots = sorted((root for root in classes if any(n in occurrences for n in classes[root])), key=sort_key)
    vertices, node_index = [], {}
    for index, root in enumerate(roots):
        members = [n for n in classes[root] if n in occurrences]
        vertices.append(Vertex(
            index=index,
            quarter_turns=sum(quarters[n] for n in members),
            marked=root in marked_roots,
            occurrences=tuple(sorted((occurrences[n] for n in members), key=_occurrence_key)),
        ))
        for node in classes[root]:
            node_index[node] = index

    corners = {(cell, sx, sy): node_index[("corner", cell, sx, sy)] for cell in cells for sx, sy in product((0, 1), (0, 1))}
    special_points = {
        face: tuple((u, node_index[("face", face, u)]) for u in sorted(points)) for face, points in special.items() if points
    }
    return tuple(vertices), corners, special_points


def _occurrence_key(occurrence):
    return (tuple(Fraction(c) + x for c, x in zip(occurrence.cell[:2], occurrence.local)), occurrence.quadrants)


def build_manifold(description: Union[ManifoldDescription, Dict[str, Any]], harmonize: bool = True) -> Manifold:
    """Build and validate a manifold from its description.

    Args:
        description: The description, or the decoded description document.
        harmonize: Whether to harmonize the face edges, see `harmonize_splitting_edges`.

    Returns:
        The manifold.

    Raises:
        DisconnectedRegion: If the cells are not connected, or not connected through the identified faces.
        OverlappingCells: If a cell is listed twice.
        UnpairedBoundaryFace: If a face side has no identification.
        IncongruentRedPairing: If a red polygon or a pairing does not join congruent regions of opposite faces.
        PolygonTilingGap: If the coloured polygons of a face do not tile it.
    """
    if isinstance(description, dict):
        description = parse_description(description)
    dim = description.dim
    if not description.cells:
        raise DescriptionError("The manifold needs at least one cell.", ("cells",))

    seen = set()
    for i, cell in enumerate(description.cells):
        if cell in seen:
            raise OverlappingCells(f"The cell {cell} is listed more than once.", ("cells", i))
        seen.add(cell)
    cells = tuple(sorted(seen))
    _check_region_connected(list(description.cells))

    claims, pairings = _collect_claims(description, seen)
    traversable = {
        face: tuple(_make_portal(e[0], e[1], e[2], dim) for e in entries) for face, entries in claims.items()
    }
    _check_traversable(list(description.cells), traversable)
    portals, origins = _face_census(claims, cells, dim)
    _check_involution(portals)

    cube_edges = _mark_regular_edges(_cube_edges(cells, dim), cells, portals, dim)
    face_edges = _build_face_edges(_collect_face_segments(portals, dim), dim)

    if dim == 2:
        vertices, corners, special = _vertex_census(cells, portals, description.marked_points)
    else:
        vertices, corners, special = (), {}, {}

    manifold = Manifold(
        dim=dim,
        cells=cells,
        pairings=tuple(pairings),
        gated=tuple(description.gated_faces),
        splitting_edges=_splitting_edges(cube_edges, face_edges),
        name=description.name,
        vertices=vertices,
        harmonized=False,
        description=description,
        _portals=portals,
        _origins=origins,
        _face_edges=face_edges,
        _cube_edges=cube_edges,
        _special=special,
        _corners=corners,
    )
    if harmonize:
        manifold = harmonize_splitting_edges(manifold)
    return manifold


def harmonize_splitting_edges(manifold: Manifold) -> Manifold:
    """Stamp the union of the face edges of each axis onto every face of that axis.

    The colour polygons and identifications are unchanged; the harmonized edges only mark
    additional singular segments. The operation is idempotent.

    Args:
        manifold: The manifold.

    Returns:
        The manifold with harmonized face edges.
    """
    if manifold.dim == 2:
        return replace(manifold, harmonized=True)

    per_axis = {}
    for key, entries in manifold._face_edges.items():
        per_axis.setdefault(key.axis, set()).update(segment for segment, _ in entries)

    geometric_faces = {face.geometric() for face in manifold.faces()}
    segments = {}
    for key in geometric_faces:
        union = per_axis.get(key.axis)
        if union:
            segments[key] = set(union)
    face_edges = _build_face_edges(segments, manifold.dim)
    return replace(
        manifold,
        splitting_edges=_splitting_edges(manifold._cube_edges, face_edges),
        harmonized=True,
        _face_edges=face_edges,
    )


def transport(
    manifold: Manifold,
    point: ManifoldPoint,
    face: FaceRef,
    bias: Optional[Sequence[Any]] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> ManifoldPoint:
    """Move a point on a face side to the identified point on the partner face.

    Args:
        manifold: The manifold.
        point: The point, lying on `face`.
        face: The face side.
        bias: The tangential velocity, see `Manifold.pass_through`.
        tolerance: The geometric tolerance in float mode.

    Returns:
        The identified point. Its tangential coordinates are unchanged, its normal coordinate
        is on the entering side of the partner face.

    Raises:
        OnSplittingEdge: If the point is on a splitting edge.
    """
    a = face.axis_index
    if point.cell != face.cell:
        raise ValueError(f"The point in cell {point.cell} does not lie on {face}.")
    tol = 0 if is_exact(point.local) else tolerance
    if abs(point.local[a] - face.normal_coordinate) > tol:
        raise ValueError(f"The point {point.local} does not lie on {face}.")
    tangential = tuple(point.local[b] for b in _tangential_axes(a, manifold.dim))
    portal = manifold.pass_through(face, tangential, bias=bias, tolerance=tolerance)
    local = list(point.local)
    local[a] = type(point.local[a])(portal.target.normal_coordinate)
    return ManifoldPoint(portal.target.cell, tuple(local))
