"""
Named example manifolds.

The fixtures are description documents in the same JSON format that `polyflow validate`
and `geometry.load_description` read. `get_fixture` builds the manifold, `fetch_fixture`
writes the document to a folder so that it can be used from the command line.
"""

import json
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Union

from .geometry import Manifold, build_manifold

HALF = "1/2"

_UNIT_SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]
_LOWER_LEFT_QUARTER = [[0, 0], [HALF, 0], [HALF, HALF], [0, HALF]]
_L_SHAPE = [[HALF, 0], [1, 0], [1, 1], [0, 1], [0, HALF], [HALF, HALF]]


def _face(cell, axis, side):
    return {"cell": list(cell), "axis": axis, "side": side}


def _wall(cell, polygon):
    # a red barrier on the '+' X-face that sends the flow back into the same cell
    return {
        "face": _face(cell, "X", "+"),
        "red": [{"polygon": polygon, "target_face": _face(cell, "X", "-"), "target_polygon": polygon}],
    }


def torus2(marked: bool = False) -> Dict[str, Any]:
    """The unit square torus, optionally with its vertex marked as singular."""
    description = {"name": "torus2", "dim": 2, "cells": [[0, 0]], "wraparound": True}
    if marked:
        description["name"] = "torus2_marked"
        description["marked_points"] = [[0, 0]]
    return description


def torus3() -> Dict[str, Any]:
    """The one-cube 3-torus."""
    return {"name": "torus3", "dim": 3, "cells": [[0, 0, 0]], "wraparound": True}


def stacked_torus() -> Dict[str, Any]:
    """Two cubes stacked in z-direction, every lattice line closed up by wraparound."""
    return {"name": "stacked_torus", "dim": 3, "cells": [[0, 0, 0], [0, 0, 1]], "wraparound": True}


def barrier_surface() -> Dict[str, Any]:
    """Four unit squares with barriers on the vertical sides of the bottom row.

    The barriers turn the bottom row into two separate circles in x-direction,
    the top row is one circle of length two.
    """
    cells = [[0, 0], [1, 0], [0, 1], [1, 1]]
    return {
        "name": "barrier_surface", "dim": 2, "cells": cells, "wraparound": True,
        "gated_faces": [_wall([0, 0], [0, 1]), _wall([1, 0], [0, 1])],
    }


def barrier_manifold() -> Dict[str, Any]:
    """The product of `barrier_surface` with the unit circle."""
    cells = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    return {
        "name": "barrier_manifold", "dim": 3, "cells": cells, "wraparound": True,
        "gated_faces": [_wall([0, 0, 0], _UNIT_SQUARE), _wall([1, 0, 0], _UNIT_SQUARE)],
    }


def gated_pair() -> Dict[str, Any]:
    """Two cubes whose shared face is a green gate on its lower left quarter and red elsewhere."""
    left, right = [0, 0, 0], [1, 0, 0]
    return {
        "name": "gated_pair", "dim": 3, "cells": [left, right], "wraparound": True,
        "gated_faces": [
            {
                "face": _face(left, "X", "+"),
                "green": [_LOWER_LEFT_QUARTER],
                "red": [{"polygon": _L_SHAPE, "target_face": _face(left, "X", "-"), "target_polygon": _L_SHAPE}],
            },
            {
                "face": _face(right, "X", "-"),
                "red": [{"polygon": _L_SHAPE, "target_face": _face(right, "X", "+"), "target_polygon": _L_SHAPE}],
            },
            {
                "face": _face(left, "X", "-"),
                "red": [{
                    "polygon": _LOWER_LEFT_QUARTER, "target_face": _face(right, "X", "+"),
                    "target_polygon": _LOWER_LEFT_QUARTER,
                }],
            },
        ],
    }


def holed_manifold() -> Dict[str, Any]:
    """Six cubes with gaps in several lattice lines, closed up by wraparound."""
    cells = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0], [2, 1, 0], [1, 0, 1]]
    return {"name": "holed_manifold", "dim": 3, "cells": cells, "wraparound": True}


_FIXTURES: Dict[str, Callable[[], Dict[str, Any]]] = {
    "torus2": torus2,
    "torus2_marked": lambda: torus2(marked=True),
    "torus3": torus3,
    "stacked_torus": stacked_torus,
    "barrier_surface": barrier_surface,
    "barrier_manifold": barrier_manifold,
    "gated_pair": gated_pair,
    "holed_manifold": holed_manifold,
}


def fixture_names() -> List[str]:
    return sorted(_FIXTURES)


def get_fixture_description(name: str) -> Dict[str, Any]:
    """@private"""
    if name not in _FIXTURES:
        raise ValueError(f"Invalid fixture name {name}. Choose one of {fixture_names()}.")
    return _FIXTURES[name]()


def get_fixture(name: str, harmonize: bool = True) -> Manifold:
    """Build one of the named example manifolds.

    Args:
        name: The fixture name, see `fixture_names`.
        harmonize: Whether to harmonize the face edges.

    Returns:
        The manifold.
    """
    return build_manifold(get_fixture_description(name), harmonize=harmonize)


def fetch_fixture(name: str, save_directory: Union[str, os.PathLike]) -> str:
    """Write the description document of a fixture to a folder.

    Args:
        name: The fixture name.
        save_directory: The folder for the document.

    Returns:
        The path of the written file.
    """
    save_directory = Path(save_directory)
    os.makedirs(save_directory, exist_ok=True)
    path = save_directory / f"{name}.json"
    with open(path, "w") as f:
        json.dump(get_fixture_description(name), f, indent=2)
    return str(path)
