"""
The `polyflow` command line interface.

Every subcommand reads a manifold (a description file or the name of a fixture), runs one
workflow and writes its report. The exit code is 0 on success, 1 for configuration errors,
2 for invalid manifolds and other domain errors and 3 for failed experiments.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from . import directions, splitting, stats
from .__version__ import __version__
from .geometry import CellId, DescriptionError, GeometryError, Manifold, ManifoldPoint, build_manifold, load_description
from .reports import write_csv_report, write_json_report
from .sample_data import fixture_names, get_fixture
from .tracer import Direction, NotReversible, trace, trace_to_dataframe
from .util import DEFAULT_TOLERANCE, as_fraction

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DOMAIN = 2
EXIT_EXPERIMENT = 3

FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2 on invalid arguments, which is the exit code of domain errors here
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    """The resolved configuration of a run. It is embedded in every report.

    The keys of a `--config` file must be field names; flags given on the command line override them.
    """
    command: Optional[str] = None
    manifold: Optional[str] = None
    direction: Optional[str] = None
    t_max: Optional[str] = None
    cell: Optional[str] = None
    start: Optional[str] = None
    eps: Optional[float] = None
    radius: Optional[float] = None
    grid: Optional[int] = None
    samples: Optional[int] = None
    n_starts: Optional[int] = None
    seed: Optional[int] = None
    horizon: Optional[float] = None
    threads: Optional[int] = None
    tolerance: Optional[float] = None
    max_length: Optional[float] = None
    bound: Optional[int] = None
    white: Optional[List[str]] = None
    out: Optional[str] = None
    format: Optional[str] = None
    verbose: bool = False

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Could not read the config file {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"The config file {path} must contain a JSON object.")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown fields in the config file {path}: {unknown}.")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_DEFAULTS = {
    "t_max": "10", "eps": 0.25, "radius": splitting.DEFAULT_RADIUS, "grid": 8, "samples": 100,
    "n_starts": 100, "seed": 0, "horizon": 100.0, "tolerance": DEFAULT_TOLERANCE, "max_length": 2.5,
    "bound": directions.DEFAULT_BOUND,
}


def _resolve(config: RunConfig) -> RunConfig:
    for key, value in _DEFAULTS.items():
        if getattr(config, key) is None:
            setattr(config, key, value)
    if config.format is not None and config.format not in FORMATS:
        raise ConfigError(f"Invalid format {config.format}, choose one of {FORMATS}.")
    if config.format is None and config.out is not None:
        extension = os.path.splitext(config.out)[1].lstrip(".")
        config.format = extension if extension in FORMATS else "json"
    if config.threads is not None and config.threads < 1:
        raise ConfigError(f"The number of threads must be at least 1, got {config.threads}.")
    return config


#
# Parsing of the flag values
#


def _number(value: Any) -> Any:
    """An exact fraction for rational input, a float otherwise."""
    try:
        return as_fraction(value)
    except ValueError:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"Could not parse {value} as a number.")


def _parse_cell(value: str) -> CellId:
    try:
        return CellId(*(int(val) for val in str(value).split(",")))
    except (TypeError, ValueError):
        raise ConfigError(f"Could not parse the cell '{value}', expected integers like '0,0,0'.")


def _parse_direction(config: RunConfig) -> Direction:
    if config.direction is None:
        raise ConfigError("This command needs a direction, pass it with --dir.")
    try:
        return Direction.parse(config.direction)
    except ValueError as e:
        raise ConfigError(f"Invalid direction '{config.direction}': {e}")


def _parse_point(manifold: Manifold, config: RunConfig) -> ManifoldPoint:
    cell = manifold.cells[0] if config.cell is None else _parse_cell(config.cell)
    if config.start is None:
        local = tuple(Fraction(1, 2) for _ in range(manifold.dim))
    else:
        local = tuple(_number(val) for val in str(config.start).split(","))
    return ManifoldPoint(cell, local)


def _load_manifold(config: RunConfig) -> Manifold:
    if config.manifold is None:
        raise ConfigError("No manifold given, pass a description file or a fixture name with --manifold.")
    if os.path.exists(config.manifold):
        description = load_description(config.manifold)
        try:
            return build_manifold(description)
        except GeometryError as e:
            if not isinstance(e, DescriptionError):
                e.line = description.line_of(e.path)
            raise
    if config.manifold in fixture_names():
        return get_fixture(config.manifold)
    raise ConfigError(f"The manifold {config.manifold} is neither a file nor one of the fixtures {fixture_names()}.")


#
# Subcommands
#


def cmd_validate(config: RunConfig) -> int:
    """Build a manifold and print a summary of it."""
    manifold = _load_manifold(config)
    summary = {
        "name": manifold.name, "dim": manifold.dim, "s": manifold.s, "pairings": len(manifold.pairings),
        "gated_faces": len(manifold.gated), "splitting_edges": len(manifold.splitting_edges),
        "singular_vertices": len(manifold.singular_vertices),
    }
    print(f"{manifold.name}: s={manifold.s}, pairings={len(manifold.pairings)}, gated faces={len(manifold.gated)}, "
          f"splitting edges={len(manifold.splitting_edges)}")
    if manifold.dim == 2:
        for vertex in manifold.singular_vertices:
            print(f"singular vertex {vertex.index}: cone angle {vertex.quarter_turns} * pi / 2")
    if config.out is not None:
        write_json_report(config.out, summary, config.to_dict())
    return EXIT_OK


def cmd_trace(config: RunConfig) -> int:
    """Trace one geodesic and write its segments."""
    manifold = _load_manifold(config)
    direction = _parse_direction(config)
    start = _parse_point(manifold, config)
    result = trace(manifold, start, direction, _number(config.t_max), tolerance=config.tolerance)
    print(f"{len(result.events)} events, terminated by {result.terminated_by} at t={float(result.t_end)}")
    if config.out is None:
        return EXIT_OK
    if config.format == "csv":
        write_csv_report(config.out, trace_to_dataframe(result))
    elif config.format == "svg":
        from .visualization import plot_trace
        plot_trace(result, config.out)
    else:
        write_json_report(config.out, {
            "n_events": len(result.events), "terminated_by": result.terminated_by, "t_end": result.t_end,
            "end_cell": list(result.end.cell), "end_local": list(result.end.local), "length": result.length,
        }, config.to_dict())
    return EXIT_OK


def cmd_density(config: RunConfig) -> int:
    """Measure the eps-grid coverage time of one geodesic."""
    manifold = _load_manifold(config)
    direction = _parse_direction(config)
    start = _parse_point(manifold, config)
    report = stats.coverage_time(
        manifold, start, direction, config.eps, config.horizon, tolerance=config.tolerance, verbose=config.verbose,
    )
    status = f"T_cover = {report.t_cover}" if report.complete else "incomplete at horizon"
    print(f"visited {report.n_visited} / {report.n_total} sub-cells, {status}")
    if config.out is not None:
        if config.format == "svg":
            from .visualization import plot_coverage
            plot_coverage(report, manifold, config.out)
        else:
            write_json_report(config.out, report.to_dict(), config.to_dict())
    return EXIT_OK


def _write_t_star(config, report):
    if config.out is None or report is None:
        return
    if config.format == "csv":
        write_csv_report(config.out, report.to_dataframe())
    else:
        write_json_report(config.out, {"t_star_estimate": report.to_dict()}, config.to_dict())


def cmd_frequency(config: RunConfig) -> int:
    """Estimate T* of the half ball and measure the visiting frequency of a ball."""
    manifold = _load_manifold(config)
    direction = _parse_direction(config)
    target = stats.TargetSet(_parse_point(manifold, config), config.radius)
    try:
        estimate = stats.estimate_t_star(
            manifold, direction, target.half(), n_starts=config.n_starts, horizon=config.horizon, seed=config.seed,
            n_threads=config.threads, verbose=config.verbose, tolerance=config.tolerance,
        )
    except stats.HorizonTooSmall as e:
        _write_t_star(config, e.report)
        raise
    report = stats.visiting_frequency(
        manifold, direction, target, t_star=estimate.t_star, n_segments=config.samples, seed=config.seed,
        n_threads=config.threads, verbose=config.verbose, tolerance=config.tolerance,
    )
    print(
        f"T* = {estimate.t_star}, frequency = {report.frequency}, mean ratio = {report.mean_ratio}, "
        f"bound = {report.bound}"
    )
    if config.out is not None:
        if config.format == "csv":
            write_csv_report(config.out, report.to_dataframe())
        else:
            write_json_report(
                config.out, {"t_star_estimate": estimate.to_dict(), "frequency": report.to_dict()}, config.to_dict()
            )
    return EXIT_OK if report.bound_holds else EXIT_EXPERIMENT


def cmd_saddles(config: RunConfig) -> int:
    """Enumerate the saddle connections of a surface up to a maximal length."""
    manifold = _load_manifold(config)
    connections = directions.saddle_connections(
        manifold, config.max_length, n_threads=config.threads, verbose=config.verbose,
    )
    print(f"{len(connections)} saddle connections of length at most {config.max_length}")
    if config.out is not None:
        table = directions.saddle_connections_to_dataframe(connections)
        if config.format == "json":
            write_json_report(config.out, {"saddle_connections": table.to_dict("records")}, config.to_dict())
        else:
            write_csv_report(config.out, table)
    return EXIT_OK


def cmd_split(config: RunConfig) -> int:
    """Run the colour splitting experiment."""
    manifold = _load_manifold(config)
    direction = _parse_direction(config)
    t_max = float(_number(config.t_max))
    white = None if config.white is None else [_parse_cell(cell) for cell in config.white]
    n_samples = config.samples
    if n_samples < 100:
        raise ConfigError(f"The colour experiment needs at least 100 samples per ball, got --samples {n_samples}.")
    result = splitting.colour_experiment(
        manifold, direction, t_max, ball_radius=config.radius, n_samples=n_samples, white=white,
        seed=config.seed, n_threads=config.threads, verbose=config.verbose, tolerance=config.tolerance,
    )
    print(f"{result.case}, {result.samples_lost:.2%} of the samples lost")
    if config.out is not None:
        if config.format == "csv":
            first = white[0] if white else manifold.cells[0]
            center = ManifoldPoint(first, (0.5,) * manifold.dim)
            evolution = splitting.evolve_ball(
                manifold, splitting.Ball(center, config.radius / 2, splitting.WHITE), direction, t_max,
                n_samples=n_samples, seed=config.seed, n_threads=config.threads, tolerance=config.tolerance,
            )
            write_csv_report(config.out, splitting.fragments_to_dataframe(evolution))
        else:
            report = result.to_dict()
            if manifold.dim == 3 and config.grid is not None:
                ball = splitting.Ball(ManifoldPoint(manifold.cells[0], (0.5,) * manifold.dim), config.radius)
                multiplicity = splitting.estimate_multiplicity(
                    manifold, ball, direction, t_max, grid_n=config.grid, seed=config.seed, n_threads=config.threads,
                )
                report["multiplicity"] = {"m0": multiplicity.m0, "grid_n": multiplicity.grid_n}
            write_json_report(config.out, report, config.to_dict())
    return EXIT_EXPERIMENT if result.case == "Inconclusive" else EXIT_OK


def cmd_kronecker(config: RunConfig) -> int:
    """Decide whether a direction (a1, a2, 1) is Kronecker up to a height bound."""
    direction = _parse_direction(config)
    if direction.dim != 3:
        raise ConfigError("The Kronecker test needs a direction with three components.")
    terms = config.direction.split(",")
    verdict = directions.kronecker_test(terms[0], terms[1], bound=config.bound, tolerance=config.tolerance)
    if isinstance(verdict, directions.RationalRelation):
        print(f"RationalRelation a={verdict.a}, b={verdict.b}, c={verdict.c}")
        report = {"verdict": "RationalRelation", "a": verdict.a, "b": verdict.b, "c": verdict.c}
    else:
        print(f"NoRelationUpTo {verdict.bound}" + (" (proven)" if verdict.proven else ""))
        report = {"verdict": "NoRelationUpTo", "bound": verdict.bound, "proven": verdict.proven}
    if config.out is not None:
        write_json_report(config.out, report, config.to_dict())
    return EXIT_OK


def cmd_noreturn(config: RunConfig) -> int:
    """Check the no-return property for every y-direction splitting edge of a 3-manifold."""
    manifold = _load_manifold(config)
    direction = _parse_direction(config)
    results = []
    for edge in splitting.y_edges(manifold):
        verdict = splitting.check_no_return(
            manifold, direction, edge, _number(config.t_max), n_samples=config.samples, seed=config.seed,
            n_threads=config.threads, tolerance=config.tolerance,
        )
        entry = {"edge": str(edge), "verdict": type(verdict).__name__}
        if isinstance(verdict, splitting.ReturnAt):
            entry.update({"t": verdict.t, "return_edge": str(verdict.edge)})
        else:
            entry.update({"n_samples": verdict.n_samples, "n_lost": verdict.n_lost})
        results.append(entry)
    n_returns = sum(entry["verdict"] == "ReturnAt" for entry in results)
    print(f"{len(results)} y-direction edges, {n_returns} with a return")
    if config.out is not None:
        write_json_report(config.out, {"edges": results}, config.to_dict())
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "trace": cmd_trace,
    "density": cmd_density,
    "frequency": cmd_frequency,
    "saddles": cmd_saddles,
    "split": cmd_split,
    "kronecker": cmd_kronecker,
    "noreturn": cmd_noreturn,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="polyflow", description="Geodesic flow on polysquare surfaces and polycube manifolds.")
    parser.add_argument("--version", action="version", version=f"polyflow {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for name, function in COMMANDS.items():
        sub = subparsers.add_parser(name, help=function.__doc__)
        sub.add_argument("-m", "--manifold", help="A manifold description file or the name of a fixture.")
        sub.add_argument("-c", "--config", help="A JSON file with RunConfig fields.")
        sub.add_argument("-d", "--dir", dest="direction", help="A direction like 'sqrt:2,sqrt:3,1' or '1,1/3'.")
        sub.add_argument("--tmax", dest="t_max", help="The flow time, rational values give exact traces.")
        sub.add_argument("--cell", help="The start cell, like '0,0,0'.")
        sub.add_argument("--start", help="The local coordinates of the start or ball centre, like '1/2,1/3,0.25'.")
        sub.add_argument("--eps", type=float, help="The resolution of the coverage grid.")
        sub.add_argument("--radius", type=float, help="The radius of the target or coloured balls.")
        sub.add_argument("--grid", type=int, help="The resolution of the multiplicity grid.")
        sub.add_argument("--samples", type=int, help="The number of samples, segments or edge points.")
        sub.add_argument("--starts", dest="n_starts", type=int, help="The number of starts for estimating T*.")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--horizon", type=float)
        sub.add_argument("--threads", type=int, help="The number of worker threads.")
        sub.add_argument("--tolerance", type=float)
        sub.add_argument("--maxlen", dest="max_length", type=float, help="The maximal saddle connection length.")
        sub.add_argument("--bound", type=int, help="The height bound of the Kronecker test.")
        sub.add_argument("--white", nargs="+", help="The cells with white balls.")
        sub.add_argument("-o", "--out", help="The output path.")
        sub.add_argument("--format", choices=FORMATS)
        sub.add_argument("-v", "--verbose", action="store_true", default=None)
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """@private"""
    args = vars(_build_parser().parse_args(argv))
    config_path = args.pop("config")
    config = RunConfig.from_file(config_path) if config_path is not None else RunConfig()
    for key, value in args.items():
        if value is not None:
            setattr(config, key, value)
    return _resolve(config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """@private"""
    try:
        config = parse_config(argv)
        return COMMANDS[config.command](config)
    except (ConfigError, DescriptionError) as e:
        print(f"{type(e).__name__} {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (stats.HorizonTooSmall, stats.StartPathological, NotReversible) as e:
        print(f"{type(e).__name__} {e}", file=sys.stderr)
        return EXIT_EXPERIMENT
    except (GeometryError, ValueError) as e:
        line = getattr(e, "line", None)
        location = "" if line is None else f" (line {line})"
        print(f"{type(e).__name__} {e}{location}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
