"""
Run benchmarks
--------------
1. Install pandas tabulate dependency `python -m pip install tabulate`
2. Run benchmark script, eg: `python benchmark.py --fixture barrier_manifold`

Line profiling
--------------
1. Install line profiler: `python -m pip install line_profiler`
2. Add `@profile` decorator to any function in the call stack
3. Run `kernprof -lv benchmark.py --fixture barrier_manifold`

Snakeviz visualization
----------------------
https://jiffyclub.github.io/snakeviz/
1. Install snakeviz: `python -m pip install snakeviz`
2. Generate profile file: `python -m cProfile -o program.prof benchmark.py --fixture barrier_manifold`
3. Visualize profile file: `snakeviz program.prof`
"""
import argparse
import time

import numpy as np
import pandas as pd

from polyflow import directions, stats
from polyflow.geometry import ManifoldPoint
from polyflow.sample_data import fixture_names, get_fixture
from polyflow.tracer import Direction, trace


def _add_result(benchmark_results, fixture, name, runtimes):
    nres = len(name)
    assert len(name) == len(runtimes)
    res = {
        "fixture": [fixture] * nres,
        "benchmark": name,
        "runtime": runtimes,
    }
    tab = pd.DataFrame(res)
    benchmark_results.append(tab)
    return benchmark_results


def _direction(manifold):
    return Direction.parse("sqrt:2,sqrt:3,1" if manifold.dim == 3 else "(sqrt:5-1)/2")


def benchmark_trace(manifold, n):
    print("Running benchmark_trace ...")
    n = 3 if n is None else n
    direction = _direction(manifold)
    start = ManifoldPoint(manifold.cells[0], (0.1234,) * manifold.dim)
    times, n_events = [], 0
    for _ in range(n):
        t0 = time.time()
        result = trace(manifold, start, direction, 1000.0)
        times.append(time.time() - t0)
        n_events = len(result.events)
    print("Traced", n_events, "events")
    return ["trace-t1000"], [np.min(times)]


def benchmark_coverage(manifold, n):
    print("Running benchmark_coverage ...")
    n = 3 if n is None else n
    direction = _direction(manifold)
    start = ManifoldPoint(manifold.cells[0], (0.1234,) * manifold.dim)
    times = []
    for _ in range(n):
        t0 = time.time()
        stats.coverage_time(manifold, start, direction, 0.1, 1000.0)
        times.append(time.time() - t0)
    return ["coverage-eps0.1"], [np.min(times)]


def benchmark_saddles(manifold, n):
    print("Running benchmark_saddles ...")
    if manifold.dim != 2:
        return [], []
    n = 1 if n is None else n
    times = []
    for _ in range(n):
        t0 = time.time()
        directions.saddle_connections(manifold, 5.0)
        times.append(time.time() - t0)
    return ["saddles-L5"], [np.mean(times)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fixture", "-f", default="barrier_manifold", choices=fixture_names(),
                        help="Which fixture to benchmark on")
    parser.add_argument("--benchmark_trace", "-t", action="store_false",
                        help="Skip trace benchmark test, do not run")
    parser.add_argument("--benchmark_coverage", "-c", action="store_false",
                        help="Skip coverage benchmark test, do not run")
    parser.add_argument("--benchmark_saddles", "-s", action="store_false",
                        help="Skip saddle connection benchmark test, do not run")
    parser.add_argument("-n", "--n", type=int, default=None,
                        help="Number of times to repeat benchmark tests")

    args = parser.parse_args()
    manifold = get_fixture(args.fixture)
    print("Running benchmarks for", args.fixture)

    benchmark_results = []
    if args.benchmark_trace:
        name, rt = benchmark_trace(manifold, args.n)
        benchmark_results = _add_result(benchmark_results, args.fixture, name, rt)

    if args.benchmark_coverage:
        name, rt = benchmark_coverage(manifold, args.n)
        benchmark_results = _add_result(benchmark_results, args.fixture, name, rt)

    if args.benchmark_saddles:
        name, rt = benchmark_saddles(manifold, args.n)
        benchmark_results = _add_result(benchmark_results, args.fixture, name, rt)

    benchmark_results = pd.concat(benchmark_results)
    print(benchmark_results.to_markdown(index=False))


if __name__ == "__main__":
    main()
