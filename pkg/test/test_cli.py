import io
import json
import os
import unittest
from contextlib import redirect_stderr, redirect_stdout
from shutil import rmtree

import pandas as pd


class TestCli(unittest.TestCase):
    tmp_folder = "tmp-files"

    def setUp(self):
        os.makedirs(self.tmp_folder, exist_ok=True)

    def tearDown(self):
        rmtree(self.tmp_folder)

    def _run(self, *argv):
        from polyflow.cli import main

        stdout, stderr = io.StringIO(), io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(stderr):
            exit_code = main(list(argv))
        return exit_code, stdout.getvalue(), stderr.getvalue()

    def _write(self, name, content):
        path = os.path.join(self.tmp_folder, name)
        with open(path, "w") as f:
            f.write(content if isinstance(content, str) else json.dumps(content))
        return path

    def test_validate(self):
        exit_code, stdout, _ = self._run("validate", "-m", "torus3")
        self.assertEqual(exit_code, 0)
        self.assertIn("torus3: s=1", stdout)

        out = os.path.join(self.tmp_folder, "summary.json")
        exit_code, stdout, _ = self._run("validate", "-m", "barrier_surface", "-o", out)
        self.assertEqual(exit_code, 0)
        self.assertIn("cone angle", stdout)
        with open(out) as f:
            summary = json.load(f)
        self.assertEqual(summary["s"], 4)
        self.assertEqual(summary["config"]["manifold"], "barrier_surface")

    def test_validate_errors(self):
        text = "\n".join([
            "{",
            '  "dim": 3,',
            '  "cells": [[0, 0, 0]],',
            '  "pairings": [',
            '    {"a": {"cell": [0, 0, 0], "axis": "W", "side": "+"}, "b": {"cell": [0, 0, 0], "axis": "X", "side": "-"}}',
            "  ]",
            "}",
        ])
        exit_code, _, stderr = self._run("validate", "-m", self._write("bad_axis.json", text))
        self.assertEqual(exit_code, 1)
        self.assertIn("DescriptionError", stderr)
        self.assertIn("line 5", stderr)

        exit_code, _, stderr = self._run("validate", "-m", "klein_bottle")
        self.assertEqual(exit_code, 1)

        unpaired = self._write("unpaired.json", {"dim": 2, "cells": [[0, 0]]})
        exit_code, _, stderr = self._run("validate", "-m", unpaired)
        self.assertEqual(exit_code, 2)
        self.assertIn("UnpairedBoundaryFace", stderr)

    def test_trace(self):
        out = os.path.join(self.tmp_folder, "trace.csv")
        exit_code, stdout, _ = self._run(
            "trace", "-m", "torus2", "-d", "1/3", "--start", "1/4,1/4", "--tmax", "3", "-o", out
        )
        self.assertEqual(exit_code, 0)
        self.assertIn("4 events", stdout)
        table = pd.read_csv(out)
        self.assertEqual(len(table), 5)
        self.assertIn("event_kind", table.columns)

        out = os.path.join(self.tmp_folder, "trace.json")
        exit_code, _, _ = self._run("trace", "-m", "torus2", "-d", "1/3", "--start", "1/4,1/4", "--tmax", "3", "-o", out)
        self.assertEqual(exit_code, 0)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual(report["end_local"], ["1/4", "1/4"])
        self.assertEqual(report["t_end"], 3)

        # a missing direction is a configuration error
        exit_code, _, stderr = self._run("trace", "-m", "torus2", "--tmax", "3")
        self.assertEqual(exit_code, 1)
        self.assertIn("direction", stderr)

    def test_deterministic_reports(self):
        bodies = []
        for i in range(2):
            out = os.path.join(self.tmp_folder, f"trace{i}.csv")
            exit_code, _, _ = self._run(
                "trace", "-m", "barrier_manifold", "-d", "sqrt:2,sqrt:3,1", "--start", "0.1,0.2,0.3", "--tmax", "5",
                "-o", out,
            )
            self.assertEqual(exit_code, 0)
            with open(out) as f:
                bodies.append(f.read())
        self.assertEqual(bodies[0], bodies[1])

    def test_kronecker(self):
        out = os.path.join(self.tmp_folder, "kronecker.json")
        exit_code, stdout, _ = self._run("kronecker", "-d", "1/2,1/3,1", "-o", out)
        self.assertEqual(exit_code, 0)
        self.assertIn("RationalRelation", stdout)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual((report["a"], report["b"], report["c"]), (2, 0, -1))
        self.assertEqual(report["config"]["direction"], "1/2,1/3,1")

        exit_code, stdout, _ = self._run("kronecker", "-d", "sqrt:2,sqrt:3,1", "--bound", "10")
        self.assertEqual(exit_code, 0)
        self.assertIn("NoRelationUpTo 10 (proven)", stdout)

        exit_code, _, _ = self._run("kronecker", "-d", "1/3")
        self.assertEqual(exit_code, 1)

    def test_density(self):
        out = os.path.join(self.tmp_folder, "coverage.json")
        exit_code, stdout, _ = self._run(
            "density", "-m", "torus2", "-d", "(sqrt:5-1)/2", "--start", "0.1,0.2", "--eps", "0.5", "-o", out
        )
        self.assertEqual(exit_code, 0)
        self.assertIn("visited 4 / 4", stdout)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual(report["status"], "complete")

    def test_frequency_horizon_too_small(self):
        out = os.path.join(self.tmp_folder, "frequency.json")
        exit_code, _, stderr = self._run(
            "frequency", "-m", "torus2", "-d", "(sqrt:5-1)/2", "--start", "1/2,1/2", "--radius", "0.1",
            "--horizon", "0.01", "-o", out,
        )
        self.assertEqual(exit_code, 3)
        self.assertIn("HorizonTooSmall", stderr)
        self.assertTrue(os.path.exists(out))

    def test_saddles(self):
        out = os.path.join(self.tmp_folder, "saddles.csv")
        exit_code, stdout, _ = self._run("saddles", "-m", "torus2_marked", "--maxlen", "1.5", "-o", out)
        self.assertEqual(exit_code, 0)
        self.assertIn("8 saddle connections", stdout)
        self.assertEqual(len(pd.read_csv(out)), 8)

    def test_split(self):
        out = os.path.join(self.tmp_folder, "split.json")
        exit_code, stdout, _ = self._run(
            "split", "-m", "stacked_torus", "-d", "sqrt:2,sqrt:3,1", "--tmax", "0.75", "--samples", "100",
            "--grid", "4", "-o", out,
        )
        self.assertEqual(exit_code, 0)
        self.assertIn("Case2", stdout)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual(report["case"], "Case2")
        self.assertIn("multiplicity", report)

        # the experiment needs at least 100 samples per ball
        exit_code, _, stderr = self._run(
            "split", "-m", "stacked_torus", "-d", "sqrt:2,sqrt:3,1", "--tmax", "0.75", "--samples", "50",
        )
        self.assertEqual(exit_code, 1)
        self.assertIn("ConfigError", stderr)
        self.assertIn("100", stderr)

    def test_noreturn(self):
        out = os.path.join(self.tmp_folder, "noreturn.json")
        exit_code, stdout, _ = self._run(
            "noreturn", "-m", "torus3", "-d", "1/2,1/3,1", "--tmax", "3", "--samples", "4", "-o", out
        )
        self.assertEqual(exit_code, 0)
        self.assertIn("4 y-direction edges, 4 with a return", stdout)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual([entry["verdict"] for entry in report["edges"]], ["ReturnAt"] * 4)
        self.assertEqual({entry["t"] for entry in report["edges"]}, {2})

        exit_code, stdout, _ = self._run(
            "noreturn", "-m", "torus3", "-d", "sqrt:2,sqrt:3,1", "--tmax", "0.5", "--samples", "4", "-o", out
        )
        self.assertEqual(exit_code, 0)
        self.assertIn("4 y-direction edges, 0 with a return", stdout)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual({(entry["n_samples"], entry["n_lost"]) for entry in report["edges"]}, {(4, 0)})

    def test_config_file(self):
        config = self._write("config.json", {"manifold": "torus2", "direction": "1/3", "t_max": "3", "start": "1/4,1/4"})
        exit_code, stdout, _ = self._run("trace", "-c", config)
        self.assertEqual(exit_code, 0)
        self.assertIn("4 events", stdout)

        # flags override the file
        exit_code, stdout, _ = self._run("trace", "-c", config, "--tmax", "1/2")
        self.assertEqual(exit_code, 0)
        self.assertIn("0 events", stdout)

        unknown = self._write("unknown.json", {"manifold": "torus2", "colour": "white"})
        exit_code, _, stderr = self._run("trace", "-c", unknown)
        self.assertEqual(exit_code, 1)
        self.assertIn("colour", stderr)

        exit_code, _, _ = self._run("trace", "-m", "torus2", "-d", "1/3", "--format", "png")
        self.assertEqual(exit_code, 1)


if __name__ == "__main__":
    unittest.main()
