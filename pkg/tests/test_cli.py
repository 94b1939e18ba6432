import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import argparse
import contextlib
import io
import json
import os
import tempfile
import unittest

import pandas as pd
import pytest

from parsreduce.bin import parsreduce_set_backend
from parsreduce.bin.ParsReduce import main, parse_gamma, parse_keep
from parsreduce.config import get_config_key, get_nr_threads
from parsreduce.model_io import read_model
from parsreduce.python_api import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, load_reduction_config, validate
from parsreduce.report import STATUS_CERTIFIED, STATUS_NOT_CONVERGED, companion_paths, without_timing

REF = Path(__file__).resolve().parent / "reference_files"


class test_cli(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out_dir = Path(self.tmp.name)
        self._env = {k: os.environ.get(k) for k in ("PARS_REDUCE_HOME_DIR", "PARS_REDUCE_THREADS")}
        os.environ["PARS_REDUCE_HOME_DIR"] = str(self.out_dir / "home")
        os.environ.pop("PARS_REDUCE_THREADS", None)

    def tearDown(self):
        for k, v in self._env.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
        self.tmp.cleanup()

    def _main(self, argv):
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main([str(a) for a in argv])
        return code, out.getvalue()

    def test_parsers(self):
        self.assertEqual(parse_gamma("0.2"), {"gamma": 0.2})
        self.assertEqual(parse_gamma("0:1"), {"gamma": None, "gamma_lo": 0.0, "gamma_hi": 1.0})
        self.assertEqual(parse_gamma("0:1:0.1")["gamma_tol"], 0.1)
        for bad in ("x", "1:2:3:4"):
            with self.assertRaises(argparse.ArgumentTypeError):
                parse_gamma(bad)
        self.assertEqual(parse_keep("2,1,0"), [2, 1, 0])
        with self.assertRaises(argparse.ArgumentTypeError):
            parse_keep("2,a")

    def test_validate_self(self):
        model = REF / "discrete_two_state.json"
        out = self.out_dir / "validate.json"
        code, _ = self._main(["validate", "--model", model, "--reduced", model, "--out", out, "--grid", 5, "-q"])
        self.assertEqual(code, EXIT_OK)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual(report["command"], "validate")
        self.assertLessEqual(report["sampled_error"], 1e-6)
        self.assertEqual(len(report["error_table"]), 25)
        csv_file, model_file = companion_paths(out)
        self.assertEqual(len(pd.read_csv(csv_file)), 25)
        self.assertFalse(model_file.exists())

    def test_errors(self):
        code, text = self._main(["baseline", "--model", REF / "scalar_continuous.json", "--keep", "1,0", "-q"])
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("ERROR: baseline requires discrete time", text)

        code, text = self._main(["reduce", "--model", REF / "scalar_discrete.json",
                                 "--config", REF / "bad_syntax.json", "-q"])
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn(":4:3:", text)

        code, text = self._main(["validate", "--model", REF / "scalar_discrete.json",
                                 "--reduced", REF / "discrete_two_state.json", "-q"])
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("ERROR:", text)

        code, text = self._main(["validate", "--model", self.out_dir / "missing.json",
                                 "--reduced", REF / "scalar_discrete.json", "-q"])
        self.assertEqual(code, EXIT_ERROR)

    def test_reduce(self):
        model = REF / "scalar_discrete.json"
        out = self.out_dir / "reduce.json"
        code, _ = self._main(["reduce", "--model", model, "--config", REF / "scalar_identity.json",
                              "--out", out, "-q"])
        self.assertIn(code, (EXIT_OK, EXIT_NOT_CONVERGED))
        with open(out) as f:
            report = json.load(f)
        self.assertEqual(report["status"], STATUS_CERTIFIED if code == EXIT_OK else STATUS_NOT_CONVERGED)
        self.assertLessEqual(report["sampled_error"], report["gamma"] + 1e-6)
        self.assertEqual(report["config"]["grid_per_dim"], 5)
        self.assertIn("timing", report)
        self.assertNotIn("timing", without_timing(report))

        csv_file, model_file = companion_paths(out)
        reduced = read_model(model_file)
        self.assertEqual((reduced.n, reduced.p), (1, 1))
        check, _ = validate(model, model_file, grid_per_dim=5, quiet=True)
        self.assertAlmostEqual(check["sampled_error"], report["sampled_error"], delta=1e-6)
        self.assertEqual(len(pd.read_csv(csv_file)), 5)

    def test_reduce_is_deterministic(self):
        outputs = []
        for name in ("run_a", "run_b"):
            out = self.out_dir / name / "reduce.json"
            code, _ = self._main(["reduce", "--model", REF / "scalar_discrete.json",
                                  "--config", REF / "scalar_identity.json", "--out", out, "-q"])
            self.assertIn(code, (EXIT_OK, EXIT_NOT_CONVERGED))
            outputs.append(companion_paths(out))
        (csv_a, model_a), (csv_b, model_b) = outputs
        self.assertEqual(model_a.read_bytes(), model_b.read_bytes())
        self.assertEqual(csv_a.read_bytes(), csv_b.read_bytes())
        with open(model_a.parent / "reduce.json") as fa, open(model_b.parent / "reduce.json") as fb:
            self.assertEqual(without_timing(json.load(fa)), without_timing(json.load(fb)))

    def test_reduce_fixed_gamma(self):
        out = self.out_dir / "fixed.json"
        code, text = self._main(["reduce", "--model", REF / "scalar_discrete.json",
                                 "--config", REF / "scalar_identity.json", "--gamma", "0.2", "--json-log",
                                 "--out", out])
        self.assertIn(code, (EXIT_OK, EXIT_NOT_CONVERGED))
        events = [json.loads(ln)["event"] for ln in text.splitlines() if ln.startswith("{")]
        self.assertTrue(events)
        self.assertTrue(all(e == "step" for e in events))
        with open(out) as f:
            self.assertEqual(json.load(f)["gamma"], 0.2)

    def test_compare(self):
        out = self.out_dir / "compare.json"
        code, _ = self._main(["compare", "--model", REF / "scalar_discrete.json",
                              "--config", REF / "scalar_identity.json", "--out", out, "-q"])
        self.assertIn(code, (EXIT_OK, EXIT_NOT_CONVERGED))
        table = pd.read_csv(self.out_dir / "compare_compare.csv")
        self.assertEqual(list(table["method"]), ["sos", "gramian"])
        # keeping every LFT block reproduces the model
        self.assertLessEqual(float(table["sampled_error"].iloc[1]), 1e-6)

    def test_backend_setting(self):
        self.assertEqual(get_config_key("sdp_backend"), "reference")
        with contextlib.redirect_stdout(io.StringIO()):
            parsreduce_set_backend.main(["-b", "cvxpy", "-mi", "50"])
        self.assertEqual(get_config_key("sdp_backend"), "cvxpy")
        cfg = load_reduction_config({"n_prime": 1, "p_prime": 0})
        self.assertEqual((cfg.sdp_backend, cfg.sdp_max_iters), ("cvxpy", 50))
        cfg = load_reduction_config({"n_prime": 1, "p_prime": 0, "gamma": 0.3}, {"gamma_lo": 0.1, "gamma_hi": 0.5})
        self.assertIsNone(cfg.gamma)
        self.assertEqual((cfg.gamma_lo, cfg.gamma_hi), (0.1, 0.5))

    def test_threads(self):
        self.assertEqual(get_nr_threads(), 1)
        os.environ["PARS_REDUCE_THREADS"] = "3"
        self.assertEqual(get_nr_threads(), 3)
        os.environ["PARS_REDUCE_THREADS"] = "0"
        self.assertGreaterEqual(get_nr_threads(), 1)


if __name__ == '__main__':
    pytest.main(["-v", "tests/test_cli.py"])
