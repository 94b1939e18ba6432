import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import pytest
import os
import json
import subprocess

from parsreduce.python_api import EXIT_ERROR, baseline, reduce, validate
from parsreduce.report import companion_paths

"""
To run these tests do
python tests/tests_os.py
"""


def remove_outputs(report_file):
    for f in (report_file, *companion_paths(report_file)):
        if os.path.exists(f):
            os.remove(f)


def run_tests_and_exit_on_failure():

    # Test python api - validate with file paths
    validate("tests/reference_files/discrete_two_state.json", "tests/reference_files/gramian_n1_ref.json",
             "tests/unittest_validate.json", quiet=True)
    r = pytest.main(["-v", "tests/test_end_to_end.py::test_end_to_end::test_validate"])
    remove_outputs("tests/unittest_validate.json")
    if r != 0: sys.exit("Test failed: test_validate")

    # Test python api - baseline
    baseline("tests/reference_files/discrete_two_state.json", [1, 1, 0], "tests/unittest_baseline.json",
             grid_per_dim=5, quiet=True)
    r = pytest.main(["-v", "tests/test_end_to_end.py::test_end_to_end::test_baseline"])
    remove_outputs("tests/unittest_baseline.json")
    if r != 0: sys.exit("Test failed: test_baseline")

    # Test python api - reduce with a config dict instead of a file
    with open("tests/reference_files/scalar_identity.json") as f:
        config = json.load(f)
    _, code = reduce("tests/reference_files/scalar_discrete.json", config, "tests/unittest_reduce.json", quiet=True)
    if code == EXIT_ERROR: sys.exit("Test failed: reduce returned an error")
    r = pytest.main(["-v", "tests/test_end_to_end.py::test_end_to_end::test_reduce"])
    remove_outputs("tests/unittest_reduce.json")
    if r != 0: sys.exit("Test failed: test_reduce")

    # Test terminal
    # os.path.join gives correct paths on windows and linux for the terminal call
    file_model = os.path.join("tests", "reference_files", "scalar_discrete.json")
    file_config = os.path.join("tests", "reference_files", "scalar_identity.json")
    file_out = os.path.join("tests", "unittest_reduce.json")
    subprocess.call(f"ParsReduce reduce --model {file_model} --config {file_config} --out {file_out} -q", shell=True)
    r = pytest.main(["-v", "tests/test_end_to_end.py::test_end_to_end::test_reduce"])
    remove_outputs(file_out)
    if r != 0: sys.exit("Test failed: test_reduce from terminal")


if __name__ == "__main__":
    run_tests_and_exit_on_failure()
