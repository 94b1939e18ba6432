import sys
from pathlib import Path
p_dir = str(Path(__file__).absolute().parents[1])
if p_dir not in sys.path: sys.path.insert(0, p_dir)

import os
import time
import platform
import importlib.metadata

import psutil
import pandas as pd
import numpy as np

from parsreduce.python_api import baseline, reduce, validate

"""
Reproduce the reference reductions (discrete two-parameter example and the
four-state power network) and log errors, runtime and peak memory.
The full runs take minutes to hours, so they are not part of tests.sh.

Each run is appended to tests/local_overview.csv and compared to the previous run.

Usage:
python tests/test_locally.py
"""

REF = Path(__file__).resolve().parent / "reference_files"

# expected sampled errors, with the tolerance that is still considered a match
EXPECTED = {
    "sos_n2": (0.095, 0.01),
    "sos_n1": (0.19, 0.02),
    "gramian_n1": (0.27, 0.01),
    "validate_gramian_n2": (0.14, 0.02),
    "validate_sos_n2": (0.095, 0.01),
    "validate_sos_n1": (0.19, 0.02),
    "validate_power": (0.15, 0.03),
    "sos_power_n4": (0.15, 0.05),
}


def peak_memory_mb():
    return int(round(psutil.Process(os.getpid()).memory_info().rss / (1024 ** 2)))


def are_logs_similar(last_log, new_log, cols, tolerance_percent=0.04):
    if last_log is None or new_log is None:
        print("Cannot compare logs because one of them is None.")
        return False

    # runtimes vary a lot between machines
    tolerance_percent_large_diff = 0.5

    identical = True
    for old_value, new_value, col in zip(last_log, new_log, cols):
        if isinstance(old_value, str) and isinstance(new_value, str):
            if old_value != new_value and col != "comment":
                print(f"  Difference in {col}: {old_value} != {new_value}")
                identical = False
        elif isinstance(old_value, (int, float, np.integer, np.floating)) and \
             isinstance(new_value, (int, float, np.integer, np.floating)):
            if old_value == 0 and new_value == 0:
                continue
            if old_value == 0 or new_value == 0:
                print(f"  Difference in {col}: {old_value} != {new_value} (one is zero)")
                identical = False
                continue
            percent_diff = abs(old_value - new_value) / abs(old_value)
            tolerance = tolerance_percent_large_diff if col.startswith("runtime") else tolerance_percent
            if percent_diff > tolerance:
                print(f"  Difference in {col}: {old_value} != {new_value} (percent_diff: {percent_diff:.2f})")
                identical = False
    return identical


def run_all():
    errors, times = {}, {}
    two_state = REF / "discrete_two_state.json"

    for name, config in [("sos_n2", "discrete_n2.json"), ("sos_n1", "discrete_n1.json")]:
        print(f"----- {name} ------")
        st = time.time()
        report, _ = reduce(two_state, REF / config, quiet=True)
        times[name] = round(time.time() - st, 1)
        errors[name] = report["sampled_error"]
        print(f"  gamma: {report['gamma']:.4f}, sampled error: {report['sampled_error']:.4f}")

    print("----- gramian_n1 ------")
    st = time.time()
    report, _ = baseline(two_state, [1, 1, 0], quiet=True)
    times["gramian_n1"] = round(time.time() - st, 1)
    errors["gramian_n1"] = report["sampled_error"]
    print(f"  bound: {report['bound']:.4f}, sampled error: {report['sampled_error']:.4f}")

    for name, model, reduced in [("validate_gramian_n2", two_state, "gramian_n2_ref.json"),
                                 ("validate_sos_n2", two_state, "sos_n2_ref.json"),
                                 ("validate_sos_n1", two_state, "sos_n1_ref.json"),
                                 ("validate_power", REF / "power_network.json", "power_network_reduced_ref.json")]:
        st = time.time()
        report, _ = validate(model, REF / reduced, quiet=True)
        times[name] = round(time.time() - st, 1)
        errors[name] = report["sampled_error"]
        print(f"{name}: {report['sampled_error']:.4f}")

    print("----- sos_power_n4 ------")
    st = time.time()
    report, _ = reduce(REF / "power_network.json", REF / "power_n4.json", quiet=True)
    times["sos_power_n4"] = round(time.time() - st, 1)
    errors["sos_power_n4"] = report["sampled_error"]
    print(f"  gamma: {report['gamma']:.4f}, sampled error: {report['sampled_error']:.4f}")
    return errors, times


if __name__ == "__main__":
    errors, times = run_all()

    for name, (expected, tol) in EXPECTED.items():
        ok = abs(errors[name] - expected) <= tol
        print(f"{'OK ' if ok else 'BAD'} {name}: {errors[name]:.4f} (expected {expected} +- {tol})")

    cols = ["time"] + [f"error_{k}" for k in EXPECTED] + [f"runtime_{k}" for k in EXPECTED] + \
           ["memory_ram", "python_version", "cvxpy_version", "comment"]
    overview_file = Path(__file__).resolve().parent / "local_overview.csv"
    if overview_file.exists():
        overview = pd.read_csv(overview_file)
    else:
        overview = pd.DataFrame(columns=cols)

    last_log = overview.iloc[-1].tolist() if len(overview) > 0 else None

    new_log = [str(pd.Timestamp.now())] + [round(float(errors[k]), 4) for k in EXPECTED] + \
              [times[k] for k in EXPECTED] + \
              [peak_memory_mb(), platform.python_version(), importlib.metadata.version("cvxpy"), ""]

    print("Comparing PREVIOUS to NEW log:")
    if are_logs_similar(last_log[1:] if last_log else None, new_log[1:], cols[1:]):
        print("\nSUCCESS: no differences\n")
    else:
        print("\nERROR: major differences found\n")

    print(f"Saving to {overview_file}...")
    overview.loc[len(overview)] = new_log
    overview.to_csv(overview_file, index=False)
