"""
RunReport: the JSON record every CLI command writes, next to a plot-ready CSV with one
row per grid point and, where there is one, the reduced model as a ModelFile.
"""
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from parsreduce.config import get_version
from parsreduce.libs import save_json, to_jsonable
from parsreduce.model_io import model_to_dict, write_model
from parsreduce.psys import ParamStateSpace

TIMING_KEYS = ("timing",)

STATUS_CERTIFIED = "certified"
STATUS_NOT_CONVERGED = "not_converged"
STATUS_INFEASIBLE = "infeasible"


def companion_paths(file_out: Union[str, Path]):
    """(error table csv, reduced model json) written next to the report."""
    file_out = Path(file_out)
    stem = file_out.name[:-len(file_out.suffix)] if file_out.suffix else file_out.name
    return file_out.parent / f"{stem}_errors.csv", file_out.parent / f"{stem}_reduced.json"


def build_report(command: str, config: Optional[dict] = None, status: str = STATUS_CERTIFIED,
                 error_table: Optional[pd.DataFrame] = None, reduced: Optional[ParamStateSpace] = None,
                 **fields) -> dict:
    """
    fields may contain gamma, gamma_lower, bound, sampled_error, argmax_alpha, converged,
    iteration_log, bisection_log, message, timing, rows (compare), ...
    """
    report = {"command": command, "version": get_version(), "status": status, "config": config}
    report.update(fields)
    report["error_table"] = error_table.to_dict(orient="records") if error_table is not None else None
    report["reduced_model"] = model_to_dict(reduced) if reduced is not None else None
    return to_jsonable(report)


def write_report(report: dict, file_out: Union[str, Path], error_table: Optional[pd.DataFrame] = None,
                 reduced: Optional[ParamStateSpace] = None):
    file_out = Path(file_out)
    file_out.parent.mkdir(parents=True, exist_ok=True)
    save_json(report, file_out)
    csv_file, model_file = companion_paths(file_out)
    if error_table is not None:
        error_table.to_csv(csv_file, index=False, float_format="%.17g")
    if reduced is not None:
        write_model(reduced, model_file)


def without_timing(report: dict) -> dict:
    """Report minus wall-clock fields, for reproducibility comparisons."""
    return {k: v for k, v in report.items() if k not in TIMING_KEYS and k != "version"}
