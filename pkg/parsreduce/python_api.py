import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd

from parsreduce.config import get_config_key, get_nr_threads, setup_parsreduce
from parsreduce.gramian import GramianOptions, gramian_reduce, lft_realize
from parsreduce.model_io import load_json, read_model
from parsreduce.psys import ParamStateSpace, sampled_sup_error
from parsreduce.reduce import ReductionConfig, bisect_gamma
from parsreduce.report import (STATUS_CERTIFIED, STATUS_INFEASIBLE, STATUS_NOT_CONVERGED, build_report,
                               write_report)
from parsreduce.sdp import SdpOptions

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _load_model(model: Union[str, Path, ParamStateSpace]) -> ParamStateSpace:
    return model if isinstance(model, ParamStateSpace) else read_model(model)


def load_reduction_config(config: Union[str, Path, dict, ReductionConfig], overrides: Optional[dict] = None
                          ) -> ReductionConfig:
    """
    Config file (or dict) with overrides applied on top. The SDP backend falls back to
    the persisted default in the home directory config.
    """
    if isinstance(config, ReductionConfig):
        d = config.to_dict()
        source = "config"
    elif isinstance(config, dict):
        d = dict(config)
        source = "config"
    else:
        d = load_json(config)
        source = str(config)
        if not isinstance(d, dict):
            raise ValueError(f"{source}: expected an object, got {type(d).__name__}")
    overrides = overrides or {}
    for k, v in overrides.items():
        if v is not None:
            d[k] = v
    if overrides.get("gamma_lo") is not None:
        # bisection bounds given explicitly replace a fixed gamma from the file
        d["gamma"] = None
    d.setdefault("sdp_backend", get_config_key("sdp_backend"))
    d.setdefault("sdp_max_iters", get_config_key("sdp_max_iters"))
    return ReductionConfig.from_dict(d, path=source)


def reduce(model: Union[str, Path, ParamStateSpace], config: Union[str, Path, dict, ReductionConfig],
           output: Union[str, Path, None] = None, overrides: Optional[dict] = None, quiet=False, verbose=False,
           json_log=False) -> Tuple[dict, int]:
    """
    Run the SOS reduction from within python (bisection over gamma unless the config
    fixes gamma).

    For explanation of the arguments see the command line arguments in bin/ParsReduce.py.

    Return: (RunReport dict, exit code)
    """
    setup_parsreduce()
    st = time.time()
    G = _load_model(model)
    cfg = load_reduction_config(config, overrides)
    res = bisect_gamma(G, cfg, quiet=quiet, verbose=verbose, json_log=json_log)

    if not res.feasible:
        status, code = STATUS_INFEASIBLE, EXIT_ERROR
    elif res.converged:
        status, code = STATUS_CERTIFIED, EXIT_OK
    else:
        status, code = STATUS_NOT_CONVERGED, EXIT_NOT_CONVERGED

    report = build_report("reduce", cfg.to_dict(), status, res.error_table, res.reduced,
                          gamma=res.certified_gamma, gamma_lower=res.gamma_lower,
                          sampled_error=res.sampled_error, argmax_alpha=res.argmax_alpha,
                          converged=res.converged, certificate_min_eig=res.certificate_min_eig,
                          iteration_log=res.iteration_log, bisection_log=res.bisection_log,
                          message=res.message, timing={"total_s": time.time() - st})
    if output is not None:
        write_report(report, output, res.error_table, res.reduced)

    if not quiet:
        if res.feasible:
            print(f"Certified gamma: {res.certified_gamma:.6g}, sampled error: {res.sampled_error:.6g} "
                  f"({status})")
        else:
            print(f"No certificate found: {res.message}")
        print(f"  took: {time.time() - st:.2f}s")
    return report, code


def baseline(model: Union[str, Path, ParamStateSpace], keep: Sequence[int], output: Union[str, Path, None] = None,
             grid_per_dim=21, backend: Optional[str] = None, quiet=False, verbose=False) -> Tuple[dict, int]:
    """
    Gramian/LFT balanced truncation baseline.

    keep: retained size per LFT block [states, channel 1, ..., channel p].

    Return: (RunReport dict, exit code)
    """
    setup_parsreduce()
    st = time.time()
    G = _load_model(model)
    sdp_opts = SdpOptions(backend=backend or get_config_key("sdp_backend"),
                          max_iters=get_config_key("sdp_max_iters"))
    opts = GramianOptions(sdp=sdp_opts, quiet=quiet, verbose=verbose)
    reduced, bound, info = gramian_reduce(G, keep, opts)
    err, arg, table = sampled_sup_error(G, reduced, info["p_prime"], grid_per_dim,
                                        nr_threads=get_nr_threads(), quiet=quiet)
    status = STATUS_CERTIFIED if info["converged"] else STATUS_NOT_CONVERGED
    run_config = {"keep": list(keep), "grid_per_dim": grid_per_dim, "sdp_backend": sdp_opts.backend}
    report = build_report("baseline", run_config,
                          status, table, reduced,
                          bound=bound, bound_block_max=info["bound_block_max"], sampled_error=err, argmax_alpha=arg,
                          converged=info["converged"],
                          singular_values=info["singular_values"], objective_history=info["objective_history"],
                          timing={"total_s": time.time() - st})
    if output is not None:
        write_report(report, output, table, reduced)
    if not quiet:
        print(f"Truncation bound: {bound:.6g}, sampled error: {err:.6g}")
        print(f"  took: {time.time() - st:.2f}s")
    return report, EXIT_OK if info["converged"] else EXIT_NOT_CONVERGED


def validate(model: Union[str, Path, ParamStateSpace], reduced: Union[str, Path, ParamStateSpace],
             output: Union[str, Path, None] = None, grid_per_dim=21, quiet=False) -> Tuple[dict, int]:
    """
    Sampled worst-case H-infinity error between a model and a reduced model over the
    leading parameters of the model.

    Return: (RunReport dict, exit code)
    """
    st = time.time()
    G, Gp = _load_model(model), _load_model(reduced)
    if Gp.p > G.p:
        raise ValueError(f"reduced model has {Gp.p} parameters, model only {G.p}")
    err, arg, table = sampled_sup_error(G, Gp, Gp.p, grid_per_dim, nr_threads=get_nr_threads(), quiet=quiet)
    report = build_report("validate", {"grid_per_dim": grid_per_dim}, STATUS_CERTIFIED, table, None,
                          sampled_error=err, argmax_alpha=arg, timing={"total_s": time.time() - st})
    if output is not None:
        write_report(report, output, table, None)
    if not quiet:
        print(f"Max error: {err:.6g} at alpha={[round(float(a), 6) for a in arg]}")
    return report, EXIT_OK


def default_keep(G: ParamStateSpace, cfg: ReductionConfig) -> List[int]:
    """Baseline truncation matching a reduction config: n' states, channels of the leading p' parameters."""
    sizes = lft_realize(G).block_sizes
    return [min(cfg.n_prime, sizes[0])] + [s if ell < cfg.p_prime else 0 for ell, s in enumerate(sizes[1:])]


def compare(model: Union[str, Path, ParamStateSpace], configs: Sequence[Union[str, Path, dict]],
            output: Union[str, Path, None] = None, overrides: Optional[dict] = None, quiet=False,
            verbose=False) -> Tuple[dict, int]:
    """
    SOS reduction and Gramian baseline side by side, one pair of rows per config.

    Return: (RunReport dict with a 'rows' table, exit code)
    """
    st = time.time()
    G = _load_model(model)
    rows = []
    code = EXIT_OK
    for config in configs:
        cfg = load_reduction_config(config, overrides)
        name = Path(config).name if isinstance(config, (str, Path)) else f"n'={cfg.n_prime},p'={cfg.p_prime}"

        t0 = time.time()
        rep, c = reduce(G, cfg, quiet=True, verbose=verbose)
        code = max(code, c)
        rows.append({"config": name, "method": "sos", "gamma_or_bound": rep["gamma"],
                     "sampled_error": rep["sampled_error"], "runtime_s": time.time() - t0})

        if G.time_domain == "discrete":
            t0 = time.time()
            rep, c = baseline(G, default_keep(G, cfg), grid_per_dim=cfg.grid_per_dim, backend=cfg.sdp_backend,
                              quiet=True, verbose=verbose)
            code = max(code, c)
            rows.append({"config": name, "method": "gramian", "gamma_or_bound": rep["bound"],
                         "sampled_error": rep["sampled_error"], "runtime_s": time.time() - t0})

    table = pd.DataFrame(rows, columns=["config", "method", "gamma_or_bound", "sampled_error", "runtime_s"])
    report = build_report("compare", {"configs": [str(c) if not isinstance(c, dict) else c for c in configs]},
                          STATUS_CERTIFIED if code == EXIT_OK else STATUS_NOT_CONVERGED, None, None,
                          rows=table.drop(columns=["runtime_s"]).to_dict(orient="records"),
                          timing={"total_s": time.time() - st, "runtime_s": table["runtime_s"].tolist()})
    if output is not None:
        write_report(report, output)
        csv_file = Path(output).with_name(Path(output).stem + "_compare.csv")
        table.to_csv(csv_file, index=False)
    if not quiet:
        print(table.to_string(index=False))
    return report, code
