import os
import json
from pathlib import Path
from importlib.metadata import version as _dist_version, PackageNotFoundError

import psutil


DEFAULT_SETTINGS = {
    "sdp_backend": "reference",
    "sdp_max_iters": 200,
}


def get_parsreduce_dir():
    if "PARS_REDUCE_HOME_DIR" in os.environ:
        parsreduce_dir = Path(os.environ["PARS_REDUCE_HOME_DIR"])
    else:
        # no usable home directory (e.g. containers)
        home_path = Path("/tmp") if str(Path.home()) == "/" else Path.home()
        parsreduce_dir = home_path / ".parsreduce"
    return parsreduce_dir


def setup_parsreduce():
    """Create the home directory and its config.json with default settings if missing."""
    parsreduce_dir = get_parsreduce_dir()
    parsreduce_dir.mkdir(exist_ok=True, parents=True)
    config_file = parsreduce_dir / "config.json"

    if config_file.exists():
        with open(config_file) as f:
            config = json.load(f)
    else:
        config = dict(DEFAULT_SETTINGS)
        with open(config_file, "w") as f:
            json.dump(config, f, indent=4)
    return config


def get_config_key(key_name, default=None):
    config_file = get_parsreduce_dir() / "config.json"
    if config_file.exists():
        with open(config_file) as f:
            config = json.load(f)
        if key_name in config:
            return config[key_name]
    return DEFAULT_SETTINGS.get(key_name, default)


def set_config_key(key_name, value):
    config = setup_parsreduce()
    config[key_name] = value
    with open(get_parsreduce_dir() / "config.json", "w") as f:
        json.dump(config, f, indent=4)


def get_nr_threads():
    """
    Thread cap for grid evaluation from PARS_REDUCE_THREADS.
    Unset -> 1; 0 or negative -> all cores.
    """
    value = os.environ.get("PARS_REDUCE_THREADS", "1")
    try:
        nr = int(value)
    except ValueError:
        print(f"WARNING: ignoring invalid PARS_REDUCE_THREADS={value!r}, using 1 thread")
        return 1
    if nr <= 0:
        nr = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return nr


def get_hinf_cross_check():
    """PARS_REDUCE_HINF_CROSS_CHECK=1 makes every H-infinity evaluation compare against a frequency sweep."""
    return os.environ.get("PARS_REDUCE_HINF_CROSS_CHECK", "0").strip().lower() in ("1", "true", "yes")


def get_version():
    try:
        return _dist_version("ParsReduce")
    except PackageNotFoundError:
        return "not_found"
