"""Run configuration: TOML files, per-environment defaults, CLI overrides.

A run is described by a flat set of dotted keys grouped into sections
(run, grid, time, kernel, operator, cluster, truth, tracks, plan).
Defaults depend on the chosen environment; a TOML file overrides the
defaults and ``--section.key value`` flags override the file. Any
unknown key or malformed value raises ConfigError, which the CLI maps
to exit code 2.
"""

import copy
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import ConfigError

__all__ = ["RunConfig", "load_config", "ENVIRONMENTS"]

ENVIRONMENTS = ("double_gyre", "bickley", "single_gyre")

_BASE = {
    "run": {"environment": "double_gyre", "outdir": "runs/out", "seed": 0},
    "grid": {"nx": 60, "ny": 30},
    "time": {"t0": 0.0, "t_end": 20.0, "dt_out": 0.1},
    "kernel": {"kind": "gaussian", "sigma": 0.75, "degree": 2, "offset": 1.0},
    "operator": {"epsilon": 1e-4, "n_eigen": 3, "imag_tol": 1e-9},
    "cluster": {"k": 3, "restarts": 20},
    "truth": {"tau_index": -1, "runs": 10},
    "tracks": {"path": "", "labels": "", "frame_dt": 0.4, "frame0": 0, "n_frames": 51},
    "plan": {
        "amp": 0.9 / 3.141592653589793,
        "start": [0.35, 0.35],
        "goal": [4.15, 0.35],
        "u_max": 0.2,
        "omega_max": 3.0,
        "goal_radius": 0.2,
        "waypoint_radius": 0.2,
        "dt": 0.05,
        "t_max": 600.0,
        "cell_size": 0.25,
    },
}

# environment-specific deviations from _BASE
_ENV_DEFAULTS = {
    "double_gyre": {},
    "bickley": {
        "grid": {"nx": 60, "ny": 24},
        "time": {"t_end": 40.0, "dt_out": 0.2},
        "kernel": {"sigma": 1.0},
        "operator": {"epsilon": 1e-3, "n_eigen": 9},
        "cluster": {"k": 9},
    },
    "single_gyre": {
        "grid": {"nx": 45, "ny": 30},
        "time": {"t_end": 30.0, "dt_out": 0.2},
        "kernel": {"sigma": 1.25},
        "operator": {"epsilon": 1e-4, "n_eigen": 2},
        "cluster": {"k": 2},
        "truth": {"runs": 5},
    },
    "csv": {
        "kernel": {"kind": "polynomial"},
        "operator": {"epsilon": 1e-2, "n_eigen": 3},
        "cluster": {"k": 3},
    },
}


class RunConfig:
    """Immutable view over the merged configuration mapping."""

    def __init__(self, data):
        self._data = copy.deepcopy(data)

    def __getitem__(self, dotted):
        section, _, key = dotted.partition(".")
        try:
            if key:
                return self._data[section][key]
            return self._data[section]
        except KeyError:
            raise ConfigError(f"unknown config key {dotted!r}") from None

    @property
    def environment(self):
        return self._data["run"]["environment"]

    @property
    def outdir(self):
        return self._data["run"]["outdir"]

    def to_dict(self):
        return copy.deepcopy(self._data)


def _env_key(environment):
    if environment.startswith("csv:"):
        return "csv"
    if environment in ENVIRONMENTS:
        return environment
    raise ConfigError(
        f"unknown environment {environment!r}; expected one of "
        f"{', '.join(ENVIRONMENTS)} or csv:<path>"
    )


def _defaults_for(environment):
    data = copy.deepcopy(_BASE)
    data["run"]["environment"] = environment
    env = _env_key(environment)
    for section, values in _ENV_DEFAULTS[env].items():
        data[section].update(values)
    if env == "csv":
        data["tracks"]["path"] = environment[len("csv:"):]
    return data


def _merge_checked(data, incoming, origin):
    for section, values in incoming.items():
        if section not in data:
            raise ConfigError(f"{origin}: unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"{origin}: {section!r} must be a table")
        for key, value in values.items():
            if key not in data[section]:
                raise ConfigError(f"{origin}: unknown config key {section}.{key}")
            current = data[section][key]
            if isinstance(current, bool) and not isinstance(value, bool):
                raise ConfigError(f"{origin}: {section}.{key} expects a boolean")
            if isinstance(current, (int, float)) and not isinstance(current, bool):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{origin}: {section}.{key} expects a number")
                value = type(current)(value) if isinstance(current, float) else value
            if isinstance(current, str) and not isinstance(value, str):
                raise ConfigError(f"{origin}: {section}.{key} expects a string")
            if isinstance(current, list) and not isinstance(value, list):
                raise ConfigError(f"{origin}: {section}.{key} expects a list")
            data[section][key] = value


def _coerce(raw, template, dotted):
    if isinstance(template, bool):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"override {dotted}: expected a boolean, got {raw!r}")
    if isinstance(template, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"override {dotted}: expected an integer, got {raw!r}") from None
    if isinstance(template, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"override {dotted}: expected a number, got {raw!r}") from None
    if isinstance(template, list):
        try:
            return [float(v) for v in raw.split(",")]
        except ValueError:
            raise ConfigError(
                f"override {dotted}: expected comma-separated numbers, got {raw!r}"
            ) from None
    return raw


def _validate(data):
    t0, t_end, dt = data["time"]["t0"], data["time"]["t_end"], data["time"]["dt_out"]
    if dt <= 0:
        raise ConfigError("time.dt_out must be positive")
    if t_end <= t0:
        raise ConfigError("time.t_end must exceed time.t0")
    for key in ("nx", "ny"):
        if data["grid"][key] < 2:
            raise ConfigError(f"grid.{key} must be at least 2")
    if data["kernel"]["kind"] not in ("gaussian", "polynomial"):
        raise ConfigError("kernel.kind must be gaussian or polynomial")
    if data["kernel"]["sigma"] <= 0:
        raise ConfigError("kernel.sigma must be positive")
    if data["operator"]["epsilon"] <= 0:
        raise ConfigError("operator.epsilon must be positive")
    if data["operator"]["n_eigen"] < 1:
        raise ConfigError("operator.n_eigen must be at least 1")
    if data["cluster"]["k"] < 1:
        raise ConfigError("cluster.k must be at least 1")
    if data["cluster"]["restarts"] < 1:
        raise ConfigError("cluster.restarts must be at least 1")
    if data["truth"]["runs"] < 1:
        raise ConfigError("truth.runs must be at least 1")
    env = data["run"]["environment"]
    if env.startswith("csv:") and not data["tracks"]["path"]:
        raise ConfigError("csv environment needs a track file path")
    if len(data["plan"]["start"]) != 2 or len(data["plan"]["goal"]) != 2:
        raise ConfigError("plan.start and plan.goal must be 2-d points")


def load_config(path=None, environment=None, overrides=()):
    """Merge defaults, an optional TOML file, and dotted-key overrides.

    Precedence (low to high): environment defaults, TOML file contents,
    ``overrides`` given as (dotted_key, raw_value) pairs. The
    environment may come from the file's run.environment or the
    ``environment`` argument (the argument wins).
    """
    file_data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                file_data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    env = environment
    if env is None:
        env = file_data.get("run", {}).get("environment", _BASE["run"]["environment"])
    if not isinstance(env, str):
        raise ConfigError("run.environment must be a string")
    data = _defaults_for(env)
    _merge_checked(data, file_data, str(path) if path else "config")
    data["run"]["environment"] = env
    for dotted, raw in overrides:
        section, _, key = dotted.partition(".")
        if not key or section not in data or key not in data[section]:
            raise ConfigError(f"unknown override key {dotted!r}")
        data[section][key] = _coerce(raw, data[section][key], dotted)
    _validate(data)
    return RunConfig(data)
