"""Run configuration: a nested YAML document with strict validation.

Unknown keys are rejected with their full path; every load returns the
fully-defaulted document so pipelines can echo a resolved config next
to their outputs (the echo plus the seed reproduces the run bit for
bit).
"""

import copy

import yaml

from .errors import ConfigurationError

_DEFAULTS = {
    "model": {
        "d": 1,
        "drift": {"preset": "zero", "params": {}, "coefficients": None},
        "x0": None,
    },
    "discretization": {
        "T": 100.0,
        "delta": 1e-3,
        "seed": 1,
    },
    "basis": {
        "family": "haar",
        "S": 2,
        "J": None,       # None: derive from T by the 2^J ~ T^{1/(2a+d)} rule
        "alpha": 0.0,
        "a": 2.0,
    },
    "solver": {
        "K": 32,
        "oversample": 2,
    },
    "study": {
        "kind": None,    # rate | bvm | invariant | coverage
        "horizons": None,
        "replications": 20,
        "norm": "l2",
        "draws": 200,
        "functionals": ["cos1", "sin1"],
    },
}


_FREE_FORM = {"model.drift.params"}


def _merge(defaults, user, path=""):
    out = copy.deepcopy(defaults)
    if user is None:
        return out
    if not isinstance(user, dict):
        raise ConfigurationError(f"config section {path or '<root>'} must be a mapping")
    for key, val in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigurationError(f"unknown config key: {here}")
        if (isinstance(defaults[key], dict) and here not in _FREE_FORM
                and isinstance(val, dict)):
            out[key] = _merge(defaults[key], val, here)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _validate(cfg):
    d = cfg["model"]["d"]
    if not isinstance(d, int) or not 1 <= d <= 3:
        raise ConfigurationError("model.d must be an integer in 1..3")
    if cfg["model"]["x0"] is None:
        cfg["model"]["x0"] = [0.0] * d
    if len(cfg["model"]["x0"]) != d:
        raise ConfigurationError("model.x0 length must equal model.d")
    if cfg["basis"]["alpha"] < 0:
        raise ConfigurationError("basis.alpha must be >= 0")
    if cfg["basis"]["a"] <= 0:
        raise ConfigurationError("basis.a must be > 0")
    if cfg["basis"]["family"] not in ("haar", "daubechies"):
        raise ConfigurationError("basis.family must be haar or daubechies")
    if cfg["discretization"]["delta"] <= 0:
        raise ConfigurationError("discretization.delta must be > 0")
    if cfg["discretization"]["T"] <= 0:
        raise ConfigurationError("discretization.T must be > 0")
    if cfg["solver"]["K"] < 4:
        raise ConfigurationError("solver.K must be >= 4")
    kind = cfg["study"]["kind"]
    if kind is not None and kind not in ("rate", "bvm", "invariant", "coverage"):
        raise ConfigurationError("study.kind must be rate, bvm, invariant or coverage")
    return cfg


def load_config(path):
    with open(path) as fh:
        user = yaml.safe_load(fh)
    return _validate(_merge(_DEFAULTS, user))


def resolve_config_dict(user):
    return _validate(_merge(_DEFAULTS, user))


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)
