"""Experiment configuration: a versioned key-value document.

Unknown keys anywhere are errors, so a misspelled metric parameter cannot
silently fall back to a default. Configs load from YAML or JSON; the JSON
canonical form (sorted keys, no whitespace) is what gets hashed.
"""
import copy
import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .. import targets as T
from ..errors import ConfigurationError, MagssError
from ..geodesics import METHODS, IntegratorConfig
from ..metrics import METRIC_NAMES
from ..samplers import (DigsConfig, MagssConfig, MetaConfig, PtConfig, linear_schedule)
from ..slice import SliceParams

SCHEMA_VERSION = 1

SAMPLERS = ("magss", "hit_and_run", "meta_magss", "mala", "pt", "digs")

# sampler name -> allowed parameter names
SAMPLER_PARAMS = {
    "magss": (),
    "hit_and_run": (),
    "meta_magss": ("K", "L", "step_size"),
    "mala": ("step_size",),
    "pt": ("temperatures", "step_size", "step_sizes"),
    "digs": ("alphas", "n_levels", "alpha_min", "alpha_max", "n_local", "step_size"),
}

TARGET_PARAMS = {
    "gaussian": ("dim", "scale"),
    "two_gaussians": ("dim", "sigma", "weights"),
    "gmm40": ("sigma",),
    "funnel": ("dim", "sigma", "mu"),
    "rosenbrock": ("dim", "a", "b", "block_size"),
    "squiggle": ("dim", "a", "var_first", "var_rest"),
    "narrow_mixture": (),
    "field_system": ("dim", "a", "b", "beta"),
    "logistic": ("n", "dim", "data_seed", "alpha", "data_path"),
}

DEFAULTS = {
    "version": SCHEMA_VERSION,
    "target": {"name": "gaussian", "params": {}},
    "sampler": {"name": "magss", "params": {}},
    "metric": {"name": "euclidean", "params": {}},
    "integrator": IntegratorConfig().to_dict(),
    "slice": SliceParams().to_dict(),
    "n_chains": 1,
    "n_samples": 1000,
    "burn_in": None,
    "thinning": 1,
    "seed": None,
    "init": {"kind": "normal", "point": None},
    "output_dir": "magss_out",
    "workers": 1,
    "diagnostics": {"ksd_max_n": 2000, "reference_n": None},
    "grid": {"params": {}, "n_samples": None},
    "trace": {"origin": None, "n_directions": 16, "t_max": 3.0, "dt": 0.05},
    "tune": {"rate": 0.6, "bracket": [1e-4, 1.0], "n_pilot": 2000, "max_iter": 30,
             "tolerance": 0.05},
}

# flat override name -> config path
OVERRIDES = {
    "target": ("target", "name"),
    "sampler": ("sampler", "name"),
    "metric": ("metric", "name"),
    "alpha2": ("metric", "params", "alpha2"),
    "lambda": ("metric", "params", "lambda"),
    "p0": ("metric", "params", "p0"),
    "integrator": ("integrator", "kind"),
    "step_size": ("integrator", "h"),
    "rtol": ("integrator", "rtol"),
    "atol": ("integrator", "atol"),
    "w": ("slice", "w"),
    "m": ("slice", "m"),
    "n_samples": ("n_samples",),
    "n_chains": ("n_chains",),
    "seed": ("seed",),
    "output_dir": ("output_dir",),
    "workers": ("workers",),
}

# short names accepted as grid axes
GRID_AXES = {
    "alpha2": ("metric", "params", "alpha2"),
    "lambda": ("metric", "params", "lambda"),
    "p0": ("metric", "params", "p0"),
    "w": ("slice", "w"),
    "m": ("slice", "m"),
    "h": ("integrator", "h"),
    "step_size": ("sampler", "params", "step_size"),
    "K": ("sampler", "params", "K"),
    "L": ("sampler", "params", "L"),
    "seed": ("seed",),
}


def _merge(base, doc, path=""):
    out = copy.deepcopy(base)
    for key, val in doc.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown config key '{where}'")
        # free-form parameter maps are checked against their owner's name later
        if isinstance(base[key], dict) and key != "params" and isinstance(val, dict):
            out[key] = _merge(base[key], val, where + ".")
        elif isinstance(base[key], dict) and key != "params":
            raise ConfigurationError(f"config key '{where}' must be a mapping")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _get(doc, path):
    for key in path:
        doc = doc[key]
    return doc


def _set(doc, path, value):
    for key in path[:-1]:
        doc = doc.setdefault(key, {})
    doc[path[-1]] = value


def set_path(doc, path, value):
    _set(doc, path, value)


def read_document(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping")
    return doc


def load_config(path=None, overrides=None):
    doc = read_document(path) if path is not None else {}
    return build_config(doc, overrides)


def build_config(doc, overrides=None):
    """Merge ``doc`` over the defaults, apply flat overrides and validate."""
    if "version" in doc and doc["version"] != SCHEMA_VERSION:
        raise ConfigurationError(
            f"config 'version' must be {SCHEMA_VERSION}, got {doc['version']!r}")
    cfg = _merge(DEFAULTS, doc)
    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if name not in OVERRIDES:
            raise ConfigurationError(f"unknown override '{name}'")
        path = OVERRIDES[name]
        # switching the metric drops parameters meant for the old one
        if name == "metric" and value != cfg["metric"]["name"]:
            cfg["metric"]["params"] = {}
        if name == "target" and value != cfg["target"]["name"]:
            cfg["target"]["params"] = {}
        if name == "sampler" and value != cfg["sampler"]["name"]:
            cfg["sampler"]["params"] = {}
        _set(cfg, path, value)
    validate(cfg)
    return cfg


def _need(cond, field, msg):
    if not cond:
        raise ConfigurationError(f"config '{field}': {msg}")


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def validate(cfg):
    _need(cfg["seed"] is not None, "seed", "a master seed is required")
    _need(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "seed", "must be a non-negative integer")
    for key in ("n_chains", "n_samples", "thinning", "workers"):
        _need(_is_int(cfg[key]) and cfg[key] >= 1, key, "must be an integer >= 1")
    if cfg["burn_in"] is not None:
        _need(_is_int(cfg["burn_in"]) and cfg["burn_in"] >= 0, "burn_in",
              "must be a non-negative integer")
    t = cfg["target"]
    _need(t["name"] in TARGET_PARAMS, "target.name",
          f"unknown target {t['name']!r}; choose from {sorted(TARGET_PARAMS)}")
    for k in t["params"]:
        _need(k in TARGET_PARAMS[t["name"]], f"target.params.{k}",
              f"not a parameter of target {t['name']!r}")
    s = cfg["sampler"]
    _need(s["name"] in SAMPLER_PARAMS, "sampler.name",
          f"unknown sampler {s['name']!r}; choose from {list(SAMPLERS)}")
    for k in s["params"]:
        _need(k in SAMPLER_PARAMS[s["name"]], f"sampler.params.{k}",
              f"not a parameter of sampler {s['name']!r}")
    _need(cfg["metric"]["name"] in METRIC_NAMES, "metric.name",
          f"unknown metric {cfg['metric']['name']!r}; choose from {sorted(METRIC_NAMES)}")
    _need(cfg["integrator"]["kind"] in METHODS, "integrator.kind",
          f"choose from {sorted(METHODS)}")
    init = cfg["init"]
    _need(init["kind"] in ("fixed", "reference", "normal"), "init.kind",
          "must be 'fixed', 'reference' or 'normal'")
    if init["kind"] == "fixed":
        _need(init["point"] is not None, "init.point", "required when init.kind is 'fixed'")
    grid = cfg["grid"]["params"]
    _need(isinstance(grid, dict) and len(grid) <= 2, "grid.params",
          "must map at most 2 axis names to value lists")
    for k, vals in grid.items():
        _need(k in GRID_AXES, f"grid.params.{k}", f"unknown grid axis; choose from {sorted(GRID_AXES)}")
        _need(isinstance(vals, (list, tuple)) and len(vals) >= 1, f"grid.params.{k}",
              "must be a non-empty list")
    tune = cfg["tune"]
    _need(0 < tune["rate"] < 1, "tune.rate", "must lie in (0, 1)")
    br = tune["bracket"]
    _need(isinstance(br, (list, tuple)) and len(br) == 2 and 0 < br[0] < br[1],
          "tune.bracket", "must be [lo, hi] with 0 < lo < hi")
    # building the objects runs the domain checks of each component
    try:
        target = build_target(cfg)
        build_sampler_config(cfg, target)
    except ConfigurationError:
        raise
    except (MagssError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"config rejected: {exc}") from exc
    return cfg


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def config_hash(cfg):
    """SHA-256 of the canonical JSON with run-location fields left out."""
    doc = {k: v for k, v in cfg.items() if k not in ("output_dir", "workers")}
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def burn_in_of(cfg):
    return cfg["n_samples"] // 10 if cfg["burn_in"] is None else cfg["burn_in"]


# ------------------------------------------------------------------ builders

def build_target(cfg):
    name = cfg["target"]["name"]
    p = dict(cfg["target"]["params"])
    if name == "gaussian":
        return T.GaussianTarget(int(p.get("dim", 2)), float(p.get("scale", 1.0)))
    if name == "two_gaussians":
        return T.two_gaussians(int(p.get("dim", 2)), float(p.get("sigma", 0.1)),
                               tuple(p.get("weights", (0.2, 0.8))))
    if name == "gmm40":
        return T.gmm40(float(p.get("sigma", 0.1)))
    if name == "funnel":
        return T.FunnelTarget(int(p.get("dim", 2)), float(p.get("sigma", 3.0)),
                              float(p.get("mu", 0.0)))
    if name == "rosenbrock":
        return T.HybridRosenbrockTarget(int(p.get("dim", 2)), float(p.get("a", 1.0)),
                                        float(p.get("b", 100.0)), int(p.get("block_size", 3)))
    if name == "squiggle":
        return T.SquiggleTarget(int(p.get("dim", 2)), float(p.get("a", 1.5)),
                                float(p.get("var_first", 5.0)), float(p.get("var_rest", 0.5)))
    if name == "narrow_mixture":
        return T.narrow_mixture()
    if name == "field_system":
        b = p.get("b")
        return T.FieldSystemTarget(int(p.get("dim", 16)), float(p.get("a", 0.1)),
                                   None if b is None else float(b), float(p.get("beta", 1.0)))
    if name == "logistic":
        if p.get("data_path"):
            X, y = T.load_logistic_data(p["data_path"])
        else:
            X, y = T.synthetic_logistic_data(int(p.get("n", 200)), int(p.get("dim", 4)),
                                             int(p.get("data_seed", 0)))
        return T.LogisticRegressionTarget(X, y, float(p.get("alpha", 100.0)))
    raise ConfigurationError(f"config 'target.name': unknown target {name!r}")


def integrator_config(cfg):
    return IntegratorConfig(**cfg["integrator"])


def slice_params(cfg):
    return SliceParams(**cfg["slice"])


def magss_config(cfg):
    return MagssConfig(metric=cfg["metric"]["name"], metric_params=dict(cfg["metric"]["params"]),
                       integrator=integrator_config(cfg), slice=slice_params(cfg))


def build_sampler_config(cfg, target):
    """Sampler-specific config object; also instantiates the metric as a check."""
    name = cfg["sampler"]["name"]
    p = dict(cfg["sampler"]["params"])
    if name in ("magss", "meta_magss"):
        mc = magss_config(cfg)
        mc.metric_for(target)
        if name == "magss":
            return mc
        return MetaConfig(magss=mc, K=int(p.get("K", 1)), L=int(p.get("L", 10)),
                          step_size=float(p.get("step_size", 0.1)))
    if name == "hit_and_run":
        return slice_params(cfg)
    if name == "mala":
        eps = float(p.get("step_size", 0.1))
        if not eps > 0:
            raise ConfigurationError("config 'sampler.params.step_size': must be > 0")
        return eps
    if name == "pt":
        kw = {}
        if "temperatures" in p:
            kw["temperatures"] = tuple(float(t) for t in p["temperatures"])
        if "step_sizes" in p:
            kw["step_sizes"] = tuple(float(e) for e in p["step_sizes"])
        return PtConfig(step_size=float(p.get("step_size", 0.1)), **kw)
    if name == "digs":
        if "alphas" in p:
            alphas = tuple(float(a) for a in p["alphas"])
        elif "n_levels" in p:
            alphas = linear_schedule(int(p["n_levels"]), float(p.get("alpha_min", 0.1)),
                                     float(p.get("alpha_max", 0.9)))
        else:
            alphas = DigsConfig().alphas
        return DigsConfig(alphas=alphas, n_local=int(p.get("n_local", 10)),
                          step_size=float(p.get("step_size", 0.1)))
    raise ConfigurationError(f"config 'sampler.name': unknown sampler {name!r}")
