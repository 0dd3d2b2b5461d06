"""Run configuration: one JSON document, schema-checked before any computation.

A config may name an ``experiment`` preset; its defaults are merged under the
user's values. The fully resolved document is what gets written to
``run.json``, so feeding that file back in reproduces the run.
"""

import copy
import json
import math
from pathlib import Path

import jsonschema

from .exceptions import ConfigError, InputError
from .model import likelihood_from_spec, prior_from_spec

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_DENSITY = {"type": "object", "required": [], "additionalProperties": True}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": ["gaussian", "rosenbrock", None]},
        "seed": {"type": "integer", "minimum": 0},
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "prior": {**_DENSITY, "required": ["family"]},
                "likelihood": {**_DENSITY, "required": ["variant"]},
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_chains": _POS_INT,
                "n_draws": _POS_INT,
                "n_burnin": {"type": ["integer", "null"], "minimum": 0},
                "thin": _POS_INT,
                "initial_scale": {"type": "number", "exclusiveMinimum": 0},
                "adapt_window": _POS_INT,
                "target_acceptance": {"type": "number", "exclusiveMinimum": 0,
                                      "exclusiveMaximum": 1},
                "max_init_tries": _POS_INT,
            },
        },
        "target": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "form": {"enum": ["gaussian", "mixture"]},
                "temperature": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "n_components": {"type": ["integer", "null"], "minimum": 1},
                "ridge": {"enum": ["auto", True, False]},
                "train_fraction": {"type": "number", "exclusiveMinimum": 0,
                                   "exclusiveMaximum": 1},
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k_max": _NUM,
                "ess_min": {"type": "number", "minimum": 0, "maximum": 1},
                "n_bootstrap": {"type": "integer", "minimum": 2},
                "scheme": {"enum": ["multinomial", "systematic"]},
                "uncertainty": {"enum": ["auto", "bootstrap", "per-chain"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "log10_widths": {"type": "array", "items": _NUM, "minItems": 1},
                "mean": _NUM,
                "shifts": {"type": "array", "items": _NUM, "minItems": 1},
                "centre": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "variance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["analytic", "grid", "none"]},
                "lower": _NUM,
                "upper": _NUM,
                "n_points": {"type": "integer", "minimum": 2},
            },
        },
    },
}

DEFAULTS = {
    "experiment": None,
    "seed": 0,
    "sampler": {
        "n_chains": 16,
        "n_draws": 1000,
        "n_burnin": None,
        "thin": 1,
        "initial_scale": 0.1,
        "adapt_window": 50,
        "target_acceptance": 0.234,
        "max_init_tries": 1000,
    },
    "target": {
        "form": "gaussian",
        "temperature": 0.8,
        "n_components": None,
        "ridge": "auto",
        "train_fraction": 0.5,
    },
    "policy": {
        "k_max": 0.7,
        "ess_min": 0.95,
        "n_bootstrap": 30,
        "scheme": "multinomial",
        "uncertainty": "auto",
    },
}

PRESETS = {
    "gaussian": {
        "problem": {
            "prior": {"family": "gaussian", "mean": 0.0, "std": 1.0, "dimension": 10},
            "likelihood": {"variant": "gaussian", "dimension": 10, "sigma": 2e-4},
        },
        "sampler": {"n_chains": 16, "n_draws": 1000, "n_burnin": 1000, "thin": 5},
        "target": {"form": "gaussian"},
        "sweep": {"log10_widths": [-1.5, -2.0, -2.5, -3.0, -3.5, -4.0], "mean": 0.0},
        "oracle": {"kind": "analytic"},
    },
    "rosenbrock": {
        "problem": {
            "prior": {"family": "uniform", "lower": -10.0, "upper": 10.0, "dimension": 2},
            "likelihood": {"variant": "rosenbrock", "a": 1.0, "b": 100.0},
        },
        "sampler": {"n_chains": 32, "n_draws": 2000, "n_burnin": 10000, "thin": 25},
        "target": {"form": "mixture"},
        "sweep": {"shifts": [0.0, 2.5, 5.0, 7.5, 10.0], "centre": [1.0, 1.0],
                  "variance": 0.06},
        "oracle": {"kind": "grid", "lower": -10.0, "upper": 10.0, "n_points": 4000},
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc


def resolve(doc=None, **overrides):
    """Validate ``doc``, merge it over the defaults and any preset, and apply
    command-line overrides given as dotted keys (``policy.k_max=0.5``)."""
    doc = {} if doc is None else doc
    validate(doc)
    out = _merge(DEFAULTS, PRESETS.get(doc.get("experiment"), {}))
    out = _merge(out, doc)
    for key, value in overrides.items():
        if value is None:
            continue
        *path, leaf = key.split(".")
        node = out
        for p in path:
            node = node.setdefault(p, {})
        node[leaf] = value
    validate(out)
    if "problem" in out:
        problem_models(out)
    return out


def load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def dump(cfg, path):
    with open(Path(path), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def problem_models(cfg):
    """(prior, likelihood) built from ``cfg["problem"]``."""
    problem = cfg.get("problem")
    if not problem or "prior" not in problem or "likelihood" not in problem:
        raise ConfigError("config needs problem.prior and problem.likelihood")
    try:
        prior = prior_from_spec(problem["prior"])
        likelihood = likelihood_from_spec(problem["likelihood"])
    except InputError as exc:
        raise ConfigError(f"config error in problem: {exc}") from exc
    if prior.dimension != likelihood.dimension:
        raise ConfigError(f"prior is {prior.dimension}-D but likelihood is "
                          f"{likelihood.dimension}-D")
    return prior, likelihood


def sweep_priors(cfg):
    """Alternative priors and their plot coordinate, from ``cfg["sweep"]``."""
    sweep = cfg.get("sweep") or {}
    prior, _ = problem_models(cfg)
    d = prior.dimension
    if "log10_widths" in sweep:
        mean = sweep.get("mean", 0.0)
        return [({"family": "gaussian", "mean": mean, "std": 10.0 ** w, "dimension": d}, w)
                for w in sweep["log10_widths"]]
    if "shifts" in sweep:
        if d != 2:
            raise ConfigError("shift sweeps are defined for 2-D problems")
        cx, cy = sweep.get("centre", [1.0, 1.0])
        std = math.sqrt(sweep.get("variance", 0.06))
        return [({"family": "gaussian", "mean": [cx, cy + s], "std": std, "dimension": 2}, s)
                for s in sweep["shifts"]]
    raise ConfigError("config has no sweep (log10_widths or shifts)")
