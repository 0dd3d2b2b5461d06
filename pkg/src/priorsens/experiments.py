"""End-to-end pipelines driven by a resolved run config.

The same steps back the CLI subcommands: sample, fit a target on the training
chains, estimate the evidence on the evaluation chains, sweep alternative
priors, and (for the toy experiments) compare against an oracle and plot.
"""

import csv
import hashlib
import json
import math
import os
import warnings
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import config as config_mod
from .evidence import lhme
from .model import GaussianLikelihood, GaussianPrior, prior_from_spec
from .oracles import GridSpec, gaussian_log_evidence, grid_log_evidence
from .sampler import SamplerConfig, run_metropolis
from .samples import split_chains, write_chains
from .sensitivity import Policy, _jsonable, cache_log_likelihood, sweep
from .target import fit_target, save_target


def sampler_config(cfg):
    return SamplerConfig(seed=cfg["seed"], **cfg["sampler"])


def policy(cfg):
    p = cfg["policy"]
    return Policy(k_max=p["k_max"], ess_min=p["ess_min"], n_bootstrap=p["n_bootstrap"],
                  seed=cfg["seed"], scheme=p["scheme"], uncertainty=p["uncertainty"])


def sample(cfg, threads=None):
    prior, likelihood = config_mod.problem_models(cfg)
    return run_metropolis(prior, likelihood, sampler_config(cfg), threads=threads)


def split(samples, cfg):
    return split_chains(samples, cfg["target"]["train_fraction"])


def fit(train, cfg):
    t = cfg["target"]
    return fit_target(train, form=t["form"], temperature=t["temperature"], seed=cfg["seed"],
                      n_components=t["n_components"], ridge=t["ridge"])


def evidence(samples, cfg, target=None):
    """(estimate, target, train, eval) for a ChainSet; fits a target unless given."""
    prior, likelihood = config_mod.problem_models(cfg)
    train, held = split(samples, cfg)
    if target is None:
        target = fit(train, cfg)
    est = lhme(held, prior, likelihood, target)
    return est, target, train, held


def sensitivity(samples, priors, cfg, target=None, threads=None):
    """SensitivityReport over alternative prior specs or models."""
    prior, likelihood = config_mod.problem_models(cfg)
    train, held = split(samples, cfg)
    if target is None:
        target = fit(train, cfg)
    logl = cache_log_likelihood(held, likelihood)
    original = lhme(held, prior, likelihood, target, log_likelihood=logl)
    return sweep(held, prior, likelihood, target, list(priors), policy(cfg), threads=threads,
                 original=original, log_likelihood=logl, train_samples=train)


# --------------------------------------------------------------------------- oracles

def _cache_path():
    root = os.environ.get("PRIORSENS_CACHE") or os.path.join(
        os.environ.get("XDG_CACHE_HOME") or os.path.expanduser("~/.cache"), "priorsens")
    return Path(root) / "oracles.json"


def _cache_load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return {}


def _cache_store(path, key, value):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        data = _cache_load(path)
        data[key] = value
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
        os.replace(tmp, path)
    except OSError:
        pass  # a cache miss next time is harmless


def _analytic(prior, likelihood):
    if not (isinstance(prior, GaussianPrior) and isinstance(likelihood, GaussianLikelihood)):
        return None
    if np.any(prior.mean != 0) or np.any(likelihood.mean != 0):
        return None
    if np.ptp(prior.std) != 0:
        return None
    return gaussian_log_evidence(prior.dimension, likelihood.sigma, float(prior.std[0]))


def oracle_log_evidence(prior, likelihood, oracle_cfg, use_cache=True):
    """(log Z, tag) from the configured oracle, or (None, reason)."""
    kind = (oracle_cfg or {}).get("kind", "none")
    if kind == "analytic":
        value = _analytic(prior, likelihood)
        return (value, "analytic") if value is not None else (None, "analytic-unavailable")
    if kind != "grid":
        return None, "none"
    d = prior.dimension
    if d > 2:
        return None, "grid-unavailable"
    grid = GridSpec.square(oracle_cfg.get("lower", -10.0), oracle_cfg.get("upper", 10.0),
                           oracle_cfg.get("n_points", 4000), d)
    tag = f"grid-{grid.resolution_tag()}"
    key_doc = {"prior": prior.to_spec(), "likelihood": likelihood.to_spec(),
               "lower": grid.lower, "upper": grid.upper, "n": grid.n_points}
    key = hashlib.sha256(json.dumps(key_doc, sort_keys=True).encode()).hexdigest()
    path = _cache_path()
    if use_cache:
        hit = _cache_load(path).get(key)
        if hit is not None:
            return float(hit), tag
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        value = grid_log_evidence(prior, likelihood, grid)
    if use_cache:
        _cache_store(path, key, value)
    return value, tag


# --------------------------------------------------------------------------- plots

def line_plot_svg(xs, ys, xlabel, ylabel, title, hlines=(), width=480, height=320):
    """Minimal standalone SVG line plot; non-finite points are skipped."""
    pts = [(float(x), float(y)) for x, y in zip(xs, ys)
           if y is not None and math.isfinite(float(y))]
    ml, mr, mt, mb = 64, 16, 32, 48
    pw, ph = width - ml - mr, height - mt - mb
    xv = [p[0] for p in pts] or [0.0, 1.0]
    yv = [p[1] for p in pts] + [h for h in hlines]
    yv = yv or [0.0, 1.0]
    x0, x1 = min(xv), max(xv)
    y0, y1 = min(yv), max(yv)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.08 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
           f'{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<line x1="{sx(fx):.1f}" y1="{mt + ph}" x2="{sx(fx):.1f}" '
                   f'y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(fx):.1f}" y="{mt + ph + 16}" text-anchor="middle">'
                   f'{fx:.3g}</text>')
        out.append(f'<line x1="{ml - 4}" y1="{sy(fy):.1f}" x2="{ml}" y2="{sy(fy):.1f}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{sy(fy) + 4:.1f}" text-anchor="end">{fy:.3g}</text>')
    for h in hlines:
        out.append(f'<line x1="{ml}" y1="{sy(h):.1f}" x2="{ml + pw}" y2="{sy(h):.1f}" '
                   f'stroke="grey" stroke-dasharray="4,3"/>')
    if pts:
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="#1f77b4"/>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- experiment

def percent_error(log_z, log_z_true):
    if log_z is None or log_z_true is None or log_z_true == 0:
        return None
    return 100.0 * (log_z - log_z_true) / abs(log_z_true)


def write_contours(path, samples, prior_specs, shifts):
    """Posterior draws and the alternative priors' ellipse parameters in one CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "index", "x", "y", "sd_x", "sd_y", "corr"])
        for c, chain in enumerate(samples.chains):
            for x, y in chain:
                w.writerow(["draw", c, repr(float(x)), repr(float(y)), "", "", ""])
        for i, (spec, s) in enumerate(zip(prior_specs, shifts)):
            p = prior_from_spec(spec)
            w.writerow(["prior", i, repr(float(p.mean[0])), repr(float(p.mean[1])),
                        repr(float(p.std[0])), repr(float(p.std[1])), "0.0"])


def run_experiment(cfg, out, threads=None, use_cache=True, log=None):
    """Run sample -> fit -> evidence -> sweep for a resolved config and write
    every output under ``out``. Returns a summary dict."""
    log = log or (lambda msg: None)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    config_mod.dump(cfg, out / "run.json")
    name = cfg.get("experiment") or "custom"
    prior, likelihood = config_mod.problem_models(cfg)
    alternatives = config_mod.sweep_priors(cfg)
    specs = [a[0] for a in alternatives]
    xs = [a[1] for a in alternatives]

    log(f"sampling {cfg['sampler']['n_chains']} chains")
    samples = sample(cfg, threads)
    write_chains(samples, out / "samples")
    est, target, train, held = evidence(samples, cfg)
    save_target(target, out / "target.json")

    oracle_cfg = cfg.get("oracle")
    z0_true, tag = oracle_log_evidence(prior, likelihood, oracle_cfg, use_cache)
    ev_doc = {"evidence": est.to_dict(), "log_z_true": z0_true, "oracle": tag,
              "percent_error": percent_error(est.log_z, z0_true)}
    write_json(out / "evidence.json", ev_doc)

    log(f"sweeping {len(specs)} alternative priors")
    report = sensitivity(samples, specs, cfg, target=target, threads=threads)
    (out / "sensitivity.json").write_text(report.to_json(timing=False))

    truths = []
    for spec in specs:
        z, _ = oracle_log_evidence(prior_from_spec(spec), likelihood, oracle_cfg, use_cache)
        truths.append(z)
    log_zs = [e.evidence.log_z if e.evidence else None for e in report.entries]
    pes = [percent_error(z, t) for z, t in zip(log_zs, truths)]
    xname = "log10_width" if "log10_widths" in cfg.get("sweep", {}) else "shift"
    extra = {xname: xs, "log_z_true": truths, "oracle": [tag] * len(xs), "percent_error": pes}
    (out / "sweep.csv").write_text(report.to_csv(extra))

    ess = [e.weights["ess_fraction"] if e.weights else None for e in report.entries]
    ks = [e.weights["pareto_k"] if e.weights else None for e in report.entries]
    xlabel = "log10 prior width" if xname == "log10_width" else "prior shift along y"
    (out / "percent_error.svg").write_text(
        line_plot_svg(xs, pes, xlabel, "percent error in log Z", f"{name}: evidence error",
                      hlines=(0.0,)))
    (out / "ess_fraction.svg").write_text(
        line_plot_svg(xs, ess, xlabel, "ESS / N", f"{name}: fractional ESS",
                      hlines=(cfg["policy"]["ess_min"],)))
    (out / "pareto_k.svg").write_text(
        line_plot_svg(xs, ks, xlabel, "Pareto k-hat", f"{name}: Pareto k-hat",
                      hlines=(cfg["policy"]["k_max"],)))
    if xname == "shift":
        write_contours(out / "contours.csv", samples, specs, xs)
    return {"evidence": ev_doc, "report": report, "log_z_true": truths,
            "percent_error": pes, "x": xs}


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
