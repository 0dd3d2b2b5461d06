"""Command-line interface.

Subcommands: ``sample``, ``fit-target``, ``evidence``, ``sensitivity`` and
``experiment``. Each writes its outputs plus a ``run.json`` holding the fully
resolved configuration; passing that file back via ``--config`` repeats the
run exactly.

Exit codes: 0 success (a sweep with per-entry errors still succeeds),
2 configuration or usage error, 3 data or file-format error, 4 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import experiments
from .evidence import bootstrap_sigma
from .exceptions import ConfigError, PriorSensError
from .samples import read_chains, write_chains
from .target import load_target, save_target

log = logging.getLogger("priorsens")


def _common(p, samples=False):
    if samples:
        p.add_argument("samples", help="samples directory (manifest.json + chain CSVs)")
    p.add_argument("--config", help="run configuration (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, default=None, help="maximum worker threads")
    p.add_argument("--bootstrap", type=int, metavar="R",
                   help="bootstrap replicates over chains")
    p.add_argument("--temperature", type=float, metavar="T", help="target temperature")
    p.add_argument("--k-max", type=float, help="Pareto k-hat refit threshold")
    p.add_argument("--ess-min", type=float, help="fractional ESS retrain threshold")
    p.add_argument("--target-file", help="previously fitted target (JSON) to reuse")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="priorsens",
        description="Evidence estimation and prior sensitivity from posterior draws.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("sample", help="draw posterior samples"))
    _common(sub.add_parser("fit-target", help="fit a learned target to samples"), samples=True)
    _common(sub.add_parser("evidence", help="estimate log Z from samples"), samples=True)
    p = sub.add_parser("sensitivity", help="sweep alternative priors")
    _common(p, samples=True)
    p.add_argument("priors", help="JSON array of alternative prior specs")
    p = sub.add_parser("experiment", help="run a toy experiment end to end")
    p.add_argument("name", nargs="?", choices=sorted(config_mod.PRESETS),
                   help="experiment preset (may instead come from --config)")
    _common(p)
    p.add_argument("--no-oracle-cache", action="store_true",
                   help="recompute grid oracles instead of using the on-disk cache")
    return parser


def _resolve(args, experiment=None):
    doc = config_mod.load(args.config) if args.config else {}
    if experiment is not None:
        doc = {**doc, "experiment": experiment}
    return config_mod.resolve(doc, **{
        "seed": args.seed,
        "policy.n_bootstrap": args.bootstrap,
        "target.temperature": args.temperature,
        "policy.k_max": args.k_max,
        "policy.ess_min": args.ess_min,
    })


def _out_dir(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_mod.dump(cfg, out / "run.json")
    return out


def _target(args):
    return load_target(args.target_file) if args.target_file else None


def cmd_sample(args):
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    cs = experiments.sample(cfg, args.threads)
    write_chains(cs, out)
    rates = cs.metadata["sampler"]["acceptance_rates"]
    print(f"wrote {cs.n_chains} chains x {cs.chain_lengths[0]} draws to {out} "
          f"(acceptance {min(rates):.2f}-{max(rates):.2f})")


def cmd_fit_target(args):
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    cs = read_chains(args.samples)
    train, _ = experiments.split(cs, cfg)
    target = experiments.fit(train, cfg)
    save_target(target, out / "target.json")
    print(f"wrote {out / 'target.json'} ({target.form}, "
          f"{len(target.weights_)} component(s), T={target.temperature})")


def cmd_evidence(args):
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    cs = read_chains(args.samples)
    est, target, _, held = experiments.evidence(cs, cfg, _target(args))
    if args.bootstrap is not None or cfg["policy"]["uncertainty"] == "bootstrap":
        prior, likelihood = config_mod.problem_models(cfg)
        R = cfg["policy"]["n_bootstrap"]
        est = est.with_uncertainty(
            bootstrap_sigma(held, prior, likelihood, target, R, cfg["seed"]), f"bootstrap({R})")
    if not args.target_file:
        save_target(target, out / "target.json")
    experiments.write_json(out / "evidence.json", {
        "evidence": est.to_dict(),
        "target": {"form": target.form, "temperature": target.temperature,
                   "file": args.target_file or str(out / "target.json")},
    })
    print(f"log Z = {est.log_z:.6f} +/- {est.sigma_log_z:.6f} ({est.uncertainty_method})")


def _load_priors(path):
    try:
        with open(path) as fh:
            priors = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read priors file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(priors, list) or not all(isinstance(p, dict) for p in priors):
        raise ConfigError(f"{path}: expected a JSON array of prior objects")
    if not priors:
        raise ConfigError(f"{path}: no alternative priors")
    return priors


def cmd_sensitivity(args):
    cfg = _resolve(args)
    priors = _load_priors(args.priors)
    out = _out_dir(args, cfg)
    cs = read_chains(args.samples)
    report = experiments.sensitivity(cs, priors, cfg, _target(args), args.threads)
    (out / "sensitivity.json").write_text(report.to_json(timing=False))
    (out / "sweep.csv").write_text(report.to_csv())
    counts = report.counts()
    print(", ".join(f"{k}: {v}" for k, v in counts.items()))
    for e in report.entries:
        if e.error:
            log.warning("entry %d failed: %s", e.index, e.error)


def cmd_experiment(args):
    name = args.name
    if name is None and not args.config:
        raise ConfigError("experiment needs a name or a --config naming one")
    cfg = _resolve(args, experiment=name)
    if cfg.get("experiment") is None:
        raise ConfigError("config does not name an experiment")
    res = experiments.run_experiment(cfg, args.out, threads=args.threads,
                                     use_cache=not args.no_oracle_cache, log=log.info)
    ev = res["evidence"]
    print(f"{cfg['experiment']}: log Z = {ev['evidence']['log_z']:.6f} "
          f"+/- {ev['evidence']['sigma_log_z']:.6f} (oracle {ev['log_z_true']})")
    for e, x, pe in zip(res["report"].entries, res["x"], res["percent_error"]):
        w = e.weights or {}
        pe_txt = "-" if pe is None else f"{pe:+.3f}%"
        print(f"  x={x:<6g} {e.action or 'error':<15} ess={w.get('ess_fraction', float('nan')):.3f}"
              f" k={w.get('pareto_k', float('nan')):.2f} err={pe_txt}")


COMMANDS = {
    "sample": cmd_sample,
    "fit-target": cmd_fit_target,
    "evidence": cmd_evidence,
    "sensitivity": cmd_sensitivity,
    "experiment": cmd_experiment,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except PriorSensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
