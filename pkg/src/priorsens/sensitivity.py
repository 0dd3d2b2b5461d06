"""Prior sensitivity workflow: reweight, diagnose, then reuse or retrain the target.

For each alternative prior the original posterior draws are importance
weighted by the prior ratio, checked with Pareto-k-hat and the fractional ESS,
and resampled. The evidence under the alternative prior is the learned
harmonic mean over the resampled draws. Likelihood values come from a single
caching pass over the original draws; resampled draws are copies of original
draws, so no further likelihood evaluations are needed.
"""

import csv
import io
import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import derive_seed
from .diagnostics import (DEGENERATE_TOL, REFIT, RETRAIN, REUSE, Decision, ImportanceWeights,
                          decide, pareto_k, prior_ratio_log_weights)
from .evidence import (MIN_BOOTSTRAP, EvidenceEstimate, _check_bootstrap, _log_mean_exp,
                       bootstrap_chain_draws, estimate_from_log_ratios, lhme)
from .exceptions import DataError, InputError, PriorSensError
from .model import DensityModel, prior_from_spec
from .samples import concat_chains, resample_indices, sir_resample
from .target import refit_target

# seed addresses under an entry seed
_SIR, _BOOT, _BOOT_SIR, _SIR_TRAIN = 0, 1, 2, 3


@dataclass(frozen=True)
class Policy:
    k_max: float = 0.7
    ess_min: float = 0.95
    n_bootstrap: int = MIN_BOOTSTRAP
    seed: int = 0
    scheme: str = "multinomial"
    uncertainty: str = "auto"  # auto | bootstrap | per-chain
    degenerate_tol: float = DEGENERATE_TOL


def cache_log_likelihood(samples, likelihood):
    """The one likelihood pass over the original draws."""
    if likelihood.dimension != samples.dimension:
        raise InputError("likelihood and samples dimensions differ")
    return np.asarray(likelihood.log_density(samples.pooled()), dtype=float)


def _per_draw_log_ratios(samples, prior1, target1, log_likelihood):
    X = samples.pooled()
    lp1 = np.asarray(prior1.log_density(X), dtype=float)
    r = np.full(X.shape[0], np.nan)
    ok = np.isfinite(lp1)
    r[ok] = target1.score_samples(X[ok]) - log_likelihood[ok] - lp1[ok]
    return r


def _bootstrap_resampled(log_w, r, chain_lengths, n_replicates, seed, scheme):
    log_z = []
    for b, idx in enumerate(bootstrap_chain_draws(chain_lengths, n_replicates,
                                                  derive_seed(seed, _BOOT))):
        lw = log_w[idx]
        if not np.any(np.isfinite(lw)):
            continue
        w = np.exp(lw - lw.max())
        rng = np.random.default_rng(derive_seed(seed, _BOOT_SIR, b))
        sel = idx[resample_indices(w / w.sum(), idx.size, rng, scheme)]
        log_z.append(-_log_mean_exp(r[sel]))
    if len(log_z) < 2:
        raise DataError("too few bootstrap replicates overlap the alternative prior")
    return statistics.stdev(log_z)


def resampled_evidence(samples, prior1, likelihood, target1, weights, seed=None,
                       log_likelihood=None, scheme="multinomial", uncertainty="auto",
                       n_bootstrap=MIN_BOOTSTRAP, resampled=None):
    """Evidence under ``prior1`` from importance-resampled original draws.

    Parameters
    ----------
    weights : ImportanceWeights
        Weights of the original draws toward the ``prior1`` posterior.
    log_likelihood : array, optional
        Cached log-likelihood of the original draws. Evaluated once if absent.
    uncertainty : {"auto", "bootstrap", "per-chain"}
        "auto" bootstraps whole original chains (recomputing the resampling per
        replicate) when there are at least two chains.
    resampled : ResampleResult, optional
        Reuse an existing resampling drawn with the same ``seed``.
    """
    if len(weights) != samples.n_draws:
        raise InputError("weights do not match the number of draws")
    if target1.dimension != samples.dimension or prior1.dimension != samples.dimension:
        raise InputError("prior, target and samples dimensions differ")
    if log_likelihood is None:
        log_likelihood = cache_log_likelihood(samples, likelihood)
    log_likelihood = np.asarray(log_likelihood, dtype=float)
    if resampled is None:
        resampled = sir_resample(samples, weights, derive_seed(seed, _SIR), scheme)
    r = _per_draw_log_ratios(samples, prior1, target1, log_likelihood)
    est = estimate_from_log_ratios(r[resampled.source_indices],
                                   resampled.draws.chain_lengths, "resampled")
    if uncertainty == "auto":
        uncertainty = "bootstrap" if samples.n_chains >= 2 else "per-chain"
    if uncertainty == "bootstrap":
        _check_bootstrap(samples.n_chains, n_bootstrap)
        sigma = _bootstrap_resampled(np.asarray(weights.log_w), r, samples.chain_lengths,
                                     n_bootstrap, seed, scheme)
        est = est.with_uncertainty(sigma, f"bootstrap({n_bootstrap})")
    elif uncertainty != "per-chain":
        raise InputError(f"unknown uncertainty method {uncertainty!r}")
    return est


def _pareto_k_replicates(log_w, chain_lengths, n_replicates, seed, tol):
    if len(chain_lengths) < 2:
        return []
    out = []
    for idx in bootstrap_chain_draws(chain_lengths, n_replicates, derive_seed(seed, _BOOT)):
        lw = log_w[idx]
        if np.any(np.isfinite(lw)):
            out.append(pareto_k(lw, tol))
    return out


@dataclass
class SensitivityEntry:
    index: int
    prior: dict
    weights: dict | None = None
    decision: Decision | None = None
    evidence: EvidenceEstimate | None = None
    target_provenance: str | None = None
    refit_iterations: int | None = None
    pareto_k_replicates: list = field(default_factory=list)
    delta_log_z: float | None = None
    error: str | None = None
    seconds: float = 0.0

    @property
    def action(self):
        return self.decision.action if self.decision else None

    @property
    def pareto_k_sd(self):
        ks = [k for k in self.pareto_k_replicates if math.isfinite(k)]
        return float(np.std(ks, ddof=1)) if len(ks) >= 2 else None

    def to_dict(self):
        return {
            "index": self.index,
            "prior": self.prior,
            "weights": self.weights,
            "pareto_k_sd": self.pareto_k_sd,
            "decision": self.decision.to_dict() if self.decision else None,
            "evidence": self.evidence.to_dict() if self.evidence else None,
            "target_provenance": self.target_provenance,
            "refit_iterations": self.refit_iterations,
            "delta_log_z": self.delta_log_z,
            "error": self.error,
            "seconds": self.seconds,
        }


def _spec_of(prior):
    return prior.to_spec() if isinstance(prior, DensityModel) else dict(prior)


def analyse(samples, prior0, likelihood, target0, prior1, policy=None, log_likelihood=None,
            seed=None, index=0, train_samples=None):
    """Run the diagnostic gate and, unless a refit is required, the resampled evidence.

    ``samples`` are the draws the evidence is evaluated on. If
    ``train_samples`` (draws from the same posterior that ``target0`` was fitted
    to) are given, the diagnostics use both sets and a retrained target is
    fitted to the resampled training draws rather than the evaluation draws.

    Returns a :class:`SensitivityEntry`. Errors raised here propagate; use
    :func:`sweep` for per-entry error isolation.
    """
    policy = policy or Policy()
    seed = policy.seed if seed is None else seed
    start = time.perf_counter()
    if not isinstance(prior1, DensityModel):
        prior1 = prior_from_spec(prior1)
    entry = SensitivityEntry(index=index, prior=prior1.to_spec())
    if log_likelihood is None:
        log_likelihood = cache_log_likelihood(samples, likelihood)

    weights = prior_ratio_log_weights(samples, prior0, prior1, policy.degenerate_tol)
    diag_set, diag_weights = samples, weights
    if train_samples is not None:
        train_weights = prior_ratio_log_weights(train_samples, prior0, prior1,
                                                policy.degenerate_tol)
        diag_set = concat_chains(train_samples, samples)
        diag_weights = ImportanceWeights(np.concatenate([train_weights.log_w, weights.log_w]),
                                         policy.degenerate_tol)
    entry.weights = diag_weights.summary()
    entry.decision = decide(diag_weights.pareto_k, diag_weights.ess_fraction,
                            policy.k_max, policy.ess_min)
    entry.pareto_k_replicates = _pareto_k_replicates(
        diag_weights.log_w, diag_set.chain_lengths, policy.n_bootstrap, seed,
        policy.degenerate_tol)

    if entry.action != REFIT:
        resampled = sir_resample(samples, weights, derive_seed(seed, _SIR), policy.scheme)
        if entry.action == RETRAIN:
            if train_samples is None:
                train_draws = resampled.draws
            else:
                train_draws = sir_resample(train_samples, train_weights,
                                           derive_seed(seed, _SIR_TRAIN), policy.scheme).draws
            target1 = refit_target(target0, train_draws)
            entry.target_provenance = "retrained"
            entry.refit_iterations = int(target1.n_iter_)
        else:
            target1 = target0
            entry.target_provenance = "reused"
        entry.evidence = resampled_evidence(
            samples, prior1, likelihood, target1, weights, seed=seed,
            log_likelihood=log_likelihood, scheme=policy.scheme,
            uncertainty=policy.uncertainty, n_bootstrap=policy.n_bootstrap,
            resampled=resampled)
    entry.seconds = time.perf_counter() - start
    return entry


@dataclass
class SensitivityReport:
    original: EvidenceEstimate | None
    entries: list
    policy: Policy = field(default_factory=Policy)

    def counts(self):
        out = {REUSE: 0, RETRAIN: 0, REFIT: 0, "error": 0}
        for e in self.entries:
            out[e.action if e.action else "error"] += 1
        return out

    def to_dict(self, timing=True):
        """Plain-dict form; ``timing=False`` drops wall-clock fields so the
        output is reproducible byte for byte."""
        entries = [e.to_dict() for e in self.entries]
        if not timing:
            for e in entries:
                e.pop("seconds")
        return {
            "original": self.original.to_dict() if self.original else None,
            "policy": vars(self.policy).copy(),
            "entries": entries,
            "counts": self.counts(),
        }

    def to_json(self, timing=True):
        return json.dumps(_jsonable(self.to_dict(timing)), indent=2, sort_keys=True) + "\n"

    CSV_COLUMNS = ("index", "prior", "ess", "ess_fraction", "pareto_k", "pareto_k_sd",
                   "action", "target", "log_z", "sigma_log_z", "uncertainty",
                   "delta_log_z", "error")

    def rows(self):
        for e in self.entries:
            w = e.weights or {}
            yield {
                "index": e.index,
                "prior": json.dumps(e.prior, sort_keys=True, separators=(",", ":")),
                "ess": w.get("ess"),
                "ess_fraction": w.get("ess_fraction"),
                "pareto_k": w.get("pareto_k"),
                "pareto_k_sd": e.pareto_k_sd,
                "action": e.action,
                "target": e.target_provenance,
                "log_z": e.evidence.log_z if e.evidence else None,
                "sigma_log_z": e.evidence.sigma_log_z if e.evidence else None,
                "uncertainty": e.evidence.uncertainty_method if e.evidence else None,
                "delta_log_z": e.delta_log_z,
                "error": e.error,
            }

    def to_csv(self, extra=None):
        """CSV text, one row per alternative prior. ``extra`` maps column name to
        a per-entry list of values appended after the standard columns."""
        extra = extra or {}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.CSV_COLUMNS) + list(extra))
        for i, row in enumerate(self.rows()):
            values = [row[c] for c in self.CSV_COLUMNS] + [extra[k][i] for k in extra]
            writer.writerow([_csv_cell(v) for v in values])
        return buf.getvalue()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def sweep(samples, prior0, likelihood, target0, priors, policy=None, threads=None,
          original=None, log_likelihood=None, train_samples=None):
    """Analyse each alternative prior independently against the original draws.

    Entries never chain: every resampling starts from the original draws and
    every retrain starts from ``target0``. A failing entry records its error
    and the sweep continues. Entry ``i`` draws randomness from
    ``(policy.seed, i)``, so the thread count does not change the output.
    """
    policy = policy or Policy()
    priors = list(priors)
    if not priors:
        raise InputError("sweep needs at least one alternative prior")
    if log_likelihood is None:
        log_likelihood = cache_log_likelihood(samples, likelihood)
    if original is None:
        original = lhme(samples, prior0, likelihood, target0, log_likelihood=log_likelihood)

    def job(i):
        p = priors[i]
        try:
            e = analyse(samples, prior0, likelihood, target0, p, policy,
                        log_likelihood=log_likelihood, seed=derive_seed(policy.seed, i),
                        index=i, train_samples=train_samples)
        except PriorSensError as exc:
            e = SensitivityEntry(index=i, prior=_safe_spec(p), error=f"{type(exc).__name__}: {exc}")
            return e
        if e.evidence is not None:
            e.delta_log_z = e.evidence.log_z - original.log_z
        return e

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(job, range(len(priors))))
    else:
        entries = [job(i) for i in range(len(priors))]
    return SensitivityReport(original=original, entries=entries, policy=policy)


def _safe_spec(p):
    try:
        return _spec_of(p)
    except Exception:  # noqa: BLE001 - report must still be produced
        return {"repr": repr(p)}
