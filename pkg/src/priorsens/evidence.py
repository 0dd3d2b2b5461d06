"""Learned harmonic mean estimate of the evidence.

The reciprocal evidence is the posterior-sample average of
``phi(theta) / (L(theta) p(theta))``. Everything is accumulated in log space:
per-draw log ratios are shifted by their maximum and summed with
``math.fsum``, which is exactly rounded, so the result does not depend on the
order of draws within a chain.
"""

import math
import statistics
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import as_seed_sequence
from .exceptions import DataError, InputError

MIN_BOOTSTRAP = 30


@dataclass(frozen=True)
class EvidenceEstimate:
    log_rho_hat: float
    sigma_log_z: float
    uncertainty_method: str
    n_draws: int
    n_chains: int
    provenance: str = "direct"
    chain_log_rho: tuple = field(default=(), repr=False)

    @property
    def log_z(self):
        return -self.log_rho_hat

    def with_uncertainty(self, sigma, method):
        return EvidenceEstimate(self.log_rho_hat, float(sigma), method, self.n_draws,
                                self.n_chains, self.provenance, self.chain_log_rho)

    def to_dict(self):
        d = asdict(self)
        d["log_z"] = self.log_z
        d["chain_log_rho"] = list(self.chain_log_rho)
        return d


def _log_mean_exp(r):
    """log(mean(exp(r))) with an exactly rounded sum."""
    m = float(np.max(r))
    return m + math.log(math.fsum(np.exp(r - m))) - math.log(r.size)


def _chain_slices(chain_lengths):
    stops = np.cumsum(chain_lengths)
    return [slice(int(a), int(b)) for a, b in zip(stops - chain_lengths, stops)]


def per_chain_sigma(chain_log_rho, chain_lengths, log_rho):
    """First-order ``sigma_rho / rho`` from the spread of per-chain estimates.

    The pooled estimate is the draw-weighted mean of per-chain ``rho_c``; its
    standard error is estimated from between-chain deviations, computed as
    ratios ``rho_c / rho`` so nothing leaves log space.
    """
    C = len(chain_log_rho)
    frac = np.asarray(chain_lengths, dtype=float) / float(np.sum(chain_lengths))
    q = np.exp(np.asarray(chain_log_rho) - log_rho)
    var = C / (C - 1.0) * math.fsum((frac * (q - 1.0)) ** 2)
    return math.sqrt(var)


def _iid_sigma(log_ratios, log_rho):
    q = np.exp(log_ratios - log_rho)
    return float(np.std(q, ddof=1) / math.sqrt(q.size)) if q.size > 1 else 0.0


def estimate_from_log_ratios(log_ratios, chain_lengths, provenance="direct"):
    """EvidenceEstimate from per-draw ``log phi - log L - log p`` values.

    Uncertainty is the per-chain standard error; with a single chain it falls
    back to the i.i.d. standard error with a warning.
    """
    r = np.asarray(log_ratios, dtype=float)
    if r.ndim != 1 or r.size != int(np.sum(chain_lengths)):
        raise InputError("log_ratios must be 1-D and match the chain lengths")
    if not np.all(np.isfinite(r)):
        bad = int(np.argmax(~np.isfinite(r)))
        raise DataError(
            f"draw {bad} has zero posterior density under the given prior and likelihood "
            "(samples and prior do not match)")
    chain_log_rho = tuple(_log_mean_exp(r[s]) for s in _chain_slices(chain_lengths))
    log_rho = _log_mean_exp(r)
    if len(chain_lengths) >= 2:
        sigma, method = per_chain_sigma(chain_log_rho, chain_lengths, log_rho), "per-chain"
    else:
        warnings.warn("single chain: per-chain variance unavailable, using i.i.d. "
                      "standard error (unreliable for correlated draws)",
                      RuntimeWarning, stacklevel=2)
        sigma, method = _iid_sigma(r, log_rho), "iid"
    return EvidenceEstimate(log_rho, sigma, method, int(r.size), len(chain_lengths),
                            provenance, chain_log_rho)


def log_ratios(samples, prior, likelihood, target, log_likelihood=None):
    """Per-draw ``log phi - log L - log p``; ``log_likelihood`` may be cached values."""
    for m in (prior, likelihood):
        if m.dimension != samples.dimension:
            raise InputError(f"{m.kind} is {m.dimension}-D, samples are {samples.dimension}-D")
    if target.dimension != samples.dimension:
        raise InputError(f"target is {target.dimension}-D, samples are {samples.dimension}-D")
    X = samples.pooled()
    lp = np.asarray(prior.log_density(X), dtype=float)
    if not np.all(np.isfinite(lp)):
        bad = int(np.argmax(~np.isfinite(lp)))
        raise DataError(f"draw {bad} lies outside the prior support (sample/prior mismatch)")
    if log_likelihood is None:
        log_likelihood = likelihood.log_density(X)
    return target.score_samples(X) - np.asarray(log_likelihood, dtype=float) - lp


def lhme(samples, prior, likelihood, target, log_likelihood=None, uncertainty="per-chain",
         n_bootstrap=MIN_BOOTSTRAP, seed=None, provenance="direct"):
    """Learned harmonic mean estimate of the evidence from posterior draws.

    Parameters
    ----------
    samples : ChainSet
    prior, likelihood : DensityModel
    target : fitted learned target (``score_samples`` gives log phi)
    log_likelihood : array, optional
        Cached log-likelihood of every pooled draw; avoids new evaluations.
    uncertainty : {"per-chain", "bootstrap"}

    Returns
    -------
    EvidenceEstimate
    """
    r = log_ratios(samples, prior, likelihood, target, log_likelihood)
    est = estimate_from_log_ratios(r, samples.chain_lengths, provenance)
    if uncertainty == "bootstrap":
        sigma = bootstrap_from_log_ratios(r, samples.chain_lengths, n_bootstrap, seed)
        est = est.with_uncertainty(sigma, f"bootstrap({n_bootstrap})")
    elif uncertainty != "per-chain":
        raise InputError(f"unknown uncertainty method {uncertainty!r}")
    return est


def bootstrap_chain_draws(chain_lengths, n_replicates, seed):
    """Pooled draw indices for each bootstrap replicate of whole chains."""
    rng = np.random.default_rng(as_seed_sequence(seed))
    slices = _chain_slices(chain_lengths)
    C = len(chain_lengths)
    for _ in range(n_replicates):
        picks = rng.integers(0, C, size=C)
        yield np.concatenate([np.arange(slices[c].start, slices[c].stop) for c in picks])


def _check_bootstrap(n_chains, n_replicates):
    if n_chains < 2:
        raise InputError("bootstrap over chains needs at least 2 chains")
    if n_replicates < 2:
        raise InputError("need at least 2 bootstrap replicates")
    if n_replicates < MIN_BOOTSTRAP:
        warnings.warn(f"{n_replicates} bootstrap replicates is below the recommended "
                      f"{MIN_BOOTSTRAP}", RuntimeWarning, stacklevel=3)


def bootstrap_from_log_ratios(log_ratios, chain_lengths, n_replicates=MIN_BOOTSTRAP, seed=None):
    _check_bootstrap(len(chain_lengths), n_replicates)
    return _bootstrap(log_ratios, chain_lengths, n_replicates, seed)


def _bootstrap(log_ratios, chain_lengths, n_replicates, seed):
    # statistics.stdev is exact, so identical replicates give exactly 0
    r = np.asarray(log_ratios, dtype=float)
    log_z = [-_log_mean_exp(r[idx])
             for idx in bootstrap_chain_draws(chain_lengths, n_replicates, seed)]
    return statistics.stdev(log_z)


def bootstrap_sigma(samples, prior, likelihood, target, n_replicates=MIN_BOOTSTRAP, seed=None,
                    log_likelihood=None):
    """Standard deviation of log Z over bootstrap resamples of whole chains.

    The target stays fixed across replicates.
    """
    _check_bootstrap(samples.n_chains, n_replicates)
    r = log_ratios(samples, prior, likelihood, target, log_likelihood)
    return _bootstrap(r, samples.chain_lengths, n_replicates, seed)
