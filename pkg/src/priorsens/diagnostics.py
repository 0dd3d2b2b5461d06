"""Importance-weight diagnostics and the reuse / retrain / refit decision.

Weights are kept as unnormalised log-weights; ``-inf`` marks a draw outside
the support of the alternative density.
"""

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .exceptions import DataError, DisjointSupportError, InputError

DEGENERATE_TOL = 1e-6
MIN_TAIL_DRAWS = 25
MIN_TAIL_POINTS = 5

REFIT = "refit-required"
RETRAIN = "retrain-target"
REUSE = "reuse-target"


def _finite_log_weights(log_w):
    log_w = np.asarray(log_w, dtype=float)
    if log_w.ndim != 1 or log_w.size == 0:
        raise InputError("log-weights must be a non-empty 1-D array")
    if np.any(np.isnan(log_w)) or np.any(log_w == np.inf):
        raise InputError("log-weights must be finite or -inf")
    finite = log_w[np.isfinite(log_w)]
    if finite.size == 0:
        raise DisjointSupportError(
            "every draw has zero weight: the alternative has no overlap with the samples")
    return log_w, finite


def ess(log_w):
    """Effective sample size ``(sum w)^2 / sum w^2`` computed from log-weights."""
    log_w, finite = _finite_log_weights(log_w)
    w = np.exp(finite - finite.max())
    return math.fsum(w) ** 2 / math.fsum(w * w)


def gpd_fit(x, prior_weight=10.0):
    """Zhang & Stephens (2009) estimate of the generalised Pareto shape and scale.

    ``x`` holds positive exceedances over a threshold. The shape estimate is
    shrunk toward 0.5 by ``prior_weight`` pseudo-observations, as in Pareto
    smoothed importance sampling; pass 0 for the unregularised estimator.

    Returns
    -------
    k, sigma : float
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    m = 30 + int(math.sqrt(n))
    b = 1.0 - np.sqrt(m / (np.arange(1, m + 1) - 0.5))
    b /= 3.0 * x[int(n / 4 + 0.5) - 1]
    b += 1.0 / x[-1]
    k = np.mean(np.log1p(-b[:, None] * x), axis=1)
    profile = n * (np.log(-b / k) - k - 1.0)
    with np.errstate(over="ignore"):
        weights = 1.0 / np.sum(np.exp(profile - profile[:, None]), axis=1)
    keep = weights >= 10 * np.finfo(float).eps
    weights = weights[keep] / weights[keep].sum()
    b_post = float(np.sum(b[keep] * weights))
    k_post = float(np.mean(np.log1p(-b_post * x)))
    sigma = -k_post / b_post
    k_post = (n * k_post + prior_weight * 0.5) / (n + prior_weight)
    return k_post, sigma


def tail_length(n_finite):
    return int(math.ceil(min(0.2 * n_finite, 3.0 * math.sqrt(n_finite))))


def pareto_k(log_w, degenerate_tol=DEGENERATE_TOL, min_draws=MIN_TAIL_DRAWS):
    """Pareto-k-hat of the upper tail of the importance weights.

    Returns ``-inf`` when the finite log-weights span less than
    ``degenerate_tol`` (the fit diverges for equal weights), and ``nan`` when
    there are too few draws or tail points for a meaningful estimate.
    Zero weights are excluded from the fit.
    """
    log_w, finite = _finite_log_weights(log_w)
    top = finite.max()
    if top - finite.min() < degenerate_tol:
        return -math.inf
    S = finite.size
    if S < min_draws:
        warnings.warn(f"pareto_k needs at least {min_draws} positive weights, got {S}",
                      RuntimeWarning, stacklevel=2)
        return math.nan
    M = tail_length(S)
    srt = np.sort(finite) - top
    threshold = srt[S - M - 1]
    tail = srt[S - M:]
    tail = tail[tail > threshold]
    if tail.size < MIN_TAIL_POINTS:
        return math.nan
    exceed = np.exp(tail) - math.exp(threshold)
    if exceed[-1] - exceed[0] <= 0:
        return -math.inf
    k, _ = gpd_fit(exceed)
    return k


@dataclass(frozen=True, eq=False)
class ImportanceWeights:
    """Unnormalised log-weights with derived diagnostics (computed lazily)."""

    log_w: np.ndarray
    degenerate_tol: float = DEGENERATE_TOL

    def __post_init__(self):
        log_w, _ = _finite_log_weights(self.log_w)
        log_w = log_w.copy()
        log_w.setflags(write=False)
        object.__setattr__(self, "log_w", log_w)

    def __len__(self):
        return self.log_w.size

    @cached_property
    def log_normalized(self):
        return self.log_w - logsumexp(self.log_w)

    @cached_property
    def normalized(self):
        w = np.exp(self.log_normalized)
        return w / math.fsum(w)

    @cached_property
    def ess(self):
        return ess(self.log_w)

    @property
    def ess_fraction(self):
        return self.ess / self.log_w.size

    @cached_property
    def pareto_k(self):
        return pareto_k(self.log_w, self.degenerate_tol)

    @property
    def n_zero(self):
        return int(np.sum(self.log_w == -np.inf))

    def summary(self):
        return {
            "n_draws": int(self.log_w.size),
            "n_zero_weight": self.n_zero,
            "ess": self.ess,
            "ess_fraction": self.ess_fraction,
            "pareto_k": self.pareto_k,
        }


def _log_density_on(model, X):
    return np.asarray(model.log_density(X), dtype=float)


def _check_dims(samples, *models):
    for m in models:
        if m.dimension != samples.dimension:
            raise InputError(
                f"{type(m).__name__} is {m.dimension}-D but samples are {samples.dimension}-D")


def prior_ratio_log_weights(samples, prior0, prior1, degenerate_tol=DEGENERATE_TOL):
    """Log-weights ``log p1(theta_i) - log p0(theta_i)`` for a prior swap."""
    _check_dims(samples, prior0, prior1)
    X = samples.pooled()
    lp0 = _log_density_on(prior0, X)
    if not np.all(np.isfinite(lp0)):
        bad = int(np.argmax(~np.isfinite(lp0)))
        raise DataError(f"draw {bad} lies outside the original prior's support")
    lp1 = _log_density_on(prior1, X)
    return ImportanceWeights(lp1 - lp0, degenerate_tol)


def general_log_weights(samples, prior0, like0, prior1, like1, log_like0=None,
                        degenerate_tol=DEGENERATE_TOL):
    """Log-weights for a joint change of prior and likelihood.

    ``log_like0`` may supply cached original log-likelihoods. ``like1`` is only
    evaluated where ``prior1`` is positive.
    """
    _check_dims(samples, prior0, like0, prior1, like1)
    X = samples.pooled()
    lp0 = _log_density_on(prior0, X)
    if log_like0 is None:
        log_like0 = _log_density_on(like0, X)
    post0 = lp0 + np.asarray(log_like0, dtype=float)
    if not np.all(np.isfinite(post0)):
        bad = int(np.argmax(~np.isfinite(post0)))
        raise DataError(f"draw {bad} has zero density under the original posterior")
    out = _log_density_on(prior1, X)
    ok = np.isfinite(out)
    if np.any(ok):
        out[ok] += _log_density_on(like1, X[ok])
    return ImportanceWeights(out - post0, degenerate_tol)


@dataclass(frozen=True)
class Decision:
    action: str
    k_max: float
    ess_min: float
    pareto_k: float
    ess_fraction: float

    @property
    def reason(self):
        if self.action == REFIT:
            if math.isnan(self.pareto_k):
                return "pareto_k not estimable"
            return f"pareto_k {self.pareto_k:.3g} >= {self.k_max}"
        if self.action == RETRAIN:
            return f"ess_fraction {self.ess_fraction:.3g} <= {self.ess_min}"
        return "weights reliable and overlap high"

    def to_dict(self):
        return {
            "action": self.action,
            "k_max": self.k_max,
            "ess_min": self.ess_min,
            "pareto_k": self.pareto_k,
            "ess_fraction": self.ess_fraction,
            "reason": self.reason,
        }


def decide(pareto_k, ess_fraction, k_max=0.7, ess_min=0.95):
    """Map diagnostics to an action; both thresholds are closed (fail safe).

    An unestimable ``pareto_k`` (nan) counts as unreliable.
    """
    ess_fraction = min(max(float(ess_fraction), 0.0), 1.0)
    pareto_k = float(pareto_k)
    if math.isnan(pareto_k) or pareto_k >= k_max:
        action = REFIT
    elif ess_fraction <= ess_min:
        action = RETRAIN
    else:
        action = REUSE
    return Decision(action, k_max, ess_min, pareto_k, float(ess_fraction))
