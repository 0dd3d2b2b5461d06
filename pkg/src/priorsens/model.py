"""Log-density models: normalised priors and the two toy likelihoods.

Every density works in log space and uses ``-inf`` for zero density. Inputs
may be a single parameter vector (returns a float) or an ``(n, d)`` batch
(returns an ``(n,)`` array).
"""

import math
import threading

import numpy as np

from ._validation import broadcast_param, check_points, check_positive
from .exceptions import InputError

LOG_2PI = math.log(2.0 * math.pi)
LN10 = math.log(10.0)


class DensityModel:
    """Base class for priors and likelihoods.

    Subclasses implement ``_log_density(X)`` on a validated ``(n, d)`` array.
    The public :meth:`log_density` counts evaluated points in ``n_evaluations``
    so callers can audit how many likelihood calls a workflow makes.
    """

    kind = "density"

    def __init__(self, dimension):
        if int(dimension) != dimension or dimension < 1:
            raise InputError(f"dimension must be a positive integer, got {dimension}")
        self.dimension = int(dimension)
        self._lock = threading.Lock()
        self._n_evaluations = 0

    @property
    def n_evaluations(self):
        return self._n_evaluations

    def reset_counter(self):
        with self._lock:
            self._n_evaluations = 0

    def log_density(self, theta):
        X, single = check_points(theta, self.dimension)
        with self._lock:
            self._n_evaluations += X.shape[0]
        out = self._log_density(X)
        return float(out[0]) if single else out

    def __call__(self, theta):
        return self.log_density(theta)

    def support(self, theta):
        """True where the density is positive."""
        X, single = check_points(theta, self.dimension)
        out = self._support(X)
        return bool(out[0]) if single else out

    def _support(self, X):
        return np.isfinite(self._log_density(X))

    def _log_density(self, X):
        raise NotImplementedError

    def to_spec(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(self))


class Prior(DensityModel):
    kind = "prior"

    def sample(self, rng, size):
        raise NotImplementedError

    def bounds(self):
        """Per-dimension (lower, upper) support bounds; infinite if unbounded."""
        inf = np.full(self.dimension, np.inf)
        return -inf, inf


class GaussianPrior(Prior):
    """Independent normal prior with per-dimension mean and standard deviation."""

    family = "gaussian"

    def __init__(self, mean, std, dimension=None):
        if dimension is None:
            dimension = max(np.size(mean), np.size(std))
        super().__init__(dimension)
        self.mean = broadcast_param("mean", mean, self.dimension)
        self.std = check_positive("std", broadcast_param("std", std, self.dimension))
        self._log_norm = -0.5 * self.dimension * LOG_2PI - float(np.sum(np.log(self.std)))

    def _log_density(self, X):
        z = (X - self.mean) / self.std
        return self._log_norm - 0.5 * np.einsum("ij,ij->i", z, z)

    def _support(self, X):
        return np.ones(X.shape[0], dtype=bool)

    def sample(self, rng, size):
        return self.mean + self.std * rng.standard_normal((size, self.dimension))

    def to_spec(self):
        return {"family": self.family, "mean": self.mean.tolist(), "std": self.std.tolist()}


class UniformPrior(Prior):
    """Normalised uniform density on an axis-aligned box (edges included)."""

    family = "uniform"

    def __init__(self, lower, upper, dimension=None):
        if dimension is None:
            dimension = max(np.size(lower), np.size(upper))
        super().__init__(dimension)
        self.lower = broadcast_param("lower", lower, self.dimension)
        self.upper = broadcast_param("upper", upper, self.dimension)
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise InputError("uniform prior bounds must be finite")
        if np.any(self.lower >= self.upper):
            raise InputError("uniform prior requires lower < upper in every dimension")
        self._log_norm = -float(np.sum(np.log(self.upper - self.lower)))

    def _support(self, X):
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def _log_density(self, X):
        return np.where(self._support(X), self._log_norm, -np.inf)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, (size, self.dimension))

    def bounds(self):
        return self.lower.copy(), self.upper.copy()

    def to_spec(self):
        return {"family": self.family, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class LogUniformPrior(Prior):
    """Uniform in log10 of each coordinate between positive ``lower`` and ``upper``.

    ``space`` selects the sampling coordinate. With ``"log10"`` the parameters
    are the base-10 logarithms themselves and the density is flat. With
    ``"linear"`` the parameters are the positive quantities and the density
    carries the Jacobian ``1 / (x ln 10)``.
    """

    family = "log-uniform"

    def __init__(self, lower, upper, space="log10", dimension=None):
        if dimension is None:
            dimension = max(np.size(lower), np.size(upper))
        super().__init__(dimension)
        if space not in ("log10", "linear"):
            raise InputError(f"space must be 'log10' or 'linear', got {space!r}")
        self.space = space
        self.lower = check_positive("lower", broadcast_param("lower", lower, self.dimension))
        self.upper = check_positive("upper", broadcast_param("upper", upper, self.dimension))
        if np.any(self.lower >= self.upper):
            raise InputError("log-uniform prior requires lower < upper in every dimension")
        self._log_lo = np.log10(self.lower)
        self._log_hi = np.log10(self.upper)
        self._log_norm = -float(np.sum(np.log(self._log_hi - self._log_lo)))

    def bounds(self):
        if self.space == "log10":
            return self._log_lo.copy(), self._log_hi.copy()
        return self.lower.copy(), self.upper.copy()

    def _support(self, X):
        lo, hi = self.bounds()
        return np.all((X >= lo) & (X <= hi), axis=1)

    def _log_density(self, X):
        inside = self._support(X)
        out = np.full(X.shape[0], -np.inf)
        if self.space == "log10":
            out[inside] = self._log_norm
        else:
            xs = X[inside]
            out[inside] = self._log_norm - np.sum(np.log(xs), axis=1) - self.dimension * math.log(LN10)
        return out

    def sample(self, rng, size):
        u = rng.uniform(self._log_lo, self._log_hi, (size, self.dimension))
        return u if self.space == "log10" else 10.0 ** u

    def to_spec(self):
        return {
            "family": self.family,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "space": self.space,
        }


class Likelihood(DensityModel):
    kind = "likelihood"


class GaussianLikelihood(Likelihood):
    """Isotropic normal likelihood ``N(theta; mean, sigma^2 I)``."""

    variant = "gaussian"

    def __init__(self, dimension, sigma, mean=0.0):
        super().__init__(dimension)
        self.sigma = float(check_positive("sigma", sigma))
        self.mean = broadcast_param("mean", mean, self.dimension)
        self._log_norm = -0.5 * self.dimension * math.log(2.0 * math.pi * self.sigma**2)

    def _log_density(self, X):
        r = X - self.mean
        return self._log_norm - np.einsum("ij,ij->i", r, r) / (2.0 * self.sigma**2)

    def to_spec(self):
        spec = {"variant": self.variant, "dimension": self.dimension, "sigma": self.sigma}
        if np.any(self.mean != 0):
            spec["mean"] = self.mean.tolist()
        return spec


class RosenbrockLikelihood(Likelihood):
    """Two-dimensional Rosenbrock log-likelihood ``-[(a - x)^2 + b (y - x^2)^2]``."""

    variant = "rosenbrock"

    def __init__(self, a=1.0, b=100.0):
        super().__init__(2)
        self.a = float(a)
        self.b = float(check_positive("b", b))

    def _log_density(self, X):
        x, y = X[:, 0], X[:, 1]
        return -((self.a - x) ** 2 + self.b * (y - x**2) ** 2)

    def to_spec(self):
        return {"variant": self.variant, "a": self.a, "b": self.b}


def unnorm_log_posterior(prior, likelihood, theta):
    """``log L(theta) + log p(theta)``; the likelihood is skipped outside prior support."""
    if prior.dimension != likelihood.dimension:
        raise InputError(
            f"prior dimension {prior.dimension} != likelihood dimension {likelihood.dimension}"
        )
    X, single = check_points(theta, prior.dimension)
    out = np.asarray(prior.log_density(X), dtype=float)
    ok = np.isfinite(out)
    if np.any(ok):
        out[ok] += likelihood.log_density(X[ok])
    return float(out[0]) if single else out


_PRIOR_FAMILIES = {
    "gaussian": GaussianPrior,
    "uniform": UniformPrior,
    "uniform-box": UniformPrior,
    "log-uniform": LogUniformPrior,
}


def prior_from_spec(spec):
    """Build a prior from a dict such as ``{"family": "gaussian", "mean": 0, "std": 1, "dimension": 10}``."""
    spec = dict(spec)
    family = spec.pop("family", None)
    cls = _PRIOR_FAMILIES.get(family)
    if cls is None:
        raise InputError(f"unknown prior family {family!r}")
    try:
        return cls(**spec)
    except TypeError as exc:
        raise InputError(f"bad parameters for {family} prior: {exc}") from exc


def likelihood_from_spec(spec):
    spec = dict(spec)
    variant = spec.pop("variant", None)
    try:
        if variant == "gaussian":
            return GaussianLikelihood(**spec)
        if variant == "rosenbrock":
            return RosenbrockLikelihood(**spec)
    except TypeError as exc:
        raise InputError(f"bad parameters for {variant} likelihood: {exc}") from exc
    raise InputError(f"unknown likelihood variant {variant!r}")
