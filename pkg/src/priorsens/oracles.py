"""Independent ground-truth evidence values for testing and experiment reports."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._validation import check_positive
from .exceptions import InputError

MAX_GRID_DIMENSION = 2


def gaussian_log_evidence(d, sigma_like, sigma_prior):
    """Log evidence of a zero-mean isotropic Gaussian likelihood under a zero-mean
    isotropic Gaussian prior: the convolution of the two evaluated at zero."""
    check_positive("sigma_like", sigma_like)
    check_positive("sigma_prior", sigma_prior)
    if int(d) != d or d < 1:
        raise InputError("d must be a positive integer")
    return -0.5 * d * math.log(2.0 * math.pi * (sigma_like**2 + sigma_prior**2))


@dataclass(frozen=True)
class GridSpec:
    lower: tuple
    upper: tuple
    n_points: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        n = tuple(int(v) for v in np.atleast_1d(self.n_points))
        if not (len(lo) == len(hi) == len(n)):
            raise InputError("grid bounds and counts must have the same length")
        if any(c < 2 for c in n):
            raise InputError("grid needs at least 2 points per axis")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise InputError("grid bounds must be finite with lower < upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "n_points", n)

    @classmethod
    def square(cls, lower, upper, n, dimension=2):
        return cls((lower,) * dimension, (upper,) * dimension, (n,) * dimension)

    @property
    def dimension(self):
        return len(self.n_points)

    def midpoints(self, axis):
        lo, hi, n = self.lower[axis], self.upper[axis], self.n_points[axis]
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5), h

    def resolution_tag(self):
        return "x".join(str(n) for n in self.n_points)


def _check_grid_covers(prior, grid):
    lo, hi = prior.bounds()
    glo, ghi = np.array(grid.lower), np.array(grid.upper)
    finite = np.isfinite(lo) & np.isfinite(hi)
    uncovered = np.any(finite & ((lo < glo) | (hi > ghi)))
    mean = getattr(prior, "mean", None)
    std = getattr(prior, "std", None)
    if mean is not None and std is not None and not np.all(finite):
        uncovered |= bool(np.any((mean - 10 * std < glo) | (mean + 10 * std > ghi)))
    if uncovered:
        warnings.warn("grid does not cover the prior support; the evidence is truncated",
                      RuntimeWarning, stacklevel=3)


def grid_log_evidence(prior, likelihood, grid, block_rows=256):
    """Midpoint-rule log evidence on a 1-D or 2-D grid, accumulated with logsumexp.

    Rows of the 2-D grid are processed in blocks; block results are reduced
    in a fixed order so the value does not depend on ``block_rows``.
    """
    d = prior.dimension
    if likelihood.dimension != d or grid.dimension != d:
        raise InputError("prior, likelihood and grid dimensions differ")
    if d > MAX_GRID_DIMENSION:
        raise InputError(f"grid integration supports at most {MAX_GRID_DIMENSION} dimensions")
    _check_grid_covers(prior, grid)

    def log_integrand(points):
        out = np.asarray(prior.log_density(points), dtype=float)
        ok = np.isfinite(out)
        if np.any(ok):
            out[ok] += likelihood.log_density(points[ok])
        return out

    xs, hx = grid.midpoints(0)
    if d == 1:
        return float(logsumexp(log_integrand(xs[:, None]))) + math.log(hx)
    ys, hy = grid.midpoints(1)
    row_terms = np.empty(xs.size)
    for start in range(0, xs.size, block_rows):
        xb = xs[start:start + block_rows]
        pts = np.column_stack([np.repeat(xb, ys.size), np.tile(ys, xb.size)])
        vals = log_integrand(pts).reshape(xb.size, ys.size)
        row_terms[start:start + xb.size] = logsumexp(vals, axis=1)
    return float(logsumexp(row_terms)) + math.log(hx) + math.log(hy)
