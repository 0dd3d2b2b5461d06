"""Learned target densities for the harmonic mean estimator.

Targets are scikit-learn style density estimators: ``fit(X)`` then
``score_samples(X)`` returns ``log phi``. After fitting, every component
covariance is multiplied by ``temperature`` (<= 1), which narrows the target
so its tails are thinner than those of the posterior it was fitted to.
"""

import json
import math
import warnings
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, clone
from sklearn.cluster import KMeans
from sklearn.utils.validation import check_is_fitted

from ._validation import check_draws, check_points
from .exceptions import FitError, FormatError, InputError
from .model import LOG_2PI

MIN_DRAWS_PER_DIM = 10


def heldout_split(n):
    """Deterministic interleaved 90/10 split: every tenth draw is held out."""
    held = np.arange(n) % 10 == 9
    return ~held, held


def _cholesky(cov, ridge):
    """Lower Cholesky factor of ``cov``; adds ``1e-9 * trace / d`` to the diagonal
    when the matrix is numerically singular and ridge is allowed."""
    d = cov.shape[0]
    eig = np.linalg.eigvalsh(cov)
    singular = not (eig[0] > 1e-12 * max(eig[-1], 0.0) and eig[-1] > 0)
    if ridge is True or singular:
        if singular and ridge is False:
            raise FitError(
                "singular sample covariance; refit with ridge=True (config: target.ridge) "
                "to add a small diagonal regulariser")
        eps = 1e-9 * np.trace(cov) / d
        if eps <= 0:
            eps = 1e-12
        if singular:
            warnings.warn(f"singular covariance, adding ridge {eps:.3g} to the diagonal",
                          RuntimeWarning, stacklevel=3)
        cov = cov + eps * np.eye(d)
    try:
        return cov, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"covariance is not positive definite: {exc}") from exc


def _component_log_pdf(X, mean, chol):
    d = X.shape[1]
    z = np.linalg.solve(chol, (X - mean).T)
    return -0.5 * d * LOG_2PI - np.sum(np.log(np.diag(chol))) - 0.5 * np.sum(z * z, axis=0)


def _mixture_log_prob(X, weights, means, chols):
    """(n, K) matrix of log w_k + log N(x | mu_k, Sigma_k)."""
    return np.column_stack([
        math.log(w) + _component_log_pdf(X, m, L) if w > 0 else np.full(X.shape[0], -np.inf)
        for w, m, L in zip(weights, means, chols)
    ])


class _GaussianFamilyTarget(BaseEstimator):
    """Shared evaluation and serialisation for Gaussian-based targets."""

    form = None

    def _check_temperature(self):
        if not (0.0 < self.temperature <= 1.0):
            raise InputError(f"temperature must lie in (0, 1], got {self.temperature}")

    def _check_input(self, X):
        X = check_draws(X)
        n, d = X.shape
        if n < MIN_DRAWS_PER_DIM * d:
            raise InputError(
                f"need at least {MIN_DRAWS_PER_DIM * d} draws to fit a {d}-D target, got {n}")
        return X

    def _set_parameters(self, weights, means, fit_covariances):
        self.weights_ = np.asarray(weights, dtype=float)
        self.means_ = np.asarray(means, dtype=float)
        self.fit_covariances_ = np.asarray(fit_covariances, dtype=float)
        self.covariances_ = self.temperature * self.fit_covariances_
        self.n_features_in_ = self.means_.shape[1]
        self._chols = [np.linalg.cholesky(c) for c in self.covariances_]

    @property
    def dimension(self):
        check_is_fitted(self, "means_")
        return self.n_features_in_

    def score_samples(self, X):
        """log phi at each row of ``X``."""
        check_is_fitted(self, "means_")
        X, _ = check_points(X, self.n_features_in_)
        return logsumexp(_mixture_log_prob(X, self.weights_, self.means_, self._chols), axis=1)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def to_dict(self):
        check_is_fitted(self, "means_")
        return {
            "form": self.form,
            "params": self.get_params(),
            "weights": self.weights_.tolist(),
            "means": self.means_.tolist(),
            "fit_covariances": self.fit_covariances_.tolist(),
            "covariances": self.covariances_.tolist(),
            "metadata": {
                "n_train": int(self.n_train_),
                "heldout_log_score": float(self.heldout_log_score_),
                "n_iter": int(self.n_iter_),
                "converged": bool(self.converged_),
            },
        }

    @classmethod
    def from_dict(cls, doc):
        form = doc.get("form")
        target_cls = {"gaussian": GaussianTarget, "mixture": MixtureTarget}.get(form)
        if target_cls is None:
            raise FormatError(f"unknown target form {form!r}")
        est = target_cls(**doc["params"])
        est._check_temperature()
        est._set_parameters(doc["weights"], doc["means"], doc["fit_covariances"])
        meta = doc.get("metadata", {})
        est.n_train_ = meta.get("n_train", 0)
        est.heldout_log_score_ = meta.get("heldout_log_score", float("nan"))
        est.n_iter_ = meta.get("n_iter", 0)
        est.converged_ = meta.get("converged", True)
        est.log_likelihood_trace_ = []
        return est


class GaussianTarget(_GaussianFamilyTarget):
    """Single Gaussian fitted by moment matching.

    Parameters
    ----------
    temperature : float in (0, 1]
        Multiplier applied to the fitted covariance.
    ridge : {"auto", True, False}
        "auto" regularises a singular covariance with a warning, False raises
        :class:`FitError` instead, True always adds the ridge.
    """

    form = "gaussian"

    def __init__(self, temperature=0.8, ridge="auto"):
        self.temperature = temperature
        self.ridge = ridge

    @staticmethod
    def _moments(X, ridge):
        mean = X.mean(axis=0)
        diff = X - mean
        cov = diff.T @ diff / X.shape[0]
        cov, _ = _cholesky(cov, ridge)
        return mean, cov

    def fit(self, X, y=None):
        self._check_temperature()
        X = self._check_input(X)
        mean, cov = self._moments(X, self.ridge)
        self._set_parameters([1.0], mean[None, :], cov[None, :, :])
        train, held = heldout_split(X.shape[0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            m_tr, c_tr = self._moments(X[train], "auto")
        self.heldout_log_score_ = float(np.mean(
            _component_log_pdf(X[held], m_tr, np.linalg.cholesky(c_tr))))
        self.n_train_ = X.shape[0]
        self.n_iter_ = 0
        self.converged_ = True
        self.log_likelihood_trace_ = []
        return self


class MixtureTarget(_GaussianFamilyTarget):
    """Gaussian mixture fitted by EM on the first 90% of an interleaved split.

    EM stops when the mean training log-likelihood changes by less than
    ``tol`` or after ``max_iter`` iterations. The per-iteration training
    log-likelihood is kept in ``log_likelihood_trace_``.
    """

    form = "mixture"

    def __init__(self, n_components=2, temperature=0.8, tol=1e-8, max_iter=500,
                 ridge="auto", random_state=None):
        self.n_components = n_components
        self.temperature = temperature
        self.tol = tol
        self.max_iter = max_iter
        self.ridge = ridge
        self.random_state = random_state

    def _initial_parameters(self, X):
        K = self.n_components
        if K == 1:
            resp = np.ones((X.shape[0], 1))
        else:
            labels = KMeans(n_clusters=K, n_init=10,
                            random_state=self.random_state).fit(X).labels_
            resp = np.eye(K)[labels]
        return self._m_step(X, resp)

    def _m_step(self, X, resp, prev=None):
        """M-step. A component with fewer than ``d + 1`` effective draws is
        retired: its weight becomes 0 and it keeps its previous parameters."""
        n, d = X.shape
        nk = resp.sum(axis=0)
        dead = nk < d + 1
        if np.all(dead):
            raise FitError("every mixture component lost its support during EM")
        weights = np.where(dead, 0.0, nk) / nk[~dead].sum()
        means, covs, chols = [], [], []
        for k in range(resp.shape[1]):
            if dead[k]:
                if prev is None:
                    mean, cov = X.mean(axis=0), np.cov(X.T, bias=True).reshape(d, d)
                    cov, L = _cholesky(cov, self.ridge)
                else:
                    mean, cov, L = prev[1][k], prev[2][k], prev[3][k]
            else:
                mean = resp[:, k] @ X / nk[k]
                diff = X - mean
                cov = (resp[:, k, None] * diff).T @ diff / nk[k]
                cov, L = _cholesky(cov, self.ridge)
            means.append(mean)
            covs.append(cov)
            chols.append(L)
        return weights, np.array(means), np.array(covs), chols

    def _em(self, X, weights, means, covs, chols):
        trace = []
        converged = False
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            log_prob = _mixture_log_prob(X, weights, means, chols)
            norm = logsumexp(log_prob, axis=1)
            ll = float(np.mean(norm))
            trace.append(ll)
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) < self.tol:
                converged = True
                break
            resp = np.exp(log_prob - norm[:, None])
            weights, means, covs, chols = self._m_step(X, resp, (weights, means, covs, chols))
        return weights, means, covs, n_iter, converged, trace

    def fit(self, X, y=None, init=None):
        """Fit by EM; ``init`` = (weights, means, untempered covariances) warm-starts."""
        self._check_temperature()
        if int(self.n_components) < 1:
            raise InputError("n_components must be >= 1")
        X = self._check_input(X)
        train, held = heldout_split(X.shape[0])
        Xt = X[train]
        if init is None:
            w, m, c, chols = self._initial_parameters(Xt)
        else:
            w, m, c = (np.asarray(a, dtype=float) for a in init)
            if m.shape != (self.n_components, X.shape[1]):
                raise InputError("warm-start parameters do not match the data dimension")
            chols = [_cholesky(ck, self.ridge)[1] for ck in c]
        w, m, c, n_iter, converged, trace = self._em(Xt, w, m, c, chols)
        self._set_parameters(w, m, c)
        untempered = [np.linalg.cholesky(ck) for ck in c]
        self.heldout_log_score_ = float(np.mean(
            logsumexp(_mixture_log_prob(X[held], w, m, untempered), axis=1)))
        self.n_train_ = int(Xt.shape[0])
        self.n_iter_ = n_iter
        self.converged_ = converged
        self.log_likelihood_trace_ = trace
        return self


LearnedTarget = _GaussianFamilyTarget


def _as_array(samples):
    return samples.pooled() if hasattr(samples, "pooled") else samples


def fit_target(samples, form="gaussian", temperature=0.8, seed=None, n_components=None,
               ridge="auto"):
    """Fit a learned target to posterior draws.

    ``form="mixture"`` with ``n_components=None`` fits K = 1, 2, 3 and keeps the
    mixture with the best held-out log-score.
    """
    X = _as_array(samples)
    if form == "gaussian":
        return GaussianTarget(temperature=temperature, ridge=ridge).fit(X)
    if form != "mixture":
        raise InputError(f"unknown target form {form!r}")
    if n_components is not None:
        return MixtureTarget(n_components, temperature, ridge=ridge, random_state=seed).fit(X)
    fits = [MixtureTarget(k, temperature, ridge=ridge, random_state=seed).fit(X)
            for k in (1, 2, 3)]
    return max(fits, key=lambda t: t.heldout_log_score_)


def refit_target(previous, samples):
    """Refit ``previous`` on new draws with the same settings, warm-started from
    its parameters where the form is iterative."""
    check_is_fitted(previous, "means_")
    X = _as_array(samples)
    d = np.shape(X)[1] if np.ndim(X) == 2 else None
    if d != previous.n_features_in_:
        raise InputError(
            f"target is {previous.n_features_in_}-D but samples are {d}-D")
    est = clone(previous)
    if isinstance(previous, MixtureTarget):
        return est.fit(X, init=(previous.weights_, previous.means_, previous.fit_covariances_))
    return est.fit(X)


def log_phi(target, theta):
    """log phi(theta) for one vector (float) or a batch (array)."""
    X, single = check_points(theta, target.dimension)
    out = target.score_samples(X)
    return float(out[0]) if single else out


def save_target(target, path):
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(target.to_dict(), fh, indent=2)
        fh.write("\n")
    return path


def load_target(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read target file {path}: {exc}") from exc
    return _GaussianFamilyTarget.from_dict(doc)
