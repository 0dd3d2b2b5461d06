import math

import numpy as np
import pytest

from priorsens import experiments
from priorsens.evidence import (EvidenceEstimate, bootstrap_sigma, estimate_from_log_ratios,
                               lhme, log_ratios)
from priorsens.exceptions import DataError, InputError
from priorsens.model import GaussianLikelihood, GaussianPrior, UniformPrior
from priorsens.oracles import gaussian_log_evidence
from priorsens.samples import ChainSet
from priorsens.target import GaussianTarget

SIGMA_L, SIGMA_P = 0.5, 2.0
SIGMA_POST = (SIGMA_L**-2 + SIGMA_P**-2) ** -0.5


def posterior_target():
    t = GaussianTarget(temperature=1.0)
    t._set_parameters([1.0], [[0.0]], [[[SIGMA_POST**2]]])
    return t


def iid_posterior(n_chains, n_draws, seed):
    rng = np.random.default_rng(seed)
    return ChainSet([SIGMA_POST * rng.standard_normal((n_draws, 1)) for _ in range(n_chains)])


def toy_1d():
    return GaussianPrior(0.0, SIGMA_P, dimension=1), GaussianLikelihood(1, SIGMA_L)


def test_exact_posterior_target_has_zero_variance():
    prior, lk = toy_1d()
    cs = iid_posterior(4, 2000, 0)
    r = log_ratios(cs, prior, lk, posterior_target())
    truth = gaussian_log_evidence(1, SIGMA_L, SIGMA_P)
    assert np.std(r, ddof=1) < 1e-10
    est = lhme(cs, prior, lk, posterior_target())
    assert abs(est.log_z - truth) < 1e-10
    assert est.sigma_log_z < 1e-10


def test_gaussian_toy_direct_estimate(gaussian_cfg, gaussian_samples):
    est, *_ = experiments.evidence(gaussian_samples, gaussian_cfg)
    truth = gaussian_log_evidence(10, 2e-4, 1.0)
    assert abs(est.log_z - truth) < 3 * est.sigma_log_z
    assert est.n_chains == 8 and est.n_draws == 8000
    assert est.log_z == -est.log_rho_hat


def test_duplicated_draws_leave_estimate_unchanged():
    prior, lk = toy_1d()
    cs = iid_posterior(3, 500, 1)
    t = GaussianTarget(0.8).fit(iid_posterior(1, 1000, 2).pooled())
    a = lhme(cs, prior, lk, t)
    doubled = ChainSet([np.concatenate([c, c]) for c in cs.chains])
    b = lhme(doubled, prior, lk, t)
    assert b.log_rho_hat == pytest.approx(a.log_rho_hat, abs=1e-13)
    assert b.n_draws == 2 * a.n_draws


class _ShiftedPrior(GaussianPrior):
    def _log_density(self, X):
        return super()._log_density(X) - 1000.0


def test_log_space_equivariance_to_large_shift():
    prior, lk = toy_1d()
    shifted = _ShiftedPrior(0.0, SIGMA_P, dimension=1)
    cs = iid_posterior(4, 500, 3)
    t = GaussianTarget(0.8).fit(iid_posterior(1, 1000, 4).pooled())
    a = lhme(cs, prior, lk, t)
    b = lhme(cs, shifted, lk, t)
    assert b.log_z - a.log_z == pytest.approx(-1000.0, abs=1e-9)
    assert math.isfinite(b.log_z)


def test_permutation_within_chain_is_bit_identical():
    prior, lk = toy_1d()
    cs = iid_posterior(3, 400, 5)
    t = GaussianTarget(0.8).fit(iid_posterior(1, 1000, 6).pooled())
    rng = np.random.default_rng(0)
    perm = ChainSet([c[rng.permutation(c.shape[0])] for c in cs.chains])
    assert lhme(cs, prior, lk, t).log_rho_hat == lhme(perm, prior, lk, t).log_rho_hat


def test_error_shrinks_with_more_draws():
    prior, lk = toy_1d()
    truth = gaussian_log_evidence(1, SIGMA_L, SIGMA_P)
    rms = []
    for n in (1000, 10000):
        errs = []
        for seed in range(20):
            t = GaussianTarget(0.8).fit(iid_posterior(1, n, 100 + seed).pooled())
            errs.append(lhme(iid_posterior(4, n // 4, seed), prior, lk, t).log_z - truth)
        rms.append(math.sqrt(np.mean(np.square(errs))))
    assert rms[1] < rms[0]


def test_out_of_support_draw_is_data_error():
    prior = UniformPrior(-1, 1, dimension=1)
    lk = GaussianLikelihood(1, 1.0)
    t = GaussianTarget().fit(np.random.default_rng(0).uniform(-1, 1, (100, 1)))
    cs = ChainSet([[[0.0], [0.5]], [[2.0], [0.1]]])
    with pytest.raises(DataError, match="support"):
        lhme(cs, prior, lk, t)
    with pytest.raises(DataError):
        estimate_from_log_ratios(np.array([0.0, np.inf]), (2,))


def test_single_chain_warns():
    prior, lk = toy_1d()
    with pytest.warns(RuntimeWarning, match="single chain"):
        est = lhme(iid_posterior(1, 300, 7), prior, lk, posterior_target())
    assert est.uncertainty_method == "iid"


def test_bootstrap_of_identical_chains_is_zero():
    prior, lk = toy_1d()
    chain = iid_posterior(1, 300, 8).chains[0]
    cs = ChainSet([chain] * 6)
    t = GaussianTarget(0.8).fit(iid_posterior(1, 500, 9).pooled())
    assert bootstrap_sigma(cs, prior, lk, t, 30, seed=0) == 0.0


def test_bootstrap_matches_per_chain_scale():
    prior, lk = toy_1d()
    cs = iid_posterior(8, 500, 10)
    t = GaussianTarget(0.8).fit(iid_posterior(1, 1000, 11).pooled())
    est = lhme(cs, prior, lk, t)
    boot = bootstrap_sigma(cs, prior, lk, t, 30, seed=1)
    assert est.sigma_log_z / 3 < boot < 3 * est.sigma_log_z
    assert boot == bootstrap_sigma(cs, prior, lk, t, 30, seed=1)
    via = lhme(cs, prior, lk, t, uncertainty="bootstrap", n_bootstrap=30, seed=1)
    assert via.sigma_log_z == boot and via.uncertainty_method == "bootstrap(30)"


def test_bootstrap_policy_checks():
    prior, lk = toy_1d()
    t = posterior_target()
    with pytest.warns(RuntimeWarning, match="below the recommended"):
        assert bootstrap_sigma(iid_posterior(4, 100, 12), prior, lk, t, 10, seed=0) >= 0
    with pytest.raises(InputError):
        bootstrap_sigma(iid_posterior(1, 100, 13), prior, lk, t)
    with pytest.raises(InputError):
        lhme(iid_posterior(2, 100, 14), prior, lk, t, uncertainty="jackknife")


def test_estimate_serialises():
    est = EvidenceEstimate(1.5, 0.1, "per-chain", 10, 2, chain_log_rho=(1.4, 1.6))
    d = est.to_dict()
    assert d["log_z"] == -1.5 and d["chain_log_rho"] == [1.4, 1.6]
