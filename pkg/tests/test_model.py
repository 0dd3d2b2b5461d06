import math

import numpy as np
import pytest

from priorsens.exceptions import InputError
from priorsens.model import (LOG_2PI, GaussianLikelihood, GaussianPrior, LogUniformPrior,
                            RosenbrockLikelihood, UniformPrior, likelihood_from_spec,
                            prior_from_spec, unnorm_log_posterior)


def test_box_density_at_origin():
    p = UniformPrior(-10, 10, dimension=2)
    assert p.log_density([0.0, 0.0]) == pytest.approx(-5.991464547107982, abs=1e-12)
    assert p.log_density([11.0, 0.0]) == -math.inf


def test_box_edges_are_inside():
    p = UniformPrior(-1, 1, dimension=1)
    assert np.all(np.isfinite(p.log_density(np.array([[-1.0], [1.0]]))))


def test_gaussian_prior_at_origin():
    p = GaussianPrior(0.0, 1.0, dimension=10)
    assert p.log_density(np.zeros(10)) == pytest.approx(-9.189385332046727, abs=1e-12)


def test_single_vector_gives_float_and_batch_gives_array():
    p = GaussianPrior(0.0, 1.0, dimension=2)
    assert isinstance(p.log_density([0.0, 0.0]), float)
    assert p.log_density(np.zeros((3, 2))).shape == (3,)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        GaussianPrior(0.0, 1.0, dimension=3).log_density([0.0, 0.0])


@pytest.mark.parametrize("kwargs", [dict(mean=0, std=0, dimension=1),
                                    dict(mean=0, std=-1, dimension=2)])
def test_gaussian_std_must_be_positive(kwargs):
    with pytest.raises(InputError):
        GaussianPrior(**kwargs)


def test_box_requires_ordered_bounds():
    with pytest.raises(InputError):
        UniformPrior([0, 1], [1, 1])


def test_log_uniform_requires_positive_bounds():
    with pytest.raises(InputError):
        LogUniformPrior(0.0, 1.0)


def test_rosenbrock_mode():
    lk = RosenbrockLikelihood(a=1.0, b=100.0)
    assert lk.log_density([1.0, 1.0]) == 0.0
    rng = np.random.default_rng(1)
    X = rng.uniform(-3, 3, (1000, 2))
    assert np.all(lk.log_density(X) < 0)
    assert RosenbrockLikelihood(a=2.0).log_density([2.0, 4.0]) == 0.0


def test_gaussian_likelihood_matches_direct_formula():
    rng = np.random.default_rng(2)
    sigma, d = 2e-4, 10
    lk = GaussianLikelihood(d, sigma)
    X = sigma * rng.standard_normal((100, d))
    direct = [-0.5 * d * math.log(2 * math.pi * sigma**2) - float(x @ x) / (2 * sigma**2)
              for x in X]
    np.testing.assert_allclose(lk.log_density(X), direct, rtol=0, atol=1e-12)
    np.testing.assert_allclose(lk.log_density(X), lk.log_density(-X), rtol=1e-15)


def test_unnorm_log_posterior_examples():
    prior = UniformPrior(-10, 10, dimension=2)
    lk = RosenbrockLikelihood()
    assert unnorm_log_posterior(prior, lk, [1.0, 1.0]) == pytest.approx(math.log(1 / 400))
    assert unnorm_log_posterior(prior, lk, [20.0, 1.0]) == -math.inf
    gp, gl = GaussianPrior(0, 1, dimension=10), GaussianLikelihood(10, 2e-4)
    z = np.zeros(10)
    assert unnorm_log_posterior(gp, gl, z) == gp.log_density(z) + gl.log_density(z)


def test_unnorm_log_posterior_skips_likelihood_outside_support():
    prior = UniformPrior(-1, 1, dimension=2)
    lk = RosenbrockLikelihood()
    unnorm_log_posterior(prior, lk, np.array([[0.0, 0.0], [5.0, 5.0]]))
    assert lk.n_evaluations == 1


def test_dimension_mismatch_between_prior_and_likelihood():
    with pytest.raises(InputError):
        unnorm_log_posterior(GaussianPrior(0, 1, dimension=3), RosenbrockLikelihood(), [0, 0])


def _grid_integral(model, lo, hi, n):
    h = [(b - a) / n for a, b in zip(lo, hi)]
    axes = [a + h_ * (np.arange(n) + 0.5) for a, h_ in zip(lo, h)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    return float(np.sum(np.exp(model.log_density(pts)))) * float(np.prod(h))


@pytest.mark.parametrize("prior,lo,hi,n", [
    (GaussianPrior(0.3, 0.7, dimension=1), [-8.0], [8.0], 20000),
    (GaussianPrior([0.0, 1.0], [1.0, 0.5]), [-8.0, -4.0], [8.0, 6.0], 1000),
    (UniformPrior(-2, 3, dimension=1), [-2.0], [3.0], 1000),
    (UniformPrior([-1, 0], [1, 2]), [-1.0, 0.0], [1.0, 2.0], 500),
    (LogUniformPrior(1e-3, 1.0), [-3.0], [0.0], 1000),
    (LogUniformPrior([1e-2, 1e-1], [1.0, 10.0]), [-2.0, -1.0], [0.0, 1.0], 400),
])
def test_priors_are_normalised(prior, lo, hi, n):
    assert _grid_integral(prior, lo, hi, n) == pytest.approx(1.0, rel=1e-6)


def test_log_uniform_linear_space_is_normalised():
    p = LogUniformPrior(1.0, 100.0, space="linear")
    # substitute u = log10 x so the integrand is smooth on a uniform grid
    u = np.linspace(0, 2, 200001)
    x = 10.0**u
    integrand = np.exp(p.log_density(x[:, None])) * x * math.log(10)
    assert np.trapezoid(integrand, u) == pytest.approx(1.0, rel=1e-8)


def test_support_agrees_with_log_density():
    p = UniformPrior(-1, 1, dimension=2)
    X = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, -1.0]])
    np.testing.assert_array_equal(p.support(X), np.isfinite(p.log_density(X)))


def test_never_positive_infinity():
    rng = np.random.default_rng(3)
    X = rng.uniform(-50, 50, (500, 2))
    for m in (GaussianPrior(0, 1, dimension=2), UniformPrior(-10, 10, dimension=2),
              RosenbrockLikelihood()):
        out = m.log_density(X)
        assert not np.any(np.isnan(out)) and not np.any(out == np.inf)


def test_spec_round_trip():
    for p in (GaussianPrior([0, 1], 2.0), UniformPrior(-1, 1, dimension=3),
              LogUniformPrior(1e-10, 1.0, space="linear")):
        assert prior_from_spec(p.to_spec()) == p
    for lk in (GaussianLikelihood(3, 0.5), RosenbrockLikelihood(2.0, 10.0)):
        assert likelihood_from_spec(lk.to_spec()) == lk


def test_unknown_spec_family():
    with pytest.raises(InputError):
        prior_from_spec({"family": "cauchy"})
    with pytest.raises(InputError):
        likelihood_from_spec({"variant": "banana"})
    with pytest.raises(InputError):
        prior_from_spec({"family": "gaussian", "mean": 0})


def test_evaluation_counter():
    lk = GaussianLikelihood(2, 1.0)
    lk.log_density(np.zeros((5, 2)))
    lk.log_density([0.0, 0.0])
    assert lk.n_evaluations == 6
    lk.reset_counter()
    assert lk.n_evaluations == 0


def test_standard_normal_constant():
    assert GaussianPrior(0, 1, dimension=1).log_density([0.0]) == pytest.approx(-0.5 * LOG_2PI)
