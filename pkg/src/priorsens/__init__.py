"""Evidence from posterior draws with the learned harmonic mean estimator, and
prior sensitivity by importance resampling with a Pareto-k / ESS gate."""

from .diagnostics import (REFIT, RETRAIN, REUSE, Decision, ImportanceWeights, decide, ess,
                          general_log_weights, gpd_fit, pareto_k, prior_ratio_log_weights)
from .evidence import EvidenceEstimate, bootstrap_sigma, lhme
from .exceptions import (ConfigError, DataError, DegenerateWeightsError, DisjointSupportError,
                         FitError, FormatError, InitialisationError, InputError,
                         NumericalError, PriorSensError)
from .model import (GaussianLikelihood, GaussianPrior, LogUniformPrior, RosenbrockLikelihood,
                    UniformPrior, likelihood_from_spec, prior_from_spec, unnorm_log_posterior)
from .oracles import GridSpec, gaussian_log_evidence, grid_log_evidence
from .sampler import SamplerConfig, run_metropolis
from .samples import ChainSet, read_chains, sir_resample, split_chains, write_chains
from .sensitivity import Policy, SensitivityReport, analyse, resampled_evidence, sweep
from .target import (GaussianTarget, MixtureTarget, fit_target, load_target, log_phi,
                     refit_target, save_target)

__version__ = "0.1.0"

__all__ = [
    "REFIT", "RETRAIN", "REUSE", "ChainSet", "ConfigError", "DataError", "Decision",
    "DegenerateWeightsError", "DisjointSupportError", "EvidenceEstimate", "FitError",
    "FormatError", "GaussianLikelihood", "GaussianPrior", "GaussianTarget", "GridSpec",
    "ImportanceWeights", "InitialisationError", "InputError", "LogUniformPrior",
    "MixtureTarget", "NumericalError", "Policy", "PriorSensError", "RosenbrockLikelihood",
    "SamplerConfig", "SensitivityReport", "UniformPrior", "analyse", "bootstrap_sigma",
    "decide", "ess", "fit_target", "gaussian_log_evidence", "general_log_weights",
    "gpd_fit", "grid_log_evidence", "lhme", "likelihood_from_spec", "load_target", "log_phi",
    "pareto_k", "prior_from_spec", "prior_ratio_log_weights", "read_chains", "refit_target",
    "resampled_evidence", "run_metropolis", "save_target", "sir_resample", "split_chains",
    "sweep", "unnorm_log_posterior", "write_chains",
]
