"""Adaptive random-walk Metropolis for generating posterior draws of the toy problems.

The proposal is an isotropic Gaussian whose scale follows a Robbins-Monro
recursion on its logarithm toward a target acceptance rate. Adaptation runs
during burn-in only; the kept draws come from a fixed kernel.

Chains advance in lockstep so each step is one batched density call. Every
chain draws its random numbers up front from its own sub-seed, so a chain's
trajectory does not depend on which other chains share its batch.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import as_seed_sequence
from .exceptions import InitialisationError, InputError
from .model import unnorm_log_posterior
from .samples import ChainSet


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 16
    n_draws: int = 1000
    n_burnin: int | None = None  # None -> half of n_draws
    initial_scale: float = 0.1
    adapt_window: int = 50
    target_acceptance: float = 0.234
    max_init_tries: int = 1000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("n_chains", "n_draws", "adapt_window", "max_init_tries", "thin"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.n_burnin is not None and self.n_burnin < 0:
            raise InputError("n_burnin must be >= 0")
        if not 0.0 < self.target_acceptance < 1.0:
            raise InputError("target_acceptance must lie in (0, 1)")
        if not self.initial_scale > 0:
            raise InputError("initial_scale must be > 0")

    @property
    def burnin(self):
        return self.n_draws // 2 if self.n_burnin is None else int(self.n_burnin)

    def to_dict(self):
        d = asdict(self)
        d["n_burnin"] = self.burnin
        return d


def log_accept_ratio(log_p_proposed, log_p_current):
    """Log Metropolis acceptance probability for a symmetric proposal."""
    if log_p_proposed == -math.inf:
        return -math.inf
    return min(0.0, log_p_proposed - log_p_current)


def metropolis_transition_matrix(log_target, proposal):
    """Transition matrix of the Metropolis kernel on a finite state space.

    ``proposal[i, j]`` is the (symmetric) probability of proposing j from i.
    Used to check that the acceptance rule leaves ``exp(log_target)`` invariant.
    """
    log_target = np.asarray(log_target, dtype=float)
    proposal = np.asarray(proposal, dtype=float)
    n = log_target.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                P[i, j] = proposal[i, j] * math.exp(log_accept_ratio(log_target[j], log_target[i]))
        P[i, i] = 1.0 - P[i].sum()
    return P


def _initial_point(prior, likelihood, rng, max_tries):
    for _ in range(max_tries):
        x = prior.sample(rng, 1)[0]
        lp = unnorm_log_posterior(prior, likelihood, x)
        if math.isfinite(lp):
            return x, lp
    raise InitialisationError(
        f"no finite-density starting point after {max_tries} prior draws")


def _chain_streams(prior, likelihood, cfg, seed_seq, n_steps):
    rng = np.random.default_rng(seed_seq)
    x, lp = _initial_point(prior, likelihood, rng, cfg.max_init_tries)
    noise = rng.standard_normal((n_steps, prior.dimension))
    log_u = np.log(rng.random(n_steps))
    return x, lp, noise, log_u


def _run_chains(prior, likelihood, cfg, seed_seqs):
    """Run a batch of chains in lockstep; returns per-chain draws, rates, scales."""
    n_burn, thin = cfg.burnin, int(cfg.thin)
    n_steps = n_burn + cfg.n_draws * thin
    streams = [_chain_streams(prior, likelihood, cfg, s, n_steps) for s in seed_seqs]
    x = np.array([st[0] for st in streams])
    lp = np.array([st[1] for st in streams])
    noise = np.stack([st[2] for st in streams], axis=1)
    log_u = np.stack([st[3] for st in streams], axis=1)
    C = x.shape[0]
    log_scale = np.full(C, math.log(cfg.initial_scale))
    draws = np.empty((cfg.n_draws, C, prior.dimension))
    accepted = np.zeros(C, dtype=np.int64)
    for t in range(n_steps):
        proposal = x + np.exp(log_scale)[:, None] * noise[t]
        lp_new = unnorm_log_posterior(prior, likelihood, proposal)
        with np.errstate(invalid="ignore"):
            log_alpha = np.where(np.isfinite(lp_new), np.minimum(0.0, lp_new - lp), -np.inf)
        move = log_u[t] < log_alpha
        x[move] = proposal[move]
        lp[move] = lp_new[move]
        if t < n_burn:
            gain = (1.0 + t / cfg.adapt_window) ** -0.6
            log_scale += gain * (np.exp(log_alpha) - cfg.target_acceptance)
        else:
            accepted += move
            j = t - n_burn
            if (j + 1) % thin == 0:
                draws[j // thin] = x
    rates = accepted / float(cfg.n_draws * thin)
    return [draws[:, c] for c in range(C)], rates.tolist(), np.exp(log_scale).tolist()


def run_metropolis(prior, likelihood, cfg=None, threads=None):
    """Draw ``cfg.n_chains`` independent chains from ``prior * likelihood``.

    Chains get sub-seeds spawned from ``cfg.seed`` and are split into up to
    ``threads`` lockstep batches; the output does not depend on the split.
    With ``cfg.thin > 1`` only every ``thin``-th post-burn-in state is kept.
    Acceptance rates and final proposal scales land in ``metadata``.
    """
    cfg = cfg or SamplerConfig()
    if prior.dimension != likelihood.dimension:
        raise InputError("prior and likelihood dimensions differ")
    seeds = as_seed_sequence(cfg.seed).spawn(cfg.n_chains)
    n_groups = max(1, min(int(threads or 1), cfg.n_chains))
    groups = [g for g in np.array_split(np.arange(cfg.n_chains), n_groups)]

    def job(g):
        return _run_chains(prior, likelihood, cfg, [seeds[c] for c in g])

    if n_groups > 1:
        with ThreadPoolExecutor(max_workers=n_groups) as pool:
            results = list(pool.map(job, groups))
    else:
        results = [job(groups[0])]

    chains, rates, scales = [], [], []
    for r in results:
        chains += r[0]
        rates += r[1]
        scales += r[2]
    sampler_meta = {
        "name": "adaptive-random-walk-metropolis",
        "config": cfg.to_dict(),
        "acceptance_rates": rates,
        "proposal_scales": scales,
    }
    return ChainSet(chains, metadata={"sampler": sampler_meta, "seed": cfg.seed})
