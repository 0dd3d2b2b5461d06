"""Multi-chain posterior draws, importance resampling and the samples directory format.

A samples directory holds ``manifest.json`` plus one header-less CSV per
chain (one draw per row, one column per parameter)::

    {"dimension": 2, "parameter_names": ["x", "y"],
     "chain_files": ["chain_000.csv", "chain_001.csv"],
     "sampler": {...}, "seed": 1234}
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from ._validation import as_seed_sequence
from .exceptions import DegenerateWeightsError, FormatError, InputError

MANIFEST = "manifest.json"

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["dimension", "chain_files"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "parameter_names": {"type": ["array", "null"], "items": {"type": "string"}},
        "chain_files": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "sampler": {"type": "object"},
        "seed": {"type": ["integer", "null"]},
    },
    "additionalProperties": False,
}


class ChainSet:
    """Immutable ordered collection of per-chain draw matrices.

    Parameters
    ----------
    chains : sequence of array-like, each of shape (n_draws_c, dimension)
    parameter_names : sequence of str, optional
    metadata : dict, optional
        Free-form provenance (sampler settings, seed, acceptance rates).
    """

    def __init__(self, chains, parameter_names=None, metadata=None):
        arrays = []
        for c, chain in enumerate(chains):
            a = np.array(chain, dtype=float, copy=True)
            if a.ndim == 1:
                a = a.reshape(-1, 1)
            if a.ndim != 2 or a.shape[0] < 1:
                raise InputError(f"chain {c} must be a non-empty (n_draws, dimension) array")
            if not np.all(np.isfinite(a)):
                row = int(np.argwhere(~np.isfinite(a))[0, 0])
                raise InputError(f"chain {c} has a non-finite value at draw {row}")
            a.setflags(write=False)
            arrays.append(a)
        if not arrays:
            raise InputError("a ChainSet needs at least one chain")
        dims = {a.shape[1] for a in arrays}
        if len(dims) != 1:
            raise InputError(f"chains disagree on dimension: {sorted(dims)}")
        self.chains = tuple(arrays)
        self.dimension = dims.pop()
        if parameter_names is not None:
            parameter_names = [str(n) for n in parameter_names]
            if len(parameter_names) != self.dimension:
                raise InputError("parameter_names length does not match dimension")
        self.parameter_names = parameter_names
        self.metadata = dict(metadata or {})
        self.chain_lengths = tuple(a.shape[0] for a in arrays)
        self._pooled = np.concatenate(arrays, axis=0)
        self._pooled.setflags(write=False)

    @classmethod
    def from_pooled(cls, draws, chain_lengths, **kwargs):
        draws = np.asarray(draws, dtype=float)
        if sum(chain_lengths) != draws.shape[0]:
            raise InputError("chain_lengths do not add up to the number of draws")
        splits = np.cumsum(chain_lengths)[:-1]
        return cls(np.split(draws, splits), **kwargs)

    @property
    def n_chains(self):
        return len(self.chains)

    @property
    def n_draws(self):
        return self._pooled.shape[0]

    def pooled(self):
        """All draws stacked chain by chain, shape (N, dimension). Read-only view."""
        return self._pooled

    def chain_ids(self):
        """Chain label of every pooled draw."""
        return np.repeat(np.arange(self.n_chains), self.chain_lengths)

    def subset(self, chain_indices):
        """New ChainSet made of the given chains (repeats allowed)."""
        return ChainSet([self.chains[i] for i in chain_indices],
                        parameter_names=self.parameter_names, metadata=self.metadata)

    def __len__(self):
        return self.n_draws

    def __eq__(self, other):
        if not isinstance(other, ChainSet):
            return NotImplemented
        return (self.chain_lengths == other.chain_lengths
                and self.parameter_names == other.parameter_names
                and np.array_equal(self._pooled, other._pooled))

    __hash__ = None

    def __repr__(self):
        return (f"ChainSet(n_chains={self.n_chains}, n_draws={self.n_draws}, "
                f"dimension={self.dimension})")


@dataclass(frozen=True)
class ResampleResult:
    draws: ChainSet
    source_indices: np.ndarray
    weights_used: object = field(repr=False, default=None)


def _normalised(weights):
    w = getattr(weights, "normalized", weights)
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise InputError("weights must be one-dimensional")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be finite and non-negative")
    total = math.fsum(w)
    if total <= 0:
        raise DegenerateWeightsError("all resampling weights are zero")
    return w / total


def resample_indices(w, size, rng, scheme="multinomial"):
    """Draw ``size`` indices with selection probabilities ``w`` (already normalised)."""
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    if scheme == "multinomial":
        u = rng.random(size)
    elif scheme == "systematic":
        u = (rng.random() + np.arange(size)) / size
    else:
        raise InputError(f"unknown resampling scheme {scheme!r}")
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(w) - 1)


def _split_lengths(total, n_parts):
    base, extra = divmod(total, n_parts)
    return [base + (1 if i < extra else 0) for i in range(n_parts)]


def sir_resample(samples, weights, seed=None, scheme="multinomial", n_draws=None):
    """Sampling-importance-resampling of ``samples`` under ``weights``.

    Parameters
    ----------
    samples : ChainSet
    weights : ImportanceWeights or array-like of non-negative weights
    seed : int or numpy.random.SeedSequence
    scheme : {"multinomial", "systematic"}
        Multinomial draws i.i.d. indices; systematic uses one uniform offset and
        gives selection counts within one of ``N * w_j``.
    n_draws : int, optional
        Output size; defaults to the input size N.

    Returns
    -------
    ResampleResult
        Draws are dealt to output chains in order. With the default size the
        output chain lengths mirror the input chain lengths.
    """
    w = _normalised(weights)
    if w.shape[0] != samples.n_draws:
        raise InputError(
            f"got {w.shape[0]} weights for {samples.n_draws} draws")
    size = samples.n_draws if n_draws is None else int(n_draws)
    if size < 1:
        raise InputError("n_draws must be >= 1")
    rng = np.random.default_rng(as_seed_sequence(seed))
    idx = resample_indices(w, size, rng, scheme)
    if size == samples.n_draws:
        lengths = samples.chain_lengths
    else:
        lengths = [n for n in _split_lengths(size, samples.n_chains) if n > 0]
    draws = ChainSet.from_pooled(
        samples.pooled()[idx], lengths,
        parameter_names=samples.parameter_names,
        metadata={"resampled": True, "scheme": scheme},
    )
    idx.setflags(write=False)
    return ResampleResult(draws=draws, source_indices=idx, weights_used=weights)


def write_chains(cs, path, sampler=None, seed=None):
    """Write ``cs`` as a samples directory (created if needed)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    files = []
    for c, chain in enumerate(cs.chains):
        name = f"chain_{c:03d}.csv"
        np.savetxt(path / name, chain, fmt="%.17g", delimiter=",")
        files.append(name)
    manifest = {
        "dimension": cs.dimension,
        "parameter_names": cs.parameter_names,
        "chain_files": files,
    }
    if sampler is None:
        sampler = cs.metadata.get("sampler")
    if seed is None:
        seed = cs.metadata.get("seed")
    if sampler is not None:
        manifest["sampler"] = sampler
    if seed is not None:
        manifest["seed"] = int(seed)
    with open(path / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _read_csv(fname, dimension):
    rows = []
    try:
        fh = open(fname, newline="")
    except OSError as exc:
        raise FormatError(f"cannot open chain file {fname}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != dimension:
                raise FormatError(
                    f"{fname}:{lineno}: expected {dimension} columns, found {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise FormatError(f"{fname}:{lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"{fname}:{lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise FormatError(f"{fname}: chain file is empty")
    return np.array(rows, dtype=float)


def read_chains(path):
    """Load a samples directory written by :func:`write_chains`."""
    path = Path(path)
    mpath = path / MANIFEST
    if not mpath.is_file():
        raise FormatError(f"missing manifest: {mpath}")
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
        jsonschema.validate(manifest, MANIFEST_SCHEMA)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{mpath}: invalid JSON: {exc}") from exc
    except jsonschema.ValidationError as exc:
        raise FormatError(f"{mpath}: {exc.message}") from exc
    dim = manifest["dimension"]
    names = manifest.get("parameter_names")
    if names is not None and len(names) != dim:
        raise FormatError(f"{mpath}: parameter_names has {len(names)} entries, dimension is {dim}")
    chains = [_read_csv(path / f, dim) for f in manifest["chain_files"]]
    metadata = {k: manifest[k] for k in ("sampler", "seed") if k in manifest}
    return ChainSet(chains, parameter_names=names, metadata=metadata)


def split_chains(samples, train_fraction=0.5):
    """Split whole chains into (training, evaluation) sets.

    The first ``round(n_chains * train_fraction)`` chains train the learned
    target and the rest are used to evaluate the estimator, so the target is
    never scored on the draws it was fitted to. Needs at least two chains.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InputError("train_fraction must lie in (0, 1)")
    C = samples.n_chains
    if C < 2:
        raise InputError("splitting needs at least two chains")
    n_train = min(max(int(round(C * train_fraction)), 1), C - 1)
    return samples.subset(range(n_train)), samples.subset(range(n_train, C))


def concat_chains(*sets):
    """Chains of several ChainSets, in order, as one ChainSet."""
    chains = [c for s in sets for c in s.chains]
    return ChainSet(chains, parameter_names=sets[0].parameter_names, metadata=sets[0].metadata)
