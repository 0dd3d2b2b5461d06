"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command-line layer
can translate failures without a lookup table.
"""


class PriorSensError(Exception):
    exit_code = 1


class InputError(PriorSensError, ValueError):
    """Bad argument: wrong dimension, empty collection, invalid parameter."""

    exit_code = 2


class ConfigError(InputError):
    """Configuration document failed schema validation."""

    exit_code = 2


class DataError(PriorSensError):
    """Samples inconsistent with the densities they are combined with."""

    exit_code = 3


class FormatError(DataError):
    """On-disk sample or target file is missing or malformed."""


class DegenerateWeightsError(DataError):
    """All resampling weights are zero."""


class DisjointSupportError(DegenerateWeightsError):
    """The alternative density assigns zero mass to every draw."""


class NumericalError(PriorSensError, ArithmeticError):
    exit_code = 4


class FitError(NumericalError):
    """Target density could not be fitted (e.g. singular covariance)."""


class InitialisationError(NumericalError):
    """Sampler could not find a start point with finite density."""
