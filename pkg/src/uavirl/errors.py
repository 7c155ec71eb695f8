"""Error taxonomy shared across the package.

The CLI maps ConfigError to exit code 2 and NumericFailure to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration, scenario file, or incompatible artifacts."""


class NumericFailure(RuntimeError):
    """A numeric routine diverged (NaN watchdog, solver non-convergence)."""


class QpNonConvergence(NumericFailure):
    """The weight solver hit its iteration budget without certifying either
    optimality or infeasibility."""


class ExpertInfeasible(ConfigError):
    """No transmit power level satisfies the throughput threshold, so the
    scripted expert cannot produce a demonstration."""


class TrajectoryFormatError(ValueError):
    """A trajectory file is corrupt or structurally invalid."""


class SchemaVersionError(TrajectoryFormatError):
    """A trajectory file carries an unsupported schema version."""
