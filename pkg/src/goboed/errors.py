"""Exception taxonomy shared across the package.

Errors are grouped by contract: argument validation, numerical domain
violations, and file-format failures. Solvers signal infeasibility through
solution flags, not exceptions; only genuinely exceptional states raise.
"""


class GoboedError(Exception):
    """Base class for all package errors."""


class InvalidArgument(GoboedError, ValueError):
    """A caller violated a documented precondition."""


class NonFiniteWeight(GoboedError, ValueError):
    """A log-weight vector contained NaN or +/-inf where finiteness is required."""


class ShapeError(GoboedError, ValueError):
    """Tensor shapes incompatible for the requested operation."""


class DomainError(GoboedError, ValueError):
    """Elementwise math applied outside its domain (log/sqrt of nonpositive values)."""


class IntegrationError(GoboedError, RuntimeError):
    """ODE state left the physically admissible region."""


class ZeroRateError(GoboedError, ValueError):
    """Poisson score requested at a vanishing rate."""


class NumericalError(GoboedError, RuntimeError):
    """An internal numerical identity failed (should be unreachable)."""


class NonFiniteEncoder(GoboedError, RuntimeError):
    """Encoder activations became non-finite."""


class NonFiniteElbo(GoboedError, RuntimeError):
    """An ELBO term evaluated to NaN or +inf."""


class TrainingDiverged(GoboedError, RuntimeError):
    """Training loss became non-finite."""


class DegenerateWeights(GoboedError, RuntimeError):
    """All importance weights underflowed; the posterior estimate is unusable."""


class NonFiniteEstimate(GoboedError, RuntimeError):
    """A Monte Carlo estimate evaluated to NaN or +/-inf."""


class ConfigError(GoboedError, ValueError):
    """Configuration file is malformed; carries a line-numbered message."""


class ChecksumError(GoboedError, ValueError):
    """Weight file payload does not match its recorded checksum."""


class SchemaError(GoboedError, ValueError):
    """Weight file header disagrees with the expected architecture."""


class SolverError(GoboedError, RuntimeError):
    """Interior-point iteration failed to make progress."""
