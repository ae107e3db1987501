class JunctionError(Exception):
    """Base class for every error raised by the simulator."""


class ParameterError(ValueError):
    """Raised by validators when a physical parameter is inadmissible."""


class ConfigError(JunctionError):
    """Raised when an experiment configuration cannot be loaded."""


class CapacityError(JunctionError):
    """Raised when a Fock basis would exceed the dimension guard."""


class StateNotFound(JunctionError, KeyError):
    """Raised when an occupation vector does not belong to a basis."""


class UnsupportedModes(JunctionError):
    """Raised when the named four-mode model is asked for M != 4."""


class PropertyViolation(JunctionError):
    """Raised when coefficient matrices break a required identity."""


class DimensionMismatch(JunctionError):
    """Raised when a matrix, basis or state disagree in size."""


class NumericalError(JunctionError):
    """Base class for failures of the numerical kernels."""


class EigensolverError(NumericalError):
    """Raised when a dense eigendecomposition fails or is inaccurate."""


class DefectiveMatrixError(NumericalError):
    """Raised when spectral propagation meets a near-defective matrix."""


class BiorthogonalityError(NumericalError):
    """Raised when left and right eigenvectors cannot be paired."""


class IntegrationError(NumericalError):
    """Raised when an adaptive integrator cannot continue."""


class ThresholdBracketError(NumericalError):
    """Raised when the spectrum is still unbroken at the top of a scan."""


class DegenerateNorm(NumericalError):
    """Raised when observables are requested for a vanishing state."""
