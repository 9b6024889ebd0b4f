"""Exception types shared across the package."""


class GaplabError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(GaplabError, ValueError):
    """Operator/vector or matrix/support dimensions are inconsistent."""


class NonHermitianError(GaplabError, ValueError):
    """A matrix that must be Hermitian is not, beyond tolerance."""


class SupportError(GaplabError, ValueError):
    """A term's support falls outside the lattice or repeats sites."""


class NotPositiveSemidefiniteError(GaplabError, ValueError):
    """An operator required to be PSD has a negative Ritz value."""


class GapUndefinedError(GaplabError, ValueError):
    """The spectral gap is undefined (operator has no nonzero eigenvalue)."""


class IllSeparatedKernelError(GaplabError, RuntimeError):
    """Smallest nonzero eigenvalue is too close to the zero threshold."""


class ConvergenceError(GaplabError, RuntimeError):
    """An iterative eigensolve did not reach its residual certificate."""


class LayoutError(GaplabError, ValueError):
    """Segment layout preconditions are violated (e.g. fewer than 2 segments)."""


class PreconditionError(GaplabError, ValueError):
    """A verifier's stated precondition does not hold for the given inputs."""


class SchemaError(GaplabError, ValueError):
    """A model/config file does not conform to its documented schema."""
