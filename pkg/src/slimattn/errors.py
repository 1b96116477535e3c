"""Exception types raised across the package."""


class SlimAttnError(Exception):
    """Base class for all package errors."""


class ShapeError(SlimAttnError):
    """Operand shapes are incompatible."""


class ParameterError(SlimAttnError):
    """A scalar parameter is outside its valid range."""


class DegenerateRowError(SlimAttnError):
    """A softmax row has no unmasked cells."""


class IntegrityError(SlimAttnError):
    """Input data violates a structural contract (e.g. non-stochastic rows)."""


class LayoutError(SlimAttnError):
    """A token layout is inconsistent or unusable."""


class DegenerateContextError(SlimAttnError):
    """A decode step has an empty fetched KV set."""


class TensorFileError(SlimAttnError):
    """A tensor file is malformed or cannot be read."""


class WorkloadError(SlimAttnError):
    """A synthetic workload spec is infeasible."""
