"""Exception hierarchy shared by all lighttunnel modules."""


class LightTunnelError(Exception):
    """Base class for all errors raised by this package."""


class RangeError(LightTunnelError, ValueError):
    """A value lies outside its device range."""

    def __init__(self, field, value, bound):
        self.field = field
        self.value = value
        self.bound = bound
        super().__init__(f"{field}={value!r} outside {bound}")


class ParamError(LightTunnelError, ValueError):
    """A sensor-parameter invariant is violated."""


class ShapeError(LightTunnelError, ValueError):
    """Array dimensions do not chain or do not match."""


class ConstantColumnError(LightTunnelError, ValueError):
    """A correlation/readout input column has zero variance."""


class RankDeficientError(LightTunnelError, ValueError):
    """The least-squares design matrix is singular."""


class SaturatedError(LightTunnelError, ValueError):
    """All angle-sensor rows are clamped; slope is unidentifiable."""


class FormatError(LightTunnelError, ValueError):
    """A serialized weight container is malformed or corrupt."""


class NonFiniteError(LightTunnelError, ArithmeticError):
    """Training loss became NaN or infinite."""


class CyclicGraphError(LightTunnelError, ValueError):
    """The supplied adjacency matrix contains a directed cycle."""


class UnknownTargetError(LightTunnelError, ValueError):
    """An intervention target is not one of the causal factors."""


class OutOfBoundsError(LightTunnelError, ValueError):
    """A temporal-process state violates the control-input bounds."""


class NotBinaryError(LightTunnelError, ValueError):
    """An adjacency matrix expected to be binary is not."""


class DegenerateSplitError(LightTunnelError, ValueError):
    """A train/eval split would leave a side with too few rows."""


class SchemaError(LightTunnelError, ValueError):
    """A dataset file is missing required columns."""


class ChecksumError(LightTunnelError, ValueError):
    """Stored content checksums do not match the files on disk."""


class NetworkError(LightTunnelError, IOError):
    """A remote download failed."""


class IntegrityError(LightTunnelError, IOError):
    """A downloaded or cached file fails verification."""


class DatasetNotFoundError(LightTunnelError, KeyError):
    """The requested remote dataset name is not in the registry."""
