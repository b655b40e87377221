"""
Error hierarchy
===============
Every failure the package raises on purpose derives from SSPFError and
carries the process exit code the CLI reports for it:

  0  success
  2  configuration / argument / shape errors
  3  file and container I/O errors
  4  numeric aborts and contract violations
"""


class SSPFError(Exception):
    """Base class for all sspf errors."""

    exit_code = 1


class ConfigError(SSPFError):
    """Invalid configuration value, unknown key or bad CLI argument."""

    exit_code = 2


class UnknownTaskError(ConfigError):
    """A task name that has no registered head, token or tail."""


class ParamPathError(ConfigError):
    """A parameter path prefix that matches nothing in the store."""


class ShapeError(SSPFError, ValueError):
    """Tensor extents that violate an operation's precondition."""

    exit_code = 2


class SizingError(ShapeError):
    """FFT axis whose extent is not a power of two."""

    def __init__(self, axis: int, extent: int):
        self.axis = axis
        self.extent = extent
        super().__init__(f"FFT axis {axis} has extent {extent}, which is not a power of two.")


class DataIOError(SSPFError):
    """Reading or writing a file failed."""

    exit_code = 3


class ContainerFormatError(DataIOError):
    """Malformed FTS1 or SSPF1 payload."""


class CheckpointMissingError(DataIOError):
    """A command needs a checkpoint that does not exist."""


class NiftiFormatError(DataIOError):
    """Exception signalling errors encountered during NIfTI file parsing."""


class NiftiMagicError(NiftiFormatError):
    """The file is not a single-file NIfTI-1 image."""


class NiftiDtypeError(NiftiFormatError):
    """The voxel datatype is not one the reader supports."""


class NiftiTruncatedError(NiftiFormatError):
    """Header or voxel payload ends before its declared size."""


class NiftiHeaderError(NiftiFormatError):
    """The header is self-inconsistent (bad dims, offset or voxel values)."""


class NumericAbortError(SSPFError):
    """A loss became NaN or infinite."""

    exit_code = 4

    def __init__(self, message: str, batch_seed: int | None = None):
        self.batch_seed = batch_seed
        super().__init__(message)


class ContractError(SSPFError):
    """Differentiation or freeze contract was violated."""

    exit_code = 4


class UndefinedMetricError(SSPFError, ValueError):
    """A metric is undefined for the given inputs (e.g. empty mask)."""

    exit_code = 4
