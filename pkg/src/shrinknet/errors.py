"""Exception hierarchy and process exit codes."""


class ShrinkNetError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ShrinkNetError):
    """Problems with user-provided data files or matrices (exit code 2)."""


class MalformedInputError(InputError):
    """Unparseable cell or row; message carries row/column location."""


class MissingDataError(InputError):
    """Blank or NaN cell in the expression matrix. No imputation is done."""


class ValidationError(InputError):
    """Structural problems such as duplicate gene identifiers."""


class DegenerateGeneError(InputError):
    """A gene column is constant and cannot be standardized."""


class DegenerateDesignError(InputError):
    """A regression design matrix is identically zero."""


class NumericalFailureError(ShrinkNetError):
    """Non-finite intermediate in an iterative fit (exit code 3)."""


class GenerationFailureError(ShrinkNetError):
    """Graph-constrained precision completion did not converge (exit code 3)."""


class ConfigError(ShrinkNetError):
    """Invalid configuration or flag values (exit code 4)."""


class InvalidParamsError(ConfigError):
    """Structure parameters inconsistent with the requested graph kind."""


class UndefinedMetricError(ShrinkNetError):
    """Metric undefined for the given inputs (e.g. ROC with no true edges)."""


class UndefinedCorrelationError(ShrinkNetError):
    """Rank correlation of a constant sequence."""


class VacuousBoundError(ShrinkNetError):
    """Stability bound cannot be inverted (q too small)."""


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4
