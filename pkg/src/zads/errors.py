"""Exception types shared across the toolkit.

The CLI maps these onto stable exit codes: configuration problems exit
with 2, numerical failures with 3, and I/O problems with 4.
"""


class ZadsError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ZadsError, ValueError):
    """Invalid specification of a mask, schedule, split, or config file."""


class InfeasibleSplitError(ConfigError):
    """Requested held-out fraction cannot be met by the available lines."""


class NumericalError(ZadsError, ArithmeticError):
    """Non-finite intermediate or solver breakdown."""


class CgBreakdownError(NumericalError):
    """Conjugate gradient produced a non-finite or non-positive scalar."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class UndefinedLossError(NumericalError):
    """Held-out loss is undefined because the held-out data is all zero."""


class PluginError(ZadsError):
    """Base class for external-denoiser plug-in failures."""


class PluginTimeoutError(PluginError):
    """Plug-in did not answer within the response deadline."""


class PluginProtocolError(PluginError):
    """Plug-in sent a frame that violates the wire protocol."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class PluginTransportError(PluginError):
    """Plug-in stream closed or broke mid-frame."""
