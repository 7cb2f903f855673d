"""Out-of-process denoiser worker for the zads plug-in wire protocol."""

from .protocol import (MAGIC, OP_ERROR, OP_REQUEST, OP_RESPONSE,
                       PROTOCOL_VERSION, FramingError, PluginSession)
from .serve import MODES, serve

__version__ = "0.1.0"

__all__ = [
    "MAGIC",
    "PROTOCOL_VERSION",
    "OP_REQUEST",
    "OP_RESPONSE",
    "OP_ERROR",
    "FramingError",
    "PluginSession",
    "MODES",
    "serve",
]
