"""Framing for the external-denoiser wire protocol.

One session per process, all integers little-endian:

    handshake   b"ZADP" | u32 version | u32 height | u32 width
    request     u8 1 | u32 t | f64 alpha_bar | 2*H*W float32
    response    u8 2 | 2*H*W float32
    error       u8 255 | u32 length | utf-8 message

The image payload is interleaved (re, im) float32 pairs in row-major
order — byte-identical to numpy's little-endian complex64, so adapters
can view it with ``np.frombuffer(payload, "<c8")`` without copying.
"""

import struct
from dataclasses import dataclass, field

MAGIC = b"ZADP"
PROTOCOL_VERSION = 1

OP_REQUEST = 1
OP_RESPONSE = 2
OP_ERROR = 255

HANDSHAKE = struct.Struct("<III")  # after the 4-byte magic
REQUEST_HEADER = struct.Struct("<BId")  # opcode, t, alpha_bar
ERROR_HEADER = struct.Struct("<BI")  # opcode, message length


class FramingError(Exception):
    """The byte stream no longer lines up with a frame boundary."""


@dataclass
class PluginSession:
    """Negotiated image geometry plus a served-frame counter."""

    height: int
    width: int
    frames: int = field(default=0)

    @property
    def payload_bytes(self) -> int:
        return 8 * self.height * self.width


def read_exact(stream, n: int, context: str) -> bytes:
    """Read exactly n bytes or raise; EOF mid-frame means lost sync."""
    chunks = []
    got = 0
    while got < n:
        chunk = stream.read(n - got)
        if not chunk:
            raise FramingError(f"truncated {context}: expected {n} bytes, got {got}")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_handshake(stream) -> PluginSession:
    magic = read_exact(stream, 4, "handshake")
    if magic != MAGIC:
        raise FramingError(f"bad handshake magic {magic!r}")
    version, height, width = HANDSHAKE.unpack(read_exact(stream, 12, "handshake"))
    if version != PROTOCOL_VERSION:
        raise FramingError(f"unsupported protocol version {version}")
    if height < 1 or width < 1:
        raise FramingError(f"bad image geometry {height}x{width}")
    return PluginSession(height, width)


def write_response(stream, payload: bytes):
    stream.write(struct.pack("<B", OP_RESPONSE) + payload)
    stream.flush()


def write_error(stream, message: str):
    body = message.encode("utf-8")
    stream.write(ERROR_HEADER.pack(OP_ERROR, len(body)) + body)
    stream.flush()
