"""Client for external denoiser plug-ins over a framed stdio protocol.

A plug-in is a child process that reads binary frames on stdin and writes
them on stdout, little-endian throughout:

  handshake  magic "ZADP" | u32 version (1) | u32 height | u32 width
  request    u8 1 | u32 t | f64 alpha_bar | 2*H*W f32 (re/im interleaved)
  response   u8 2 | 2*H*W f32 (re/im interleaved)
  error      u8 255 | u32 length | utf-8 message

The client owns the stream exclusively: one request, one response, in
order. The cumulative frame payload matches one complex64 image, so the
protocol carries f32 precision regardless of the library's f64 internals.
"""

from __future__ import annotations

import os
import select
import shlex
import struct
import subprocess

import numpy as np

from .errors import (ConfigError, PluginError, PluginProtocolError,
                     PluginTimeoutError, PluginTransportError)

__all__ = ["MAGIC", "PROTOCOL_VERSION", "OP_REQUEST", "OP_RESPONSE",
           "OP_ERROR", "DEFAULT_DEADLINE", "PluginClient", "PluginPrior"]

MAGIC = b"ZADP"
PROTOCOL_VERSION = 1
OP_REQUEST = 1
OP_RESPONSE = 2
OP_ERROR = 255
DEFAULT_DEADLINE = 30.0

_REQUEST_HEADER = struct.Struct("<BId")
_ERROR_LEN = struct.Struct("<I")


class PluginClient:
    """Spawns a plug-in process and exchanges noise-prediction frames."""

    def __init__(self, command, height: int, width: int,
                 deadline: float = DEFAULT_DEADLINE):
        if height < 1 or width < 1:
            raise ConfigError("plug-in image dimensions must be positive")
        args = shlex.split(command) if isinstance(command, str) else list(command)
        if not args:
            raise ConfigError("empty plug-in command line")
        self.height = height
        self.width = width
        self.deadline = deadline
        self._offset = 0  # bytes consumed from the plug-in's stdout
        self._payload_bytes = 8 * height * width  # 2*H*W f32
        try:
            self._proc = subprocess.Popen(args, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE)
        except OSError as exc:
            raise PluginTransportError(f"could not start plug-in: {exc}") from exc
        self._send(MAGIC + struct.pack("<III", PROTOCOL_VERSION, height, width))

    def _send(self, blob: bytes):
        try:
            self._proc.stdin.write(blob)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PluginTransportError(f"plug-in stream closed while sending: {exc}") from exc

    def _read_exact(self, n: int) -> bytes:
        """Read n bytes from the plug-in within the per-request deadline."""
        import time

        fd = self._proc.stdout.fileno()
        chunks = []
        got = 0
        deadline_at = time.monotonic() + self.deadline
        while got < n:
            remaining = deadline_at - time.monotonic()
            if remaining <= 0:
                raise PluginTimeoutError(
                    f"plug-in response exceeded {self.deadline:.1f}s deadline")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, n - got)
            if not chunk:
                raise PluginTransportError("plug-in closed its output stream")
            chunks.append(chunk)
            got += len(chunk)
            self._offset += len(chunk)
        return b"".join(chunks)

    def predict_noise(self, x_t: np.ndarray, t: int, alpha_bar: float) -> np.ndarray:
        """One framed round-trip: image in, noise prediction out."""
        if x_t.shape != (self.height, self.width):
            raise ConfigError(
                f"image shape {x_t.shape} does not match negotiated "
                f"{(self.height, self.width)}")
        payload = np.ascontiguousarray(x_t, dtype="<c8").tobytes()
        self._send(_REQUEST_HEADER.pack(OP_REQUEST, int(t), float(alpha_bar)) + payload)

        opcode_at = self._offset
        opcode = self._read_exact(1)[0]
        if opcode == OP_ERROR:
            (length,) = _ERROR_LEN.unpack(self._read_exact(4))
            message = self._read_exact(length).decode("utf-8", errors="replace")
            raise PluginError(f"plug-in reported an error: {message}")
        if opcode != OP_RESPONSE:
            raise PluginProtocolError(f"unexpected opcode {opcode}", offset=opcode_at)
        blob = self._read_exact(self._payload_bytes)
        flat = np.frombuffer(blob, dtype="<c8")
        if flat.size != self.height * self.width:
            raise PluginProtocolError("response payload has the wrong length",
                                      offset=opcode_at)
        return flat.reshape(self.height, self.width).astype(np.complex128)

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


class PluginPrior:
    """Adapts a plug-in client to the noise-prediction interface."""

    def __init__(self, client: PluginClient):
        self.client = client

    def eps(self, x_t: np.ndarray, t: int, alpha_bar: float) -> np.ndarray:
        return self.client.predict_noise(x_t, t, alpha_bar)
