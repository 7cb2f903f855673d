"""Blocking request loop: one session, one response per request, in order.

The host owns this process and the pipe; there is no pipelining and no
concurrency to manage. Framing failures (bad magic, wrong version,
unknown opcode, short read) poison the byte stream, so they answer with
an error frame and stop. A denoiser that merely fails on one request
leaves the stream aligned, so the error frame is the response and the
loop keeps serving.
"""

import sys

import numpy as np

from .protocol import (OP_REQUEST, REQUEST_HEADER, FramingError,
                       read_exact, read_handshake, write_error,
                       write_response)

MODES = ("zero", "echo", "adapter")


def serve(mode: str, denoiser=None, stdin=None, stdout=None) -> int:
    """Answer denoise requests until stdin closes. Returns the exit code.

    ``denoiser(x, t, alpha_bar) -> eps`` is required in adapter mode and
    gets the complex64 image view; its output is sent back as complex64.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "adapter" and denoiser is None:
        raise ValueError("adapter mode needs a denoiser callable")
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer

    first = stdin.read(4)
    if not first:
        return 0  # closed before any session started
    try:
        session = read_handshake(_Prefixed(first, stdin))
    except FramingError as exc:
        write_error(stdout, str(exc))
        return 1

    while True:
        opcode = stdin.read(1)
        if not opcode:
            return 0  # stdin closed at a frame boundary
        try:
            if opcode[0] != OP_REQUEST:
                raise FramingError(f"unexpected opcode {opcode[0]}")
            header = opcode + read_exact(stdin, REQUEST_HEADER.size - 1,
                                         "request header")
            _, t, alpha_bar = REQUEST_HEADER.unpack(header)
            payload = read_exact(stdin, session.payload_bytes, "request payload")
        except FramingError as exc:
            write_error(stdout, str(exc))
            return 1

        session.frames += 1
        if mode == "zero":
            write_response(stdout, bytes(len(payload)))
        elif mode == "echo":
            write_response(stdout, payload)
        else:
            try:
                x = np.frombuffer(payload, dtype="<c8")
                x = x.reshape(session.height, session.width)
                eps = np.asarray(denoiser(x, t, alpha_bar))
                if eps.shape != x.shape:
                    raise ValueError(
                        f"denoiser returned shape {eps.shape}, wanted {x.shape}")
                write_response(
                    stdout, np.ascontiguousarray(eps, dtype="<c8").tobytes())
            except Exception as exc:  # the response slot carries the failure
                write_error(stdout, f"denoiser failed on request "
                                    f"{session.frames}: {exc}")


class _Prefixed:
    """Replay already-consumed bytes ahead of the underlying stream."""

    def __init__(self, prefix: bytes, stream):
        self._prefix = prefix
        self._stream = stream

    def read(self, n: int) -> bytes:
        if self._prefix:
            out, self._prefix = self._prefix[:n], self._prefix[n:]
            return out
        return self._stream.read(n)
