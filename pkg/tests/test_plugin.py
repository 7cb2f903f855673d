import pathlib
import struct
import sys

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from conftest import random_image
from zads.errors import (ConfigError, PluginError, PluginProtocolError,
                         PluginTimeoutError, PluginTransportError)
from zads.plugin import (DEFAULT_DEADLINE, MAGIC, OP_ERROR, OP_REQUEST,
                         OP_RESPONSE, PROTOCOL_VERSION, PluginClient,
                         PluginPrior)

GOLDEN = pathlib.Path(__file__).parent / "golden"

# A miniature plug-in used to exercise the client. Behaviours beyond
# zero/echo simulate the ways a real plug-in can misbehave on the wire.
SERVER_SRC = r'''
import os, struct, sys, time

mode = sys.argv[1]
stdin = sys.stdin.buffer
stdout = sys.stdout.buffer


def read_exact(n):
    data = b""
    while len(data) < n:
        chunk = stdin.read(n - len(data))
        if not chunk:
            return None
        data += chunk
    return data


hs = read_exact(16)
assert hs[:4] == b"ZADP"
version, height, width = struct.unpack("<III", hs[4:])
payload_len = 8 * height * width
if mode == "tee":
    tee = open(sys.argv[2], "ab")
    tee.write(hs)
    tee.flush()

while True:
    head = read_exact(13)
    if head is None:
        break
    payload = read_exact(payload_len)
    if mode == "tee":
        tee.write(head + payload)
        tee.flush()
    if mode == "zero":
        stdout.write(struct.pack("<B", 2) + bytes(payload_len))
    elif mode in ("echo", "tee"):
        stdout.write(struct.pack("<B", 2) + payload)
    elif mode == "error":
        msg = "cannot denoise that".encode()
        stdout.write(struct.pack("<BI", 255, len(msg)) + msg)
    elif mode == "badopcode":
        stdout.write(struct.pack("<B", 7) + payload)
    elif mode == "truncate":
        stdout.write(struct.pack("<B", 2) + payload[: payload_len // 2])
        stdout.flush()
        sys.exit(0)
    elif mode == "sleep":
        time.sleep(30)
    stdout.flush()
'''


@pytest.fixture(scope="module")
def server_script(tmp_path_factory):
    path = tmp_path_factory.mktemp("plugin") / "toy_server.py"
    path.write_text(SERVER_SRC)
    return path


def _client(server_script, mode, height=4, width=3, deadline=DEFAULT_DEADLINE,
            extra=()):
    cmd = [sys.executable, str(server_script), mode, *extra]
    return PluginClient(cmd, height, width, deadline=deadline)


def test_zero_mode_returns_zeros(server_script):
    with _client(server_script, "zero") as client:
        x = random_image((4, 3), seed=0)
        out = client.predict_noise(x, 100, 0.5)
    assert_array_equal(out, np.zeros((4, 3), np.complex128))


def test_echo_mode_roundtrips_payload_bytes(server_script):
    with _client(server_script, "echo") as client:
        x = random_image((4, 3), seed=1)
        out = client.predict_noise(x, 100, 0.5)
    # the wire carries complex64, so the echo is the quantized image
    assert_array_equal(out, np.ascontiguousarray(x, "<c8").astype(np.complex128))


def test_client_emits_the_golden_bytes(server_script, tmp_path):
    # run against a tee server that copies its stdin verbatim, then compare
    # with the recorded handshake and request frames
    wire = tmp_path / "wire.bin"
    rng = np.random.default_rng(99)
    x = (rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))) / np.sqrt(2)
    with _client(server_script, "tee", extra=(str(wire),)) as client:
        client.predict_noise(x, 417, 0.8125)
    want = (GOLDEN / "handshake.bin").read_bytes() + (GOLDEN / "request.bin").read_bytes()
    assert wire.read_bytes() == want


def test_golden_response_frames_parse():
    echo = (GOLDEN / "response_echo.bin").read_bytes()
    zero = (GOLDEN / "response_zero.bin").read_bytes()
    req = (GOLDEN / "request.bin").read_bytes()
    assert echo[0] == OP_RESPONSE and zero[0] == OP_RESPONSE
    assert echo[1:] == req[13:]  # echo payload is the request payload
    assert zero[1:] == bytes(len(req) - 13)
    err = (GOLDEN / "error.bin").read_bytes()
    assert err[0] == OP_ERROR
    (length,) = struct.unpack("<I", err[1:5])
    assert err[5:5 + length].decode() == "unsupported protocol version 2"
    assert (GOLDEN / "corrupted_opcode.bin").read_bytes()[0] not in (
        OP_REQUEST, OP_RESPONSE, OP_ERROR)
    assert (GOLDEN / "handshake.bin").read_bytes()[:4] == MAGIC
    assert struct.unpack("<I", (GOLDEN / "handshake.bin").read_bytes()[4:8])[0] \
        == PROTOCOL_VERSION


def test_error_frame_raises_plugin_error(server_script):
    with _client(server_script, "error") as client:
        with pytest.raises(PluginError, match="cannot denoise that"):
            client.predict_noise(random_image((4, 3)), 1, 0.9)


def test_corrupted_opcode_raises_protocol_error(server_script):
    with _client(server_script, "badopcode") as client:
        with pytest.raises(PluginProtocolError, match="opcode") as err:
            client.predict_noise(random_image((4, 3)), 1, 0.9)
    assert err.value.offset == 0  # first byte the plug-in ever sent


def test_protocol_error_offset_counts_previous_frames(server_script):
    with _client(server_script, "badopcode") as client:
        first = random_image((4, 3), seed=2)
        # a good exchange first; the bad opcode then sits one frame in
        with pytest.raises(PluginProtocolError):
            client.predict_noise(first, 1, 0.9)
    frame_len = 1 + 8 * 4 * 3
    with _client(server_script, "echo") as client:
        client.predict_noise(first, 1, 0.9)
        assert client._offset == frame_len


def test_truncated_stream_raises_transport_error(server_script):
    with _client(server_script, "truncate") as client:
        with pytest.raises(PluginTransportError):
            client.predict_noise(random_image((4, 3)), 1, 0.9)


def test_slow_plugin_hits_deadline(server_script):
    with _client(server_script, "sleep", deadline=0.2) as client:
        with pytest.raises(PluginTimeoutError):
            client.predict_noise(random_image((4, 3)), 1, 0.9)


def test_client_validates_shape_and_command(server_script):
    with _client(server_script, "zero") as client:
        with pytest.raises(ConfigError):
            client.predict_noise(random_image((3, 4)), 1, 0.9)
    with pytest.raises(ConfigError):
        PluginClient([], 4, 3)
    with pytest.raises(ConfigError):
        PluginClient([sys.executable], 0, 3)
    with pytest.raises(PluginTransportError):
        PluginClient(["/no/such/binary-anywhere"], 4, 3)


def test_plugin_prior_matches_builtin_zero_stub(server_script):
    # an external all-zeros denoiser must walk the exact trajectory of the
    # built-in zero-score stub: the client math is f64 on both paths
    from zads.priors import ZeroPrior
    from zads.samplers import ddim_sample
    from zads.schedules import make_linear_schedule, make_uniform_sequence

    sched = make_linear_schedule(1000, 1e-4, 0.02)
    seq = make_uniform_sequence(1000, 5)
    want = ddim_sample(ZeroPrior(), (4, 3), sched, seq, eta=0.85, seed=6)
    with _client(server_script, "zero") as client:
        got = ddim_sample(PluginPrior(client), (4, 3), sched, seq, eta=0.85,
                          seed=6)
    assert_array_equal(got, want)


def test_multiple_requests_reuse_one_stream(server_script):
    with _client(server_script, "echo") as client:
        for k in range(5):
            x = random_image((4, 3), seed=k)
            out = client.predict_noise(x, k, 0.5)
            assert_array_equal(out,
                               np.ascontiguousarray(x, "<c8").astype(np.complex128))
