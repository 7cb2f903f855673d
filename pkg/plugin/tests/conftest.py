import pathlib
import subprocess
import sys

import pytest

# Byte-level frame fixtures shared with the host package's test suite.
GOLDEN = pathlib.Path(__file__).resolve().parents[2] / "tests" / "golden"


@pytest.fixture(scope="session")
def golden():
    def load(name):
        return (GOLDEN / name).read_bytes()
    return load


def run_plugin(args, stdin: bytes, env=None, timeout=60):
    """Run the worker as the host would: a child process on a pipe."""
    return subprocess.run([sys.executable, "-m", "zads_plugin", *args],
                          input=stdin, capture_output=True,
                          env=env, timeout=timeout)
