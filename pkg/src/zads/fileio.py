"""On-disk formats: NPY arrays, 16-bit PGM images, JSON manifests, CSV.

Arrays cross the tool boundary as NPY with fixed little-endian dtypes
(complex64 fields, float32 reals, uint8 masks) so any NPY reader —
including the out-of-process plug-ins — sees the same bytes. Manifests
are JSON with sorted keys; Python's float serialization round-trips
exactly, which is what makes byte-identical replays possible.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "save_complex",
    "save_real",
    "save_mask",
    "load_complex",
    "load_real",
    "load_mask",
    "write_pgm",
    "read_pgm",
    "write_manifest",
    "read_manifest",
    "write_csv",
    "read_csv",
    "file_sha256",
]


def save_complex(path, arr: np.ndarray):
    np.save(path, np.ascontiguousarray(arr, dtype="<c8"))


def save_real(path, arr: np.ndarray):
    np.save(path, np.ascontiguousarray(arr, dtype="<f4"))


def save_mask(path, mask_bool: np.ndarray):
    mask_bool = np.asarray(mask_bool)
    if mask_bool.ndim != 1:
        raise ConfigError("mask files hold one uint8 flag per column")
    np.save(path, mask_bool.astype(np.uint8))


def load_complex(path) -> np.ndarray:
    arr = np.load(path)
    if not np.iscomplexobj(arr):
        raise ConfigError(f"{path}: expected a complex array, got {arr.dtype}")
    return arr.astype(np.complex128)


def load_real(path) -> np.ndarray:
    arr = np.load(path)
    if np.iscomplexobj(arr):
        raise ConfigError(f"{path}: expected a real array, got {arr.dtype}")
    return arr.astype(np.float64)


def load_mask(path) -> np.ndarray:
    arr = np.load(path)
    if arr.ndim != 1:
        raise ConfigError(f"{path}: mask file must be 1-D, got shape {arr.shape}")
    return arr.astype(bool)


def write_pgm(path, image: np.ndarray):
    """Magnitude image as binary 16-bit PGM (big-endian samples).

    Scaled so the image maximum maps to 65535; an all-zero image stays
    all zero.
    """
    image = np.asarray(image)
    if np.iscomplexobj(image):
        image = np.abs(image)
    if image.ndim != 2:
        raise ConfigError(f"PGM wants a 2-D image, got shape {image.shape}")
    peak = float(image.max())
    scaled = image / peak * 65535.0 if peak > 0 else np.zeros_like(image)
    pixels = np.round(scaled).astype(">u2")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ConfigError(f"{path}: not a binary PGM file")
    width, height = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    dtype = ">u2" if maxval > 255 else "u1"
    pixels = np.frombuffer(parts[3], dtype=dtype, count=height * width)
    return pixels.reshape(height, width).astype(np.float64) / maxval


def write_manifest(path, manifest: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()
