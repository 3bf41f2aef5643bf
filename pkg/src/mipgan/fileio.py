"""File formats: PVOL1 volumes, 16-bit PGM images, CSV manifests.

Every writer is deterministic byte-for-byte given equal inputs, and writes
through a temp file followed by an atomic rename.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ClassLabel, Volume3D

PVOL_MAGIC = "PVOL1"
PGM_MAXVAL = 65535


def _fmt(x: float) -> str:
    """Format a float so it round-trips and stays short (4.0 -> '4')."""
    return f"{float(x):.9g}"


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# PVOL1: ASCII header + raw little-endian float32, z-major


def write_pvol(path, volume: Volume3D) -> None:
    z, y, x = volume.dims
    sz, sy, sx = volume.spacing_mm
    header = (
        f"{PVOL_MAGIC}\n"
        f"dims {z} {y} {x}\n"
        f"spacing {_fmt(sz)} {_fmt(sy)} {_fmt(sx)}\n"
        f"dtype f32le\n"
        f"\n"
    )
    payload = np.ascontiguousarray(volume.voxels, dtype="<f4").tobytes()
    atomic_write_bytes(path, header.encode("ascii") + payload)


def read_pvol(path) -> Volume3D:
    raw = Path(path).read_bytes()
    try:
        head, payload = raw.split(b"\n\n", 1)
    except ValueError:
        raise ValueError(f"{path}: missing blank line after PVOL1 header") from None
    lines = head.decode("ascii").splitlines()
    if not lines or lines[0] != PVOL_MAGIC:
        raise ValueError(f"{path}: not a {PVOL_MAGIC} file")
    fields = {}
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        fields[key] = rest.split()
    if fields.get("dtype") != ["f32le"]:
        raise ValueError(f"{path}: unsupported dtype {fields.get('dtype')}")
    dims = tuple(int(v) for v in fields["dims"])
    spacing = tuple(float(v) for v in fields["spacing"])
    count = int(np.prod(dims))
    voxels = np.frombuffer(payload, dtype="<f4", count=count).reshape(dims)
    return Volume3D(voxels=voxels.copy(), spacing_mm=spacing)


# ---------------------------------------------------------------------------
# 16-bit binary PGM (P5, maxval 65535, big-endian samples per the PGM spec)


def write_pgm16(path, pixels: np.ndarray) -> None:
    """Write a [0, 1] image as 16-bit PGM; pixel = round(v * 65535)."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"PGM image must be 2D, got shape {pixels.shape}")
    if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
        raise ValueError("PGM pixel values must lie in [0, 1]")
    h, w = pixels.shape
    quantized = np.floor(pixels.astype(np.float64) * PGM_MAXVAL + 0.5).astype(">u2")
    header = f"P5\n{w} {h}\n{PGM_MAXVAL}\n"
    atomic_write_bytes(path, header.encode("ascii") + quantized.tobytes())


def read_pgm16(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # Header is three whitespace-separated tokens after the magic.
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != PGM_MAXVAL:
        raise ValueError(f"{path}: expected maxval {PGM_MAXVAL}, got {maxval}")
    data = np.frombuffer(raw, dtype=">u2", count=h * w, offset=pos).reshape(h, w)
    return (data.astype(np.float32) / PGM_MAXVAL).astype(np.float32)


# ---------------------------------------------------------------------------
# Manifests: CSV with header id,class,path


@dataclass(frozen=True)
class ManifestRow:
    item_id: str
    label: ClassLabel
    path: str


def write_manifest(path, rows) -> None:
    lines = ["id,class,path"]
    for row in rows:
        lines.append(f"{row.item_id},{int(row.label)},{row.path}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_manifest(path) -> list[ManifestRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "class", "path"]:
            raise ValueError(f"{path}: manifest header must be id,class,path")
        return [
            ManifestRow(r["id"], ClassLabel.from_code(int(r["class"])), r["path"])
            for r in reader
        ]
