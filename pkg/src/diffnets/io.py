"""CSV signals and 8-bit binary PGM images."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError


def fmt(x: float) -> str:
    """Decimal text that round-trips a 64-bit float exactly."""
    return repr(float(x))


def write_signals_csv(path, signals: np.ndarray):
    """One signal per line; multi-channel signals (count, C, N) are written channel-major."""
    a = np.asarray(signals, dtype=np.float64)
    a = a.reshape(a.shape[0], -1) if a.ndim > 1 else a[None, :]
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(",".join(map(fmt, row)) + "\n" for row in a)


def read_signals_csv(path, channels: int = 1) -> np.ndarray:
    """Inverse of :func:`write_signals_csv`; returns (count, N) or (count, C, N)."""
    try:
        rows = [
            [float(v) for v in line.split(",")]
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except ValueError as exc:
        raise FormatError(f"{path}: not a numeric CSV file ({exc})") from exc
    if not rows:
        raise FormatError(f"{path}: no signals found")
    if len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: signals have different lengths")
    a = np.array(rows)
    if channels == 1:
        return a
    if a.shape[1] % channels:
        raise FormatError(f"{path}: row length {a.shape[1]} not divisible by {channels} channels")
    return a.reshape(a.shape[0], channels, -1)


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P5) as float64."""
    try:
        with Image.open(path) as im:
            if im.format != "PPM" or im.mode != "L":
                raise FormatError(f"{path}: expected an 8-bit binary PGM, got {im.format} {im.mode}")
            return np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: unreadable PGM ({exc})") from exc


def to_uint8(a: np.ndarray) -> np.ndarray:
    # np.rint rounds half to even
    return np.clip(np.rint(np.asarray(a, dtype=np.float64)), 0, 255).astype(np.uint8)


def write_pgm(path, a: np.ndarray):
    Image.fromarray(to_uint8(a)).save(path, format="PPM")
