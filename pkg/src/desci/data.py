"""Containers for frame cubes, mask cubes and snapshot measurements.

Arrays are stored frame-major with shape ``(B, nx, ny)``; a 2-D snapshot is
``(nx, ny)``.  The flat vector view of a cube concatenates whole frames, each
frame scanned row-major (column index fastest), which is exactly
``values.ravel()`` in C order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "FrameCube",
    "MaskCube",
    "Measurement",
    "CubeFormatError",
    "vectorize",
    "devectorize",
    "load_cube",
    "save_cube",
    "load_frames",
    "save_frames",
]

HEADER_SIZE = 32
MAGIC = "SCICUBE"
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class CubeFormatError(ValueError):
    """Raised for malformed or inconsistent cube files."""


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(values)
    # float32 survives so SCICUBE f32 files round-trip bit-exactly
    arr = arr.copy() if np.issubdtype(arr.dtype, np.floating) else arr.astype(np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} values must be {ndim}-D, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"{name} has an empty dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FrameCube:
    """B frames of nx-by-ny real intensities, shape ``(B, nx, ny)``."""

    values: np.ndarray
    peak: float = 255.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 3, "FrameCube"))
        if not self.peak > 0:
            raise ValueError("peak must be positive")

    @property
    def B(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class MaskCube:
    """Per-frame modulation codes; every pixel must be active in some frame."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values, 3, "MaskCube")
        if np.any(arr < 0):
            raise ValueError("mask codes must be non-negative")
        if np.any(arr.sum(axis=0) <= 0):
            raise ValueError("mask leaves some pixel unmodulated in every frame")
        object.__setattr__(self, "values", arr)

    @property
    def B(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class Measurement:
    """A single coded snapshot of shape ``(nx, ny)``."""

    values: np.ndarray
    noise_sigma_hint: Optional[float] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 2, "Measurement"))

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]


def vectorize(cube) -> np.ndarray:
    """Flat frame-major vector of a cube (or a raw ``(B, nx, ny)`` array)."""
    arr = cube.values if hasattr(cube, "values") else np.asarray(cube)
    return arr.reshape(-1).copy()


def devectorize(vec, nx: int, ny: int, B: int) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.size != nx * ny * B:
        raise ValueError(f"vector of length {vec.size} cannot hold {B}x{nx}x{ny}")
    return vec.reshape(B, nx, ny).copy()


# -- SCICUBE native format --

def _encode_header(nx: int, ny: int, B: int, dtype: str, peak: Optional[float]) -> bytes:
    text = f"{MAGIC} {nx} {ny} {B} {dtype}"
    if peak is not None:
        text += f" {peak:g}"
    if len(text) + 1 > HEADER_SIZE:
        raise CubeFormatError(f"header too long for {HEADER_SIZE} bytes: {text!r}")
    return (text.ljust(HEADER_SIZE - 1) + "\n").encode("ascii")


def save_cube(cube, path, dtype: Optional[str] = None) -> None:
    """Write a FrameCube, MaskCube or Measurement as SCICUBE.

    ``dtype`` defaults to ``f32`` for float32 arrays and ``f64`` otherwise so
    that a save/load round trip is bit-exact.
    """
    arr = cube.values
    if arr.ndim == 2:
        arr = arr[None]
    if dtype is None:
        dtype = "f32" if arr.dtype == np.float32 else "f64"
    if dtype not in _DTYPES:
        raise CubeFormatError(f"unsupported dtype {dtype!r}")
    B, nx, ny = arr.shape
    peak = getattr(cube, "peak", None)
    with open(path, "wb") as fh:
        fh.write(_encode_header(nx, ny, B, dtype, peak))
        fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes())


def _read_raw(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise CubeFormatError("file shorter than header")
    try:
        tokens = raw[:HEADER_SIZE].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise CubeFormatError("header is not ASCII") from exc
    if raw[HEADER_SIZE - 1:HEADER_SIZE] != b"\n" or len(tokens) not in (5, 6) \
            or tokens[0] != MAGIC:
        raise CubeFormatError(f"malformed header {raw[:HEADER_SIZE]!r}")
    try:
        nx, ny, B = (int(t) for t in tokens[1:4])
        peak = float(tokens[5]) if len(tokens) == 6 else None
    except ValueError as exc:
        raise CubeFormatError(f"malformed header {raw[:HEADER_SIZE]!r}") from exc
    if tokens[4] not in _DTYPES:
        raise CubeFormatError(f"unsupported dtype {tokens[4]!r}")
    if min(nx, ny, B) < 1:
        raise CubeFormatError("dimensions must be positive")
    dt = _DTYPES[tokens[4]]
    payload = raw[HEADER_SIZE:]
    expected = nx * ny * B
    if len(payload) != expected * dt.itemsize:
        raise CubeFormatError(
            f"dimension mismatch: header declares {expected} values, "
            f"payload holds {len(payload) / dt.itemsize:g}")
    arr = np.frombuffer(payload, dtype=dt).astype(dt.newbyteorder("="))
    if not np.all(np.isfinite(arr)):
        raise CubeFormatError("payload contains non-finite values")
    return arr.reshape(B, nx, ny), peak


def load_cube(path) -> FrameCube:
    arr, peak = _read_raw(path)
    return FrameCube(arr, peak=255.0 if peak is None else peak)


def load_mask(path) -> MaskCube:
    arr, _ = _read_raw(path)
    return MaskCube(arr)


def load_measurement(path) -> Measurement:
    arr, _ = _read_raw(path)
    if arr.shape[0] != 1:
        raise CubeFormatError(f"measurement file holds {arr.shape[0]} frames, expected 1")
    return Measurement(arr[0])


# -- image sequences --

def load_frames(paths: Sequence, peak: float = 255.0) -> FrameCube:
    """Stack grayscale PNG/PGM files (one per frame) into a FrameCube."""
    from PIL import Image

    frames = []
    for p in paths:
        with Image.open(p) as im:
            if im.mode not in ("L", "I", "I;16", "F"):
                im = im.convert("L")
            frames.append(np.asarray(im, dtype=np.float64))
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise CubeFormatError(f"frames differ in size: {sorted(shapes)}")
    return FrameCube(np.stack(frames), peak=peak)


def save_frames(cube: FrameCube, directory, prefix: str = "frame") -> list:
    """Write each frame as an 8-bit PNG scaled by the cube's peak."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    scaled = np.clip(np.rint(cube.values / cube.peak * 255.0), 0, 255).astype(np.uint8)
    for k, frame in enumerate(scaled):
        p = directory / f"{prefix}_{k:03d}.png"
        Image.fromarray(frame, mode="L").save(p)
        out.append(p)
    return out
