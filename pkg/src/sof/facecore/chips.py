"""Aligned face chips and their on-disk PGM/PPM representation.

A chip is a fixed-size S x S x C float array in [0, 1]. Storage is binary
netpbm: P5 for single-channel, P6 for three-channel, 8-bit, so byte value
v loads as v / 255.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IoFailure, ShapeMismatch
from .geometry import (
    DEFAULT_CHIP_SIZE,
    Landmarks,
    solve_alignment,
    warp_to_chip,
)


@dataclass(frozen=True)
class FaceChip:
    """Aligned face image, values in [0, 1], shape (S, S, C)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[0] != px.shape[1]:
            raise ShapeMismatch(f"chip must be square SxSxC, got {px.shape}")
        if px.shape[2] not in (1, 3):
            raise ShapeMismatch(f"chip channel count must be 1 or 3, got {px.shape[2]}")
        if not np.all(np.isfinite(px)):
            raise ValueError("chip contains non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("chip values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def quantized(self) -> "FaceChip":
        """Chip rounded to the 8-bit grid used by PGM/PPM storage."""
        return FaceChip(np.round(self.pixels * 255.0) / 255.0)


def align_face(image: np.ndarray, landmarks: Landmarks,
               chip_size: int = DEFAULT_CHIP_SIZE) -> FaceChip:
    """Warp the source image so the landmarks land on the chip template."""
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise ValueError("image is empty")
    transform = solve_alignment(landmarks, chip_size)
    return FaceChip(warp_to_chip(img, transform, chip_size))


def chip_to_netpbm(chip: FaceChip) -> bytes:
    """Encode as binary PGM (1 channel) or PPM (3 channels)."""
    s = chip.size
    data = np.round(chip.pixels * 255.0).astype(np.uint8)
    if chip.channels == 1:
        header = f"P5\n{s} {s}\n255\n".encode("ascii")
        return header + data[:, :, 0].tobytes()
    header = f"P6\n{s} {s}\n255\n".encode("ascii")
    return header + data.tobytes()


def netpbm_to_chip(blob: bytes) -> FaceChip:
    """Decode binary PGM/PPM bytes produced by chip_to_netpbm."""
    arr, _ = parse_netpbm(blob)
    return FaceChip(arr)


def parse_netpbm(blob: bytes) -> tuple[np.ndarray, int]:
    """Parse binary P5/P6 bytes into a float array in [0,1]; returns (array, channels)."""
    try:
        magic, rest = blob.split(b"\n", 1)
        channels = {b"P5": 1, b"P6": 3}[magic]
        dims, rest = rest.split(b"\n", 1)
        w, h = (int(t) for t in dims.split())
        maxval, raster = rest.split(b"\n", 1)
        if int(maxval) != 255:
            raise IoFailure(f"unsupported netpbm maxval {int(maxval)}")
        n = w * h * channels
        data = np.frombuffer(raster[:n], dtype=np.uint8).astype(np.float64) / 255.0
        if data.size != n:
            raise IoFailure("truncated netpbm raster")
        arr = data.reshape(h, w, channels)
    except (ValueError, KeyError) as exc:
        raise IoFailure(f"malformed netpbm data: {exc}") from exc
    return arr, channels


def write_chip(path, chip: FaceChip) -> None:
    with open(path, "wb") as fh:
        fh.write(chip_to_netpbm(chip))


def read_chip(path) -> FaceChip:
    with open(path, "rb") as fh:
        return netpbm_to_chip(fh.read())


def write_image(path, image: np.ndarray) -> None:
    """Write an arbitrary [0,1] float image (H,W) or (H,W,3) as PGM/PPM."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, c = img.shape
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if c == 1:
        header = f"P5\n{w} {h}\n255\n".encode("ascii")
        body = data[:, :, 0].tobytes()
    elif c == 3:
        header = f"P6\n{w} {h}\n255\n".encode("ascii")
        body = data.tobytes()
    else:
        raise ShapeMismatch(f"image channel count must be 1 or 3, got {c}")
    with open(path, "wb") as fh:
        fh.write(header + body)


def read_image(path) -> np.ndarray:
    """Read a PGM/PPM file as a float image in [0,1], shape (H, W) or (H, W, 3)."""
    with open(path, "rb") as fh:
        arr, channels = parse_netpbm(fh.read())
    return arr[:, :, 0] if channels == 1 else arr
