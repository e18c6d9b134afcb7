"""Landmark-based affine alignment onto the canonical face chip.

Three source landmarks (eyes, nose tip) are mapped exactly onto fixed
template points expressed as fractions of the chip size, then the image is
resampled through the inverse transform with bilinear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateLandmarks

# Template landmark positions as fractions of the chip size S:
# left eye, right eye, nose tip.
TEMPLATE_FRACTIONS = (
    (0.30, 0.35),
    (0.70, 0.35),
    (0.50, 0.62),
)

DEFAULT_CHIP_SIZE = 96

# Twice the minimum triangle area (px^2) below which the landmark triple
# is treated as collinear.
_MIN_TRIANGLE_AREA = 1e-6


@dataclass(frozen=True)
class Landmarks:
    """Eye and nose-tip positions, (x, y) in source-image pixels."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    nose_tip: tuple[float, float]

    def __post_init__(self):
        pts = self.as_array()
        if not np.all(np.isfinite(pts)):
            raise DegenerateLandmarks("landmark coordinates must be finite")
        if not self.left_eye[0] < self.right_eye[0]:
            raise DegenerateLandmarks("left eye must lie left of right eye")
        if triangle_area(pts) <= _MIN_TRIANGLE_AREA:
            raise DegenerateLandmarks("landmarks are collinear")

    def as_array(self) -> np.ndarray:
        return np.array([self.left_eye, self.right_eye, self.nose_tip], dtype=np.float64)

    def shifted(self, dx: float, dy: float) -> "Landmarks":
        le, re, no = self.as_array() + np.array([dx, dy])
        return Landmarks(tuple(le), tuple(re), tuple(no))


def triangle_area(pts: np.ndarray) -> float:
    (x1, y1), (x2, y2), (x3, y3) = pts
    return abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)) / 2.0


@dataclass(frozen=True)
class AffineTransform:
    """2x3 matrix mapping source (x, y) to chip coordinates."""

    matrix: np.ndarray  # shape (2, 3)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"affine matrix must be 2x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("affine matrix entries must be finite")
        if abs(np.linalg.det(m[:, :2])) == 0.0:
            raise ValueError("linear part of affine transform is singular")
        object.__setattr__(self, "matrix", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an (N, 2) array of source points to chip coordinates."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "AffineTransform":
        lin = self.matrix[:, :2]
        t = self.matrix[:, 2]
        inv = np.linalg.inv(lin)
        return AffineTransform(np.column_stack([inv, -inv @ t]))


def template_points(chip_size: int) -> np.ndarray:
    """Canonical landmark targets for a chip of the given size, (3, 2)."""
    return np.array(TEMPLATE_FRACTIONS, dtype=np.float64) * float(chip_size)


def solve_alignment(landmarks: Landmarks, chip_size: int = DEFAULT_CHIP_SIZE) -> AffineTransform:
    """Exact affine transform sending the three landmarks onto the template.

    Solves the two 3x3 linear systems row-by-row; non-collinear landmarks
    make the system matrix invertible, so the landmark residual is at the
    level of solver round-off (<= 1e-9 px).
    """
    src = landmarks.as_array()
    dst = template_points(chip_size)
    lhs = np.column_stack([src, np.ones(3)])
    try:
        coeffs = np.linalg.solve(lhs, dst)  # (3, 2): columns are [m00,m01,t0] etc.
    except np.linalg.LinAlgError as exc:
        raise DegenerateLandmarks("landmarks are collinear") from exc
    return AffineTransform(coeffs.T)


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample image at float (x, y) positions; out-of-bounds reads are 0.

    image is (H, W) or (H, W, C); returns samples with matching trailing
    channel axis.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, c = img.shape

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]

    def fetch(xi, yi):
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xi_c = np.clip(xi, 0, w - 1)
        yi_c = np.clip(yi, 0, h - 1)
        vals = img[yi_c, xi_c]
        vals[~valid] = 0.0
        return vals

    # Difference form keeps interpolation of a constant image exactly constant.
    f00, f10 = fetch(x0, y0), fetch(x0 + 1, y0)
    f01, f11 = fetch(x0, y0 + 1), fetch(x0 + 1, y0 + 1)
    top = f00 + fx * (f10 - f00)
    bot = f01 + fx * (f11 - f01)
    out = top + fy * (bot - top)
    return out if c > 1 else out[..., 0]


def warp_to_chip(image: np.ndarray, transform: AffineTransform, chip_size: int) -> np.ndarray:
    """Resample the source image onto the chip grid via the inverse map."""
    inv = transform.inverse().matrix
    us, vs = np.meshgrid(np.arange(chip_size, dtype=np.float64),
                         np.arange(chip_size, dtype=np.float64))
    xs = inv[0, 0] * us + inv[0, 1] * vs + inv[0, 2]
    ys = inv[1, 0] * us + inv[1, 1] * vs + inv[1, 2]
    sampled = bilinear_sample(image, xs, ys)
    return np.clip(sampled, 0.0, 1.0)
