"""Procedural face-chip renderer and corpus generator.

Identities are 16-dim latent vectors; a latent renders to a smooth sum of
low-frequency sinusoids, composited with eye/nose blobs whose position
carries the pose nuisance. Illumination and pixel noise are applied last.
Nothing here aims at realism: the point is a controllable, learnable
identity signal with the same alignment geometry as real photos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import IoFailure
from ..facecore.chips import FaceChip, write_image
from ..facecore.geometry import DEFAULT_CHIP_SIZE, Landmarks, template_points

LATENT_DIM = 16

# Latents pair up into 8 sinusoid components whose frequencies they key.
_N_COMPONENTS = LATENT_DIM // 2

_PHASES = (2.0 * np.pi * 0.618033988749895) * np.arange(_N_COMPONENTS)

# Frequency magnitude range in cycles per chip: 0.5 + _FREQ_SPAN * |latent|.
# Keyed frequencies (rather than keyed amplitudes) keep unseen identities
# genuinely out-of-basis for an embedder trained on other identities.
_FREQ_SPAN = 3.0

# Per-component contrast; 8 components at this scale keep the pattern
# comfortably inside [0, 1] before illumination.
_CONTRAST = 0.55 / _N_COMPONENTS

_EYE_DEPTH = 0.35
_EYE_SIGMA = 3.0
_NOSE_GAIN = 0.25
_NOSE_SIGMA = 4.0


@dataclass(frozen=True)
class SyntheticIdentity:
    identity_id: str
    latent: np.ndarray  # (LATENT_DIM,) in [-1, 1]

    def __post_init__(self):
        lat = np.asarray(self.latent, dtype=np.float64)
        if lat.shape != (LATENT_DIM,):
            raise ValueError(f"latent must have length {LATENT_DIM}")
        if np.any(np.abs(lat) > 1.0):
            raise ValueError("latent values must lie in [-1, 1]")
        lat.setflags(write=False)
        object.__setattr__(self, "latent", lat)


@dataclass(frozen=True)
class RenderParams:
    pose_shift: tuple[float, float] = (0.0, 0.0)  # pixels, |dx|,|dy| <= 6
    gain: float = 1.0       # illumination gain in [0.7, 1.3]
    bias: float = 0.0       # illumination bias in [-0.1, 0.1]
    noise_sigma: float = 0.02

    def __post_init__(self):
        dx, dy = self.pose_shift
        if not (abs(dx) <= 6.0 and abs(dy) <= 6.0):
            raise ValueError("pose_shift components must lie in [-6, 6]")
        if not 0.7 <= self.gain <= 1.3:
            raise ValueError("gain must lie in [0.7, 1.3]")
        if not -0.1 <= self.bias <= 0.1:
            raise ValueError("bias must lie in [-0.1, 0.1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def identity_from_seed(identity_id: str, seed: int, index: int) -> SyntheticIdentity:
    rng = np.random.default_rng([seed, 0, index])
    return SyntheticIdentity(identity_id, rng.uniform(-1.0, 1.0, LATENT_DIM))


def _keyed_frequency(value: float) -> float:
    sign = 1.0 if value >= 0 else -1.0
    return sign * (0.5 + _FREQ_SPAN * abs(value))


def _base_pattern(latent: np.ndarray, size: int) -> np.ndarray:
    u, v = np.meshgrid(np.arange(size) / size, np.arange(size) / size)
    pattern = np.full((size, size), 0.5)
    for j in range(_N_COMPONENTS):
        fx = _keyed_frequency(latent[2 * j])
        fy = _keyed_frequency(latent[2 * j + 1])
        pattern += _CONTRAST * np.sin(2.0 * np.pi * (fx * u + fy * v) + _PHASES[j])
    return pattern


def _blob(size: int, cx: float, cy: float, sigma: float) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64))
    r2 = (xs - cx) ** 2 + (ys - cy) ** 2
    return np.exp(-r2 / (2.0 * sigma * sigma))


def render_chip(identity: SyntheticIdentity, rp: RenderParams, seed: int,
                size: int = DEFAULT_CHIP_SIZE) -> tuple[FaceChip, Landmarks]:
    """Deterministic render; returns the chip and the true landmark positions.

    The sinusoid base stays fixed while the eye/nose blobs shift with the
    pose, so alignment recentres the blobs but leaves a residual translation
    nuisance in the base pattern.
    """
    img = _base_pattern(identity.latent, size)

    dx, dy = rp.pose_shift
    (lex, ley), (rex, rey), (nx, ny) = template_points(size) + np.array([dx, dy])
    img -= _EYE_DEPTH * _blob(size, lex, ley, _EYE_SIGMA)
    img -= _EYE_DEPTH * _blob(size, rex, rey, _EYE_SIGMA)
    img += _NOSE_GAIN * _blob(size, nx, ny, _NOSE_SIGMA)

    img = rp.gain * img + rp.bias
    if rp.noise_sigma > 0:
        rng = np.random.default_rng([seed])
        img = img + rng.normal(0.0, rp.noise_sigma, img.shape)
    img = np.clip(img, 0.0, 1.0)

    landmarks = Landmarks((lex, ley), (rex, rey), (nx, ny))
    return FaceChip(img[:, :, None]), landmarks


def draw_render_params(rng: np.random.Generator,
                       noise_sigma: float = 0.02) -> RenderParams:
    """Full nuisance ranges: models photos collected over months."""
    return RenderParams(
        pose_shift=tuple(rng.uniform(-6.0, 6.0, 2)),
        gain=float(rng.uniform(0.7, 1.3)),
        bias=float(rng.uniform(-0.1, 0.1)),
        noise_sigma=noise_sigma,
    )


def draw_doorway_params(rng: np.random.Generator) -> RenderParams:
    """Narrow nuisance ranges: consecutive frames at one doorway."""
    return RenderParams(
        pose_shift=tuple(rng.uniform(-2.0, 2.0, 2)),
        gain=float(rng.uniform(0.95, 1.05)),
        bias=float(rng.uniform(-0.03, 0.03)),
        noise_sigma=0.01,
    )


def generate_corpus(n_identities: int, chips_per_identity: int, seed: int,
                    out_dir, noise_sigma: float = 0.02) -> Path:
    """Write a social-corpus directory: photos.jsonl plus PGM images.

    Deterministic given the seed; rerunning into a fresh directory yields
    byte-identical files.
    """
    if n_identities < 2:
        raise ValueError("need at least 2 identities")
    if chips_per_identity < 2:
        raise ValueError("need at least 2 chips per identity")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        records = []
        photo_no = 0
        for i in range(n_identities):
            name = f"person_{i:02d}"
            ident = identity_from_seed(name, seed, i)
            for j in range(chips_per_identity):
                rp_rng = np.random.default_rng([seed, 2, i, j])
                rp = draw_render_params(rp_rng, noise_sigma=noise_sigma)
                noise_seed = _compose_seed(seed, 3, i, j)
                chip, lms = render_chip(ident, rp, noise_seed)
                photo_id = f"p{photo_no:06d}"
                fname = f"{photo_id}.pgm"
                write_image(out / fname, chip.pixels[:, :, 0])
                records.append({
                    "photo_id": photo_id,
                    "file": fname,
                    "tags": [{
                        "tag_name": name,
                        "landmarks": {
                            "le": list(lms.left_eye),
                            "re": list(lms.right_eye),
                            "nose": list(lms.nose_tip),
                        },
                    }],
                    "uploaded_at": 1_500_000_000_000 + photo_no * 1000,
                })
                photo_no += 1
        with open(out / "photos.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write corpus to {out}: {exc}") from exc
    return out


def _compose_seed(*parts: int) -> int:
    # Stable fold of several indices into one RNG seed.
    acc = 0
    for p in parts:
        acc = (acc * 1_000_003 + int(p)) % (2 ** 63)
    return acc
