"""The embedding network: pool -> dense -> tanh -> dense -> L2 normalize.

Small enough to train on a desk, with an exactly differentiable forward
pass. Weights serialize to versioned canonical JSON that round-trips
IEEE-754 doubles bit-exactly (Python's float repr is shortest-round-trip).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import IoFailure, NumericalUnderflow, ShapeMismatch
from .chips import FaceChip

PARAMS_FORMAT = "sof-embedder/1"
POOL = 4

# Pre-normalization vectors below this norm cannot be safely normalized.
MIN_PRENORM = 1e-8


@dataclass(frozen=True)
class EmbedderParams:
    """Weights for the two dense layers plus the input geometry."""

    chip_size: int
    channels: int
    hidden: int
    dim: int
    w1: np.ndarray  # (hidden, pooled_inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (dim, hidden)
    b2: np.ndarray  # (dim,)

    def __post_init__(self):
        if self.chip_size % POOL != 0:
            raise ShapeMismatch(f"chip size {self.chip_size} not divisible by pool {POOL}")
        p = self.pooled_inputs
        for name, arr, shape in (
            ("w1", self.w1, (self.hidden, p)),
            ("b1", self.b1, (self.hidden,)),
            ("w2", self.w2, (self.dim, self.hidden)),
            ("b2", self.b2, (self.dim,)),
        ):
            a = np.asarray(arr, dtype=np.float64)
            if a.shape != shape:
                raise ShapeMismatch(f"{name} must have shape {shape}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def pooled_inputs(self) -> int:
        side = self.chip_size // POOL
        return side * side * self.channels

    def replace_weights(self, w1, b1, w2, b2) -> "EmbedderParams":
        return EmbedderParams(self.chip_size, self.channels, self.hidden, self.dim,
                              w1, b1, w2, b2)


def init_params(chip_size: int = 96, channels: int = 1, hidden: int = 256,
                dim: int = 128, seed: int = 0) -> EmbedderParams:
    """Seeded Gaussian init scaled by fan-in; biases start at zero."""
    rng = np.random.default_rng(seed)
    side = chip_size // POOL
    p = side * side * channels
    w1 = rng.normal(0.0, 1.0 / np.sqrt(p), size=(hidden, p))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(dim, hidden))
    return EmbedderParams(chip_size, channels, hidden, dim,
                          w1, np.zeros(hidden), w2, np.zeros(dim))


def pool_chip(chip: FaceChip) -> np.ndarray:
    """4x4 average pool then flatten row-major to the network input vector."""
    px = chip.pixels
    s, c = px.shape[0], px.shape[2]
    side = s // POOL
    pooled = px.reshape(side, POOL, side, POOL, c).mean(axis=(1, 3))
    return pooled.reshape(side * side * c)


def pool_batch(chips: list[FaceChip], params: EmbedderParams) -> np.ndarray:
    """Stack pooled inputs for a batch, validating shapes, -> (B, P)."""
    xs = np.empty((len(chips), params.pooled_inputs), dtype=np.float64)
    for i, chip in enumerate(chips):
        if chip.size != params.chip_size or chip.channels != params.channels:
            raise ShapeMismatch(
                f"chip {chip.size}x{chip.size}x{chip.channels} does not match "
                f"params {params.chip_size}x{params.chip_size}x{params.channels}")
        xs[i] = pool_chip(chip)
    return xs


def forward_batch(xs: np.ndarray, params: EmbedderParams):
    """Forward pass on pooled inputs (B, P).

    Returns (embeddings, cache) where cache holds the intermediates needed
    for backprop: (xs, hidden activations, pre-normalization outputs, norms).
    """
    z1 = xs @ params.w1.T + params.b1
    h = np.tanh(z1)
    z2 = h @ params.w2.T + params.b2
    norms = np.linalg.norm(z2, axis=1, keepdims=True)
    if np.any(norms < MIN_PRENORM):
        raise NumericalUnderflow("pre-normalization embedding norm below 1e-8")
    y = z2 / norms
    return y, (xs, h, z2, norms)


def embed(chip: FaceChip, params: EmbedderParams) -> np.ndarray:
    """Embed a single chip; output is unit-norm, shape (dim,)."""
    xs = pool_batch([chip], params)
    y, _ = forward_batch(xs, params)
    return y[0]


def embed_chips(chips: list[FaceChip], params: EmbedderParams) -> np.ndarray:
    """Embed a batch of chips -> (B, dim), each row unit-norm."""
    if not chips:
        return np.zeros((0, params.dim), dtype=np.float64)
    xs = pool_batch(chips, params)
    y, _ = forward_batch(xs, params)
    return y


def params_to_json(params: EmbedderParams) -> str:
    doc = {
        "format": PARAMS_FORMAT,
        "dims": {"S": params.chip_size, "C": params.channels,
                 "H": params.hidden, "D": params.dim},
        "w1": params.w1.tolist(),
        "b1": params.b1.tolist(),
        "w2": params.w2.tolist(),
        "b2": params.b2.tolist(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def params_from_json(text: str) -> EmbedderParams:
    try:
        doc = json.loads(text)
        if doc.get("format") != PARAMS_FORMAT:
            raise IoFailure(f"unsupported embedder format {doc.get('format')!r}")
        dims = doc["dims"]
        return EmbedderParams(
            dims["S"], dims["C"], dims["H"], dims["D"],
            np.array(doc["w1"], dtype=np.float64),
            np.array(doc["b1"], dtype=np.float64),
            np.array(doc["w2"], dtype=np.float64),
            np.array(doc["b2"], dtype=np.float64),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise IoFailure(f"malformed embedder params: {exc}") from exc


def save_params(path, params: EmbedderParams) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(params_to_json(params))
        fh.write("\n")


def load_params(path) -> EmbedderParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_json(fh.read())
