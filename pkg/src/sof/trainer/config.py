"""Training hyperparameters.

The margin/step-size defaults are fixed project constants recorded here so
every run is reproducible from its manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

MINING_MODES = ("all", "semi-hard")


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 0.2
    learning_rate: float = 0.05
    epochs: int = 40
    batch_size: int = 32
    mining_mode: str = "semi-hard"
    rng_seed: int = 0
    freeze_first_layer: bool = False

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.mining_mode not in MINING_MODES:
            raise ValueError(f"mining_mode must be one of {MINING_MODES}")

    def with_overrides(self, **kwargs) -> "TrainConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "mining_mode": self.mining_mode,
            "rng_seed": self.rng_seed,
            "freeze_first_layer": self.freeze_first_layer,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        return cls(**doc)
