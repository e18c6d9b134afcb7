"""Synthetic-identity corpus generation, scenario replay, and the CLI."""

from .scenario import Scenario, ScenarioRunner, all_passed, run_scenario
from .synth import (
    LATENT_DIM,
    RenderParams,
    SyntheticIdentity,
    draw_doorway_params,
    draw_render_params,
    generate_corpus,
    identity_from_seed,
    render_chip,
)

__all__ = [
    "LATENT_DIM",
    "RenderParams",
    "Scenario",
    "ScenarioRunner",
    "SyntheticIdentity",
    "all_passed",
    "draw_doorway_params",
    "draw_render_params",
    "generate_corpus",
    "identity_from_seed",
    "render_chip",
    "run_scenario",
]
