from __future__ import annotations

import numpy as np
import pytest

from sof.facecore.chips import FaceChip
from sof.facecore.embedder import init_params
from sof.facecore.geometry import Landmarks
from sof.harness.synth import generate_corpus
from sof.social.corpus import corpus_to_chip_set, make_verification_pairs, split_chip_set

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def record_criterion(name: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((name, passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_params():
    """Small embedder for exact-math tests: 8x8 chips, H=3, D=4."""
    return init_params(chip_size=8, channels=1, hidden=3, dim=4, seed=7)


@pytest.fixture
def toy_chips(rng):
    return [FaceChip(rng.uniform(0.0, 1.0, size=(8, 8, 1))) for _ in range(8)]


@pytest.fixture
def template_landmarks():
    return Landmarks((28.8, 33.6), (67.2, 33.6), (48.0, 59.52))


@pytest.fixture(scope="session")
def reference_corpus(tmp_path_factory):
    """The pinned 20-identity x 30-chip corpus (seed 1)."""
    out = tmp_path_factory.mktemp("refcorpus")
    generate_corpus(20, 30, 1, out)
    return out


@pytest.fixture(scope="session")
def reference_sets(reference_corpus):
    chip_set = corpus_to_chip_set(reference_corpus)
    train_set, val_set = split_chip_set(chip_set, 0.2)
    return train_set, val_set


@pytest.fixture(scope="session")
def reference_pairs(reference_sets):
    _, val_set = reference_sets
    return make_verification_pairs(val_set, 300, seed=1)


def random_unit(rng, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)
