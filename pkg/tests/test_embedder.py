import math

import numpy as np
import pytest

from sof.errors import NumericalUnderflow, ShapeMismatch
from sof.facecore.chips import FaceChip
from sof.facecore.embedder import (
    EmbedderParams,
    embed,
    embed_chips,
    init_params,
    params_from_json,
    params_to_json,
    pool_chip,
)


class TestForward:
    def test_output_is_unit_norm(self, toy_params, toy_chips):
        for chip in toy_chips:
            assert abs(np.linalg.norm(embed(chip, toy_params)) - 1.0) <= 1e-6

    def test_unit_norm_for_1000_random_chips_and_params(self, rng):
        for trial in range(20):
            params = init_params(8, 1, 5, 6, seed=trial)
            chips = [FaceChip(rng.uniform(0, 1, (8, 8, 1))) for _ in range(50)]
            norms = np.linalg.norm(embed_chips(chips, params), axis=1)
            assert np.all(np.abs(norms - 1.0) <= 1e-6)

    def test_deterministic(self, toy_params, toy_chips):
        a = embed(toy_chips[0], toy_params)
        b = embed(toy_chips[0], toy_params)
        assert np.array_equal(a, b)

    def test_hand_computed_bias_forward_pass(self):
        """Zero first-layer weights: the output is the second layer applied to
        tanh(b1), checked against an explicit loop computation (H=3, D=4)."""
        b1 = np.array([0.3, -0.2, 0.9])
        w2 = np.array([
            [0.5, -1.0, 0.25],
            [0.0, 0.75, -0.5],
            [1.0, 0.0, 0.3],
            [-0.6, 0.4, 0.8],
        ])
        b2 = np.array([0.05, -0.1, 0.2, 0.0])
        params = EmbedderParams(8, 1, 3, 4, np.zeros((3, 4)), b1, w2, b2)
        chip = FaceChip(np.full((8, 8, 1), 0.7))

        hidden = [math.tanh(v) for v in b1]
        z2 = []
        for i in range(4):
            acc = b2[i]
            for j in range(3):
                acc += w2[i][j] * hidden[j]
            z2.append(acc)
        norm = math.sqrt(sum(v * v for v in z2))
        expected = np.array([v / norm for v in z2])

        assert np.allclose(embed(chip, params), expected, atol=1e-12)

    def test_pooling_averages_blocks(self):
        px = np.zeros((8, 8, 1))
        px[0:4, 0:4, 0] = 1.0  # one pooled cell fully bright
        pooled = pool_chip(FaceChip(px))
        assert pooled[0] == 1.0
        assert np.all(pooled[1:] == 0.0)

    def test_shape_mismatch(self, toy_params, rng):
        chip = FaceChip(rng.uniform(0, 1, (96, 96, 1)))
        with pytest.raises(ShapeMismatch):
            embed(chip, toy_params)

    def test_numerical_underflow(self):
        params = EmbedderParams(8, 1, 3, 4, np.zeros((3, 4)), np.zeros(3),
                                np.zeros((4, 3)), np.zeros(4))
        with pytest.raises(NumericalUnderflow):
            embed(FaceChip(np.full((8, 8, 1), 0.5)), params)

    def test_batch_matches_single(self, toy_params, toy_chips):
        # BLAS picks different kernels by shape, so agreement is to round-off,
        # not bitwise.
        batch = embed_chips(toy_chips, toy_params)
        for i, chip in enumerate(toy_chips):
            assert np.allclose(batch[i], embed(chip, toy_params), atol=1e-12)


class TestParamsSerialization:
    def test_round_trip_is_bit_exact(self):
        params = init_params(8, 1, 3, 4, seed=99)
        again = params_from_json(params_to_json(params))
        assert np.array_equal(params.w1, again.w1)
        assert np.array_equal(params.b1, again.b1)
        assert np.array_equal(params.w2, again.w2)
        assert np.array_equal(params.b2, again.b2)
        assert params_to_json(params) == params_to_json(again)

    def test_format_tag_checked(self):
        with pytest.raises(Exception):
            params_from_json('{"format": "other/9", "dims": {}}')

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(ShapeMismatch):
            EmbedderParams(8, 1, 3, 4, np.zeros((3, 5)), np.zeros(3),
                           np.zeros((4, 3)), np.zeros(4))

    def test_chip_size_must_divide_by_pool(self):
        with pytest.raises(ShapeMismatch):
            init_params(chip_size=10)
