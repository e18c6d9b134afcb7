import numpy as np
import pytest

from sof.errors import IoFailure, ShapeMismatch
from sof.facecore.chips import (
    FaceChip,
    align_face,
    chip_to_netpbm,
    netpbm_to_chip,
    read_chip,
    read_image,
    write_chip,
    write_image,
)
from sof.facecore.geometry import Landmarks, template_points


class TestFaceChip:
    def test_valid_chip(self, rng):
        chip = FaceChip(rng.uniform(0, 1, (96, 96, 1)))
        assert chip.size == 96 and chip.channels == 1

    def test_two_dim_input_gains_channel_axis(self):
        chip = FaceChip(np.zeros((96, 96)))
        assert chip.pixels.shape == (96, 96, 1)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            FaceChip(np.full((96, 96, 1), 1.5))

    def test_non_square_rejected(self):
        with pytest.raises(ShapeMismatch):
            FaceChip(np.zeros((96, 48, 1)))

    def test_bad_channel_count_rejected(self):
        with pytest.raises(ShapeMismatch):
            FaceChip(np.zeros((96, 96, 2)))

    def test_pixels_immutable(self):
        chip = FaceChip(np.zeros((96, 96, 1)))
        with pytest.raises(ValueError):
            chip.pixels[0, 0, 0] = 1.0


class TestAlignFace:
    def test_constant_image_gives_constant_chip(self):
        # Landmarks placed centrally so every chip sample stays in-bounds.
        image = np.full((300, 300), 0.5)
        lm = Landmarks((130.0, 140.0), (170.0, 141.0), (150.0, 170.0))
        chip = align_face(image, lm)
        assert chip.pixels.min() == 0.5 == chip.pixels.max()

    def test_template_landmarks_copy_region(self, rng, template_landmarks):
        image = rng.uniform(0, 1, (120, 130))
        chip = align_face(image, template_landmarks)
        # identity transform up to the solver's <= 1e-9 px residual
        assert np.allclose(chip.pixels[:, :, 0], image[:96, :96], atol=1e-9)

    def test_chip_always_96(self, rng):
        image = rng.uniform(0, 1, (200, 200))
        lm = Landmarks((60.0, 80.0), (120.0, 78.0), (90.0, 130.0))
        assert align_face(image, lm).size == 96

    def test_integer_translation_equivariance(self, rng):
        image = rng.uniform(0, 1, (160, 160))
        lm = Landmarks((50.0, 55.0), (95.0, 57.0), (72.0, 90.0))
        chip_a = align_face(image, lm)
        shifted = np.zeros_like(image)
        shifted[7:, 4:] = image[:-7, :-4]
        chip_b = align_face(shifted, lm.shifted(4, 7))
        interior = (slice(8, -8), slice(8, -8))
        assert np.allclose(chip_a.pixels[interior], chip_b.pixels[interior], atol=1e-12)

    def test_empty_image_rejected(self, template_landmarks):
        with pytest.raises(ValueError):
            align_face(np.zeros((0, 0)), template_landmarks)

    def test_color_image_gives_three_channel_chip(self, rng, template_landmarks):
        image = rng.uniform(0, 1, (120, 120, 3))
        chip = align_face(image, template_landmarks)
        assert chip.channels == 3


class TestNetpbm:
    def test_pgm_round_trip_is_exact(self, rng):
        chip = FaceChip(np.round(rng.uniform(0, 1, (96, 96, 1)) * 255) / 255)
        again = netpbm_to_chip(chip_to_netpbm(chip))
        assert np.array_equal(chip.pixels, again.pixels)

    def test_ppm_round_trip_is_exact(self, rng):
        chip = FaceChip(np.round(rng.uniform(0, 1, (96, 96, 3)) * 255) / 255)
        blob = chip_to_netpbm(chip)
        assert blob.startswith(b"P6\n96 96\n255\n")
        assert np.array_equal(netpbm_to_chip(blob).pixels, chip.pixels)

    def test_byte_value_maps_to_fraction(self):
        blob = b"P5\n2 1\n255\n" + bytes([0, 255])
        chip_or_img = netpbm_to_chip(b"P5\n1 1\n255\n" + bytes([128]))
        assert chip_or_img.pixels[0, 0, 0] == 128 / 255
        img = read_image_bytes(blob)
        assert img[0, 0] == 0.0 and img[0, 1] == 1.0

    def test_truncated_raster_rejected(self):
        with pytest.raises(IoFailure):
            netpbm_to_chip(b"P5\n96 96\n255\n" + b"\x00" * 10)

    def test_unknown_magic_rejected(self):
        with pytest.raises(IoFailure):
            netpbm_to_chip(b"P3\n1 1\n255\n0")

    def test_file_round_trip(self, tmp_path, rng):
        chip = FaceChip(np.round(rng.uniform(0, 1, (96, 96, 1)) * 255) / 255)
        write_chip(tmp_path / "c.pgm", chip)
        assert np.array_equal(read_chip(tmp_path / "c.pgm").pixels, chip.pixels)

    def test_non_square_image_file(self, tmp_path, rng):
        img = np.round(rng.uniform(0, 1, (50, 80)) * 255) / 255
        write_image(tmp_path / "img.pgm", img)
        assert np.array_equal(read_image(tmp_path / "img.pgm"), img)


def read_image_bytes(blob: bytes):
    from sof.facecore.chips import parse_netpbm
    arr, channels = parse_netpbm(blob)
    return arr[:, :, 0] if channels == 1 else arr
