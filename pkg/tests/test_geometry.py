import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sof.errors import DegenerateLandmarks
from sof.facecore.geometry import (
    AffineTransform,
    Landmarks,
    solve_alignment,
    template_points,
    triangle_area,
)

S = 96
TEMPLATE = template_points(S)


def landmarks_from_array(pts) -> Landmarks:
    return Landmarks(tuple(pts[0]), tuple(pts[1]), tuple(pts[2]))


class TestSolveAlignment:
    def test_template_points_give_identity(self, template_landmarks):
        t = solve_alignment(template_landmarks, S)
        assert np.allclose(t.matrix, [[1, 0, 0], [0, 1, 0]], atol=1e-9)

    def test_pure_translation(self):
        lm = landmarks_from_array(TEMPLATE + np.array([10.0, 5.0]))
        t = solve_alignment(lm, S)
        assert np.allclose(t.matrix[:, :2], np.eye(2), atol=1e-9)
        assert np.allclose(t.matrix[:, 2], [-10.0, -5.0], atol=1e-9)

    def test_pure_scaling(self):
        lm = landmarks_from_array(TEMPLATE * 2.0)
        t = solve_alignment(lm, S)
        assert np.allclose(t.matrix[:, :2], 0.5 * np.eye(2), atol=1e-9)
        assert np.allclose(t.matrix[:, 2], [0.0, 0.0], atol=1e-9)

    def test_landmarks_map_exactly_onto_template(self, rng):
        for _ in range(200):
            pts = _random_landmark_points(rng)
            t = solve_alignment(landmarks_from_array(pts), S)
            mapped = t.apply(pts)
            assert np.max(np.abs(mapped - TEMPLATE)) <= 1e-9

    def test_collinear_landmarks_rejected(self):
        with pytest.raises(DegenerateLandmarks):
            Landmarks((10, 10), (20, 10), (15, 10))

    def test_nearly_collinear_rejected(self):
        with pytest.raises(DegenerateLandmarks):
            Landmarks((10.0, 10.0), (20.0, 10.0), (15.0, 10.0 + 1e-9))

    def test_left_eye_must_be_left(self):
        with pytest.raises(DegenerateLandmarks):
            Landmarks((60, 30), (30, 30), (45, 60))

    def test_non_finite_rejected(self):
        with pytest.raises(DegenerateLandmarks):
            Landmarks((np.nan, 30), (60, 30), (45, 60))


@given(
    dx=st.floats(-40, 40), dy=st.floats(-40, 40),
    scale=st.floats(0.5, 2.0), angle=st.floats(-0.6, 0.6),
)
@settings(max_examples=60, deadline=None)
def test_alignment_exactness_under_similarity(dx, dy, scale, angle):
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    pts = TEMPLATE @ (scale * rot).T + np.array([dx + 50, dy + 50])
    t = solve_alignment(landmarks_from_array(pts), S)
    assert np.max(np.abs(t.apply(pts) - TEMPLATE)) <= 1e-9


class TestAffineTransform:
    def test_inverse_round_trip(self, rng):
        pts = _random_landmark_points(rng)
        t = solve_alignment(landmarks_from_array(pts), S)
        back = t.inverse().apply(t.apply(pts))
        assert np.allclose(back, pts, atol=1e-8)

    def test_singular_linear_part_rejected(self):
        with pytest.raises(ValueError):
            AffineTransform(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]))

    def test_triangle_area(self):
        assert triangle_area(np.array([[0, 0], [2, 0], [0, 2]])) == 2.0


def _random_landmark_points(rng) -> np.ndarray:
    while True:
        le = rng.uniform(5, 80, 2)
        re = le + [rng.uniform(5, 60), rng.uniform(-20, 20)]
        nose = rng.uniform(5, 120, 2)
        pts = np.array([le, re, nose])
        if triangle_area(pts) > 1.0:
            return pts
