"""Deformation-gradient measurement and singular-value clipping."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from garmentfit.adapt import (DeformationGradient, OrientationError,
                              clip_gradient, deformation_gradient,
                              stretch_measure, target_rest_triangle)
from garmentfit.mesh import DegenerateTriangleError, local_frame_2d

from conftest import random_triangle, random_rotation


def tri_from_2d(P):
    """Lift a 2x2 edge matrix to a 3D triangle at the origin."""
    t = np.zeros((3, 3))
    t[1, :2] = P[:, 0]
    t[2, :2] = P[:, 1]
    return t


class TestDeformationGradient:
    def test_rigid_pose_is_identity(self, rng):
        rest = random_triangle(rng)
        for _ in range(20):
            R = random_rotation(rng)
            sim = rest @ R.T + rng.normal(size=3)
            g = deformation_gradient(rest, sim)
            assert np.allclose(g.sigma, [1.0, 1.0], atol=1e-10)
            assert stretch_measure(g.sigma) < 1e-18

    def test_uniform_scale(self, rng):
        rest = random_triangle(rng)
        g = deformation_gradient(rest, 2.0 * rest)
        assert np.allclose(g.sigma, [2.0, 2.0], atol=1e-10)

    def test_axis_aligned_stretch(self):
        rest = tri_from_2d(np.array([[1.0, 0.0], [0.0, 1.0]]).T)
        sim = tri_from_2d(np.array([[1.5, 0.0], [0.0, 1.0]]).T)
        g = deformation_gradient(rest, sim)
        assert np.allclose(np.sort(g.sigma)[::-1], [1.5, 1.0], atol=1e-12)

    def test_reconstruction_invariant(self, rng):
        for _ in range(50):
            g = deformation_gradient(random_triangle(rng),
                                     random_triangle(rng))
            F = g.U @ np.diag(g.sigma) @ g.V.T
            assert np.abs(F - g.F).max() < 1e-10
            assert g.sigma[0] >= g.sigma[1] >= 0
            # proper rotations
            assert np.linalg.det(g.U) > 0
            assert np.linalg.det(g.V) > 0

    def test_degenerate_rest_rejected(self):
        rest = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
        with pytest.raises(DegenerateTriangleError):
            deformation_gradient(rest, rest)

    def test_reflection_rejected(self):
        from garmentfit.adapt import deformation_gradients
        rest = np.eye(2)[None]
        sim = np.diag([1.0, -1.0])[None]  # orientation-reversing map
        with pytest.raises(OrientationError):
            deformation_gradients(rest, sim)

    def test_rigid_invariance_of_sigma(self, rng):
        rest = random_triangle(rng)
        sim = random_triangle(rng)
        s0 = deformation_gradient(rest, sim).sigma
        for _ in range(10):
            R1, R2 = random_rotation(rng), random_rotation(rng)
            s1 = deformation_gradient(rest @ R1.T + 0.3,
                                      sim @ R2.T - 0.7).sigma
            assert np.abs(s1 - s0).max() < 1e-10


class TestStretchMeasure:
    def test_reference_values(self):
        assert stretch_measure((1.0, 1.0)) == 0.0
        assert stretch_measure((2.0, 2.0)) == 2.0
        assert abs(stretch_measure((1.1, 0.8)) - 0.05) < 1e-15


class TestClipGradient:
    def test_clip_above_threshold(self):
        g = DeformationGradient(
            F=np.diag([1.3, 0.8]), U=np.eye(2), V=np.eye(2),
            sigma=np.array([1.3, 0.8]))
        c = clip_gradient(g, 0.1)
        assert np.allclose(c.sigma, [1.1, 0.8])

    def test_both_clipped(self):
        g = DeformationGradient(
            F=np.diag([2.0, 1.5]), U=np.eye(2), V=np.eye(2),
            sigma=np.array([2.0, 1.5]))
        c = clip_gradient(g, 0.1)
        assert np.allclose(c.sigma, [1.1, 1.1])

    def test_below_threshold_bitwise_identity(self, rng):
        rest = random_triangle(rng)
        sim = rest * 1.02
        g = deformation_gradient(rest, sim)
        c = clip_gradient(g, 0.1)
        assert c.F.tobytes() == g.F.tobytes()
        assert c.sigma.tobytes() == g.sigma.tobytes()

    def test_compression_never_modified(self, rng):
        for _ in range(50):
            s2 = rng.uniform(0.2, 1.0)
            s1 = rng.uniform(s2, 2.0)
            g = DeformationGradient(
                F=np.diag([s1, s2]), U=np.eye(2), V=np.eye(2),
                sigma=np.array([s1, s2]))
            c = clip_gradient(g, 0.1)
            # the small (compressive) value passes through bit for bit
            assert c.sigma[1].tobytes() == g.sigma[1].tobytes()


class TestTargetRestTriangle:
    def test_no_clip_returns_rest_shape(self, rng):
        rest = random_triangle(rng)
        sim = rest * 1.01
        g = deformation_gradient(rest, sim)
        target = target_rest_triangle(clip_gradient(g, 0.1), sim)
        assert np.abs(target - local_frame_2d(rest)).max() < 1e-10

    def test_uniform_overstretch_divides_lengths(self, rng):
        rest = random_triangle(rng)
        sim = 2.0 * rest
        g = deformation_gradient(rest, sim)
        target = target_rest_triangle(clip_gradient(g, 0.1), sim)
        sim_P = local_frame_2d(sim)
        for k in range(2):
            ls = np.linalg.norm(sim_P[:, k])
            lt = np.linalg.norm(target[:, k])
            assert abs(lt - ls / 1.1) < 1e-9

    def test_round_trip_bounded(self, rng):
        delta = 0.1
        for _ in range(200):
            rest = random_triangle(rng)
            sim = random_triangle(rng)
            g = deformation_gradient(rest, sim)
            target = target_rest_triangle(clip_gradient(g, delta), sim)
            s = deformation_gradient(tri_from_2d(target), sim).sigma
            assert s[0] <= 1.0 + delta + 1e-9

    def test_unclipped_round_trip_identity(self, rng):
        # clipping at an infinite threshold inverts the measurement
        for _ in range(50):
            rest = random_triangle(rng)
            sim = random_triangle(rng)
            g = deformation_gradient(rest, sim)
            target = target_rest_triangle(clip_gradient(g, np.inf), sim)
            assert np.abs(target - local_frame_2d(rest)).max() < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1),
       st.floats(min_value=0.01, max_value=1.0))
def test_clip_round_trip_property(seed, delta):
    rng = np.random.default_rng(seed)
    rest = random_triangle(rng)
    sim = random_triangle(rng)
    g = deformation_gradient(rest, sim)
    target = target_rest_triangle(clip_gradient(g, delta), sim)
    s = deformation_gradient(tri_from_2d(target), sim).sigma
    assert s[0] <= 1.0 + delta + 1e-9
    # compression survives untouched
    assert s[1] <= max(g.sigma[1], 1.0 + delta) + 1e-9
