"""Mesh container, queries, shortest paths, frames, and OBJ round trips."""

import numpy as np
import pytest

from garmentfit.mesh import (MeshError, NoPathError, TriangleMesh, load_obj,
                             local_frame_2d, local_frames_2d, save_obj,
                             shortest_edge_path, vector_area,
                             closest_point_on_triangles)
from garmentfit.primitives import grid_plane, icosphere

from conftest import random_triangle, random_rotation


class TestTriangleMesh:
    def test_counts_and_area(self, plane):
        assert plane.n_vertices == 81
        assert plane.n_faces == 128
        assert abs(plane.total_area() - 0.16) < 1e-12

    def test_boundary_loops_plane(self, plane):
        loops = plane.boundary_loops()
        assert len(loops) == 1
        assert len(loops[0]) == 32  # 8 segments per side

    def test_boundary_loops_sphere(self, sphere):
        assert sphere.boundary_loops() == []

    def test_connected_components(self, plane):
        v = np.vstack([plane.vertices, plane.vertices + 2.0])
        t = np.vstack([plane.triangles,
                       plane.triangles + plane.n_vertices])
        two = TriangleMesh(v, t)
        labels, n_comp = two.connected_components()
        assert n_comp == 2
        assert len(labels) == two.n_faces
        assert set(labels) == {0, 1}

    def test_submesh_preserves_area(self, plane):
        faces = np.arange(plane.n_faces // 2)
        sub, used = plane.submesh(faces)
        assert sub.triangles.max() == len(used) - 1
        assert abs(sub.total_area()
                   - plane.face_areas()[faces].sum()) < 1e-12

    def test_nonfinite_rejected(self):
        v = np.array([[0.0, 0, 0], [1, 0, 0], [np.nan, 1, 0]])
        with pytest.raises(MeshError):
            TriangleMesh(v, np.array([[0, 1, 2]]))


class TestShortestPath:
    def test_straight_line_on_grid(self, plane):
        # corner to corner along one side
        path = shortest_edge_path(plane, 0, 8)
        assert path[0] == 0 and path[-1] == 8
        length = sum(np.linalg.norm(plane.vertices[a] - plane.vertices[b])
                     for a, b in zip(path, path[1:]))
        d = np.linalg.norm(plane.vertices[0] - plane.vertices[8])
        assert length < d * 1.05

    def test_disconnected_raises(self, plane):
        v = np.vstack([plane.vertices, plane.vertices + 5.0])
        t = np.vstack([plane.triangles,
                       plane.triangles + plane.n_vertices])
        two = TriangleMesh(v, t)
        with pytest.raises(NoPathError):
            shortest_edge_path(two, 0, plane.n_vertices)


class TestVectorArea:
    def test_planar_loop_points_along_normal(self):
        th = np.linspace(0, 2 * np.pi, 50, endpoint=False)
        pts = np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=1)
        a = vector_area(pts)
        assert abs(np.linalg.norm(a) - np.pi) < 1e-2
        assert abs(a[2] - np.linalg.norm(a)) < 1e-12

    def test_rigid_covariance(self, rng):
        pts = rng.normal(size=(12, 3))
        R = random_rotation(rng)
        a0 = vector_area(pts)
        a1 = vector_area(pts @ R.T + 3.0)
        assert np.abs(a1 - R @ a0).max() < 1e-12


class TestLocalFrames:
    def test_frame_preserves_lengths_and_area(self, rng):
        for _ in range(20):
            tri = random_triangle(rng)
            P = local_frame_2d(tri)
            e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
            assert abs(np.linalg.norm(P[:, 0]) - np.linalg.norm(e1)) < 1e-12
            assert abs(np.linalg.norm(P[:, 1]) - np.linalg.norm(e2)) < 1e-12
            area3d = 0.5 * np.linalg.norm(np.cross(e1, e2))
            assert abs(0.5 * np.linalg.det(P) - area3d) < 1e-12

    def test_batched_matches_single(self, rng):
        tris = np.stack([random_triangle(rng) for _ in range(10)])
        batch = local_frames_2d(tris)
        for k in range(10):
            assert np.abs(batch[k] - local_frame_2d(tris[k])).max() < 1e-12


class TestClosestPoint:
    def test_on_sphere(self, sphere):
        from garmentfit.mesh import SurfaceLocator
        pts = np.array([[2.0, 0, 0], [0, -3.0, 0], [0.1, 0.1, 0.1]])
        loc = SurfaceLocator(sphere)
        faces, bary, closest = loc.closest(pts)
        assert np.abs(bary.sum(axis=1) - 1.0).max() < 1e-12
        r = np.linalg.norm(closest, axis=1)
        assert np.abs(r - 0.5).max() < 5e-3  # facet chord error only


class TestObjRoundTrip:
    def test_save_load(self, tmp_path, sphere):
        path = tmp_path / "m.obj"
        save_obj(sphere, path)
        back = load_obj(path)
        assert back.n_vertices == sphere.n_vertices
        assert np.array_equal(back.triangles, sphere.triangles)
        assert np.abs(back.vertices - sphere.vertices).max() < 1e-6

    def test_identical_mesh_identical_bytes(self, tmp_path, sphere):
        p1, p2 = tmp_path / "a.obj", tmp_path / "b.obj"
        save_obj(sphere, p1)
        save_obj(sphere.copy(), p2)
        assert p1.read_bytes() == p2.read_bytes()
