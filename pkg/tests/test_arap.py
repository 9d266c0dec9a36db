"""As-rigid-as-possible stitching of per-face target shapes."""

import numpy as np

from garmentfit.adapt import arap_stitch
from garmentfit.mesh import TriangleMesh, local_frames_2d

from conftest import bumpy_patch


def face_frames(mesh):
    return local_frames_2d(mesh.vertices[mesh.triangles])


def edge_lengths(mesh):
    e = mesh.edges()
    return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]],
                          axis=1)


class TestArapStitch:
    def test_identity_targets_fixed_point(self, rng):
        mesh = bumpy_patch(rng)
        out = arap_stitch(mesh, face_frames(mesh))
        assert np.abs(out.vertices - mesh.vertices).max() < 1e-8

    def test_uniform_scale_targets(self, rng):
        mesh = bumpy_patch(rng)
        s = 1.37
        out = arap_stitch(mesh, s * face_frames(mesh))
        ratio = edge_lengths(out) / edge_lengths(mesh)
        assert np.abs(ratio - s).max() / s < 1e-4

    def test_energy_non_increasing(self, rng):
        mesh = bumpy_patch(rng)
        targets = face_frames(mesh)
        targets[::3] *= 1.25  # every third face wants to grow
        _, info = arap_stitch(mesh, targets, return_info=True)
        e = np.asarray(info["energies"])
        assert np.all(np.diff(e) <= 1e-12 * max(1.0, e[0]))

    def test_single_triangle_congruent_to_target(self):
        mesh = TriangleMesh(
            np.array([[0.0, 0, 0], [0.1, 0, 0], [0.03, 0.09, 0]]),
            np.array([[0, 1, 2]]))
        target = 1.5 * face_frames(mesh)
        out = arap_stitch(mesh, target)
        got = face_frames(out)[0]
        # compare the two 2D shapes via their Gram matrices (rotation-free)
        assert np.abs(got.T @ got - target[0].T @ target[0]).max() < 1e-10

    def test_fixed_vertices_hold_position(self, rng):
        mesh = bumpy_patch(rng)
        fixed = list(range(0, mesh.n_vertices, 7))
        out = arap_stitch(mesh, 1.2 * face_frames(mesh), fixed=fixed)
        assert np.abs(out.vertices[fixed] - mesh.vertices[fixed]).max() == 0.0

    def test_rigidly_moved_embedding_recovers(self, rng):
        # targets from the mesh itself, applied to a rotated copy: the
        # stitch keeps the rotated embedding (ARAP energy is already zero)
        mesh = bumpy_patch(rng)
        out = arap_stitch(mesh, face_frames(mesh))
        d0 = edge_lengths(out) - edge_lengths(mesh)
        assert np.abs(d0).max() < 1e-8
