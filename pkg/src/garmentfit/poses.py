"""Pose sets, validation, and nonlinear shape interpolation.

A pose set is a list of avatar meshes in full correspondence (identical
triangle lists).  In-between bodies are produced by blending per-triangle
deformation gradients — rotation along its geodesic, symmetric stretch
linearly — and re-assembling vertex positions with a least-squares
gradient-fit solve.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial.transform import Rotation

from .mesh import TriangleMesh, MeshError, load_obj

__all__ = [
    "PoseSet",
    "PoseSchedule",
    "PoseValidationError",
    "validate_pose_set",
    "interpolate_poses",
    "PosePairInterpolator",
    "make_schedule",
    "load_pose_manifest",
]


class PoseValidationError(MeshError):
    """Raised when pose meshes are not in full correspondence."""


@dataclass(frozen=True)
class PoseSet:
    """An ordered list of connectivity-identical avatar meshes.

    Attributes
    ----------
    poses : list of TriangleMesh
        The registered body shapes.
    names : list of str
        One label per pose.
    steps_per_transition : int
        Number of interpolation samples between consecutive poses.
    """

    poses: list
    names: list
    steps_per_transition: int = 60

    def __len__(self):
        return len(self.poses)


@dataclass(frozen=True)
class PoseSchedule:
    """A flat animation plan: (pose index a, pose index b, t) triples."""

    entries: tuple

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def validate_pose_set(meshes, names=None, steps_per_transition=60):
    """Check full correspondence and wrap the meshes in a PoseSet.

    Parameters
    ----------
    meshes : list of TriangleMesh
        Candidate poses; all must share one triangle list and vertex count.
    names : list of str, optional
        Labels; defaults to ``pose0, pose1, ...``.
    steps_per_transition : int
        Interpolation sample count stored on the set.

    Returns
    -------
    PoseSet

    Raises
    ------
    PoseValidationError
        Naming both offending poses on the first mismatch found.
    """
    if len(meshes) < 1:
        raise PoseValidationError("a pose set needs at least one mesh")
    if names is None:
        names = [f"pose{i}" for i in range(len(meshes))]
    if len(names) != len(meshes):
        raise PoseValidationError("names and meshes differ in length")
    ref = meshes[0]
    for i, m in enumerate(meshes[1:], start=1):
        if m.n_vertices != ref.n_vertices:
            raise PoseValidationError(
                f"vertex count mismatch: '{names[0]}' has {ref.n_vertices}, "
                f"'{names[i]}' has {m.n_vertices}")
        if m.n_faces != ref.n_faces or not np.array_equal(
                m.triangles, ref.triangles):
            raise PoseValidationError(
                f"connectivity mismatch between '{names[0]}' and "
                f"'{names[i]}': triangle lists differ")
    return PoseSet(list(meshes), list(names), int(steps_per_transition))


def _face_gradients(source, target):
    """Per-face 3x3 deformation gradients mapping source onto target."""
    vs, vt = source.vertices, target.vertices
    tri = source.triangles
    e1s = vs[tri[:, 1]] - vs[tri[:, 0]]
    e2s = vs[tri[:, 2]] - vs[tri[:, 0]]
    ns = np.cross(e1s, e2s)
    lns = np.linalg.norm(ns, axis=1)
    if np.any(lns < 1e-14):
        raise MeshError("degenerate source triangle in pose interpolation")
    ns /= lns[:, None]

    e1t = vt[tri[:, 1]] - vt[tri[:, 0]]
    e2t = vt[tri[:, 2]] - vt[tri[:, 0]]
    nt = np.cross(e1t, e2t)
    lnt = np.linalg.norm(nt, axis=1)
    lnt[lnt < 1e-300] = 1.0
    nt /= lnt[:, None]

    Es = np.stack([e1s, e2s, ns], axis=2)      # columns
    Et = np.stack([e1t, e2t, nt], axis=2)
    return Et @ np.linalg.inv(Es)


def _polar_batch(G):
    """Batched polar decomposition G = R S with proper rotations R."""
    U, s, Vt = np.linalg.svd(G)
    det = np.linalg.det(U @ Vt)
    flip = det < 0
    U = U.copy()
    s = s.copy()
    U[flip, :, 2] *= -1.0
    s[flip, 2] *= -1.0
    R = U @ Vt
    V = np.transpose(Vt, (0, 2, 1))
    S = V @ (s[:, :, None] * Vt)
    return R, S


class PosePairInterpolator:
    """Reusable interpolator between two corresponding meshes.

    The least-squares edge-fit system depends only on the source mesh, so it
    is factored once and shared across all blend parameters t.
    """

    def __init__(self, source, target):
        if (source.n_vertices != target.n_vertices
                or not np.array_equal(source.triangles, target.triangles)):
            raise PoseValidationError(
                "interpolation endpoints are not in correspondence")
        self.source = source
        self.target = target
        self._G = _face_gradients(source, target)
        self._R, self._S = _polar_batch(self._G)
        self._rotvec = Rotation.from_matrix(self._R).as_rotvec()
        self._areas = source.face_areas()
        self._build_system()

    def _build_system(self):
        tri = self.source.triangles
        nf = len(tri)
        nv = self.source.n_vertices
        w = np.sqrt(self._areas)
        # rows: two edges per face, weighted by sqrt(area); anchor vertex 0
        rows = np.repeat(np.arange(2 * nf), 2)
        cols = np.empty(4 * nf, dtype=np.int64)
        vals = np.empty(4 * nf)
        cols[0::4] = tri[:, 1]
        cols[1::4] = tri[:, 0]
        cols[2::4] = tri[:, 2]
        cols[3::4] = tri[:, 0]
        vals[0::4] = w
        vals[1::4] = -w
        vals[2::4] = w
        vals[3::4] = -w
        A = sp.csc_matrix((vals, (rows, cols)), shape=(2 * nf, nv))
        self._A_free = A[:, 1:]
        self._A_anchor = A[:, [0]].toarray()
        AtA = (self._A_free.T @ self._A_free).tocsc()
        self._solver = splu(AtA)

    def __call__(self, t):
        """Blend the pose pair at parameter t and return the mesh."""
        if t < 0.0 or t > 1.0:
            warnings.warn(f"interpolation parameter {t} clamped to [0, 1]")
            t = min(max(t, 0.0), 1.0)
        src = self.source
        tgt = self.target
        Rt = Rotation.from_rotvec(t * self._rotvec).as_matrix()
        St = (1.0 - t) * np.eye(3) + t * self._S
        Gt = Rt @ St

        tri = src.triangles
        vs = src.vertices
        e1 = (Gt @ (vs[tri[:, 1]] - vs[tri[:, 0]])[:, :, None])[:, :, 0]
        e2 = (Gt @ (vs[tri[:, 2]] - vs[tri[:, 0]])[:, :, None])[:, :, 0]
        w = np.sqrt(self._areas)[:, None]
        rhs = np.empty((2 * len(tri), 3))
        rhs[0::2] = w * e1
        rhs[1::2] = w * e2

        anchor = (1.0 - t) * vs[0] + t * tgt.vertices[0]
        rhs -= self._A_anchor * anchor[None, :]
        b = self._A_free.T @ rhs
        x = self._solver.solve(b)
        out = np.empty_like(vs)
        out[0] = anchor
        out[1:] = x
        return TriangleMesh(out, tri, check=False)


def interpolate_poses(source, target, t):
    """Blend two corresponding meshes at parameter t in [0, 1].

    Deformation gradients are decomposed into rotation and symmetric
    stretch; the rotation is interpolated along its geodesic, the stretch
    linearly, and the vertex positions are recovered by a least-squares fit
    of the blended edge vectors with one anchor vertex placed at the linear
    interpolation of its endpoint positions.
    """
    return PosePairInterpolator(source, target)(t)


def make_schedule(pose_set, order):
    """Concatenate transitions between the listed pose indices.

    Parameters
    ----------
    pose_set : PoseSet
    order : list of int
        Pose indices to cycle through; a single index yields one static
        entry ``(i, i, 0.0)``.

    Returns
    -------
    PoseSchedule
    """
    if len(order) < 1:
        raise PoseValidationError("schedule order must name at least one pose")
    for i in order:
        if not 0 <= i < len(pose_set):
            raise PoseValidationError(f"pose index {i} out of range")
    if len(order) == 1:
        return PoseSchedule(((int(order[0]), int(order[0]), 0.0),))
    n = pose_set.steps_per_transition
    entries = []
    for a, b in zip(order[:-1], order[1:]):
        for k in range(1, n + 1):
            entries.append((int(a), int(b), k / n))
    return PoseSchedule(tuple(entries))


def load_pose_manifest(path):
    """Load a pose set from a JSON manifest.

    The manifest lists OBJ files (paths relative to the manifest) with
    names and an optional ``steps_per_transition``::

        {"poses": [{"name": "A", "obj": "a.obj"}, ...],
         "steps_per_transition": 60}
    """
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if "poses" not in doc or not doc["poses"]:
        raise PoseValidationError("manifest lists no poses")
    meshes, names = [], []
    for rec in doc["poses"]:
        meshes.append(load_obj(path.parent / rec["obj"]))
        names.append(rec.get("name", Path(rec["obj"]).stem))
    steps = int(doc.get("steps_per_transition", 60))
    return validate_pose_set(meshes, names, steps)
