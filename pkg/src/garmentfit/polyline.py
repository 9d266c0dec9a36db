"""Curves on a mesh surface stored in barycentric form.

A polyline sample is a (face index, barycentric weights) pair, which makes
the curve transferable to any pose with the same connectivity.
"""

import numpy as np

from .mesh import MeshError, SurfaceLocator


class PolylineError(MeshError):
    pass


class BarycentricPolyline:
    """Closed or open curve on a mesh as (face, barycentric) samples."""

    def __init__(self, faces, weights, closed):
        self.faces = np.asarray(faces, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64).reshape(-1, 3)
        self.closed = bool(closed)
        if len(self.faces) != len(self.weights):
            raise PolylineError("faces and weights length mismatch")
        if len(self.weights):
            s = self.weights.sum(axis=1)
            if np.any(np.abs(s - 1.0) > 1e-9) or np.any(self.weights < -1e-12):
                raise PolylineError("barycentric weights must be >= 0 and sum to 1")

    def __len__(self):
        return len(self.faces)

    def points(self, mesh):
        """Evaluate sample positions on a mesh (any pose, same connectivity)."""
        tri = mesh.vertices[mesh.triangles[self.faces]]
        return np.einsum("ik,ikj->ij", self.weights, tri)

    def length(self, mesh):
        p = self.points(mesh)
        if len(p) < 2:
            return 0.0
        seg = np.diff(p, axis=0)
        total = np.linalg.norm(seg, axis=1).sum()
        if self.closed:
            total += np.linalg.norm(p[0] - p[-1])
        return float(total)

    def validate_adjacency(self, mesh):
        """Check that consecutive samples lie in the same or edge-adjacent faces."""
        tris = mesh.triangles
        n = len(self.faces)
        pairs = range(n if self.closed else n - 1)
        for i in pairs:
            a = self.faces[i]
            b = self.faces[(i + 1) % n]
            if a == b:
                continue
            if len(np.intersect1d(tris[a], tris[b])) < 1:
                raise PolylineError(
                    f"samples {i} and {(i + 1) % n} lie in non-adjacent faces")

    def to_dict(self):
        return {"faces": self.faces.tolist(),
                "weights": self.weights.tolist(),
                "closed": self.closed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["faces"], d["weights"], d["closed"])


def polyline_from_vertex_path(mesh, path, closed):
    """Lift a vertex index path to a barycentric polyline."""
    vf = mesh.vertex_faces()
    faces = []
    weights = []
    for v in path:
        f = vf[int(v)][0]
        w = np.zeros(3)
        w[list(mesh.triangles[f]).index(int(v))] = 1.0
        faces.append(f)
        weights.append(w)
    return BarycentricPolyline(faces, weights, closed)


def smooth_polyline(mesh, loop, iterations=10, step=0.5, locator=None):
    """Smooth a closed on-mesh loop.

    Each sample moves toward the average of its neighbors; the displacement
    is restricted to the surface tangent plane (so symmetric geodesic loops
    are fixed points) and the result is re-projected to the closest point
    on the mesh. Total curve length never increases per iteration: if a
    candidate iterate is longer, the step is halved, and the previous curve
    is kept once the step underflows.
    """
    if not loop.closed:
        raise PolylineError("smoothing is defined on closed loops only")
    if len(loop) < 3:
        raise PolylineError("closed loop needs at least 3 samples")
    if iterations <= 0:
        return BarycentricPolyline(loop.faces.copy(), loop.weights.copy(), True)

    if locator is None:
        locator = SurfaceLocator(mesh)
    normals = mesh.face_normals()
    faces = loop.faces.copy()
    weights = loop.weights.copy()
    pts = loop.points(mesh)

    def curve_length(p):
        return float(np.linalg.norm(np.diff(np.vstack([p, p[:1]]), axis=0),
                                    axis=1).sum())

    for _ in range(iterations):
        lam = step
        base_len = curve_length(pts)
        while lam > 1e-6:
            avg = 0.5 * (np.roll(pts, 1, axis=0) + np.roll(pts, -1, axis=0))
            disp = lam * (avg - pts)
            n = normals[faces]
            disp -= np.einsum("ij,ij->i", disp, n)[:, None] * n
            cand = pts + disp
            new_faces, new_weights, new_pts = locator.closest(cand)
            if curve_length(new_pts) <= base_len + 1e-15:
                faces, weights, pts = new_faces, new_weights, new_pts
                break
            lam *= 0.5
        else:
            break
    # clamp tiny negative weights introduced by the closest-point projection
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum(axis=1)[:, None]
    return BarycentricPolyline(faces, weights, True)
