"""Triangle mesh data structure and basic geometric queries."""

import heapq
import warnings

import numpy as np


class MeshError(Exception):
    """Raised for invalid mesh construction or queries."""


class NoPathError(MeshError):
    """Raised when two vertices are not connected by the edge graph."""


class DegenerateTriangleError(MeshError):
    """Raised when an operation requires a non-degenerate triangle."""


class TriangleMesh:
    """Shared vertex/triangle representation for avatars, garments and rest shapes.

    Parameters
    ----------
    vertices : (n, 3) array_like
        Vertex positions in meters.
    triangles : (m, 3) array_like
        Vertex index triples. Indices must be in ``[0, n)`` and no triangle
        may repeat a vertex.
    face_attrs, vertex_attrs : dict, optional
        Named per-face / per-vertex attribute channels (scalar or color).
    """

    def __init__(self, vertices, triangles, face_attrs=None, vertex_attrs=None,
                 check=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        self.face_attrs = dict(face_attrs or {})
        self.vertex_attrs = dict(vertex_attrs or {})
        self._cache = {}
        if check and not np.isfinite(self.vertices).all():
            raise MeshError("non-finite vertex positions")
        if check and len(self.triangles):
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise MeshError("triangle index out of range")
            t = self.triangles
            if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
                raise MeshError("triangle repeats a vertex index")

    # -- basic properties ---------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.triangles)

    def copy(self):
        m = TriangleMesh(self.vertices.copy(), self.triangles.copy(), check=False)
        m.face_attrs = {k: np.array(v) for k, v in self.face_attrs.items()}
        m.vertex_attrs = {k: np.array(v) for k, v in self.vertex_attrs.items()}
        return m

    def face_points(self, faces=None):
        """Return (m, 3, 3) array of triangle corner positions."""
        t = self.triangles if faces is None else self.triangles[faces]
        return self.vertices[t]

    def face_areas(self):
        p = self.face_points()
        c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return 0.5 * np.linalg.norm(c, axis=1)

    def face_normals(self):
        p = self.face_points()
        c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        n = np.linalg.norm(c, axis=1)
        n = np.where(n < 1e-30, 1.0, n)
        return c / n[:, None]

    def total_area(self):
        return float(self.face_areas().sum())

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    # -- topology (computed lazily, meshes treated as immutable) ------------

    def _edge_data(self):
        if "edges" in self._cache:
            return self._cache["edges"], self._cache["edge_faces"]
        t = self.triangles
        raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        fidx = np.tile(np.arange(len(t)), 3)
        key = np.sort(raw, axis=1)
        edges, inv = np.unique(key, axis=0, return_inverse=True)
        edge_faces = [[] for _ in range(len(edges))]
        for k, f in zip(inv, fidx):
            edge_faces[k].append(int(f))
        self._cache["edges"] = edges
        self._cache["edge_faces"] = edge_faces
        return edges, edge_faces

    def edges(self):
        """Unique undirected edges as a (k, 2) sorted-index array."""
        return self._edge_data()[0]

    def edge_faces(self):
        """List of face index lists, aligned with :meth:`edges`."""
        return self._edge_data()[1]

    def boundary_edges(self):
        edges, ef = self._edge_data()
        mask = np.array([len(f) == 1 for f in ef])
        return edges[mask]

    def is_edge_manifold(self):
        return all(len(f) <= 2 for f in self.edge_faces())

    def boundary_vertices(self):
        be = self.boundary_edges()
        return np.unique(be) if len(be) else np.array([], dtype=np.int64)

    def boundary_loops(self):
        """Return boundary loops as ordered vertex index lists."""
        be = self.boundary_edges()
        nxt = {}
        # orient boundary edges consistently with face winding
        t = self.triangles
        directed = set()
        for tri in t:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                directed.add((int(a), int(b)))
        for a, b in be:
            a, b = int(a), int(b)
            if (a, b) in directed and (b, a) not in directed:
                nxt[a] = b
            else:
                nxt[b] = a
        loops = []
        seen = set()
        for start in list(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            cur = nxt[start]
            while cur != start and cur not in seen:
                loop.append(cur)
                seen.add(cur)
                if cur not in nxt:
                    break
                cur = nxt[cur]
            loops.append(loop)
        return loops

    def vertex_adjacency(self):
        if "vadj" not in self._cache:
            adj = [[] for _ in range(self.n_vertices)]
            for a, b in self.edges():
                adj[int(a)].append(int(b))
                adj[int(b)].append(int(a))
            self._cache["vadj"] = adj
        return self._cache["vadj"]

    def vertex_faces(self):
        if "vfaces" not in self._cache:
            vf = [[] for _ in range(self.n_vertices)]
            for f, tri in enumerate(self.triangles):
                for v in tri:
                    vf[int(v)].append(f)
            self._cache["vfaces"] = vf
        return self._cache["vfaces"]

    def connected_components(self):
        """Label faces by connected component (edge connectivity)."""
        ef = self.edge_faces()
        n = self.n_faces
        adj = [[] for _ in range(n)]
        for fl in ef:
            if len(fl) == 2:
                a, b = fl
                adj[a].append(b)
                adj[b].append(a)
        labels = -np.ones(n, dtype=np.int64)
        comp = 0
        for f0 in range(n):
            if labels[f0] >= 0:
                continue
            stack = [f0]
            labels[f0] = comp
            while stack:
                f = stack.pop()
                for g in adj[f]:
                    if labels[g] < 0:
                        labels[g] = comp
                        stack.append(g)
            comp += 1
        return labels, comp

    def submesh(self, face_indices):
        """Extract the faces as an independent mesh with reindexed vertices."""
        faces = self.triangles[np.asarray(face_indices, dtype=np.int64)]
        used, inv = np.unique(faces, return_inverse=True)
        new_tris = inv.reshape(-1, 3)
        return TriangleMesh(self.vertices[used], new_tris, check=False), used

    def remove_degenerate_faces(self, min_area=1e-12):
        areas = self.face_areas()
        keep = areas > min_area
        if keep.all():
            return self
        return TriangleMesh(self.vertices, self.triangles[keep], check=False)


# -- geometric queries ------------------------------------------------------

def shortest_edge_path(mesh, start, end):
    """Dijkstra shortest path over the edge graph, Euclidean edge lengths.

    Returns the vertex index list from ``start`` to ``end`` inclusive.
    """
    n = mesh.n_vertices
    if not (0 <= start < n and 0 <= end < n):
        raise MeshError("path endpoint out of range")
    if start == end:
        return [start]
    adj = mesh.vertex_adjacency()
    V = mesh.vertices
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    dist[start] = 0.0
    heap = [(0.0, start)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        if u == end:
            break
        done[u] = True
        for v in adj[u]:
            if done[v]:
                continue
            nd = d + np.linalg.norm(V[v] - V[u])
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if not np.isfinite(dist[end]):
        raise NoPathError(f"vertices {start} and {end} are not connected")
    path = [end]
    while path[-1] != start:
        path.append(int(prev[path[-1]]))
    return path[::-1]


def vector_area(points):
    """Vector area of a closed 3D point loop: (1/2) sum of p_i x p_{i+1}.

    Translation-invariant for closed loops; its direction maximizes the
    projected enclosed area for non-planar loops.
    """
    p = np.asarray(points, dtype=np.float64)
    if len(p) < 3:
        raise MeshError("vector area needs at least 3 points")
    q = np.roll(p, -1, axis=0)
    return 0.5 * np.cross(p, q).sum(axis=0)


def local_frame_2d(triangle):
    """Project a 3D triangle rigidly to 2D.

    Returns the 2x2 edge matrix ``P = [e1 e2]`` with the first edge along
    the first axis and the triangle in the upper half-plane. Column norms
    equal the 3D edge lengths and ``det(P) > 0``.
    """
    p = np.asarray(triangle, dtype=np.float64)
    e1 = p[1] - p[0]
    e2 = p[2] - p[0]
    cr = np.cross(e1, e2)
    a2 = np.linalg.norm(cr)
    l1 = np.linalg.norm(e1)
    if a2 < 1e-24 or l1 < 1e-12:
        raise DegenerateTriangleError("zero-area triangle has no 2D frame")
    u = e1 / l1
    n = cr / a2
    v = np.cross(n, u)
    return np.array([[l1, e2 @ u], [0.0, e2 @ v]])


def local_frames_2d(points):
    """Batched :func:`local_frame_2d` for an (m, 3, 3) corner array."""
    p = np.asarray(points, dtype=np.float64)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cr = np.cross(e1, e2)
    a2 = np.linalg.norm(cr, axis=1)
    l1 = np.linalg.norm(e1, axis=1)
    bad = (a2 < 1e-24) | (l1 < 1e-12)
    if bad.any():
        raise DegenerateTriangleError(
            f"{int(bad.sum())} zero-area triangles have no 2D frame")
    u = e1 / l1[:, None]
    n = cr / a2[:, None]
    v = np.cross(n, u)
    P = np.empty((len(p), 2, 2))
    P[:, 0, 0] = l1
    P[:, 0, 1] = np.einsum("ij,ij->i", e2, u)
    P[:, 1, 0] = 0.0
    P[:, 1, 1] = np.einsum("ij,ij->i", e2, v)
    return P


def closest_point_on_triangles(points, tri_points):
    """Closest points on triangles for a batch of query points.

    Parameters
    ----------
    points : (k, 3) queries
    tri_points : (k, 3, 3) one triangle per query

    Returns
    -------
    closest : (k, 3) positions
    bary : (k, 3) barycentric coordinates of the closest points
    """
    p = np.asarray(points, dtype=np.float64)
    a = tri_points[:, 0]
    b = tri_points[:, 1]
    c = tri_points[:, 2]
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    bary = np.zeros_like(p)
    done = np.zeros(len(p), dtype=bool)

    # vertex regions
    m = (d1 <= 0) & (d2 <= 0)
    bary[m] = (1, 0, 0); done |= m
    m = (~done) & (d3 >= 0) & (d4 <= d3)
    bary[m] = (0, 1, 0); done |= m
    m = (~done) & (d6 >= 0) & (d5 <= d6)
    bary[m] = (0, 0, 1); done |= m

    vc = d1 * d4 - d3 * d2
    m = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(np.abs(d1 - d3) > 0, d1 / (d1 - d3), 0.0)
    bary[m, 0] = 1 - v[m]; bary[m, 1] = v[m]; done |= m

    vb = d5 * d2 - d1 * d6
    m = (~done) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(np.abs(d2 - d6) > 0, d2 / (d2 - d6), 0.0)
    bary[m, 0] = 1 - w[m]; bary[m, 2] = w[m]; done |= m

    va = d3 * d6 - d5 * d4
    m = (~done) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    denom = (d4 - d3) + (d5 - d6)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(np.abs(denom) > 0, (d4 - d3) / denom, 0.0)
    bary[m, 1] = 1 - w[m]; bary[m, 2] = w[m]; done |= m

    m = ~done
    denom = va + vb + vc
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(np.abs(denom) > 0, vb / denom, 1.0 / 3.0)
        w = np.where(np.abs(denom) > 0, vc / denom, 1.0 / 3.0)
    bary[m, 0] = 1 - v[m] - w[m]; bary[m, 1] = v[m]; bary[m, 2] = w[m]

    closest = bary[:, 0:1] * a + bary[:, 1:2] * b + bary[:, 2:3] * c
    return closest, bary


class SurfaceLocator:
    """Accelerated closest-point queries against a fixed mesh."""

    def __init__(self, mesh, candidates=24):
        from scipy.spatial import cKDTree

        self.mesh = mesh
        self.k = min(candidates, mesh.n_faces)
        self._tree = cKDTree(mesh.vertices[mesh.triangles].mean(axis=1))

    def closest(self, points):
        """Return (face, bary, position) per query point."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        _, cand = self._tree.query(p, k=self.k)
        cand = np.atleast_2d(cand)
        tri_pts = self.mesh.vertices[self.mesh.triangles[cand]]  # (q, k, 3, 3)
        q, k = cand.shape
        flat_pts = np.repeat(p, k, axis=0)
        closest, bary = closest_point_on_triangles(
            flat_pts, tri_pts.reshape(q * k, 3, 3))
        d2 = ((closest - flat_pts) ** 2).sum(axis=1).reshape(q, k)
        best = d2.argmin(axis=1)
        rows = np.arange(q)
        faces = cand[rows, best]
        return (faces,
                bary.reshape(q, k, 3)[rows, best],
                closest.reshape(q, k, 3)[rows, best])


# -- OBJ import/export ------------------------------------------------------

def load_obj(path):
    """Load a Wavefront OBJ file (positions and triangular faces only)."""
    verts = []
    tris = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(x) for x in line.split()[1:4]])
            elif line.startswith("f "):
                idx = [int(tok.split("/")[0]) - 1 for tok in line.split()[1:]]
                for i in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[i], idx[i + 1]])
    if not verts:
        raise MeshError(f"no vertices in OBJ file {path}")
    return TriangleMesh(verts, tris)


def save_obj(mesh, path):
    """Write mesh positions and faces to a Wavefront OBJ file."""
    with open(path, "w") as fh:
        fh.write(f"# garmentfit OBJ: {mesh.n_vertices} vertices, {mesh.n_faces} faces\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def check_manifold(mesh, name="mesh"):
    """Raise unless every interior edge borders exactly two faces."""
    if not mesh.is_edge_manifold():
        raise MeshError(f"{name} is not edge-manifold")
