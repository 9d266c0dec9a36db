"""Embedding on-surface curves into the mesh connectivity.

Faces crossed by a barycentric polyline are split exactly along the curve,
so the curve becomes a chain of mesh edges. Region extraction and seam
cutting are built on top of that chain.
"""

import warnings

import numpy as np

from .mesh import MeshError, TriangleMesh

_SNAP = 1e-3  # barycentric snap tolerance for vertex / edge classification


class RegionError(MeshError):
    pass


class EmbedResult:
    """Outcome of embedding one polyline.

    Attributes
    ----------
    mesh : TriangleMesh
        New mesh in which the curve is a chain of edges.
    chain : list of int
        Ordered vertex indices of the embedded curve.
    closed : bool
    face_parents : (m,) int array
        For every face of ``mesh``, the face of the input mesh it came from.
    """

    def __init__(self, mesh, chain, closed, face_parents):
        self.mesh = mesh
        self.chain = chain
        self.closed = closed
        self.face_parents = face_parents

    def chain_edges(self):
        pairs = list(zip(self.chain[:-1], self.chain[1:]))
        if self.closed and len(self.chain) > 2:
            pairs.append((self.chain[-1], self.chain[0]))
        return {(min(a, b), max(a, b)) for a, b in pairs if a != b}


class _Entry:
    """One point of the resolved curve: vertex, edge point, or interior."""

    __slots__ = ("kind", "vid", "edge", "t", "face", "pos", "gid")

    def __init__(self, kind, pos, vid=None, edge=None, t=None, face=None):
        self.kind = kind
        self.pos = pos
        self.vid = vid
        self.edge = edge
        self.t = t
        self.face = face
        self.gid = None

    def incident_faces(self, mesh):
        if self.kind == "vertex":
            return set(mesh.vertex_faces()[self.vid])
        if self.kind == "edge":
            key = self.edge
            edges, ef = mesh._edge_data()
            idx = _edge_index(mesh, key)
            return set(ef[idx])
        return {self.face}


def _edge_index(mesh, key):
    if "edge_lookup" not in mesh._cache:
        mesh._cache["edge_lookup"] = {
            (int(a), int(b)): i for i, (a, b) in enumerate(mesh.edges())}
    return mesh._cache["edge_lookup"][key]


def _classify(mesh, face, bary, pos):
    tri = mesh.triangles[face]
    w = np.asarray(bary, dtype=np.float64)
    small = w < _SNAP
    if small.sum() == 2:
        v = int(tri[w.argmax()])
        return _Entry("vertex", mesh.vertices[v], vid=v)
    if small.sum() == 1:
        c = int(np.where(small)[0][0])
        i, j = int(tri[(c + 1) % 3]), int(tri[(c + 2) % 3])
        wi, wj = w[(c + 1) % 3], w[(c + 2) % 3]
        t = wj / (wi + wj)
        if i > j:
            i, j = j, i
            t = 1.0 - t
        p = (1 - t) * mesh.vertices[i] + t * mesh.vertices[j]
        return _Entry("edge", p, edge=(i, j), t=t)
    return _Entry("interior", pos, face=int(face))


def _face_frame(mesh, face):
    """2D orthonormal frame of a face; returns (origin, u, v)."""
    p = mesh.vertices[mesh.triangles[face]]
    e1 = p[1] - p[0]
    n = np.cross(e1, p[2] - p[0])
    u = e1 / np.linalg.norm(e1)
    n = n / np.linalg.norm(n)
    v = np.cross(n, u)
    return p[0], u, v


def _to2d(origin, u, v, pts):
    rel = np.atleast_2d(pts) - origin
    return np.stack([rel @ u, rel @ v], axis=1)


def _crossing(mesh, entry_a, entry_b, face_a, face_b):
    """Edge point where the curve leaves face_a toward face_b."""
    tri_a = set(int(x) for x in mesh.triangles[face_a])
    tri_b = set(int(x) for x in mesh.triangles[face_b])
    shared = sorted(tri_a & tri_b)
    if len(shared) != 2:
        raise RegionError("consecutive polyline samples lie in non-adjacent faces")
    i, j = shared
    origin, u, v = _face_frame(mesh, face_a)
    a2, b2 = _to2d(origin, u, v, [entry_a.pos, entry_b.pos])
    p2, q2 = _to2d(origin, u, v, [mesh.vertices[i], mesh.vertices[j]])
    # segment a->b against line p->q
    d = b2 - a2
    e = q2 - p2
    denom = d[0] * e[1] - d[1] * e[0]
    if abs(denom) < 1e-18:
        t = 0.5
    else:
        s = ((p2[0] - a2[0]) * e[1] - (p2[1] - a2[1]) * e[0]) / denom
        x = a2 + np.clip(s, 0.0, 1.0) * d
        ee = e @ e
        t = float(np.clip((x - p2) @ e / max(ee, 1e-30), 0.0, 1.0))
    if t < _SNAP:
        return _Entry("vertex", mesh.vertices[i], vid=i)
    if t > 1 - _SNAP:
        return _Entry("vertex", mesh.vertices[j], vid=j)
    pos = (1 - t) * mesh.vertices[i] + t * mesh.vertices[j]
    return _Entry("edge", pos, edge=(i, j), t=t)


def _connect(mesh, locator, a, b, depth=0):
    """Entries strictly between a and b so consecutive ones share a face."""
    fa = a.incident_faces(mesh)
    fb = b.incident_faces(mesh)
    if fa & fb:
        return []
    tris = mesh.triangles
    best_pair, best_shared = None, ()
    for f1 in fa:
        for f2 in fb:
            shared = np.intersect1d(tris[f1], tris[f2])
            if len(shared) > len(best_shared):
                best_pair, best_shared = (f1, f2), shared
    if len(best_shared) >= 2:
        mid = _crossing(mesh, a, b, best_pair[0], best_pair[1])
        left = [] if _same_entry(a, mid) else [mid]
        return left
    if len(best_shared) == 1:
        v = int(best_shared[0])
        mid = _Entry("vertex", mesh.vertices[v], vid=v)
        if _same_entry(a, mid) or _same_entry(b, mid):
            return []
        return [mid]
    if depth >= 16:
        raise RegionError("polyline samples lie in faces that cannot be connected")
    # subdivide on the surface and recurse
    m3 = 0.5 * (a.pos + b.pos)
    f, w, p = locator.closest(m3)
    mid = _classify(mesh, int(f[0]), w[0], p[0])
    if _same_entry(a, mid) or _same_entry(b, mid):
        raise RegionError("polyline samples lie in faces that cannot be connected")
    return (_connect(mesh, locator, a, mid, depth + 1) + [mid]
            + _connect(mesh, locator, mid, b, depth + 1))


def _resolve_chain(mesh, poly, locator):
    """Turn polyline samples into entries with edge crossings inserted."""
    pts = poly.points(mesh)
    raw = [_classify(mesh, f, w, p)
           for f, w, p in zip(poly.faces, poly.weights, pts)]
    entries = []
    n = len(raw)
    pairs = list(range(n - 1)) + ([n - 1] if poly.closed else [])
    for i in pairs:
        a = raw[i]
        b = raw[(i + 1) % n]
        entries.append(a)
        entries.extend(_connect(mesh, locator, a, b))
    if not poly.closed:
        entries.append(raw[-1])
    # drop consecutive duplicates
    out = []
    for e in entries:
        if out and _same_entry(out[-1], e):
            continue
        out.append(e)
    if poly.closed and len(out) > 1 and _same_entry(out[0], out[-1]):
        out.pop()
    out = _prune_collinear_edge_runs(out, poly.closed)
    return _prune_collinear_interior(mesh, out, poly.closed)


def _on_same_edge(a, b):
    """Both entries lie on the mesh edge of `b` (vertex entries count)."""
    if b.kind != "edge":
        return False
    if a.kind == "edge":
        return a.edge == b.edge
    if a.kind == "vertex":
        return a.vid in b.edge
    return False


def _prune_collinear_edge_runs(entries, closed):
    """Drop edge points that are interior to a run along a single mesh edge.

    A curve sliding along one mesh edge only needs its first and last point
    there; keeping the intermediates creates collinear slivers when the
    adjacent faces are retriangulated.
    """
    n = len(entries)
    if n < 3:
        return entries
    keep = [True] * n
    idx = range(n) if closed else range(1, n - 1)
    for i in idx:
        a = entries[(i - 1) % n]
        b = entries[i]
        c = entries[(i + 1) % n]
        if b.kind == "edge" and _on_same_edge(a, b) and _on_same_edge(c, b):
            keep[i] = False
    return [e for e, k in zip(entries, keep) if k]


def _prune_collinear_interior(mesh, entries, closed):
    """Drop face-interior points collinear with their chain neighbours.

    A straight curve crossing a planar face needs only its entry and exit
    points; intermediate samples become degenerate polygon vertices during
    retriangulation.
    """
    changed = True
    while changed and len(entries) > 2:
        changed = False
        n = len(entries)
        keep = [True] * n
        idx = range(n) if closed else range(1, n - 1)
        for i in idx:
            b = entries[i]
            if b.kind != "interior" or not keep[i]:
                continue
            a = entries[(i - 1) % n]
            c = entries[(i + 1) % n]
            if (b.face not in a.incident_faces(mesh)
                    or b.face not in c.incident_faces(mesh)):
                continue
            seg = c.pos - a.pos
            ln = np.linalg.norm(seg)
            if ln < 1e-12:
                continue
            dev = np.linalg.norm(np.cross(seg / ln, b.pos - a.pos))
            if dev < 1e-9 + 1e-6 * ln:
                keep[i] = False
                changed = True
        entries = [e for e, k in zip(entries, keep) if k]
    return entries


def _same_entry(a, b):
    if a.kind == "vertex" and b.kind == "vertex":
        return a.vid == b.vid
    if a.kind == "edge" and b.kind == "edge":
        return a.edge == b.edge and abs(a.t - b.t) < 1e-9
    return np.linalg.norm(a.pos - b.pos) < 1e-12


def _segment_face(mesh, a, b):
    """The unique face a chain segment runs through (None if along an edge)."""
    fa = a.incident_faces(mesh)
    fb = b.incident_faces(mesh)
    common = fa & fb
    if not common:
        raise RegionError("chain segment spans non-adjacent faces")
    if len(common) == 1:
        return next(iter(common))
    if a.kind == "edge" and b.kind == "edge" and a.edge == b.edge:
        return None  # runs along a mesh edge
    if a.kind == "vertex" and b.kind == "vertex":
        return None  # existing mesh edge
    if "vertex" in (a.kind, b.kind) and "edge" in (a.kind, b.kind):
        ee = a.edge if a.kind == "edge" else b.edge
        vv = a.vid if a.kind == "vertex" else b.vid
        if vv in ee:
            return None  # along the edge containing both
    # ambiguous: pick by midpoint containment
    mid = 0.5 * (a.pos + b.pos)
    best, score = None, np.inf
    for f in common:
        origin, u, v = _face_frame(mesh, f)
        tri2 = _to2d(origin, u, v, mesh.vertices[mesh.triangles[f]])
        m2 = _to2d(origin, u, v, mid)[0]
        d = _point_in_tri_depth(m2, tri2)
        if d < score:
            best, score = f, d
    return best


def _point_in_tri_depth(p, tri2):
    """Negative of the signed distance to the triangle (smaller = deeper inside)."""
    depth = -np.inf
    for k in range(3):
        a, b = tri2[k], tri2[(k + 1) % 3]
        e = b - a
        nrm = np.array([e[1], -e[0]])
        d = (p - a) @ nrm / max(np.linalg.norm(nrm), 1e-30)
        depth = max(depth, d)
    return depth


def _polygon_area(poly2):
    x = poly2[:, 0]
    y = poly2[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _ear_clip(ids, pts2):
    """Triangulate a simple CCW polygon; returns index triples into ids."""
    idx = list(range(len(ids)))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = pts2[i0], pts2[i1], pts2[i2]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 1e-18:
                continue
            # no other polygon vertex inside the candidate ear
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts2[j]
                if _inside_tri(p, a, b, c):
                    ok = False
                    break
            if ok:
                tris.append((ids[i0], ids[i1], ids[i2]))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            # fall back: clip the least-degenerate ear
            best_k = max(range(len(idx)), key=lambda k: _ear_cross(idx, pts2, k))
            n = len(idx)
            i0, i1, i2 = idx[(best_k - 1) % n], idx[best_k], idx[(best_k + 1) % n]
            tris.append((ids[i0], ids[i1], ids[i2]))
            idx.pop(best_k)
    if len(idx) == 3:
        tris.append((ids[idx[0]], ids[idx[1]], ids[idx[2]]))
    return tris


def _ear_cross(idx, pts2, k):
    n = len(idx)
    a = pts2[idx[(k - 1) % n]]
    b = pts2[idx[k]]
    c = pts2[idx[(k + 1) % n]]
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _inside_tri(p, a, b, c):
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return d1 > 1e-15 and d2 > 1e-15 and d3 > 1e-15


def _point_in_polygon(p, poly2):
    inside = False
    n = len(poly2)
    for i in range(n):
        a, b = poly2[i], poly2[(i + 1) % n]
        if (a[1] > p[1]) != (b[1] > p[1]):
            x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0])
            if x > p[0]:
                inside = not inside
    return inside


def embed_polyline(mesh, poly):
    """Split mesh faces so the polyline becomes a chain of mesh edges."""
    if len(poly) < 2:
        raise RegionError("polyline needs at least 2 samples")
    from .mesh import SurfaceLocator

    chain_entries = _resolve_chain(mesh, poly, SurfaceLocator(mesh))

    new_verts = [v for v in mesh.vertices]
    edge_points = {}  # (edge, quantized t) -> gid
    for e in chain_entries:
        if e.kind == "vertex":
            e.gid = e.vid
        elif e.kind == "edge":
            key = (e.edge, round(e.t, 9))
            if key not in edge_points:
                edge_points[key] = len(new_verts)
                new_verts.append(e.pos)
            e.gid = edge_points[key]
        else:
            e.gid = len(new_verts)
            new_verts.append(e.pos)

    # per-face bookkeeping
    n = len(chain_entries)
    seg_count = n if poly.closed else n - 1
    face_segments = {}
    for i in range(seg_count):
        a = chain_entries[i]
        b = chain_entries[(i + 1) % n]
        f = _segment_face(mesh, a, b)
        if f is not None:
            face_segments.setdefault(int(f), []).append((a, b))

    face_edge_pts = {}
    for (edge, _), gid in edge_points.items():
        idx = _edge_index(mesh, edge)
        for f in mesh.edge_faces()[idx]:
            face_edge_pts.setdefault(int(f), set()).add(gid)
    face_interior = {}
    for e in chain_entries:
        if e.kind == "interior":
            face_interior.setdefault(e.face, set()).add(e.gid)

    affected = set(face_segments) | set(face_edge_pts) | set(face_interior)
    gid_pos = {e.gid: e.pos for e in chain_entries}
    for (edge, qt), gid in edge_points.items():
        i, j = edge
        gid_pos[gid] = (1 - qt) * mesh.vertices[i] + qt * mesh.vertices[j]

    new_tris = []
    face_parents = []
    for f in range(mesh.n_faces):
        if f not in affected:
            new_tris.append(list(map(int, mesh.triangles[f])))
            face_parents.append(f)
            continue
        tris = _retriangulate_face(mesh, f,
                                   face_segments.get(f, []),
                                   face_edge_pts.get(f, set()),
                                   gid_pos, new_verts)
        for t in tris:
            new_tris.append(list(t))
            face_parents.append(f)

    out = TriangleMesh(np.array(new_verts), new_tris, check=False)
    keep = out.face_areas() > 0.0
    if not keep.all():
        out = TriangleMesh(out.vertices, out.triangles[keep], check=False)
    face_parents = np.asarray(face_parents)[keep]
    chain = [e.gid for e in chain_entries]
    return EmbedResult(out, chain, poly.closed, face_parents)


def _retriangulate_face(mesh, f, segments, edge_pts, gid_pos, new_verts):
    tri = [int(v) for v in mesh.triangles[f]]
    origin, u, v = _face_frame(mesh, f)

    # polygon: corners with edge points inserted in order
    poly_ids = []
    for c in range(3):
        a, b = tri[c], tri[(c + 1) % 3]
        poly_ids.append(a)
        key = (min(a, b), max(a, b))
        on_edge = []
        for gid in edge_pts:
            p = gid_pos[gid]
            pa = np.asarray(new_verts[a])
            pb = np.asarray(new_verts[b])
            e = pb - pa
            t = (p - pa) @ e / max(e @ e, 1e-30)
            d = np.linalg.norm(p - (pa + np.clip(t, 0, 1) * e))
            if d < 1e-9 * max(np.linalg.norm(e), 1.0) + 1e-12:
                on_edge.append((t if a < b else t, gid, t))
        on_edge.sort(key=lambda x: x[2])
        for _, gid, _ in on_edge:
            poly_ids.append(gid)

    all_ids = set(poly_ids)
    for a, b in segments:
        # include every gid on the chains through this face
        all_ids.add(a.gid)
        all_ids.add(b.gid)
    id_pos2 = {gid: _to2d(origin, u, v, np.asarray(new_verts[gid]))[0]
               for gid in all_ids}

    # group segments into chains
    chains = _group_chains(segments)

    return _split_polygon(poly_ids, chains, id_pos2)


def _group_chains(segments):
    chains = []
    segs = [(a.gid, b.gid, a.kind, b.kind) for a, b in segments]
    used = [False] * len(segs)
    for i, (a, b, ka, kb) in enumerate(segs):
        if used[i]:
            continue
        used[i] = True
        chain = [a, b]
        kinds = [ka, kb]
        grown = True
        while grown:
            grown = False
            for j, (c, d, kc, kd) in enumerate(segs):
                if used[j]:
                    continue
                if c == chain[-1]:
                    chain.append(d)
                    kinds.append(kd)
                    used[j] = True
                    grown = True
                elif d == chain[0]:
                    chain.insert(0, c)
                    kinds.insert(0, kc)
                    used[j] = True
                    grown = True
        chains.append((chain, kinds))
    return chains


def _split_polygon(poly_ids, chains, pos2):
    """Recursively split a polygon by crossing chains, then ear-clip."""
    pts2 = np.array([pos2[g] for g in poly_ids])
    if _polygon_area(pts2) < 0:
        poly_ids = poly_ids[::-1]
        pts2 = pts2[::-1]

    for ci, (chain, kinds) in enumerate(chains):
        if chain[0] not in poly_ids or chain[-1] not in poly_ids:
            continue
        if chain[0] == chain[-1]:
            continue
        i0 = poly_ids.index(chain[0])
        i1 = poly_ids.index(chain[-1])
        n = len(poly_ids)
        walk1 = [poly_ids[(i0 + k) % n] for k in range(((i1 - i0) % n) + 1)]
        walk2 = [poly_ids[(i1 + k) % n] for k in range(((i0 - i1) % n) + 1)]
        interior = chain[1:-1]
        poly1 = walk1 + interior[::-1]
        poly2 = walk2 + interior
        if len(poly1) < 3 or len(poly2) < 3:
            continue
        rest = chains[:ci] + chains[ci + 1:]
        rest1, rest2 = [], []
        p1_2d = np.array([pos2[g] for g in poly1])
        for ch in rest:
            mid_ids = ch[0]
            mid = 0.5 * (pos2[mid_ids[0]] + pos2[mid_ids[len(mid_ids) // 2]])
            (rest1 if _point_in_polygon(mid, p1_2d) else rest2).append(ch)
        return (_split_polygon(poly1, rest1, pos2)
                + _split_polygon(poly2, rest2, pos2))

    ids = list(poly_ids)
    return _ear_clip(ids, np.array([pos2[g] for g in ids]))


# -- region extraction and seam cutting --------------------------------------

def extract_region(mesh, boundaries, seed, embed_results=None):
    """Flood fill from a seed face, stopping at boundary curves.

    Faces crossed by a curve are split along it, so the curves become exact
    mesh boundaries of the output. Returns the region as an independent mesh.
    """
    from .mesh import SurfaceLocator
    from .polyline import BarycentricPolyline

    work = mesh
    cut_edges = set()
    # face ancestry: map each current face to its face in the original mesh
    parents = np.arange(mesh.n_faces)
    for poly in boundaries:
        if work is not mesh:
            # face indices changed: relocate the curve on the current mesh
            pts = poly.points(mesh)
            f, b, _ = SurfaceLocator(work).closest(pts)
            b = np.clip(b, 0.0, None)
            b /= b.sum(axis=1, keepdims=True)
            poly = BarycentricPolyline(f, b, poly.closed)
        res = embed_polyline(work, poly)
        cut_edges |= res.chain_edges()
        parents = parents[res.face_parents] if len(parents) else res.face_parents
        work = res.mesh

    seed_arr = np.asarray(seed)
    if seed_arr.ndim == 1 and seed_arr.size == 3:
        # seed given as a point: locate it on the split mesh directly
        f, _, _ = SurfaceLocator(work).closest(seed_arr[None, :].astype(float))
        seed_face = int(f[0])
    else:
        # seed given as a face index of the input mesh
        descendants = np.where(parents == int(seed))[0]
        if len(descendants) == 0:
            raise RegionError("seed face disappeared during splitting")
        if len(descendants) > 1:
            raise RegionError(
                "seed face lies on a boundary curve (ambiguous seed)")
        seed_face = int(descendants[0])

    edges, ef = work._edge_data()
    edge_lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
    blocked = {edge_lookup[e] for e in cut_edges if e in edge_lookup}

    visited = np.zeros(work.n_faces, dtype=bool)
    visited[seed_face] = True
    stack = [seed_face]
    hit_mesh_boundary = False
    tris = work.triangles
    while stack:
        fcur = stack.pop()
        t = tris[fcur]
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (int(min(a, b)), int(max(a, b)))
            ei = edge_lookup[key]
            if ei in blocked:
                continue
            nbrs = ef[ei]
            if len(nbrs) < 2:
                hit_mesh_boundary = True
                continue
            for g in nbrs:
                if not visited[g]:
                    visited[g] = True
                    stack.append(g)

    if visited.all():
        warnings.warn("boundary curves do not separate the mesh; "
                      "region spans the whole surface")
    if hit_mesh_boundary:
        warnings.warn("region is partially bounded by the mesh boundary "
                      "(non-separating curve set)")
    region, _ = work.submesh(np.where(visited)[0])
    return region


def cut_along_chain(mesh, chain, closed):
    """Open the mesh along a chain of vertices (already mesh edges).

    Interior chain vertices are duplicated and the faces on one side are
    rewired to the duplicates. Geometry (total area) is unchanged.
    """
    chain = [int(c) for c in chain]
    interior = list(chain) if closed else chain[1:-1]
    if len(set(chain)) != len(chain):
        raise RegionError("seam curve crosses itself")

    n0 = len(chain)
    chain_edges = {(min(a, b), max(a, b))
                   for a, b in zip(chain, chain[1:] + ([chain[0]] if closed else []))}

    verts = [v for v in mesh.vertices]
    tris = [list(map(int, t)) for t in mesh.triangles]
    vf = mesh.vertex_faces()

    def prev_next(v):
        i = chain.index(v)
        p = chain[i - 1] if (i > 0 or closed) else None
        nx = chain[(i + 1) % n0] if (i < n0 - 1 or closed) else None
        return p, nx

    dup_of = {}
    side_b_faces = {}

    for v in interior:
        p, nx = prev_next(v)
        faces = list(vf[v])
        # adjacency between faces around v via non-chain edges at v
        adj = {f: [] for f in faces}
        for i, f1 in enumerate(faces):
            for f2 in faces[i + 1:]:
                shared = set(tris[f1]) & set(tris[f2])
                shared.discard(v)
                for w in shared:
                    key = (min(v, w), max(v, w))
                    if key not in chain_edges:
                        adj[f1].append(f2)
                        adj[f2].append(f1)
        comps = []
        seen = set()
        for f in faces:
            if f in seen:
                continue
            comp = {f}
            seen.add(f)
            stack = [f]
            while stack:
                g = stack.pop()
                for h in adj[g]:
                    if h not in seen:
                        seen.add(h)
                        comp.add(h)
                        stack.append(h)
            comps.append(comp)
        if len(comps) < 2:
            continue  # chain does not locally separate the fan (endpoint-like)
        side_b_faces[v] = comps

    # pick consistent sides walking along the chain
    chosen = {}
    order = interior
    for idx, v in enumerate(order):
        comps = side_b_faces.get(v)
        if comps is None:
            continue
        ref_face = None
        if idx > 0 and order[idx - 1] in chosen:
            prev_v = order[idx - 1]
            for f in chosen[prev_v]:
                if v in tris[f]:
                    ref_face = f
                    break
        if ref_face is None:
            ref_face = next(iter(comps[0]))
        for comp in comps:
            if ref_face in comp:
                chosen[v] = comp
                break

    for v, comp in chosen.items():
        dup = len(verts)
        verts.append(np.array(verts[v]))
        dup_of[v] = dup
        for f in comp:
            tris[f] = [dup if w == v else w for w in tris[f]]

    out = TriangleMesh(np.array(verts), tris, check=False)
    return out, dup_of
