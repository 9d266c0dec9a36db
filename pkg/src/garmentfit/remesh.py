"""Isotropic remeshing: split / collapse / flip / tangential relaxation."""

import numpy as np

from .mesh import MeshError, SurfaceLocator, TriangleMesh


class _EditableMesh:
    """Mutable mesh scratchpad used only inside the remesher."""

    def __init__(self, mesh):
        self.V = [v.copy() for v in mesh.vertices]
        self.T = [list(map(int, t)) for t in mesh.triangles]

    def rebuild(self):
        self.edge_faces = {}
        self.vadj = {}
        for f, tri in enumerate(self.T):
            if tri is None:
                continue
            a, b, c = tri
            for u, v in ((a, b), (b, c), (c, a)):
                key = (u, v) if u < v else (v, u)
                self.edge_faces.setdefault(key, []).append(f)
                self.vadj.setdefault(u, set()).add(v)
                self.vadj.setdefault(v, set()).add(u)

    def is_boundary_edge(self, key):
        return len(self.edge_faces.get(key, ())) == 1

    def boundary_vertices(self):
        bv = set()
        for key, faces in self.edge_faces.items():
            if len(faces) == 1:
                bv.update(key)
        return bv

    def to_mesh(self):
        tris = [t for t in self.T if t is not None]
        verts = np.array(self.V)
        used = sorted({v for t in tris for v in t})
        remap = {v: i for i, v in enumerate(used)}
        tris = [[remap[a], remap[b], remap[c]] for a, b, c in tris]
        return TriangleMesh(verts[used], tris, check=False)


def _tri_area(V, t):
    a, b, c = (V[t[0]], V[t[1]], V[t[2]])
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a))


def _split_long_edges(em, high):
    em.rebuild()
    edges = sorted(em.edge_faces,
                   key=lambda k: -np.linalg.norm(em.V[k[0]] - em.V[k[1]]))
    for a, b in edges:
        if np.linalg.norm(em.V[a] - em.V[b]) <= high:
            break
        faces = em.edge_faces.get((a, b) if a < b else (b, a))
        if not faces:
            continue
        mid = len(em.V)
        em.V.append(0.5 * (em.V[a] + em.V[b]))
        for f in list(faces):
            tri = em.T[f]
            if tri is None or a not in tri or b not in tri:
                continue
            other = [v for v in tri if v not in (a, b)][0]
            i_a = tri.index(a)
            # preserve winding: replace b by mid, and a by mid in a copy
            t1 = [mid if v == b else v for v in tri]
            t2 = [mid if v == a else v for v in tri]
            em.T[f] = t1
            em.T.append(t2)
            del other, i_a
        em.rebuild()


def _collapse_short_edges(em, low, high, preserve_boundary, rounds=8):
    for _ in range(rounds):
        if not _collapse_round(em, low, high, preserve_boundary):
            break


def _collapse_round(em, low, high, preserve_boundary):
    em.rebuild()
    bv = em.boundary_vertices()
    removed = set()
    n_collapsed = 0
    for a, b in list(em.edge_faces):
        if a in removed or b in removed:
            continue
        if ((a, b) if a < b else (b, a)) not in em.edge_faces:
            continue
        if a not in em.vadj or b not in em.vadj:
            continue
        if np.linalg.norm(em.V[a] - em.V[b]) >= low:
            continue
        a_bd, b_bd = a in bv, b in bv
        if a_bd and b_bd:
            # removing a boundary vertex is allowed only if it is collinear
            # with its boundary neighbors (polyline geometry unchanged)
            key = (a, b) if a < b else (b, a)
            if not em.is_boundary_edge(key):
                continue
            keep = gone = None
            for cand_gone, cand_keep in ((a, b), (b, a)):
                nbrs = [v for v in em.vadj[cand_gone]
                        if v in bv and em.is_boundary_edge(
                            (cand_gone, v) if cand_gone < v else (v, cand_gone))]
                if len(nbrs) != 2:
                    continue
                p, q = em.V[nbrs[0]], em.V[nbrs[1]]
                seg = q - p
                t = np.clip((em.V[cand_gone] - p) @ seg / max(seg @ seg, 1e-30),
                            0, 1)
                if np.linalg.norm(em.V[cand_gone] - (p + t * seg)) < 1e-4:
                    gone, keep = cand_gone, cand_keep
                    break
            if gone is None:
                continue
            target = em.V[keep]
            bd_collinear = True
        else:
            bd_collinear = False
        if not bd_collinear:
            if a_bd or b_bd:
                # collapse the interior vertex into the boundary one
                keep, gone = (a, b) if a_bd else (b, a)
                target = em.V[keep]
            else:
                keep, gone = a, b
                target = 0.5 * (em.V[a] + em.V[b])
        # link condition for manifoldness
        shared = em.vadj[a] & em.vadj[b]
        key = (a, b) if a < b else (b, a)
        max_shared = 1 if em.is_boundary_edge(key) else 2
        if len(shared) > max_shared:
            continue
        # reject collapses creating long edges
        ok = True
        for n in em.vadj[gone]:
            if n in (keep, gone):
                continue
            if np.linalg.norm(target - em.V[n]) > high:
                ok = False
                break
        if not ok:
            continue
        # reject normal flips in surviving faces
        old_keep = em.V[keep].copy()
        em.V[keep] = target
        flip = False
        for f, tri in enumerate(em.T):
            if tri is None or gone in tri:
                continue
            if keep in tri and _tri_area(em.V, tri) < 1e-14:
                flip = True
                break
        if flip:
            em.V[keep] = old_keep
            continue
        for f, tri in enumerate(em.T):
            if tri is None:
                continue
            if gone in tri:
                if keep in tri:
                    em.T[f] = None
                else:
                    em.T[f] = [keep if v == gone else v for v in tri]
                    if _tri_area(em.V, em.T[f]) < 1e-14:
                        em.T[f] = None
        removed.add(gone)
        removed.add(keep)  # one operation per vertex per round
        n_collapsed += 1
        em.rebuild()
        bv = em.boundary_vertices()
    return n_collapsed


def _flip_edges(em):
    em.rebuild()
    bv = em.boundary_vertices()

    def valence(v):
        return len(em.vadj.get(v, ()))

    def target(v):
        return 4 if v in bv else 6

    for key, faces in list(em.edge_faces.items()):
        if len(faces) != 2:
            continue
        a, b = key
        f1, f2 = faces
        t1, t2 = em.T[f1], em.T[f2]
        if t1 is None or t2 is None:
            continue
        c = [v for v in t1 if v not in key]
        d = [v for v in t2 if v not in key]
        if len(c) != 1 or len(d) != 1:
            continue
        c, d = c[0], d[0]
        if d in em.vadj.get(c, ()):
            continue
        before = sum((valence(v) - target(v)) ** 2 for v in (a, b, c, d))
        after = ((valence(a) - 1 - target(a)) ** 2
                 + (valence(b) - 1 - target(b)) ** 2
                 + (valence(c) + 1 - target(c)) ** 2
                 + (valence(d) + 1 - target(d)) ** 2)
        if after >= before:
            continue
        # geometric guard: keep triangles sane
        n1 = np.cross(em.V[d] - em.V[c], em.V[a] - em.V[c])
        n2 = np.cross(em.V[b] - em.V[c], em.V[d] - em.V[c])
        if (np.linalg.norm(n1) < 1e-14 or np.linalg.norm(n2) < 1e-14
                or n1 @ n2 <= 0):
            continue
        # rebuild the two triangles around edge (c, d), keep orientation of t1
        i = t1.index(a)
        if t1[(i + 1) % 3] == b:
            em.T[f1] = [a, d, c]
            em.T[f2] = [d, b, c]
        else:
            em.T[f1] = [a, c, d]
            em.T[f2] = [d, c, b]
        em.rebuild()


def _relax(em, locator, lam=0.5):
    em.rebuild()
    bv = em.boundary_vertices()
    V = np.array(em.V)
    new = V.copy()
    # area-weighted vertex normals for tangent projection
    normals = np.zeros_like(V)
    for tri in em.T:
        if tri is None:
            continue
        n = np.cross(V[tri[1]] - V[tri[0]], V[tri[2]] - V[tri[0]])
        for v in tri:
            normals[v] += n
    for v, adj in em.vadj.items():
        if v in bv or not adj:
            continue
        centroid = V[list(adj)].mean(axis=0)
        disp = lam * (centroid - V[v])
        n = normals[v]
        nn = n @ n
        if nn > 1e-30:
            disp -= (disp @ n) / nn * n
        new[v] = V[v] + disp
    interior = [v for v in em.vadj if v not in bv]
    if interior:
        _, _, proj = locator.closest(new[interior])
        for v, p in zip(interior, proj):
            em.V[v] = p


def isotropic_remesh(mesh, target_edge_length, preserve_boundary=True,
                     iterations=6):
    """Remesh toward uniform edge length.

    Edge lengths end up within roughly [0.5, 1.5] of the target; boundary
    polylines are preserved (splits stay on the boundary segments, boundary
    vertices are never moved) when ``preserve_boundary`` is set.
    """
    if target_edge_length < 1e-5:
        raise MeshError("target edge length below 1e-5 m is degenerate")
    if not mesh.is_edge_manifold():
        raise MeshError("isotropic remeshing requires an edge-manifold mesh")
    low = 0.8 * target_edge_length
    high = 4.0 / 3.0 * target_edge_length
    locator = SurfaceLocator(mesh)
    em = _EditableMesh(mesh)
    for _ in range(iterations):
        _split_long_edges(em, high)
        _collapse_short_edges(em, low, high, preserve_boundary)
        _flip_edges(em)
        _relax(em, locator)
    out = em.to_mesh().remove_degenerate_faces()
    return out
