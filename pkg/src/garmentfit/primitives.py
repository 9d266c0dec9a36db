"""Procedural meshes: test shapes and synthetic avatar bodies."""

import numpy as np

from .mesh import TriangleMesh


def grid_plane(nx=10, ny=10, size=1.0, z=0.0):
    """Regular triangulated grid in the xy-plane, (nx+1)*(ny+1) vertices."""
    xs = np.linspace(0, size, nx + 1)
    ys = np.linspace(0, size, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, z)], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append([a, b, c])
            tris.append([a, c, d])
    return TriangleMesh(verts, tris)


def icosphere(subdivisions=3, radius=1.0, center=(0, 0, 0)):
    """Unit icosahedron subdivided and projected to a sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    tris = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache = {}
        new_tris = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = (verts[a] + verts[b]) / 2
                m = m / np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_tris += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        tris = new_tris
    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, tris)


def uv_sphere(n_theta=24, n_phi=48, radius=1.0, center=(0, 0, 0)):
    """Latitude/longitude sphere; equator vertices sit exactly at z = 0."""
    center = np.asarray(center, dtype=np.float64)
    verts = [center + (0, 0, radius)]
    for i in range(1, n_theta):
        th = np.pi * i / n_theta
        for j in range(n_phi):
            ph = 2 * np.pi * j / n_phi
            verts.append(center + radius * np.array(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]))
    verts.append(center + (0, 0, -radius))
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_phi + (j % n_phi)

    tris = []
    for j in range(n_phi):
        tris.append([0, ring(1, j), ring(1, j + 1)])
        tris.append([south, ring(n_theta - 1, j + 1), ring(n_theta - 1, j)])
    for i in range(1, n_theta - 1):
        for j in range(n_phi):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    return TriangleMesh(verts, tris)


def capped_cylinder(radius=0.05, length=0.5, n_around=24, n_along=20, cap_rings=6):
    """Watertight tube along +x with spherical caps, centered at the origin.

    The surface is a single ring chain from the -x apex to the +x apex,
    so quad stitching with one winding convention keeps it manifold and
    consistently oriented (outward normals).
    """
    verts = []
    rings = []

    def add_ring(x, r):
        ring = []
        for j in range(n_around):
            a = 2 * np.pi * j / n_around
            ring.append(len(verts))
            verts.append([x, r * np.cos(a), r * np.sin(a)])
        rings.append(ring)

    apex_lo = len(verts)
    verts.append([-length / 2 - radius, 0.0, 0.0])
    for i in range(cap_rings - 1, 0, -1):
        th = (np.pi / 2) * i / cap_rings
        add_ring(-length / 2 - radius * np.sin(th), radius * np.cos(th))
    for x in np.linspace(-length / 2, length / 2, n_along + 1):
        add_ring(x, radius)
    for i in range(1, cap_rings):
        th = (np.pi / 2) * i / cap_rings
        add_ring(length / 2 + radius * np.sin(th), radius * np.cos(th))
    apex_hi = len(verts)
    verts.append([length / 2 + radius, 0.0, 0.0])

    tris = []
    first, last = rings[0], rings[-1]
    for j in range(n_around):
        tris.append([apex_lo, first[(j + 1) % n_around], first[j]])
        tris.append([apex_hi, last[j], last[(j + 1) % n_around]])
    for k in range(len(rings) - 1):
        r0, r1 = rings[k], rings[k + 1]
        for j in range(n_around):
            a, b = r0[j], r0[(j + 1) % n_around]
            c, d = r1[j], r1[(j + 1) % n_around]
            tris.append([a, d, c])
            tris.append([a, b, d])
    return TriangleMesh(verts, tris)


def open_tube(radius=0.06, length=0.3, n_around=24, n_along=16, x0=0.0,
              axis_offset=(0.0, 0.0)):
    """Open cylinder (two boundary loops) along +x, e.g. a sleeve."""
    verts = []
    tris = []
    xs = np.linspace(x0, x0 + length, n_along + 1)
    oy, oz = axis_offset
    for x in xs:
        for j in range(n_around):
            a = 2 * np.pi * j / n_around
            verts.append([x, oy + radius * np.cos(a), oz + radius * np.sin(a)])

    def vid(i, j):
        return i * n_around + (j % n_around)

    for i in range(n_along):
        for j in range(n_around):
            a, b = vid(i, j), vid(i, j + 1)
            c, d = vid(i + 1, j), vid(i + 1, j + 1)
            tris.append([a, d, c])
            tris.append([a, b, d])
    return TriangleMesh(verts, tris)


def bend_about_joint(mesh, joint_x=0.0, angle=np.pi / 2, axis=(0, 0, 1),
                     ramp=0.06):
    """Bend everything past ``joint_x`` about a z-parallel hinge at the joint.

    The rotation angle ramps smoothly from 0 to ``angle`` over ``ramp``
    meters past the joint, which keeps the mapping continuous and the
    connectivity unchanged (same mesh in a new pose).
    """
    from scipy.spatial.transform import Rotation

    v = mesh.vertices.copy()
    ax = np.asarray(axis, dtype=np.float64)
    ax = ax / np.linalg.norm(ax)
    s = (v[:, 0] - joint_x) / max(ramp, 1e-9)
    s = np.clip(s, 0.0, 1.0)
    w = s * s * (3 - 2 * s)  # smoothstep
    pivot = np.array([joint_x, 0.0, 0.0])
    rel = v - pivot
    out = v.copy()
    moving = w > 0
    rots = Rotation.from_rotvec(np.outer(w[moving] * angle, ax))
    out[moving] = pivot + rots.apply(rel[moving])
    return TriangleMesh(out, mesh.triangles.copy(), check=False)
