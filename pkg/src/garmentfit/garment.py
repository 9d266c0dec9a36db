"""Garment design tools: boundary drawing, region extraction, extension,
paint-based enlargement, comfort offset, pinning, and seam cutting.

A garment holds two connectivity-identical meshes: the rest shape (the one
being optimized) and the simulation shape (current drape). All tools are
deterministic and return new states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import (TriangleMesh, MeshError, SurfaceLocator, vector_area,
                   shortest_edge_path)
from .polyline import BarycentricPolyline, polyline_from_vertex_path, \
    smooth_polyline
from .cut import extract_region, embed_polyline, cut_along_chain
from .remesh import isotropic_remesh
from .adapt import arap_stitch, _face_frames

__all__ = [
    "GarmentState",
    "DesignSession",
    "boundary_create",
    "garment_from_region",
    "garment_extend",
    "garment_paint",
    "garment_set_offset",
    "garment_pin",
    "garment_unpin",
    "garment_cut_seam",
]


@dataclass(frozen=True)
class GarmentState:
    """Rest shape, simulated shape, and design attributes of one garment.

    Attributes
    ----------
    rest_mesh, sim_mesh : TriangleMesh
        Share a single triangle list.
    velocities : ndarray, shape (n, 3)
    pins : dict
        Garment vertex index -> (avatar face index, barycentric weights).
    paint_factors : ndarray, shape (n_faces,)
        Per-face enlargement factors, all >= 1.
    comfort_offset : float
        Minimum body clearance in meters.
    seams : list of BarycentricPolyline
        Seam curves recorded on the rest mesh.
    """

    rest_mesh: TriangleMesh
    sim_mesh: TriangleMesh
    velocities: np.ndarray
    pins: dict = field(default_factory=dict)
    paint_factors: np.ndarray = None
    comfort_offset: float = 0.0
    seams: list = field(default_factory=list)

    def __post_init__(self):
        if not np.array_equal(self.rest_mesh.triangles,
                              self.sim_mesh.triangles):
            raise MeshError("rest and sim meshes must share connectivity")
        if self.paint_factors is None:
            object.__setattr__(self, "paint_factors",
                               np.ones(self.rest_mesh.n_faces))
        if np.any(np.asarray(self.paint_factors) < 1.0):
            raise MeshError("paint factors must be >= 1")
        if self.comfort_offset < 0:
            raise MeshError("comfort offset must be nonnegative")

    def with_rest_mesh(self, new_rest):
        """Replace the rest mesh (connectivity must be unchanged)."""
        return replace(self, rest_mesh=new_rest)

    def with_sim_positions(self, positions, velocities=None):
        """Replace the simulated positions (and optionally velocities)."""
        sim = TriangleMesh(np.asarray(positions, dtype=np.float64),
                           self.sim_mesh.triangles, check=False)
        vel = self.velocities if velocities is None \
            else np.asarray(velocities, dtype=np.float64)
        return replace(self, sim_mesh=sim, velocities=vel)

    @classmethod
    def from_rest(cls, rest_mesh, **kw):
        """A garment at rest: sim shape equal to the rest shape, at rest."""
        sim = TriangleMesh(rest_mesh.vertices.copy(), rest_mesh.triangles,
                           check=False)
        return cls(rest_mesh, sim, np.zeros((rest_mesh.n_vertices, 3)), **kw)


@dataclass
class DesignSession:
    """One design workflow: avatar poses, drawn boundaries, and a garment."""

    poses: object
    active_pose: int = 0
    garment: GarmentState = None
    boundaries: list = field(default_factory=list)

    @property
    def avatar(self):
        if not 0 <= self.active_pose < len(self.poses):
            raise MeshError("active pose index out of range")
        return self.poses.poses[self.active_pose]


def boundary_create(session, clicked_vertices, smooth_iterations=10):
    """Draw a closed boundary through clicked avatar vertices.

    Consecutive clicks are joined by shortest edge paths (the loop closes
    from the last click to the first), converted to barycentric form, and
    smoothed on the surface. The result is stored on the session so it
    transfers to every pose.
    """
    if len(clicked_vertices) < 3:
        raise MeshError("a boundary needs at least 3 clicked vertices")
    avatar = session.avatar
    path = []
    clicks = [int(v) for v in clicked_vertices]
    for a, b in zip(clicks, clicks[1:] + clicks[:1]):
        seg = shortest_edge_path(avatar, a, b)
        path.extend(seg[:-1])
    loop = polyline_from_vertex_path(avatar, path, closed=True)
    loop = smooth_polyline(avatar, loop, iterations=smooth_iterations)
    session.boundaries.append(loop)
    return loop


def garment_from_region(session, seed, target_edge):
    """Create a garment from the boundary-enclosed region.

    The region around ``seed`` (an avatar face index or a 3D point) is
    extracted, remeshed to the target edge length, and duplicated into the
    initial garment: simulation shape equal to the rest shape, zero
    velocities, unit paint factors, zero offset.
    """
    if not session.boundaries:
        raise MeshError("draw at least one boundary first")
    region = extract_region(session.avatar, session.boundaries, seed)
    rest = isotropic_remesh(region, target_edge)
    garment = GarmentState.from_rest(rest)
    session.garment = garment
    return garment


def garment_extend(garment, boundary_loop_index, target_point):
    """Extend the garment at one of its open boundaries.

    An axis is built from the loop centroid and its normalized vector
    area. The loop is duplicated, translated along the axis so its
    centroid plane contains the target's axial projection, and scaled
    radially by the target's radial-distance ratio (a target on the axis
    keeps the radius). A triangle band connects loop and duplicate; the
    result is remeshed and the simulation shape reset. Pins and seams are
    cleared because the topology changes.
    """
    rest = garment.rest_mesh
    loops = rest.boundary_loops()
    if not 0 <= boundary_loop_index < len(loops):
        raise MeshError(f"boundary loop {boundary_loop_index} does not exist"
                        f" ({len(loops)} loops present)")
    loop = list(loops[boundary_loop_index])
    pts = rest.vertices[loop]
    c = pts.mean(axis=0)
    va = vector_area(pts)
    nva = np.linalg.norm(va)
    if nva < 1e-14:
        raise MeshError("boundary loop has no usable axis (zero vector area)")
    axis = va / nva

    # orient the axis away from the garment body
    if axis @ (c - rest.vertices.mean(axis=0)) < 0:
        axis = -axis
    rel = np.asarray(target_point, dtype=np.float64) - c
    s = float(rel @ axis)
    if s <= 0:
        raise MeshError("extension target lies behind the garment interior")
    r_target = np.linalg.norm(rel - (rel @ axis) * axis)
    radial = pts - c - np.outer(pts @ axis - c @ axis, axis)
    r0 = np.linalg.norm(radial, axis=1).mean()
    scale = 1.0 if r_target < 1e-12 or r0 < 1e-12 else r_target / r0

    dup_pts = pts + s * axis[None, :] + (scale - 1.0) * radial

    nv = rest.n_vertices
    new_verts = np.vstack([rest.vertices, dup_pts])
    dup_ids = {v: nv + k for k, v in enumerate(loop)}
    tris = [list(t) for t in rest.triangles]
    n = len(loop)
    for i in range(n):
        a, b = loop[i], loop[(i + 1) % n]
        da, db = dup_ids[a], dup_ids[b]
        # boundary edges are traversed (a -> b) by the loop; the band
        # triangles traverse (b -> a) to keep the mesh orientable
        tris.append([b, a, da])
        tris.append([b, da, db])
    extended = TriangleMesh(new_verts, tris, check=False)

    edge_lengths = np.linalg.norm(
        rest.vertices[rest.edges()[:, 0]] - rest.vertices[rest.edges()[:, 1]],
        axis=1)
    target_edge = float(np.median(edge_lengths))
    remeshed = isotropic_remesh(extended, target_edge)
    return GarmentState.from_rest(remeshed,
                                  comfort_offset=garment.comfort_offset)


def garment_paint(garment, face_weights, max_scale=1.5):
    """Enlarge painted triangles by re-stitching scaled targets.

    Per-face factors are ``1 + weight * (max_scale - 1)``; each painted
    triangle's 2D rest shape is scaled by its factor and the rest mesh
    re-stitched with pinned vertices held fixed. Zero weights are an exact
    identity.
    """
    w = np.asarray(face_weights, dtype=np.float64)
    if w.shape != (garment.rest_mesh.n_faces,):
        raise MeshError("one weight per face required")
    if np.any(w < 0) or np.any(w > 1):
        raise MeshError("paint weights must lie in [0, 1]")
    if max_scale < 1:
        raise MeshError("max_scale must be >= 1")
    factors = 1.0 + w * (max_scale - 1.0)
    if np.all(w == 0):
        return replace(garment, paint_factors=factors)
    frames = _face_frames(garment.rest_mesh)
    targets = factors[:, None, None] * frames
    fixed = sorted(garment.pins) if garment.pins else ()
    new_rest = arap_stitch(garment.rest_mesh, targets, fixed=fixed)
    return replace(garment, rest_mesh=new_rest, paint_factors=factors)


def garment_set_offset(garment, distance):
    """Set the minimum body clearance in meters.

    The current drape is nudged along (area-weighted) vertex normals by the
    change in offset so the cloth starts on the new offset surface instead
    of being slammed there by the first collision projection.
    """
    if distance < 0:
        raise MeshError("comfort offset must be nonnegative")
    if distance > 0.1:
        raise MeshError("comfort offset above 0.1 m is not supported")
    delta = float(distance) - garment.comfort_offset
    sim = garment.sim_mesh
    if delta != 0.0 and sim.n_faces:
        fn = sim.face_normals() * sim.face_areas()[:, None]
        vn = np.zeros((sim.n_vertices, 3))
        np.add.at(vn, sim.triangles.ravel(), np.repeat(fn, 3, axis=0))
        norms = np.linalg.norm(vn, axis=1, keepdims=True)
        vn = np.where(norms > 1e-14, vn / np.maximum(norms, 1e-14), 0.0)
        garment = garment.with_sim_positions(sim.vertices + delta * vn,
                                             garment.velocities)
    return replace(garment, comfort_offset=float(distance))


def garment_pin(garment, avatar_pose, vertices):
    """Pin garment vertices to their closest body points.

    Each pinned vertex stores the barycentric closest-point anchor on the
    given pose; simulation slaves it to that anchor on the current body and
    rest-shape stitching holds its rest position fixed.
    """
    vids = sorted(set(int(v) for v in vertices))
    for v in vids:
        if not 0 <= v < garment.sim_mesh.n_vertices:
            raise MeshError(f"vertex {v} out of range")
    locator = SurfaceLocator(avatar_pose)
    faces, bary, _ = locator.closest(garment.sim_mesh.vertices[vids])
    pins = dict(garment.pins)
    for v, f, b in zip(vids, faces, bary):
        pins[v] = (int(f), np.clip(b, 0.0, 1.0) / max(np.clip(b, 0, 1).sum(),
                                                      1e-12))
    return replace(garment, pins=pins)


def garment_unpin(garment, vertices=None):
    """Release pins (all of them when ``vertices`` is None)."""
    if vertices is None:
        return replace(garment, pins={})
    pins = {v: a for v, a in garment.pins.items()
            if v not in set(int(u) for u in vertices)}
    return replace(garment, pins=pins)


def garment_cut_seam(garment, curve):
    """Cut the garment along a seam curve.

    The curve is embedded into the rest mesh, the same splits are applied
    to the simulation mesh through the shared connectivity, and both meshes
    are opened along the chain: interior chain vertices are duplicated and
    one side re-wired, preserving total area exactly. A closed separating
    curve yields two connected components.
    """
    rest = garment.rest_mesh
    res = embed_polyline(rest, curve)
    emb_rest = res.mesh

    # position new vertices on the sim mesh via their rest barycentric
    # coordinates (vertex ids below the old count are preserved)
    n_old = rest.n_vertices
    sim_v = np.vstack([garment.sim_mesh.vertices,
                       np.zeros((emb_rest.n_vertices - n_old, 3))])
    vel = np.vstack([garment.velocities,
                     np.zeros((emb_rest.n_vertices - n_old, 3))])
    if emb_rest.n_vertices > n_old:
        new_pts = emb_rest.vertices[n_old:]
        faces, bary, _ = SurfaceLocator(rest).closest(new_pts)
        for k, (f, b) in enumerate(zip(faces, bary)):
            tri = rest.triangles[f]
            sim_v[n_old + k] = b @ garment.sim_mesh.vertices[tri]
            vel[n_old + k] = b @ garment.velocities[tri]

    cut_rest, dup_of = cut_along_chain(emb_rest, res.chain, res.closed)
    # apply the identical duplications to sim positions and velocities
    dup_sources = [v for v, _ in sorted(dup_of.items(),
                                        key=lambda kv: kv[1])]
    sim_v = np.vstack([sim_v, sim_v[dup_sources]]) if dup_sources else sim_v
    vel = np.vstack([vel, vel[dup_sources]]) if dup_sources else vel
    cut_sim = TriangleMesh(sim_v, cut_rest.triangles, check=False)

    factors = garment.paint_factors[res.face_parents]
    pins = {}
    for v, anchor in garment.pins.items():
        pins[v] = anchor
        if v in dup_of:
            pins[dup_of[v]] = anchor
    return replace(garment, rest_mesh=cut_rest, sim_mesh=cut_sim,
                   velocities=vel, paint_factors=factors, pins=pins,
                   seams=list(garment.seams) + [curve])
