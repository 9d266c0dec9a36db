"""Cloth simulation: stretch/shear/bend forces with implicit integration.

The material model penalizes per-triangle condition functions — warp/weft
elongation and their non-orthogonality — plus a dihedral hinge bending term.
Each time step solves one linear system
``(M − h ∂f/∂v − h² ∂f/∂x) Δv = h (f + h ∂f/∂x v)``
with pinned vertices slaved to body anchors, followed by signed-distance
collision projection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, cg, LinearOperator

from .mesh import TriangleMesh, MeshError, local_frames_2d

__all__ = [
    "SimParams",
    "SimState",
    "ClothModel",
    "SolverError",
    "step",
    "resolve_collisions",
]

DENSITY = 0.15  # areal density, kg/m^2


class SolverError(MeshError):
    """Raised when the implicit solve fails to reach its residual target."""


@dataclass(frozen=True)
class SimParams:
    """Simulation and adaptation parameters.

    Stiffnesses are model-space constants; ``h`` is the time step in
    seconds, ``delta`` the allowed stretch threshold, ``adapt_every`` the
    number of simulation steps between rest-shape updates.
    """

    k_stretch: float = 800.0
    k_shear: float = 200.0
    k_bend: float = 1e-6
    kd_stretch: float = 100.0
    kd_shear: float = 1.0
    kd_bend: float = 1e-5
    h: float = 0.0025
    gravity: tuple = (0.0, -9.81, 0.0)
    contact_damping: float = 0.1
    delta: float = 0.1
    adapt_every: int = 8
    steps_per_transition: int = 60

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("time step must be positive")
        if self.delta <= 0:
            raise ValueError("stretch threshold must be positive")
        for name in ("k_stretch", "k_shear", "k_bend",
                     "kd_stretch", "kd_shear", "kd_bend",
                     "contact_damping"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_dict(self):
        d = asdict(self)
        d["gravity"] = list(self.gravity)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "gravity" in d:
            d["gravity"] = tuple(float(g) for g in d["gravity"])
        return cls(**d)


@dataclass
class SimState:
    """Mutable simulation state: positions, velocities, clock, and body."""

    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0
    body: TriangleMesh = None
    sdf: object = None
    pose: tuple = None

    def copy(self):
        return SimState(self.positions.copy(), self.velocities.copy(),
                        self.time, self.body, self.sdf, self.pose)


def _hinges(mesh):
    """Interior edges as (x0, x1, x2, x3): shared edge + opposite vertices."""
    edges, ef = mesh._edge_data()
    out = []
    for (a, b), faces in zip(edges, ef):
        if len(faces) != 2:
            continue
        opp = []
        for f in faces:
            tri = mesh.triangles[f]
            o = [v for v in tri if v != a and v != b]
            opp.append(int(o[0]))
        out.append((int(a), int(b), opp[0], opp[1]))
    if not out:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array(out, dtype=np.int64)


class ClothModel:
    """Precomputed quantities of a fixed rest shape.

    Rebuild whenever the rest mesh changes (the adaptation loop does this
    once per rest-shape update).
    """

    def __init__(self, rest_mesh, density=DENSITY, like=None):
        self.rest = rest_mesh
        tri = rest_mesh.triangles
        areas = rest_mesh.face_areas()
        good = areas > 1e-14
        if not np.all(good):
            warnings.warn(f"{int((~good).sum())} degenerate rest triangles "
                          "excluded from the material model")
        self.face_mask = good
        self.areas = np.where(good, areas, 1.0)
        Dm_inv = np.zeros((len(tri), 2, 2))
        if good.any():
            corners = rest_mesh.vertices[tri[good]]
            Dm_inv[good] = np.linalg.inv(local_frames_2d(corners))
        # derivative coefficients of w_u, w_v w.r.t. the three vertices
        a, b = Dm_inv[:, 0, 0], Dm_inv[:, 0, 1]
        c, d = Dm_inv[:, 1, 0], Dm_inv[:, 1, 1]
        self.du = np.stack([-(a + c), a, c], axis=1)   # (F, 3)
        self.dv = np.stack([-(b + d), b, d], axis=1)
        self.Dm_inv = Dm_inv
        # hinges and the sparse assembly pattern depend on topology only,
        # so they can be copied from a previous model of the same mesh
        # connectivity
        if (like is not None and like.rest.n_vertices == rest_mesh.n_vertices
                and np.array_equal(like.rest.triangles, tri)):
            self.hinges = like.hinges
            self._pattern = like._pattern
        else:
            self.hinges = _hinges(rest_mesh)
            self._pattern = _csc_pattern(tri, self.hinges,
                                         rest_mesh.n_vertices)
        # a rest edit moves the step matrix too far for stale factors to
        # precondition well, so every model starts with an empty cache
        self._factor_cache = {}
        # lumped vertex masses
        m = np.zeros(rest_mesh.n_vertices)
        np.add.at(m, tri.ravel(),
                  np.repeat(self.areas * self.face_mask, 3) / 3.0)
        self.masses = np.maximum(m * density, 1e-12)

    # ------------------------------------------------------------------
    def _wuv(self, x):
        tri = self.rest.triangles
        E = np.stack([x[tri[:, 1]] - x[tri[:, 0]],
                      x[tri[:, 2]] - x[tri[:, 0]]], axis=2)  # (F, 3, 2)
        W = E @ self.Dm_inv                                   # (F, 3, 2)
        return W[:, :, 0], W[:, :, 1]

    def stretch_shear(self, x, v, k_st, k_sh, kd_st, kd_sh):
        """Forces, energy, and Jacobian triplets of the in-plane terms."""
        tri = self.rest.triangles
        nf = len(tri)
        wu, wv = self._wuv(x)
        lu = np.linalg.norm(wu, axis=1)
        lv = np.linalg.norm(wv, axis=1)
        lu_s = np.maximum(lu, 1e-12)
        lv_s = np.maximum(lv, 1e-12)
        hu = wu / lu_s[:, None]
        hv = wv / lv_s[:, None]
        a = self.areas * self.face_mask
        Cu = lu - 1.0
        Cv = lv - 1.0
        Cs = np.einsum("fi,fi->f", wu, wv)

        # condition gradients: (F, 3 verts, 3 coords)
        Gu = self.du[:, :, None] * hu[:, None, :]
        Gv = self.dv[:, :, None] * hv[:, None, :]
        Gs = (self.du[:, :, None] * wv[:, None, :]
              + self.dv[:, :, None] * wu[:, None, :])

        vtri = v[tri]                                         # (F, 3, 3)
        Cu_dot = np.einsum("fij,fij->f", Gu, vtri)
        Cv_dot = np.einsum("fij,fij->f", Gv, vtri)
        Cs_dot = np.einsum("fij,fij->f", Gs, vtri)

        f_face = -(k_st * a * Cu + kd_st * a * Cu_dot)[:, None, None] * Gu
        f_face -= (k_st * a * Cv + kd_st * a * Cv_dot)[:, None, None] * Gv
        f_face -= (k_sh * a * Cs + kd_sh * a * Cs_dot)[:, None, None] * Gs

        energy = 0.5 * np.sum(a * (k_st * (Cu**2 + Cv**2) + k_sh * Cs**2))

        # --- Jacobian blocks (F, 3, 3, 3, 3): [face, i, j, 3x3] ---
        eye = np.eye(3)
        Pu = (eye[None] - hu[:, :, None] * hu[:, None, :]) / lu_s[:, None, None]
        Pv = (eye[None] - hv[:, :, None] * hv[:, None, :]) / lv_s[:, None, None]
        dd_u = self.du[:, :, None] * self.du[:, None, :]      # (F, 3, 3)
        dd_v = self.dv[:, :, None] * self.dv[:, None, :]

        Guv = np.stack([Gu, Gv])
        OGuv = np.einsum("sfia,sfjb->fijab", Guv, Guv)
        OGs = np.einsum("fia,fjb->fijab", Gs, Gs)

        # Second-order (geometric) stiffness is kept only where it is
        # negative semi-definite: with C < 0 (compression) it would make
        # M - h^2 Dx indefinite and the implicit solve can step arbitrarily
        # far.  The shear geometric term is indefinite for either sign and
        # is dropped (Gauss-Newton).
        Cu_p = np.maximum(Cu, 0.0)
        Cv_p = np.maximum(Cv, 0.0)
        Kx = -(k_st * a)[:, None, None, None, None] * (
            OGuv
            + (Cu_p[:, None, None] * dd_u)[:, :, :, None, None] * Pu[:, None, None]
            + (Cv_p[:, None, None] * dd_v)[:, :, :, None, None] * Pv[:, None, None])
        Kx += -(k_sh * a)[:, None, None, None, None] * OGs
        Kv = -(kd_st * a)[:, None, None, None, None] * OGuv
        Kv += -(kd_sh * a)[:, None, None, None, None] * OGs

        return f_face, energy, Kx, Kv

    def bending(self, x, v, k_b, kd_b):
        """Hinge forces, energy, and Gauss-Newton Jacobian triplets."""
        H = self.hinges
        if len(H) == 0:
            z = np.zeros((0, 4, 3))
            return z, 0.0, np.zeros((0, 4, 4, 3, 3)), np.zeros((0, 4, 4, 3, 3))
        x0, x1, x2, x3 = (x[H[:, k]] for k in range(4))
        e0 = x1 - x0
        n1 = np.cross(x1 - x0, x2 - x0)
        n2 = np.cross(x3 - x0, x1 - x0)
        l_e = np.linalg.norm(e0, axis=1)
        l1 = np.maximum(np.einsum("ij,ij->i", n1, n1), 1e-24)
        l2 = np.maximum(np.einsum("ij,ij->i", n2, n2), 1e-24)
        he = e0 / np.maximum(l_e, 1e-12)[:, None]
        hn1 = n1 / np.sqrt(l1)[:, None]
        hn2 = n2 / np.sqrt(l2)[:, None]
        sin_t = np.einsum("ij,ij->i", np.cross(hn1, hn2), he)
        cos_t = np.einsum("ij,ij->i", hn1, hn2)
        theta = np.arctan2(sin_t, cos_t)

        g2 = -(l_e / l1)[:, None] * n1
        g3 = -(l_e / l2)[:, None] * n2
        c01 = np.einsum("ij,ij->i", x2 - x1, e0) / np.maximum(l_e, 1e-12)
        c02 = np.einsum("ij,ij->i", x2 - x0, e0) / np.maximum(l_e, 1e-12)
        c11 = np.einsum("ij,ij->i", x3 - x1, e0) / np.maximum(l_e, 1e-12)
        c12 = np.einsum("ij,ij->i", x3 - x0, e0) / np.maximum(l_e, 1e-12)
        g0 = -(c01 / l1)[:, None] * n1 - (c11 / l2)[:, None] * n2
        g1 = (c02 / l1)[:, None] * n1 + (c12 / l2)[:, None] * n2
        G = np.stack([g0, g1, g2, g3], axis=1)               # (E, 4, 3)

        vh = v[H]                                            # (E, 4, 3)
        theta_dot = np.einsum("eij,eij->e", G, vh)
        coef = k_b * theta + kd_b * theta_dot
        f = -coef[:, None, None] * G
        energy = 0.5 * k_b * np.sum(theta**2)

        GG = np.einsum("eia,ejb->eijab", G, G)
        Kx = -k_b * GG
        Kv = -kd_b * GG
        return f, energy, Kx, Kv

    # ------------------------------------------------------------------
    def assemble(self, x, v, params):
        """Total force vector, energy, and sparse Jacobians at (x, v)."""
        n = self.rest.n_vertices
        tri = self.rest.triangles
        f = np.zeros((n, 3))
        f_face, e_ss, Kx_f, Kv_f = self.stretch_shear(
            x, v, params.k_stretch, params.k_shear,
            params.kd_stretch, params.kd_shear)
        np.add.at(f, tri.ravel(), f_face.reshape(-1, 3))
        f_h, e_b, Kx_h, Kv_h = self.bending(
            x, v, params.k_bend, params.kd_bend)
        if len(self.hinges):
            np.add.at(f, self.hinges.ravel(), f_h.reshape(-1, 3))

        Dx = self._pattern.matrix(Kx_f, Kx_h)
        Dv = self._pattern.matrix(Kv_f, Kv_h)
        return f, e_ss + e_b, Dx, Dv

    def elastic_energy(self, x, params):
        """Total elastic energy at positions x (no damping, no gravity)."""
        v0 = np.zeros_like(x)
        _, e_ss, _, _ = self.stretch_shear(
            x, v0, params.k_stretch, params.k_shear, 0.0, 0.0)
        _, e_b, _, _ = self.bending(x, v0, params.k_bend, 0.0)
        return e_ss + e_b


class _CscPattern:
    """Fixed-topology scatter of per-element vertex-pair blocks into CSC.

    The expensive duplicate merge and column sort happen once; each
    assembly is then a single weighted bincount.
    """

    def __init__(self, tri, hinges, n):
        rows, cols = [], []
        for idx in (tri, hinges):
            if len(idx) == 0:
                continue
            k = idx.shape[1]
            E = idx.shape[0]
            vi = np.repeat(idx, k, axis=1)              # (E, k*k) row vertex
            vj = np.tile(idx, (1, k))                   # (E, k*k) col vertex
            br = (3 * vi)[:, :, None, None] + np.arange(3)[None, None, :, None]
            bc = (3 * vj)[:, :, None, None] + np.arange(3)[None, None, None, :]
            rows.append(np.broadcast_to(br, (E, k * k, 3, 3)).ravel())
            cols.append(np.broadcast_to(bc, (E, k * k, 3, 3)).ravel())
        self.shape = (3 * n, 3 * n)
        if not rows:
            self.slot = np.zeros(0, dtype=np.int64)
            self.indices = np.zeros(0, dtype=np.int32)
            self.indptr = np.zeros(3 * n + 1, dtype=np.int32)
            self.nnz = 0
            self.diag_slots = None
            return
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        keys = c * np.int64(3 * n) + r                  # column-major order
        uniq, self.slot = np.unique(keys, return_inverse=True)
        self.nnz = len(uniq)
        self.indices = (uniq % (3 * n)).astype(np.int32)
        counts = np.bincount((uniq // (3 * n)).astype(np.int64),
                             minlength=3 * n)
        self.indptr = np.concatenate(
            [[0], np.cumsum(counts)]).astype(np.int32)
        dkeys = np.arange(3 * n, dtype=np.int64) * (3 * n + 1)
        ds = np.searchsorted(uniq, dkeys)
        if np.all(ds < self.nnz) and np.array_equal(uniq[ds], dkeys):
            self.diag_slots = ds
        else:                         # isolated vertices: no diagonal entry
            self.diag_slots = None

    def matrix(self, K_face, K_hinge):
        vals = [K_face.ravel()]
        if K_hinge.size:
            vals.append(K_hinge.ravel())
        data = np.bincount(self.slot, weights=np.concatenate(vals),
                           minlength=self.nnz)
        return sp.csc_matrix((data, self.indices, self.indptr),
                             shape=self.shape)


def _csc_pattern(tri, hinges, n):
    return _CscPattern(tri, hinges, n)


def pin_anchor_positions(pins, body, offset=0.0):
    """Evaluate pinned-vertex anchors on the given body mesh.

    Parameters
    ----------
    pins : dict
        Garment vertex index -> (avatar face index, barycentric weights).
    body : TriangleMesh
    offset : float
        Comfort offset; anchors are displaced this far along the anchor
        face normal so pinned vertices rest on the same offset surface as
        the collision-projected free vertices.
    """
    if not pins:
        return np.array([], dtype=np.int64), np.zeros((0, 3))
    vids = np.array(sorted(pins), dtype=np.int64)
    pos = np.empty((len(vids), 3))
    for k, vid in enumerate(vids):
        face, bary = pins[int(vid)]
        corners = body.vertices[body.triangles[face]]
        p = np.asarray(bary) @ corners
        if offset:
            n = np.cross(corners[1] - corners[0], corners[2] - corners[0])
            nl = np.linalg.norm(n)
            if nl > 1e-14:
                p = p + (offset / nl) * n
        pos[k] = p
    return vids, pos


def _spd_solve(model, key, A, b):
    """Solve the SPD step system ``A x = b``.

    The system drifts slowly between consecutive steps, so a cached LU
    factorization from an earlier step usually converges CG in a couple
    of iterations; the factorization is refreshed whenever CG stops
    making quick progress.
    """
    lu = model._factor_cache.get(key)
    if lu is not None and lu[1] == A.shape[0]:
        count = [0]

        def _cb(_):
            count[0] += 1

        sol, info = cg(A, b, rtol=1e-9, atol=0.0, maxiter=40,
                       M=LinearOperator(A.shape, lu[0].solve), callback=_cb)
        if info == 0:
            if count[0] > 25:
                # converged but slowly: refresh the factor for next step
                model._factor_cache[key] = (splu(A), A.shape[0])
            return sol
    lu = splu(A)
    model._factor_cache[key] = (lu, A.shape[0])
    return lu.solve(b)


def step(state, garment, params, model=None):
    """Advance the simulation by one implicit-Euler step of size ``h``.

    Pinned vertices are moved exactly onto their body anchors; the free
    vertices solve the linearized implicit system. Collision projection
    against the body SDF (if present on the state) runs afterwards.
    """
    if model is None:
        model = ClothModel(garment.rest_mesh)
    x = state.positions
    v = state.velocities
    n = len(x)
    h = params.h

    f, _, Dx, Dv = model.assemble(x, v, params)
    grav = np.asarray(params.gravity)
    f = f + model.masses[:, None] * grav[None, :]

    pat = model._pattern
    if pat.diag_slots is not None:
        data = -h * Dv.data - h * h * Dx.data
        data[pat.diag_slots] += np.repeat(model.masses, 3)
        A = sp.csc_matrix((data, pat.indices, pat.indptr), shape=pat.shape)
    else:
        M = sp.diags(np.repeat(model.masses, 3))
        A = (M - h * Dv - h * h * Dx).tocsc()
    b = h * (f.ravel() + h * (Dx @ v.ravel()))

    pin_ids, pin_pos = pin_anchor_positions(garment.pins, state.body,
                                            garment.comfort_offset) \
        if garment.pins and state.body is not None else \
        (np.array([], dtype=np.int64), np.zeros((0, 3)))

    dv = np.zeros(3 * n)
    if len(pin_ids):
        v_pin_new = (pin_pos - x[pin_ids]) / h
        dv_pin = v_pin_new - v[pin_ids]
        pin_dofs = (3 * pin_ids[:, None] + np.arange(3)).ravel()
        dv[pin_dofs] = dv_pin.ravel()
        free = np.setdiff1d(np.arange(3 * n), pin_dofs)
        b_free = b[free] - A[free][:, pin_dofs] @ dv[pin_dofs]
        A_free = A[free][:, free].tocsc()
        sol = _spd_solve(model, "pinned", A_free, b_free)
        res = np.linalg.norm(A_free @ sol - b_free)
        scale = max(np.linalg.norm(b_free), 1.0)
        if not np.all(np.isfinite(sol)) or res > 1e-6 * scale:
            raise SolverError(f"implicit solve rejected: residual {res:.3e}")
        dv[free] = sol
    else:
        Acsc = A.tocsc()
        sol = _spd_solve(model, "full", Acsc, b)
        res = np.linalg.norm(Acsc @ sol - b)
        if not np.all(np.isfinite(sol)) or res > 1e-6 * max(np.linalg.norm(b), 1.0):
            raise SolverError(f"implicit solve rejected: residual {res:.3e}")
        dv = sol

    new_v = v + dv.reshape(n, 3)
    new_x = x + h * new_v
    if len(pin_ids):
        new_x[pin_ids] = pin_pos
        new_v[pin_ids] = (pin_pos - x[pin_ids]) / h

    out = SimState(new_x, new_v, state.time + h, state.body, state.sdf,
                   state.pose)
    if state.sdf is not None:
        out = resolve_collisions(out, state.sdf, garment.comfort_offset,
                                 keep=pin_ids,
                                 contact_damping=params.contact_damping)
    return out


def resolve_collisions(state, sdf, offset, keep=None, contact_damping=0.0):
    """Project vertices out of the body to at least ``offset`` distance.

    Vertices with signed distance below the offset move along the SDF
    gradient until the distance equals the offset; their velocity component
    along the gradient is removed.  ``contact_damping`` additionally scales
    the tangential velocity of contact vertices by ``1 - contact_damping``
    per projection.  The damping vanishes at zero velocity, so it leaves
    quasi-static equilibria untouched while suppressing free tangential
    drift of an otherwise frictionless contact.
    """
    x = state.positions.copy()
    v = state.velocities.copy()
    d, g = sdf.query(x)
    mask = d < offset
    if keep is not None and len(keep):
        mask[keep] = False
    if np.any(mask):
        x[mask] += (offset - d[mask])[:, None] * g[mask]
        vn = np.einsum("ij,ij->i", v[mask], g[mask])
        vt = v[mask] - vn[:, None] * g[mask]
        if contact_damping > 0.0:
            vt *= 1.0 - contact_damping
        v[mask] = vt
    return SimState(x, v, state.time, state.body, state.sdf, state.pose)
