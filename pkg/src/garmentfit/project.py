"""Versioned project files, command-log replay, and the batch pipeline.

A project bundles a pose-manifest reference, an ordered log of design-tool
commands, simulation parameters, the pose schedule, and export settings.
Replaying the command log against the manifest reproduces the garment
deterministically, which makes every interactive session reproducible
headlessly and is the basis of the export determinism contract.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mesh import MeshError, save_obj
from .cloth import SimParams
from .garment import (DesignSession, boundary_create, garment_from_region,
                      garment_extend, garment_paint, garment_set_offset,
                      garment_pin, garment_cut_seam)
from .polyline import BarycentricPolyline
from .poses import load_pose_manifest, make_schedule
from .adapt import run_adaptation, principal_stretches

PROJECT_VERSION = 1

#: record type -> required fields
_TOOL_FIELDS = {
    "pose_active": ("index",),
    "boundary": ("vertices",),
    "region": ("seed", "target_edge"),
    "extend": ("loop", "target"),
    "paint": ("weights", "max_scale"),
    "offset": ("distance",),
    "pin": ("vertices",),
    "seam": ("polyline",),
}


class ProjectError(MeshError):
    """Raised for malformed or incompatible project files."""


@dataclass
class Project:
    """A replayable design project.

    Attributes
    ----------
    pose_manifest : str
        Path to the pose-manifest JSON, relative to the project file.
    commands : list of dict
        Ordered tool records; replaying them reproduces the garment.
    params : SimParams
        Simulation and adaptation parameters.
    schedule : list of int
        Pose order by manifest index; consecutive pairs are interpolated.
    runner : dict
        Options forwarded to the adaptation runner (sweeps, reps_per_entry,
        settle_budget, sdf_resolution, rest_velocity).
    export : dict
        Export settings (directory, figure toggle).
    """

    pose_manifest: str
    commands: list = field(default_factory=list)
    params: SimParams = field(default_factory=SimParams)
    schedule: list = field(default_factory=lambda: [0])
    runner: dict = field(default_factory=dict)
    export: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "version": PROJECT_VERSION,
            "pose_manifest": self.pose_manifest,
            "commands": list(self.commands),
            "params": self.params.to_dict(),
            "schedule": list(self.schedule),
            "runner": dict(self.runner),
            "export": dict(self.export),
        }


def validate_commands(commands):
    """Check every record names a known tool and carries its fields."""
    for i, rec in enumerate(commands):
        tool = rec.get("tool")
        if tool not in _TOOL_FIELDS:
            raise ProjectError(f"record {i}: unknown tool type {tool!r}")
        missing = [f for f in _TOOL_FIELDS[tool] if f not in rec]
        if missing:
            raise ProjectError(
                f"record {i}: tool {tool!r} missing fields {missing}")


def project_load(path):
    """Load a project file, rejecting version mismatches."""
    with open(path) as fh:
        doc = json.load(fh)
    found = doc.get("version")
    if found != PROJECT_VERSION:
        raise ProjectError(
            f"project schema version mismatch: expected {PROJECT_VERSION}, "
            f"found {found}")
    commands = doc.get("commands", [])
    validate_commands(commands)
    return Project(
        pose_manifest=doc["pose_manifest"],
        commands=commands,
        params=SimParams.from_dict(doc.get("params", {})),
        schedule=list(doc.get("schedule", [0])),
        runner=dict(doc.get("runner", {})),
        export=dict(doc.get("export", {})),
    )


def project_save(project, path):
    """Write the project as versioned JSON (meshes stay in OBJ sidecars)."""
    with open(path, "w") as fh:
        json.dump(project.to_dict(), fh, indent=2)
        fh.write("\n")


def apply_command(session, rec):
    """Apply one tool record to a design session (mutates the session)."""
    tool = rec["tool"]
    if tool == "pose_active":
        i = int(rec["index"])
        if not 0 <= i < len(session.poses):
            raise ProjectError(f"pose index {i} out of range")
        session.active_pose = i
        return
    if tool == "boundary":
        boundary_create(session, [int(v) for v in rec["vertices"]])
        return
    if tool == "region":
        session.garment = garment_from_region(
            session, int(rec["seed"]), float(rec["target_edge"]))
        return
    if session.garment is None:
        raise ProjectError(f"tool {tool!r} requires a garment")
    g = session.garment
    if tool == "extend":
        session.garment = garment_extend(
            g, int(rec["loop"]), np.asarray(rec["target"], dtype=float))
    elif tool == "paint":
        w = rec["weights"]
        weights = (np.full(g.rest_mesh.n_faces, float(w))
                   if np.isscalar(w) else np.asarray(w, dtype=float))
        session.garment = garment_paint(g, weights, float(rec["max_scale"]))
    elif tool == "offset":
        session.garment = garment_set_offset(g, float(rec["distance"]))
    elif tool == "pin":
        session.garment = garment_pin(
            g, session.avatar, [int(v) for v in rec["vertices"]])
    elif tool == "seam":
        session.garment = garment_cut_seam(
            g, BarycentricPolyline.from_dict(rec["polyline"]))
    else:  # pragma: no cover - validate_commands guards this
        raise ProjectError(f"unknown tool type {tool!r}")


def replay_commands(session, commands):
    """Replay a validated command log against a fresh session."""
    validate_commands(commands)
    for rec in commands:
        apply_command(session, rec)
    return session


def open_session(project, root="."):
    """Build the design session a project describes (without replaying)."""
    manifest = Path(root) / project.pose_manifest
    poses = load_pose_manifest(manifest)
    return DesignSession(poses=poses, active_pose=0)


def _export_stretch_figure(report, stretch, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    if len(report):
        idx = [r["pass_index"] for r in report]
        ax1.plot(idx, [r["max_stretch_before"] for r in report],
                 label="before pass", lw=1.0)
        ax1.plot(idx, [r["max_stretch_after"] for r in report],
                 label="after pass", lw=1.0)
        ax1.set_xlabel("adaptation pass")
        ax1.set_ylabel("max principal stretch")
        ax1.legend(frameon=False)
    ax2.hist(stretch, bins=40, color="tab:red")
    ax2.set_xlabel("per-face principal stretch")
    ax2.set_ylabel("faces")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def run_batch(project, out_dir, root=".", on_pass=None):
    """Replay the project's command log, adapt, and export all artifacts.

    Writes the final rest mesh (``rest.obj``), one OBJ per seam-separated
    connected component (``piece_*.obj``), the per-face stretch channel
    (``stretch.csv``), the adaptation log (``report.ndjson``), and a
    stretch figure (``report.png``) unless disabled in the export settings.

    Returns (garment, report); ``report.converged`` distinguishes clean
    convergence from budget exhaustion.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    session = open_session(project, root=root)
    replay_commands(session, project.commands)
    if session.garment is None:
        raise ProjectError("command log builds no garment")
    schedule = make_schedule(session.poses, project.schedule)
    garment, report = run_adaptation(
        session, schedule, project.params,
        sdf_resolution=int(project.runner.get("sdf_resolution", 32)),
        settle_budget=int(project.runner.get("settle_budget", 200)),
        sweeps=int(project.runner.get("sweeps", 1)),
        reps_per_entry=int(project.runner.get("reps_per_entry", 1)),
        rest_velocity=float(project.runner.get("rest_velocity", 0.05)),
        on_pass=on_pass)

    rest = garment.rest_mesh
    save_obj(rest, out / "rest.obj")
    labels, n_comp = rest.connected_components()
    for i in range(n_comp):
        piece, _ = rest.submesh(np.flatnonzero(labels == i))
        save_obj(piece, out / f"piece_{i:03d}.obj")

    stretch = principal_stretches(rest, garment.sim_mesh.vertices)[:, 0]
    np.savetxt(out / "stretch.csv", stretch, fmt="%.9g",
               header="per-face max principal stretch", comments="# ")
    with open(out / "report.ndjson", "w") as fh:
        fh.write(report.to_ndjson())
    if project.export.get("figure", True):
        _export_stretch_figure(report, stretch, out / "report.png")
    return garment, report
