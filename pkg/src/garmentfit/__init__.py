"""Garment design across body poses.

Rest-shape adaptation for simulated garments: draw pattern pieces on a
posed avatar, simulate them across a pose schedule, and grow the rest
shape wherever the cloth overstretches until every pose fits within the
configured stretch bound.
"""

from .mesh import (MeshError, NoPathError, DegenerateTriangleError,
                   TriangleMesh, SurfaceLocator, shortest_edge_path,
                   vector_area, local_frame_2d, local_frames_2d,
                   load_obj, save_obj)
from .polyline import PolylineError, BarycentricPolyline
from .primitives import (grid_plane, icosphere, uv_sphere, capped_cylinder,
                         open_tube, bend_about_joint)
from .sdf import SignedDistanceField, build_sdf
from .remesh import isotropic_remesh
from .cut import RegionError, embed_polyline, extract_region
from .poses import (PoseSet, PoseSchedule, PoseValidationError,
                    validate_pose_set, interpolate_poses,
                    PosePairInterpolator, make_schedule, load_pose_manifest)
from .cloth import (SimParams, SimState, ClothModel, SolverError, step,
                    resolve_collisions)
from .garment import (GarmentState, DesignSession, boundary_create,
                      garment_from_region, garment_extend, garment_paint,
                      garment_set_offset, garment_pin, garment_unpin,
                      garment_cut_seam)
from .adapt import (OrientationError, DeformationGradient, AdaptReport,
                    deformation_gradient, deformation_gradients,
                    stretch_measure, clip_gradient, clip_sigmas,
                    target_rest_triangle, arap_stitch, adapt_pass,
                    principal_stretches, max_principal_stretch,
                    run_adaptation)
from .project import (Project, ProjectError, validate_commands,
                      project_load, project_save, apply_command,
                      replay_commands, open_session, run_batch)

__version__ = "0.1.0"

__all__ = [
    "MeshError", "NoPathError", "DegenerateTriangleError", "TriangleMesh",
    "SurfaceLocator", "shortest_edge_path", "vector_area", "local_frame_2d",
    "local_frames_2d", "load_obj", "save_obj",
    "PolylineError", "BarycentricPolyline",
    "grid_plane", "icosphere", "uv_sphere", "capped_cylinder", "open_tube",
    "bend_about_joint",
    "SignedDistanceField", "build_sdf",
    "isotropic_remesh",
    "RegionError", "embed_polyline", "extract_region",
    "PoseSet", "PoseSchedule", "PoseValidationError", "validate_pose_set",
    "interpolate_poses", "PosePairInterpolator", "make_schedule",
    "load_pose_manifest",
    "SimParams", "SimState", "ClothModel", "SolverError", "step",
    "resolve_collisions",
    "GarmentState", "DesignSession", "boundary_create",
    "garment_from_region", "garment_extend", "garment_paint",
    "garment_set_offset", "garment_pin", "garment_unpin",
    "garment_cut_seam",
    "OrientationError", "DeformationGradient", "AdaptReport",
    "deformation_gradient", "deformation_gradients", "stretch_measure",
    "clip_gradient", "clip_sigmas", "target_rest_triangle", "arap_stitch",
    "adapt_pass", "principal_stretches", "max_principal_stretch",
    "run_adaptation",
    "Project", "ProjectError", "validate_commands", "project_load",
    "project_save", "apply_command", "replay_commands", "open_session",
    "run_batch",
    "__version__",
]
