from .finger import FINGER_CLEARANCE, check_frame, finger_collides, free_angles
from .mesh import RayHit, SurfaceModel, load_surface, write_colored_ply, write_obj, write_ply
from .raycast import RAY_EPS, point_segment_distance
from .segment import PatchGraph, SurfacePatch, ray_intersections, segment_surface

__all__ = [
    "FINGER_CLEARANCE", "RAY_EPS", "PatchGraph", "RayHit", "SurfaceModel", "SurfacePatch",
    "check_frame", "finger_collides", "free_angles", "load_surface", "point_segment_distance",
    "ray_intersections", "segment_surface", "write_colored_ply", "write_obj", "write_ply",
]
