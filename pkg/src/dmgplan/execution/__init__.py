"""Kinematic execution of manipulation plans by two arms."""

from .push import find_push_point, finger_direction, rotation_depth
from .sim import SimConfig, SimState, Trajectory, config_error, grasp_pose, simulate_plan
from .twist import (K_P, V_MAX, EctsCommand, Twist, ects_compose, ects_matrix, ects_solve,
                    integrate_rotation, rotation_twist, swept_angle, translation_twist)

__all__ = [
    "EctsCommand", "K_P", "SimConfig", "SimState", "Trajectory", "Twist", "V_MAX",
    "config_error", "ects_compose", "ects_matrix", "ects_solve", "find_push_point",
    "finger_direction", "grasp_pose", "integrate_rotation", "rotation_depth", "rotation_twist",
    "simulate_plan", "swept_angle", "translation_twist",
]
