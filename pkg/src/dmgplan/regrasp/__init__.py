"""Regrasp planning for two parallel grippers."""

from .antipodal import (AntipodalPair, antipodal_candidates, antipodal_pair, approach_clear,
                        choose_step, compatible_steps, grasp_from_pair, segment_distance,
                        verify_grasp)
from .plan import PHASE_NAMES, PLAN_SCHEMA_VERSION, ManipulationPlan, Phase
from .planner import (GRIPPER_RADIUS, RegraspOptions, SupportPlan, bfs_nodes, can_open, canonical,
                      direct_regrasp_ok, dmg_search, grasp_separation, line_distance,
                      opposing_grasp, plan_first_gripper_regrasp, plan_first_gripper_release,
                      plan_second_gripper_grasp, score_support_candidates, support_score)

__all__ = [
    "AntipodalPair", "GRIPPER_RADIUS", "ManipulationPlan", "PHASE_NAMES", "PLAN_SCHEMA_VERSION",
    "Phase", "RegraspOptions", "SupportPlan", "antipodal_candidates", "antipodal_pair",
    "approach_clear", "bfs_nodes", "can_open", "canonical", "choose_step", "compatible_steps",
    "direct_regrasp_ok", "dmg_search", "grasp_from_pair", "grasp_separation", "line_distance",
    "opposing_grasp", "plan_first_gripper_regrasp", "plan_first_gripper_release",
    "plan_second_gripper_grasp", "score_support_candidates", "segment_distance", "support_score", "verify_grasp",
]
