from .search import (InHandSearch, OppositeCandidate, ResolvedGrasp, edge_cost, finger_at,
                     grasp_at, in_hand_search, map_steps, opposite_finger_candidates,
                     resolve_grasp, secondary_step, secondary_validity)
from .sequence import InHandPlan, angle_sequence, plan_in_hand, primitive_sequence, simplify
from .types import CostOptions, FingerConfig, GraspConfig, InHandPath, PrimitiveSequence

__all__ = [
    "CostOptions", "FingerConfig", "GraspConfig", "InHandPath", "InHandPlan", "InHandSearch",
    "OppositeCandidate", "PrimitiveSequence", "ResolvedGrasp", "angle_sequence", "edge_cost",
    "finger_at", "grasp_at", "in_hand_search", "map_steps", "opposite_finger_candidates",
    "plan_in_hand", "primitive_sequence", "resolve_grasp", "secondary_step",
    "secondary_validity", "simplify",
]
