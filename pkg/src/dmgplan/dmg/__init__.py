from .angles import AngularComponent, circular_runs, snap, step_to_rad, steps_per_turn, wrap_steps
from .build import (GraphState, angular_component, build_dmg, extract_components, generate_dmg,
                    rotation_refinement, split_node, translation_refinement)
from .graph import (DMG, SCHEMA_VERSION, Component, ComponentFrame, DMGNode, NodeMatch, audit,
                    frame_from_normal, node_lookup)

__all__ = [
    "DMG", "SCHEMA_VERSION", "AngularComponent", "Component", "ComponentFrame", "DMGNode",
    "GraphState", "NodeMatch", "angular_component", "audit", "build_dmg", "circular_runs",
    "extract_components", "frame_from_normal", "generate_dmg", "node_lookup",
    "rotation_refinement", "snap", "split_node", "step_to_rad", "steps_per_turn",
    "translation_refinement", "wrap_steps",
]
