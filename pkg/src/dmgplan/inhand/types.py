"""Value types shared by the in-hand and regrasp planners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..dmg.angles import steps_per_turn


def _vec(p) -> tuple:
    return tuple(float(x) for x in np.asarray(p, dtype=float).reshape(3))


@dataclass(frozen=True)
class FingerConfig:
    """Fingertip contact ``point`` (m) and finger ``angle`` (rad) in a component frame.

    ``node_id`` pins the configuration to a DMG node; when absent the node is
    found by lookup.
    """

    point: tuple
    angle: float
    component_id: int | None = None
    node_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "point", _vec(self.point))
        object.__setattr__(self, "angle", float(self.angle) % (2 * math.pi))

    def to_dict(self) -> dict:
        return {"point": list(self.point), "angle": self.angle,
                "component_id": self.component_id, "node_id": self.node_id}

    @classmethod
    def from_dict(cls, d) -> "FingerConfig":
        return cls(d["point"], d["angle"], d.get("component_id"), d.get("node_id"))


@dataclass(frozen=True)
class GraspConfig:
    """Both fingertips of one parallel gripper."""

    principal: FingerConfig
    secondary: FingerConfig
    gripper_id: int = 1

    def swapped(self) -> "GraspConfig":
        return GraspConfig(self.secondary, self.principal, self.gripper_id)

    def with_gripper(self, gripper_id: int) -> "GraspConfig":
        return replace(self, gripper_id=gripper_id)

    @property
    def grasp_line(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.principal.point), np.array(self.secondary.point)

    @property
    def opening(self) -> float:
        a, b = self.grasp_line
        return float(np.linalg.norm(a - b))

    def to_dict(self) -> dict:
        return {"principal": self.principal.to_dict(), "secondary": self.secondary.to_dict(),
                "gripper_id": self.gripper_id}

    @classmethod
    def from_dict(cls, d) -> "GraspConfig":
        return cls(FingerConfig.from_dict(d["principal"]), FingerConfig.from_dict(d["secondary"]),
                   int(d.get("gripper_id", 1)))


@dataclass(frozen=True)
class CostOptions:
    """Search-time cost and policy settings.

    ``opposing_normal_bound`` limits ``|n1 + n2|`` for the two contacts of a
    grasp along the path; "auto" uses the DMG's ``delta_n`` and None turns the
    check off.  ``max_primitives`` caps the simplified in-hand sequence length
    before the planner prefers a regrasp.
    """

    w_rot: float = 0.05
    w_pull: float = 0.0
    opposing_normal_bound: float | str | None = "auto"
    max_primitives: float = math.inf
    policy: str = "min_rotations"
    collinearity_tol: float = math.radians(1.0)

    def normal_bound(self, dmg) -> float | None:
        if self.opposing_normal_bound == "auto":
            return float(dmg.params["delta_n"])
        return self.opposing_normal_bound


@dataclass(frozen=True, eq=False)
class InHandPath:
    """Result of the in-hand search for the principal finger.

    ``allowed`` holds the orientation steps usable at each path node once the
    secondary finger is accounted for; ``secondary`` names the opposing node
    chosen for each path node.  ``states`` is the optimal (node, step) walk.
    """

    nodes: tuple
    cost: float
    allowed: dict = field(repr=False)
    secondary: dict = field(repr=False)
    states: tuple = field(repr=False)
    start_step: int = 0
    goal_step: int = 0
    components: tuple = (None, None)


@dataclass(frozen=True, eq=False)
class PrimitiveSequence:
    """Alternating rotations and translations of the principal fingertip.

    ``rotations`` has one more entry than ``translations`` and stores integer
    steps of ``r_angle`` degrees, so angle sums are exact.  Translations are
    3-vectors in the object's model frame (m); :meth:`translations_in_frame`
    expresses them in the component frame.
    """

    rotations: tuple
    translations: tuple = field(repr=False)
    r_angle: float
    frame: np.ndarray = field(repr=False)
    start_point: tuple = ()
    start_step: int = 0
    nodes: tuple = ()

    def __post_init__(self):
        if len(self.rotations) != len(self.translations) + 1:
            raise ValueError("need exactly one more rotation than translations")

    @property
    def gammas(self) -> list[float]:
        """Rotations in radians."""
        return [math.radians(g * self.r_angle) for g in self.rotations]

    def __len__(self) -> int:
        """Number of nonzero primitives."""
        return sum(1 for g in self.rotations if g != 0) + sum(
            1 for t in self.translations if np.any(np.asarray(t) != 0))

    def translation_sum(self) -> np.ndarray:
        return np.sum(np.array(self.translations).reshape(-1, 3), axis=0)

    def rotation_sum(self) -> int:
        return int(sum(self.rotations))

    def translations_in_frame(self) -> list[np.ndarray]:
        return [self.frame @ np.asarray(t) for t in self.translations]

    def primitives(self):
        """Interleaved ``("rotate", steps)`` / ``("translate", vector)`` items."""
        out = []
        for k, t in enumerate(self.translations):
            out.append(("rotate", self.rotations[k]))
            out.append(("translate", np.asarray(t)))
        out.append(("rotate", self.rotations[-1]))
        return out

    def end_point(self) -> np.ndarray:
        return np.asarray(self.start_point) + self.translation_sum()

    def end_step(self) -> int:
        return (self.start_step + self.rotation_sum()) % steps_per_turn(self.r_angle)

    def to_dict(self) -> dict:
        return {"rotations_steps": list(self.rotations),
                "rotations_rad": self.gammas,
                "translations": [list(map(float, t)) for t in self.translations],
                "r_angle": self.r_angle, "frame": np.asarray(self.frame).tolist(),
                "start_point": list(self.start_point), "start_step": self.start_step,
                "nodes": list(self.nodes)}

    @classmethod
    def from_dict(cls, d) -> "PrimitiveSequence":
        return cls(tuple(int(g) for g in d["rotations_steps"]),
                   tuple(np.array(t, dtype=float) for t in d["translations"]),
                   float(d["r_angle"]), np.array(d["frame"], dtype=float),
                   tuple(d["start_point"]), int(d["start_step"]), tuple(d.get("nodes", ())))
