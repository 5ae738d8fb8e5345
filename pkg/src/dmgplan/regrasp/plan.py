"""Ordered manipulation plans and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..inhand.types import GraspConfig, PrimitiveSequence

PLAN_SCHEMA_VERSION = 1

PHASE_NAMES = (
    "reach_first_release",
    "second_gripper_grasp",
    "first_gripper_release",
    "reach_second_release",
    "first_gripper_grasp",
    "second_gripper_release",
    "final_inhand",
)


@dataclass(frozen=True, eq=False)
class Phase:
    """One plan step.

    ``kind`` is "inhand", "grasp" or "release".  ``before``/``after`` map
    gripper id to the grasp it holds (None when open), so consecutive phases
    chain when one's ``after`` equals the next one's ``before``.
    """

    name: str
    kind: str
    gripper: int
    before: dict
    after: dict
    sequence: PrimitiveSequence | None = field(default=None, repr=False)

    @property
    def config(self) -> GraspConfig | None:
        return self.after[self.gripper] if self.kind != "release" else self.before[self.gripper]

    def to_dict(self) -> dict:
        def holds(m):
            return {str(g): (c.to_dict() if c is not None else None) for g, c in sorted(m.items())}
        return {"name": self.name, "kind": self.kind, "gripper": self.gripper,
                "before": holds(self.before), "after": holds(self.after),
                "sequence": self.sequence.to_dict() if self.sequence is not None else None}

    @classmethod
    def from_dict(cls, d) -> "Phase":
        def holds(m):
            return {int(g): (GraspConfig.from_dict(c) if c is not None else None)
                    for g, c in m.items()}
        seq = PrimitiveSequence.from_dict(d["sequence"]) if d.get("sequence") else None
        return cls(d["name"], d["kind"], int(d["gripper"]), holds(d["before"]), holds(d["after"]),
                   seq)


def _same(a: GraspConfig | None, b: GraspConfig | None) -> bool:
    if a is None or b is None:
        return a is b
    return (a.principal.node_id, a.secondary.node_id) == (b.principal.node_id, b.secondary.node_id) \
        and _step(a.principal.angle) == _step(b.principal.angle) \
        and a.principal.point == b.principal.point and a.secondary.point == b.secondary.point


def _step(angle: float) -> float:
    return round(angle, 9)


@dataclass(eq=False)
class ManipulationPlan:
    start: GraspConfig
    goal: GraspConfig
    phases: list
    mode: str = "inhand"
    info: dict = field(default_factory=dict)
    frames: dict = field(default_factory=dict, repr=False)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.phases]

    def chaining_errors(self) -> list[str]:
        errs = []
        if self.phases and not _same(self.phases[0].before.get(1), self.start):
            errs.append("first phase does not start at the start grasp")
        for a, b in zip(self.phases, self.phases[1:]):
            for g in (1, 2):
                if not _same(a.after.get(g), b.before.get(g)):
                    errs.append(f"gripper {g} differs between {a.name} and {b.name}")
        final = self.phases[-1].after if self.phases else {}
        holder = self.info.get("final_gripper", 1)
        if self.phases and not _same(final.get(holder), self.goal):
            errs.append("plan does not end at the goal grasp")
        return errs

    def to_dict(self) -> dict:
        return {"schema_version": PLAN_SCHEMA_VERSION, "kind": "plan", "mode": self.mode,
                "start": self.start.to_dict(), "goal": self.goal.to_dict(),
                "phases": [p.to_dict() for p in self.phases], "info": self.info,
                "frames": {str(c): np.asarray(m).tolist() for c, m in sorted(self.frames.items())}}

    @classmethod
    def from_dict(cls, d) -> "ManipulationPlan":
        if d.get("schema_version") != PLAN_SCHEMA_VERSION or d.get("kind") != "plan":
            raise ValueError(f"unsupported plan file (schema_version={d.get('schema_version')!r})")
        return cls(GraspConfig.from_dict(d["start"]), GraspConfig.from_dict(d["goal"]),
                   [Phase.from_dict(p) for p in d["phases"]], d.get("mode", "inhand"),
                   d.get("info", {}),
                   {int(c): np.array(m, dtype=float) for c, m in d.get("frames", {}).items()})

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ManipulationPlan":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
