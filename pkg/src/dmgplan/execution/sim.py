"""Kinematic playback of a manipulation plan with two grippers.

The object is rigid and moves with whichever gripper holds it.  During a
push the object's pose in the holding gripper changes by exact integration
of the commanded relative motion, while the two gripper poses follow the
arm twists from the task-space split (first-order Euler, for display).

Gripper frame at a grasp: origin at the principal contact, x along the
contact component's outward axis, y along the finger.  The secondary finger
sits on the gripper's -x axis, ``opening`` away.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import NoPushPoint, SimDivergence
from ..geometry.mesh import SurfaceModel, palette, write_ply
from ..inhand.types import FingerConfig, GraspConfig, PrimitiveSequence
from ..regrasp.plan import ManipulationPlan
from ..regrasp.planner import grasp_separation
from .push import find_push_point, finger_direction
from .twist import K_P, V_MAX, EctsCommand, Twist, ects_solve, rotation_twist, translation_twist


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    v_max: float = V_MAX
    k_p: float = K_P
    w_max: float = 1.0
    tol_lin: float = 5e-4
    tol_ang: float = math.radians(0.5)
    # each primitive settles to this fraction of the tolerance, so residuals
    # of a long sequence stay inside the tolerance overall
    settle: float = 0.05
    max_steps: int = 100_000
    standoff: float = 0.05
    eps_sep: float = 0.015
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.settle <= 1:
            raise ValueError("settle must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class SimState:
    """Snapshot: world poses (4x4), the fingertip configuration of each holding gripper."""

    t: float
    T1: np.ndarray = field(repr=False)
    T2: np.ndarray = field(repr=False)
    T_object: np.ndarray = field(repr=False)
    config: dict
    phase: str
    contacts: dict

    def to_dict(self) -> dict:
        return {"t": self.t, "T1": self.T1.tolist(), "T2": self.T2.tolist(),
                "T_object": self.T_object.tolist(), "phase": self.phase,
                "config": {str(g): {"point": list(p), "angle": a}
                           for g, (p, a) in sorted(self.config.items())},
                "contacts": {str(k): v for k, v in self.contacts.items()}}


@dataclass(eq=False)
class Trajectory:
    states: list
    events: list = field(default_factory=list)

    @property
    def final(self) -> SimState:
        return self.states[-1]

    def final_config(self, gripper: int = 1):
        """``(point, angle)`` of ``gripper``'s principal finger at the end, or None."""
        return self.final.config.get(gripper)

    def export_jsonl(self, path):
        with open(path, "w") as fh:
            for s in self.states:
                fh.write(json.dumps(s.to_dict()) + "\n")

    def export_ply(self, directory, model: SurfaceModel, every: int = 50) -> list[Path]:
        """Object mesh at every ``every``-th state, colored by the holding gripper."""
        out_dir = Path(directory)
        out_dir.mkdir(parents=True, exist_ok=True)
        colors = palette(3)
        paths = []
        picks = list(range(0, len(self.states), max(1, every)))
        if picks[-1] != len(self.states) - 1:
            picks.append(len(self.states) - 1)
        for i in picks:
            s = self.states[i]
            holder = min(s.config) if s.config else 0
            v = model.vertices @ s.T_object[:3, :3].T + s.T_object[:3, 3]
            p = out_dir / f"state_{i:06d}.ply"
            write_ply(p, v, model.triangles, colors[holder])
            paths.append(p)
        return paths


def _pose(R=np.eye(3), p=np.zeros(3)) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def _inv(T) -> np.ndarray:
    R, p = T[:3, :3], T[:3, 3]
    return _pose(R.T, -R.T @ p)


def grasp_pose(frame, point, angle) -> np.ndarray:
    """Gripper pose in the object frame for a fingertip at ``point`` and ``angle``."""
    F = np.asarray(frame, dtype=float)
    d = finger_direction(F, angle)
    return _pose(np.column_stack([F[0], d, np.cross(F[0], d)]), np.asarray(point, dtype=float))


def _alpha_for(alpha, phase, index):
    if callable(alpha):
        return float(alpha(phase, index))
    if isinstance(alpha, dict):
        return float(alpha.get(phase, alpha.get("default", 1.0)))
    return float(alpha)


class _Sim:
    def __init__(self, plan: ManipulationPlan, model: SurfaceModel, cfg: SimConfig, alpha):
        self.plan, self.model, self.cfg, self.alpha = plan, model, cfg, alpha
        self.frames = {int(c): np.asarray(m, dtype=float) for c, m in plan.frames.items()}
        self.T = {1: _pose(), 2: _pose(p=np.array([0.0, 0.4, 0.0]))}
        self.T_go: dict = {1: None, 2: None}
        self.comp: dict = {}
        self.opening: dict = {}
        self.t = 0.0
        self.phase = "start"
        self.push = False
        self.states: list = []
        self.events: list = []
        self._n = 0
        self._hold(1, plan.start)
        self._record(force=True)

    # bookkeeping ------------------------------------------------------------------
    def _hold(self, g, grasp: GraspConfig):
        c = grasp.principal.component_id
        T_og = grasp_pose(self.frames[c], grasp.principal.point, grasp.principal.angle)
        T_wo = self.object_pose() if any(v is not None for v in self.T_go.values()) else None
        self.T_go[g] = _inv(T_og)
        self.comp[g] = c
        self.opening[g] = grasp.opening
        if T_wo is not None:
            self.T[g] = T_wo @ T_og
        else:
            self.T[g] = _pose()

    def object_pose(self) -> np.ndarray:
        for g in (1, 2):
            if self.T_go[g] is not None:
                return self.T[g] @ self.T_go[g]
        raise SimDivergence("object dropped: no gripper holds it")

    def finger(self, g):
        """Current ``(point, angle)`` of gripper ``g``'s principal fingertip on the object."""
        T_og = _inv(self.T_go[g])
        F = self.frames[self.comp[g]]
        d = T_og[:3, 1]
        ang = math.atan2(float(d @ F[2]), float(d @ F[1])) % (2 * math.pi)
        return T_og[:3, 3].copy(), ang

    def current_grasp(self, g) -> GraspConfig:
        T_og = _inv(self.T_go[g])
        p, a = self.finger(g)
        sec = T_og[:3, 3] - self.opening[g] * T_og[:3, 0]
        return GraspConfig(FingerConfig(p, a, self.comp[g]), FingerConfig(sec, a), g)

    def _record(self, force=False):
        self._n += 1
        if not force and self._n % self.cfg.record_every:
            return
        cfg = {}
        for g in (1, 2):
            if self.T_go[g] is not None:
                p, a = self.finger(g)
                cfg[g] = (tuple(float(x) for x in p), float(a))
        contacts = {1: self.T_go[1] is not None, 2: self.T_go[2] is not None, "push": self.push}
        self.states.append(SimState(self.t, self.T[1].copy(), self.T[2].copy(),
                                    self.object_pose(), cfg, self.phase, contacts))

    # motions ----------------------------------------------------------------------
    def move_to(self, g, target: np.ndarray):
        """Straight-line move of gripper ``g`` (orientation interpolated) at ``v_max``."""
        start = self.T[g].copy()
        dist = float(np.linalg.norm(target[:3, 3] - start[:3, 3]))
        n = max(1, math.ceil(dist / (self.cfg.v_max * self.cfg.dt)))
        rots = Rotation.from_matrix(np.stack([start[:3, :3], target[:3, :3]]))
        rel = (rots[1] * rots[0].inv()).as_rotvec()
        for i in range(1, n + 1):
            s = i / n
            R = (Rotation.from_rotvec(s * rel) * rots[0]).as_matrix()
            self.T[g] = _pose(R, (1 - s) * start[:3, 3] + s * target[:3, 3])
            self.t += self.cfg.dt
            self._record(force=i == n)

    def _step(self, holder, push_world: Twist, alpha):
        """Advance both arms by one step for a pusher-relative-to-holder twist."""
        rel = push_world if holder == 1 else -push_world
        x1, x2 = ects_solve(EctsCommand(Twist.zero(), rel, alpha))
        dt = self.cfg.dt
        for g, x in ((1, x1), (2, x2)):
            R = Rotation.from_rotvec(x.w * dt).as_matrix() @ self.T[g][:3, :3]
            self.T[g] = _pose(R, self.T[g][:3, 3] + x.v * dt)

    def run_sequence(self, holder: int, seq: PrimitiveSequence, name: str):
        pusher = 2 if holder == 1 else 1
        F = self.frames[self.comp[holder]]
        target_p = np.asarray(seq.start_point, dtype=float)
        target_a = math.radians(seq.start_step * seq.r_angle)
        for idx, (kind, val) in enumerate(seq.primitives()):
            alpha = _alpha_for(self.alpha, name, idx)
            if kind == "rotate":
                if val == 0:
                    continue
                gamma = math.radians(val * seq.r_angle)
                self._rotate(holder, pusher, gamma, target_a, F, alpha, name)
                target_a += gamma
            else:
                t = np.asarray(val, dtype=float)
                if not np.any(t):
                    continue
                target_p = target_p + t
                self._translate(holder, pusher, t, target_p, alpha, name)

    def _approach(self, holder, pusher, primitive, frame):
        try:
            pp = find_push_point(self.model, self.current_grasp(holder), primitive, frame)
        except NoPushPoint as exc:
            self.events.append({"t": self.t, "phase": self.phase, "event": "no_push_point",
                                "detail": str(exc)})
            return None
        T_wo = self.object_pose()
        pw = T_wo[:3, :3] @ pp + T_wo[:3, 3]
        self.move_to(pusher, _pose(self.T[pusher][:3, :3], pw))
        self.push = True
        return pp

    def _retreat(self, holder, pusher):
        self.push = False
        T_wo = self.object_pose()
        center = T_wo[:3, 3]
        away = self.T[pusher][:3, 3] - center
        n = np.linalg.norm(away)
        away = away / n if n > 0 else np.array([0.0, 0.0, 1.0])
        self.move_to(pusher, _pose(self.T[pusher][:3, :3],
                                   self.T[pusher][:3, 3] + self.cfg.standoff * away))

    def _translate(self, holder, pusher, t, target_p, alpha, name):
        cfg = self.cfg
        self.phase = f"{name}:translate"
        self._approach(holder, pusher, ("translate", t), None)
        u = t / np.linalg.norm(t)
        steps = 0
        while True:
            p, _ = self.finger(holder)
            e = float((target_p - p) @ u)
            if e < cfg.settle * cfg.tol_lin:
                break
            steps += 1
            if steps > cfg.max_steps:
                raise SimDivergence(f"translation did not converge (error {e:.2e} m)")
            R_wH = self.T[holder][:3, :3]
            t_H = self.T_go[holder][:3, :3] @ t
            tw = translation_twist(t_H, R_wH, cfg.k_p, e, cfg.v_max)
            # exact update of the object in the holder: it moves with the pusher
            self.T_go[holder][:3, 3] += R_wH.T @ tw.v * cfg.dt
            self._step(holder, tw, alpha)
            self.t += cfg.dt
            self._record()
        self._retreat(holder, pusher)

    def _rotate(self, holder, pusher, gamma, planned_start, F, alpha, name):
        cfg = self.cfg
        self.phase = f"{name}:rotate"
        pp = self._approach(holder, pusher, ("rotate", gamma), F)
        _, a0 = self.finger(holder)
        offset = (planned_start - a0 + math.pi) % (2 * math.pi) - math.pi
        goal = gamma + offset
        if pp is not None:
            r = (self.T_go[holder] @ np.append(pp, 1.0))[:3]
            phi0, rho = math.atan2(r[2], r[1]), math.hypot(r[1], r[2])
        else:
            phi0, rho = 0.0, 0.0
        w_cap = min(cfg.w_max, cfg.v_max / rho) if rho > 0 else cfg.w_max
        beta = 0.0
        steps = 0
        while True:
            e = goal + beta  # finger turns by -beta
            if abs(e) < cfg.settle * cfg.tol_ang:
                break
            steps += 1
            if steps > cfg.max_steps:
                raise SimDivergence(f"rotation did not converge (error {math.degrees(e):.2f} deg)")
            rate = -math.copysign(min(cfg.k_p * abs(e), w_cap), e)
            tw_g = rotation_twist(phi0, beta, rate, rho)
            db = rate * cfg.dt
            Rx = Rotation.from_rotvec([db, 0.0, 0.0]).as_matrix()
            self.T_go[holder] = _pose(Rx) @ self.T_go[holder]
            beta += db
            self._step(holder, tw_g.rotated(self.T[holder][:3, :3]), alpha)
            self.t += cfg.dt
            self._record()
        self._retreat(holder, pusher)

    def grasp(self, g, grasp: GraspConfig):
        other = 2 if g == 1 else 1
        if self.T_go[other] is not None:
            sep = grasp_separation(grasp, self.current_grasp(other))
            self.events.append({"t": self.t, "phase": self.phase, "event": "separation",
                                "value": sep, "ok": sep >= self.cfg.eps_sep})
        c = grasp.principal.component_id
        T_wo = self.object_pose()
        target = T_wo @ grasp_pose(self.frames[c], grasp.principal.point, grasp.principal.angle)
        pre = target.copy()
        pre[:3, 3] += self.cfg.standoff * target[:3, 0]
        self.move_to(g, pre)
        self.move_to(g, target)
        self._hold(g, grasp)
        self._record(force=True)

    def release(self, g):
        T = self.T[g].copy()
        self.T_go[g] = None
        self.comp.pop(g, None)
        T[:3, 3] += self.cfg.standoff * T[:3, 0]
        self.move_to(g, T)


def simulate_plan(plan: ManipulationPlan, model: SurfaceModel, config: SimConfig = SimConfig(),
                  alpha=1.0) -> Trajectory:
    """Play ``plan`` back kinematically.

    ``alpha`` weights gripper 1 in the absolute twist, so with the absolute
    twist held at zero ``alpha=1`` keeps gripper 1 still and ``alpha=0``
    keeps gripper 2 still.  It is a number, a dict
    ``{phase name: alpha}`` (key "default" for the rest) or a callable
    ``(phase name, primitive index) -> alpha``.
    """
    if not plan.frames:
        raise ValueError("plan carries no component frames; re-plan with this version")
    sim = _Sim(plan, model, config, alpha)
    for ph in plan.phases:
        sim.phase = ph.name
        if ph.kind == "inhand":
            if ph.sequence is not None:
                sim.run_sequence(ph.gripper, ph.sequence, ph.name)
        elif ph.kind == "grasp":
            sim.grasp(ph.gripper, ph.after[ph.gripper])
        elif ph.kind == "release":
            sim.release(ph.gripper)
        else:
            raise ValueError(f"unknown phase kind {ph.kind!r}")
        sim.phase = ph.name
        sim._record(force=True)
    return Trajectory(sim.states, sim.events)


def config_error(traj: Trajectory, goal: GraspConfig, frame=None, gripper: int = 1):
    """Distance (m) and absolute angle difference (rad) between the final and ``goal`` grasps."""
    p, a = traj.final_config(gripper)
    dist = float(np.linalg.norm(np.asarray(p) - np.asarray(goal.principal.point)))
    da = abs((a - goal.principal.angle + math.pi) % (2 * math.pi) - math.pi)
    return dist, da
