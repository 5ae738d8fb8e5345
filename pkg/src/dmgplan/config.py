"""Planner settings: defaults, file loading and validation."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

ENV_VAR = "DMG_PLAN_CONFIG"
POLICIES = ("min_rotations", "stay_near_goal")


@dataclass(frozen=True)
class Config:
    """All tunables, lengths in meters and ``r_angle`` in degrees."""

    r_area: float = 0.01
    r_angle: float = 5.0
    delta_n: float = 0.15
    delta_c: float = 0.4
    finger_length: float = 0.04
    finger_width: float = 0.0
    max_opening: float = 0.08
    zeta: float = 1.0
    eps_sep: float = 0.015
    w_rot: float = 0.05
    w_pull: float = 0.0
    max_primitives: float = math.inf
    policy: str = "min_rotations"
    seed_order: str = "scan"
    inhand_only: bool = False
    gripper_agnostic: bool = False
    alpha: float = 1.0
    dt: float = 0.01
    v_max: float = 0.05
    k_p: float = 2.0
    units_scale: float = 1.0

    def __post_init__(self):
        errs = []
        for name in ("r_area", "r_angle", "max_opening", "dt", "v_max", "k_p", "units_scale"):
            if not getattr(self, name) > 0:
                errs.append(f"{name} must be positive")
        for name in ("delta_n", "delta_c", "finger_length", "finger_width", "zeta", "eps_sep",
                     "w_rot", "w_pull"):
            if getattr(self, name) < 0:
                errs.append(f"{name} must be non-negative")
        if self.r_angle > 0 and (360.0 / self.r_angle) % 1:
            errs.append("r_angle must divide 360")
        if not 0.0 <= self.alpha <= 1.0:
            errs.append("alpha must lie in [0, 1]")
        if self.policy not in POLICIES:
            errs.append(f"policy must be one of {POLICIES}")
        if self.seed_order not in ("scan", "index"):
            errs.append("seed_order must be 'scan' or 'index'")
        if errs:
            raise ValueError("; ".join(errs))

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


FIELDS = {f.name for f in dataclasses.fields(Config)}


def load_config(path=None) -> Config:
    """Config from ``path``, else from ``$DMG_PLAN_CONFIG``, else defaults.

    The file is YAML (JSON is accepted as a YAML subset); keys may use
    dashes or underscores.
    """
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return Config()
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    clean = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(clean) - FIELDS)
    if unknown:
        raise ValueError(f"{path}: unknown settings {unknown}")
    if "max_primitives" in clean and clean["max_primitives"] in (None, "inf"):
        clean["max_primitives"] = math.inf
    return Config(**clean)
