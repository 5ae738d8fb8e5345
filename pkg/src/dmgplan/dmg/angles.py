"""Discrete finger orientations.

An orientation is stored as an integer step ``k`` standing for ``k * r_angle``
degrees, with ``0 <= k < K`` and ``K = 360 / r_angle``.  Integer arithmetic
keeps set operations and sums of rotations exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable


def steps_per_turn(r_angle: float) -> int:
    """``K = 360 / r_angle``; ``r_angle`` (degrees) must divide 360 evenly."""
    if not r_angle > 0:
        raise ValueError("r_angle must be positive")
    k = 360.0 / r_angle
    K = int(round(k))
    if K < 1 or abs(k - K) > 1e-9 * k:
        raise ValueError(f"r_angle={r_angle} does not divide 360")
    return K


def snap(angle_rad: float, r_angle: float) -> int:
    """Nearest step to an angle given in radians (halves round up)."""
    K = steps_per_turn(r_angle)
    return int(math.floor(math.degrees(angle_rad) / r_angle + 0.5)) % K


def step_to_rad(step: int, r_angle: float) -> float:
    return math.radians(step * r_angle)


def wrap_steps(delta: int, K: int) -> int:
    """Signed step difference wrapped to ``(-K/2, K/2]``."""
    d = delta % K
    return d - K if d > K // 2 else d


def circular_runs(steps: Iterable[int], K: int) -> list[tuple[int, ...]]:
    """Split a step set into maximal circularly contiguous runs.

    A gap is any missing step between two members.  The run touching step
    ``K - 1`` is joined with the run starting at ``0``.  Each run is listed in
    increasing rotation order from its first step; runs are ordered by their
    smallest member.  The full circle is a single run starting at 0.
    """
    s = sorted(set(int(x) % K for x in steps))
    if not s:
        return []
    if len(s) == K:
        return [tuple(range(K))]
    runs: list[list[int]] = [[s[0]]]
    for a in s[1:]:
        if a == runs[-1][-1] + 1:
            runs[-1].append(a)
        else:
            runs.append([a])
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == K - 1:
        runs[0] = runs.pop() + runs[0]
    runs.sort(key=min)
    return [tuple(r) for r in runs]


@dataclass(frozen=True)
class AngularComponent:
    """Circularly contiguous set of collision-free finger orientations."""

    steps: frozenset
    r_angle: float

    def __post_init__(self):
        object.__setattr__(self, "steps", frozenset(int(s) for s in self.steps))

    @property
    def K(self) -> int:
        return steps_per_turn(self.r_angle)

    @property
    def full(self) -> bool:
        return len(self.steps) == self.K

    def __contains__(self, step) -> bool:
        return step in self.steps

    def __len__(self):
        return len(self.steps)

    def ordered(self) -> tuple[int, ...]:
        """Members in rotation order, starting at the run's first step."""
        return self._ordered

    @cached_property
    def _ordered(self) -> tuple[int, ...]:
        runs = circular_runs(self.steps, self.K)
        if len(runs) != 1:
            raise ValueError("angular component is not contiguous")
        return runs[0]

    def degrees(self) -> list[float]:
        return [s * self.r_angle for s in sorted(self.steps)]

    def is_contiguous(self) -> bool:
        return len(circular_runs(self.steps, self.K)) == 1

    def arc(self, a: int, b: int) -> int | None:
        """Signed step count rotating from ``a`` to ``b`` without leaving the set.

        Within a full circle the shorter way round is used (ties go positive).
        Returns None if either end is not a member.
        """
        if a not in self.steps or b not in self.steps:
            return None
        if self.full:
            return wrap_steps(b - a, self.K)
        return self._position[b] - self._position[a]

    @cached_property
    def _position(self) -> dict:
        return {s: i for i, s in enumerate(self.ordered())}
