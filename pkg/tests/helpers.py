"""Shared fixtures, caches and the acceptance scoreboard."""

from __future__ import annotations

import functools

import numpy as np

from dmgplan import fixtures
from dmgplan.dmg.build import generate_dmg
from dmgplan.inhand.search import grasp_at, secondary_validity

# criterion number -> (passed, detail); printed by conftest after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


@functools.lru_cache(maxsize=None)
def model(name: str):
    return fixtures.FIXTURES[name]()


@functools.lru_cache(maxsize=None)
def dmg(name: str, r_area: float = 0.01, r_angle: float = 10.0):
    return generate_dmg(model(name), r_area=r_area, r_angle=r_angle)


def valid_grasps(g, m, component=None, c2=None):
    """Every (n1, k1, n2) with a valid opposing finger, optionally restricted to components."""
    bound = float(g.params["delta_n"])
    out = []
    for nid in sorted(g.nodes):
        if component is not None and g.nodes[nid].component_id != component:
            continue
        comps2 = [c2] if c2 is not None else sorted(g.components)
        for c in comps2:
            steps, n2 = secondary_validity(g, m, nid, c, bound)
            if steps:
                out.extend((nid, k, n2) for k in sorted(steps))
    return out


def random_pairs(g, m, n, seed=0):
    """``n`` start/goal grasp pairs; most share components so paths exist."""
    rng = np.random.default_rng(seed)
    every = valid_grasps(g, m)
    by_comp: dict = {}
    for n1, k1, n2 in every:
        by_comp.setdefault((g.nodes[n1].component_id, g.nodes[n2].component_id), []).append(
            (n1, k1, n2))
    keys = sorted(by_comp)
    pairs = []
    for _ in range(n):
        if rng.random() < 0.85:
            pool = by_comp[keys[rng.integers(len(keys))]]
            a, b = pool[rng.integers(len(pool))], pool[rng.integers(len(pool))]
        else:
            a, b = every[rng.integers(len(every))], every[rng.integers(len(every))]
        pairs.append((grasp_at(g, *a), grasp_at(g, *b)))
    return pairs
