"""Procedural test objects.

Most shapes are unions of axis-aligned cells on a rectilinear grid, meshed by
emitting one quad per exposed cell face.  That keeps them watertight, lets the
tests reason about them analytically, and makes the triangle density uniform.
All dimensions are in meters.
"""

from __future__ import annotations

import numpy as np

from .geometry.mesh import SurfaceModel

MM = 1e-3


def grid_lines(*breaks, step):
    """Sorted grid coordinates covering ``[breaks[0], breaks[-1]]``.

    Every break is kept as a grid line and each interval is subdivided into
    cells no longer than ``step``.
    """
    out = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(np.ceil((b - a) / step - 1e-9)))
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(out)


def voxel_surface(occupied, xs, ys, zs) -> SurfaceModel:
    """Mesh the boundary of the occupied cells of a rectilinear grid."""
    occ = np.asarray(occupied, dtype=bool)
    nx, ny, nz = occ.shape
    assert (len(xs), len(ys), len(zs)) == (nx + 1, ny + 1, nz + 1)
    pad = np.zeros((nx + 2, ny + 2, nz + 2), dtype=bool)
    pad[1:-1, 1:-1, 1:-1] = occ
    coords = (np.asarray(xs, float), np.asarray(ys, float), np.asarray(zs, float))
    vid: dict[tuple, int] = {}
    verts: list = []
    quads: list = []

    def vertex(ijk):
        k = vid.get(ijk)
        if k is None:
            k = vid[ijk] = len(verts)
            verts.append([coords[0][ijk[0]], coords[1][ijk[1]], coords[2][ijk[2]]])
        return k

    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for sign in (1, -1):
            shifted = np.roll(pad, -sign, axis=axis)
            exposed = pad & ~shifted
            exposed = exposed[1:-1, 1:-1, 1:-1]
            for cell in np.argwhere(exposed):
                base = list(cell)
                if sign > 0:
                    base[axis] += 1
                corners = []
                for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    c = list(base)
                    c[u] += du
                    c[v] += dv
                    corners.append(vertex(tuple(c)))
                # (u, v, axis) is right handed, so this order faces +axis
                quads.append(corners if sign > 0 else corners[::-1])
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return SurfaceModel.from_arrays(np.array(verts), np.array(tris), orient=False)


def _cells(xs, ys, zs, inside):
    cx = 0.5 * (xs[1:] + xs[:-1])
    cy = 0.5 * (ys[1:] + ys[:-1])
    cz = 0.5 * (zs[1:] + zs[:-1])
    X, Y, Z = np.meshgrid(cx, cy, cz, indexing="ij")
    return inside(X, Y, Z)


def box(size=(50 * MM, 50 * MM, 40 * MM), step=2.5 * MM) -> SurfaceModel:
    """Axis-aligned box with one corner at the origin."""
    xs, ys, zs = (grid_lines(0.0, s, step=step) for s in size)
    return voxel_surface(np.ones((len(xs) - 1, len(ys) - 1, len(zs) - 1), bool), xs, ys, zs)


def plate(side=60 * MM, thickness=5 * MM, step=2.5 * MM) -> SurfaceModel:
    """Square plate lying in the xy plane."""
    return box((side, side, thickness), step)


def bar(length=120 * MM, width=15 * MM, step=2.5 * MM) -> SurfaceModel:
    """Square-section bar along x."""
    return box((length, width, width), step)


def l_prism(outer=60 * MM, arm=20 * MM, height=30 * MM, step=2.5 * MM) -> SurfaceModel:
    """L-shaped profile in the xy plane extruded along z."""
    xs = grid_lines(0.0, arm, outer, step=step)
    ys = grid_lines(0.0, arm, outer, step=step)
    zs = grid_lines(0.0, height, step=step)
    occ = _cells(xs, ys, zs, lambda X, Y, Z: (X < arm) | (Y < arm))
    return voxel_surface(occ, xs, ys, zs)


def u_channel(width=60 * MM, wall=10 * MM, depth=40 * MM, length=40 * MM,
              step=2.5 * MM) -> SurfaceModel:
    """U profile in the xy plane (opening towards +y) extruded along z.

    The floor occupies ``y < wall``; the two walls occupy ``x < wall`` and
    ``x > width - wall``.
    """
    xs = grid_lines(0.0, wall, width - wall, width, step=step)
    ys = grid_lines(0.0, wall, depth, step=step)
    zs = grid_lines(0.0, length, step=step)
    occ = _cells(xs, ys, zs, lambda X, Y, Z: (Y < wall) | (X < wall) | (X > width - wall))
    return voxel_surface(occ, xs, ys, zs)


def pit_block(size=60 * MM, height=20 * MM, pit=20 * MM, pit_depth=10 * MM,
              step=2.5 * MM) -> SurfaceModel:
    """Block with a square pit centred on its top face."""
    lo, hi = 0.5 * (size - pit), 0.5 * (size + pit)
    xs = grid_lines(0.0, lo, hi, size, step=step)
    ys = grid_lines(0.0, lo, hi, size, step=step)
    zs = grid_lines(0.0, height - pit_depth, height, step=step)
    floor = height - pit_depth
    occ = _cells(xs, ys, zs, lambda X, Y, Z: ~((X > lo) & (X < hi) & (Y > lo) & (Y < hi)
                                                & (Z > floor)))
    return voxel_surface(occ, xs, ys, zs)


def wall_block(length=100 * MM, width=60 * MM, base=5 * MM, wall=5 * MM,
               wall_height=40 * MM, step=2.5 * MM) -> SurfaceModel:
    """Floor slab with a perpendicular wall along its ``x < wall`` edge."""
    xs = grid_lines(0.0, wall, length, step=step)
    ys = grid_lines(0.0, width, step=step)
    zs = grid_lines(0.0, base, base + wall_height, step=step)
    occ = _cells(xs, ys, zs, lambda X, Y, Z: (Z < base) | (X < wall))
    return voxel_surface(occ, xs, ys, zs)


def concave_block(length=80 * MM, width=30 * MM, base=10 * MM, gap=15 * MM,
                  lip=10 * MM, back=10 * MM, lip_length=40 * MM,
                  step=2.5 * MM) -> SurfaceModel:
    """C-profile in the xz plane extruded along y.

    A base slab (``z < base``) carries a back wall (``x < back``) and a lip
    (``x < lip_length``) over it, so the base's top face between ``back`` and
    ``lip_length`` lies inside a concavity that an opening gripper cannot
    approach from above.
    """
    top = base + gap + lip
    xs = grid_lines(0.0, back, lip_length, length, step=step)
    ys = grid_lines(0.0, width, step=step)
    zs = grid_lines(0.0, base, base + gap, top, step=step)
    occ = _cells(xs, ys, zs, lambda X, Y, Z: (Z < base) | ((X < back) & (Z < top))
                 | ((X < lip_length) & (Z > base + gap)))
    return voxel_surface(occ, xs, ys, zs)


def bent_plate(angle_deg=10.0, side=40 * MM, thickness=4 * MM, step=2.5 * MM) -> SurfaceModel:
    """Plate folded about the y axis by ``angle_deg`` at x = 0."""
    xs = grid_lines(-side, 0.0, side, step=step)
    ys = grid_lines(0.0, side, step=step)
    zs = np.array([0.0, thickness])
    model = voxel_surface(np.ones((len(xs) - 1, len(ys) - 1, 1), bool), xs, ys, zs)
    v = np.array(model.vertices)
    th = np.radians(angle_deg)
    right = v[:, 0] > 0
    x, z = v[right, 0], v[right, 2]
    v[right, 0] = x * np.cos(th) - z * np.sin(th)
    v[right, 2] = x * np.sin(th) + z * np.cos(th)
    return SurfaceModel.from_arrays(v, np.array(model.triangles), orient=False)


def icosphere(radius=30 * MM, subdivisions=3) -> SurfaceModel:
    t = (1.0 + 5 ** 0.5) / 2.0
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, float) / np.linalg.norm(p) for p in v]
    faces = f
    for _ in range(subdivisions):
        cache: dict = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return SurfaceModel.from_arrays(np.array(verts) * radius, np.array(faces))


def cylinder(radius=15 * MM, height=40 * MM, segments=48, rings=16, noise=0.0,
             seed=0) -> SurfaceModel:
    """Closed cylinder along z; ``noise`` jitters side vertices radially (m)."""
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * np.arange(segments) / segments
    zs = np.linspace(0.0, height, rings + 1)
    verts = []
    for z in zs:
        r = radius + (rng.normal(0.0, noise, segments) if noise > 0 else 0.0)
        verts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang), np.full(segments, z)]))
    verts = np.concatenate(verts)
    faces = []
    for i in range(rings):
        for j in range(segments):
            a = i * segments + j
            b = i * segments + (j + 1) % segments
            faces += [(a, b, b + segments), (a, b + segments, a + segments)]
    # caps: concentric rings keep cap triangles well shaped
    cap_rings = max(2, int(round(radius / (height / rings))))
    for bottom in (True, False):
        z = 0.0 if bottom else height
        outer = np.arange(segments) + (0 if bottom else rings * segments)
        prev = outer
        for k in range(cap_rings - 1, 0, -1):
            s = k / cap_rings
            start = len(verts)
            verts = np.vstack([verts, np.column_stack([s * radius * np.cos(ang),
                                                       s * radius * np.sin(ang),
                                                       np.full(segments, z)])])
            cur = np.arange(segments) + start
            for j in range(segments):
                jn = (j + 1) % segments
                q = (prev[j], prev[jn], cur[jn], cur[j])
                if bottom:
                    q = q[::-1]
                faces += [(q[0], q[1], q[2]), (q[0], q[2], q[3])]
            prev = cur
        centre = len(verts)
        verts = np.vstack([verts, [[0.0, 0.0, z]]])
        for j in range(segments):
            tri = (prev[j], prev[(j + 1) % segments], centre)
            faces.append(tri[::-1] if bottom else tri)
    return SurfaceModel.from_arrays(verts, np.array(faces))


def mug(radius=40 * MM, height=90 * MM, noise=0.8 * MM, seed=3) -> SurfaceModel:
    """Noisy curved shell standing in for a scanned household object."""
    return cylinder(radius, height, segments=64, rings=24, noise=noise, seed=seed)


FIXTURES = {
    "box": box,
    "plate": plate,
    "bar": bar,
    "l_prism": l_prism,
    "u_channel": u_channel,
    "pit_block": pit_block,
    "wall_block": wall_block,
    "concave_block": concave_block,
}
