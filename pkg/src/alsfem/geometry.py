"""Exact planar primitives: convex polygon clipping and areas.

Used for the exact integration of indicator-type right-hand sides whose
support is an axis-aligned square: the element integrals reduce to the
area of the intersection of a triangle with that square.
"""

from __future__ import annotations

import numpy as np

# Vertices closer than this (in domain units) are merged after clipping.
MERGE_TOL = 1e-14


def polygon_area(vertices) -> float:
    """Shoelace area of a simple polygon given as a sequence of 2D points.

    Returns 0.0 for fewer than 3 vertices.  The absolute value is taken,
    so the result does not depend on orientation.
    """
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * abs(np.sum(x * yn - y * xn))


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * np.sum(x * yn - y * xn)


def ensure_ccw(vertices) -> np.ndarray:
    """Return the vertex array in counterclockwise order."""
    pts = np.asarray(vertices, dtype=float)
    if pts.shape[0] >= 3 and _signed_area(pts) < 0.0:
        return pts[::-1].copy()
    return pts


def _merge_close(pts: list) -> np.ndarray:
    """Drop consecutive (cyclically) duplicate vertices within MERGE_TOL."""
    out = []
    n = len(pts)
    for i in range(n):
        p = pts[i]
        q = pts[(i + 1) % n]
        if abs(p[0] - q[0]) > MERGE_TOL or abs(p[1] - q[1]) > MERGE_TOL:
            out.append(p)
    return np.asarray(out, dtype=float)


def clip_convex(subject, clip) -> np.ndarray:
    """Intersection of two convex CCW polygons (Sutherland-Hodgman).

    Points on a clip edge count as inside, so the intersection is closed.
    Returns the CCW vertex array of the intersection, possibly empty
    (shape (0, 2)).  Degenerate (zero-area) inputs yield an empty result.
    """
    subj = ensure_ccw(subject)
    clp = ensure_ccw(clip)
    if subj.shape[0] < 3 or clp.shape[0] < 3:
        return np.empty((0, 2))
    if polygon_area(subj) == 0.0 or polygon_area(clp) == 0.0:
        return np.empty((0, 2))

    output = [tuple(p) for p in subj]
    m = clp.shape[0]
    for i in range(m):
        if not output:
            break
        a = clp[i]
        b = clp[(i + 1) % m]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(p):
            # >= 0: on or left of the directed clip edge (inside for CCW)
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

        inputs = output
        output = []
        n = len(inputs)
        for j in range(n):
            cur = inputs[j]
            nxt = inputs[(j + 1) % n]
            s_cur = side(cur)
            s_nxt = side(nxt)
            if s_cur >= 0.0:
                output.append(cur)
                if s_nxt < 0.0:
                    t = s_cur / (s_cur - s_nxt)
                    output.append((cur[0] + t * (nxt[0] - cur[0]),
                                   cur[1] + t * (nxt[1] - cur[1])))
            elif s_nxt >= 0.0:
                t = s_cur / (s_cur - s_nxt)
                output.append((cur[0] + t * (nxt[0] - cur[0]),
                               cur[1] + t * (nxt[1] - cur[1])))

    if len(output) < 3:
        return np.empty((0, 2))
    result = _merge_close(output)
    if result.shape[0] < 3 or polygon_area(result) == 0.0:
        return np.empty((0, 2))
    return ensure_ccw(result)


def clip_triangle_aabb(tri, xlo: float, xhi: float, ylo: float, yhi: float) -> float:
    """Area of the intersection of a triangle with an axis-aligned box.

    Fast path for the element integrals of indicator data: returns 0 without
    clipping when the bounding boxes do not overlap, and the triangle area
    when the triangle lies entirely inside the box.
    """
    pts = np.asarray(tri, dtype=float)
    tx0, ty0 = pts[:, 0].min(), pts[:, 1].min()
    tx1, ty1 = pts[:, 0].max(), pts[:, 1].max()
    if tx1 <= xlo or tx0 >= xhi or ty1 <= ylo or ty0 >= yhi:
        return 0.0
    if tx0 >= xlo and tx1 <= xhi and ty0 >= ylo and ty1 <= yhi:
        return polygon_area(pts)
    box = np.array([[xlo, ylo], [xhi, ylo], [xhi, yhi], [xlo, yhi]])
    return polygon_area(clip_convex(pts, box))
