"""Planar segment helpers shared by the channel builder and the tracer."""

import math

EPS = 1e-12


def segment_intersection(ax, ay, bx, by, cx, cy, dx, dy):
    """Intersect segment AB with segment CD.

    Returns (t, s) with A + t(B-A) = C + s(D-C), or None when the segments are
    parallel.  Callers apply their own range tests on t and s.
    """
    rx, ry = bx - ax, by - ay
    qx, qy = dx - cx, dy - cy
    den = rx * qy - ry * qx
    if abs(den) < EPS:
        return None
    wx, wy = cx - ax, cy - ay
    t = (wx * qy - wy * qx) / den
    s = (wx * ry - wy * rx) / den
    return t, s


def crosses(ax, ay, bx, by, wall, t_eps=1e-9):
    """True when the open segment AB passes through ``wall`` (half-open in s)."""
    hit = segment_intersection(ax, ay, bx, by, wall.x1, wall.y1, wall.x2, wall.y2)
    if hit is None:
        return False
    t, s = hit
    return t_eps < t < 1.0 - t_eps and 0.0 <= s < 1.0


def mirror_point(px, py, x1, y1, x2, y2):
    """Reflect P across the infinite line through (x1, y1)-(x2, y2)."""
    dx, dy = x2 - x1, y2 - y1
    L2 = dx * dx + dy * dy
    t = ((px - x1) * dx + (py - y1) * dy) / L2
    fx, fy = x1 + t * dx, y1 + t * dy
    return 2.0 * fx - px, 2.0 * fy - py


def on_segment(px, py, x1, y1, x2, y2, tol=1e-9):
    """True when P lies on segment (x1, y1)-(x2, y2) within ``tol`` meters."""
    dx, dy = x2 - x1, y2 - y1
    L = math.hypot(dx, dy)
    cross = ((px - x1) * dy - (py - y1) * dx) / L
    if abs(cross) > tol:
        return False
    t = ((px - x1) * dx + (py - y1) * dy) / (L * L)
    return -tol / L <= t <= 1.0 + tol / L
