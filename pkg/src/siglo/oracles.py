"""Brute-force reference computations used to check the production routines.

Everything here is slow and direct on purpose: explicit loops, no spatial
indexes, and no shared code with the geometry module.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def brute_min_dist(x, points) -> float:
    x = np.asarray(x, dtype=float)
    return min(math.dist(x, p) for p in np.asarray(points, dtype=float))


def _covered(p, centers, radii, skip=(), slack=1e-9) -> bool:
    for j, (c, r) in enumerate(zip(centers, radii)):
        if j in skip:
            continue
        if math.dist(p, c) < r * (1 - slack):
            return True
    return False


def circle_intersections(c1, r1, c2, r2) -> list[np.ndarray]:
    d = math.dist(c1, c2)
    if d == 0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    u = (np.asarray(c2) - np.asarray(c1)) / d
    base = np.asarray(c1) + a * u
    perp = np.array([-u[1], u[0]])
    return [base + h * perp, base - h * perp]


def exact_region_distance_2d(x, centers, radii) -> float:
    """``dist(x, M)`` for a planar ball complement, by enumerating boundary candidates.

    The boundary is made of circle arcs; the nearest point of an arc is either
    the radial projection onto its circle or one of its end points, which are
    pairwise circle intersections.
    """
    x = np.asarray(x, dtype=float)
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if not _covered(x, centers, radii, slack=0.0):
        return 0.0
    best = math.inf
    corners = {i: [] for i in range(len(radii))}
    for i, j in itertools.combinations(range(len(radii)), 2):
        for p in circle_intersections(centers[i], radii[i], centers[j], radii[j]):
            if not _covered(p, centers, radii, skip=(i, j)):
                corners[i].append(p)
                corners[j].append(p)
                best = min(best, math.dist(x, p))
    for i, (c, r) in enumerate(zip(centers, radii)):
        d = math.dist(x, c)
        if d == 0:
            # every point of the circle is at distance r; it counts if any arc survives
            probe = c + np.array([r, 0.0])
            if corners[i] or not _covered(probe, centers, radii, skip=(i,)):
                best = min(best, r)
            continue
        p = c + r * (x - c) / d
        if not _covered(p, centers, radii, skip=(i,)):
            best = min(best, math.dist(x, p))
    return best


def exact_region_distance_1d(x: float, centers, radii) -> float:
    """``dist(x, M)`` on the line: merge the open intervals and measure to the nearest end."""
    iv = sorted((float(c) - r, float(c) + r) for c, r in zip(np.ravel(centers), np.ravel(radii)))
    merged = []
    for a, b in iv:
        if merged and a < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    for a, b in merged:
        if a < x < b:
            return min(x - a, b - x)
    return 0.0


def cdf_w1_1d(xa, wa, xb, wb) -> float:
    """``int |F_a - F_b|`` over the merged breakpoints."""
    pts = sorted(set(np.ravel(xa).tolist()) | set(np.ravel(xb).tolist()))
    total = 0.0
    for left, right in zip(pts, pts[1:]):
        fa = sum(w for x, w in zip(np.ravel(xa), wa) if x <= left)
        fb = sum(w for x, w in zip(np.ravel(xb), wb) if x <= left)
        total += abs(fa - fb) * (right - left)
    return total
