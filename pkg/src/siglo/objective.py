"""The signed average-distance functional on point configurations and regions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BallComplementRegion, PointConfig, _diameter, region_distances
from .measure import SignedMeasure, quadrature_nodes


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    quadrature_step: float
    distance_error_bound: float = 0.0

    def __post_init__(self):
        if self.quadrature_step < 0 or self.distance_error_bound < 0:
            raise ValueError("error bounds must be >= 0")

    def __float__(self):
        return self.value


def _weighted_sum(w: np.ndarray, d: np.ndarray) -> float:
    return math.fsum((w * d).tolist())


def eval_F(sigma: PointConfig, phi: SignedMeasure) -> ObjectiveValue:
    """``int dist(x, sigma) dphi+ - int dist(x, sigma) dphi-`` by midpoint quadrature."""
    if sigma.dim != phi.dim:
        raise ValueError(f"configuration dimension {sigma.dim} vs measure dimension {phi.dim}")
    tree = cKDTree(sigma.points)
    total = 0.0
    for part, sign in ((phi.plus, 1.0), (phi.minus, -1.0)):
        x, w = quadrature_nodes(part)
        if w.size:
            d, _ = tree.query(x)
            total += sign * _weighted_sum(w, d)
    return ObjectiveValue(total, phi.step)


def eval_F_region(m: BallComplementRegion, phi: SignedMeasure, mesh: float) -> ObjectiveValue:
    """The functional with ``dist(., M)``; accumulates the per-node distance error."""
    if m.dim != phi.dim:
        raise ValueError(f"region dimension {m.dim} vs measure dimension {phi.dim}")
    total = 0.0
    err = 0.0
    for part, sign in ((phi.plus, 1.0), (phi.minus, -1.0)):
        x, w = quadrature_nodes(part)
        if w.size:
            r = region_distances(x, m, mesh)
            total += sign * _weighted_sum(w, r.value)
            err += _weighted_sum(w, r.error)
    return ObjectiveValue(total, phi.step, err)


def scene_diameter(sigma: PointConfig, phi: SignedMeasure) -> float:
    x, _ = phi.signed_nodes()
    return _diameter(np.vstack([x, sigma.points]))


def essential_part(sigma: PointConfig, phi: SignedMeasure, tol: float | None = None) -> PointConfig:
    """Points of ``sigma`` that are (within ``tol``) nearest to at least one quadrature node."""
    x, _ = phi.signed_nodes()
    if len(x) == 0:
        raise ValueError("essential part of a configuration against an empty measure")
    if tol is None:
        tol = 1e-9 * scene_diameter(sigma, phi)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    pts = sigma.points
    tree = cKDTree(pts)
    d1, _ = tree.query(x)
    keep = np.zeros(len(pts), dtype=bool)
    for near in tree.query_ball_point(x, d1 + tol):
        keep[near] = True
    return PointConfig(pts[keep])


def rescaled_gap(k: int, F_sigma: float, F_ref: float, n: int) -> float:
    """``k^(1/n) * (F_sigma - F_ref)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return k ** (1.0 / n) * (F_sigma - F_ref)
