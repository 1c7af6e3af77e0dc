"""Ball-complement minimizers of the unconstrained problem and their optimality checks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .geometry import BallComplementRegion, PointConfig, _diameter, dist_to_config, region_distances
from .measure import MeasureComponent, SignedMeasure, discretize, quadrature_nodes, total_mass, w1_distance
from .objective import ObjectiveValue, eval_F_region
from .solve_k import boundedness_certificate

GOLDEN = (math.sqrt(5) - 1) / 2
# Pushforward measures are binned until each side has at most this many atoms before the transport LP.
MAX_TRANSPORT_ATOMS = 400


def _minus_atoms(phi: SignedMeasure) -> tuple[np.ndarray, np.ndarray]:
    if not phi.minus.is_atomic:
        raise ValueError("the minus part must be atomic; discretize it first")
    return phi.minus.points, phi.minus.weights


def canonicalize(sigma: PointConfig, phi: SignedMeasure) -> BallComplementRegion:
    """Largest region with the same distances to the minus atoms as ``sigma``."""
    centers, _ = _minus_atoms(phi)
    if len(centers) == 0:
        raise ValueError("canonical region needs at least one minus atom")
    radii = np.atleast_1d(dist_to_config(centers, sigma))
    if np.any(radii <= 0):
        bad = centers[radii <= 0][0].tolist()
        raise ValueError(f"minus atom at {bad} lies on the configuration (zero radius)")
    return BallComplementRegion(centers, radii)


def ball_mass(c: MeasureComponent, center, radius: float) -> float:
    """Quadrature mass of the open ball ``B(center, radius)``."""
    x, w = quadrature_nodes(c)
    d = np.linalg.norm(x - np.asarray(center, dtype=float), axis=1)
    return math.fsum(w[d < radius].tolist())


def stationary_radius(phi_plus: MeasureComponent, center, target_mass: float, tol: float = 1e-9) -> float:
    """Radius at which the open-ball mass around ``center`` reaches ``target_mass``.

    The quadrature mass is a step function of the radius. Bisection brackets the
    jump where it reaches the target; if the flat stretch just below or above
    that jump is within ``tol`` of the target, its midpoint is returned.
    """
    x, w = quadrature_nodes(phi_plus)
    total = math.fsum(w.tolist())
    if not 0 < target_mass < total:
        raise ValueError(f"target mass {target_mass!r} must lie strictly between 0 and the total {total!r}")
    d = np.linalg.norm(x - np.asarray(center, dtype=float), axis=1)
    order = np.argsort(d, kind="stable")
    ds = d[order]
    cum = np.cumsum(w[order])

    def mass(r):  # open ball
        i = int(np.searchsorted(ds, r, side="left"))
        return cum[i - 1] if i > 0 else 0.0

    lo, hi = 0.0, float(ds[-1]) + 1.0
    while hi - lo > 1e-15 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mass(mid) >= target_mass:
            hi = mid
        else:
            lo = mid
    # the jump that reaches the target sits at the last node distance below hi
    jump = float(ds[max(int(np.searchsorted(ds, hi, side="left")) - 1, 0)])
    first = int(np.searchsorted(ds, jump, side="left"))
    last = int(np.searchsorted(ds, jump, side="right"))
    below = cum[first - 1] if first > 0 else 0.0
    above = cum[last - 1]
    if abs(above - target_mass) <= tol and last < len(ds):
        return 0.5 * (jump + float(ds[last]))
    if abs(below - target_mass) <= tol and first > 0:
        return 0.5 * (float(ds[first - 1]) + jump)
    return jump


@dataclass
class RadiiResult:
    region: BallComplementRegion
    objective: ObjectiveValue
    trace: list = field(default_factory=list)
    sweeps: int = 0

    def __iter__(self):
        yield self.region
        yield self.objective


def _golden_section(f, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimize_radii(phi: SignedMeasure, init: BallComplementRegion, mesh: float, max_iters: int = 50) -> RadiiResult:
    """Cyclic golden-section descent on the radii; the value never increases."""
    centers, _ = _minus_atoms(phi)
    if centers.shape != init.centers.shape or not np.allclose(centers, init.centers):
        raise ValueError("region centers must be the minus atoms")
    current = init
    best = eval_F_region(current, phi, mesh)
    trace = [best.value]
    x, _ = phi.signed_nodes()
    upper = boundedness_certificate(phi, best.value) + _diameter(np.vstack([x, centers]))
    upper = max(upper, float(init.radii.max()) + mesh)
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        largest_change = 0.0
        for i in range(len(current.radii)):

            def value(r, i=i):
                radii = current.radii.copy()
                radii[i] = r
                return eval_F_region(current.with_radii(radii), phi, mesh).value

            r_new, f_new = _golden_section(value, mesh, upper, mesh)
            if f_new < best.value:
                radii = current.radii.copy()
                largest_change = max(largest_change, abs(r_new - radii[i]))
                radii[i] = r_new
                current = current.with_radii(radii)
                best = eval_F_region(current, phi, mesh)
        trace.append(best.value)
        if largest_change < mesh:
            break
    return RadiiResult(current, best, trace, sweeps)


# ----------------------------------------------------------------------------------------------
# optimality conditions


def _covered_nodes(m: BallComplementRegion, c: MeasureComponent, mesh: float):
    x, w = quadrature_nodes(c)
    if w.size == 0:
        return x, w, region_distances(x, m, mesh)
    keep = ~m.contains(x)
    x, w = x[keep], w[keep]
    return x, w, region_distances(x, m, mesh)


def first_variation(
    m: BallComplementRegion, phi: SignedMeasure, field: Callable[[np.ndarray], np.ndarray], mesh: float
) -> tuple[float, float]:
    """Derivative of the region value when the boundary is transported by ``field``.

    Nodes with a non-unique projection are left out; their total mass is returned
    alongside the value.
    """
    total = []
    dropped = []
    for part, sign in ((phi.plus, 1.0), (phi.minus, -1.0)):
        x, w, r = _covered_nodes(m, part, mesh)
        if w.size == 0:
            continue
        ok = r.unique & (r.value > 0)
        dropped.extend(w[~ok].tolist())
        if not ok.any():
            continue
        proj = r.projection[ok]
        u = (proj - x[ok]) / r.value[ok][:, None]
        X = np.asarray(field(proj), dtype=float).reshape(proj.shape)
        total.extend((sign * w[ok] * np.sum(X * u, axis=1)).tolist())
    return math.fsum(total), math.fsum(dropped)


@dataclass
class OptimalityReport:
    balanced_projection_residual: float
    mass_gap: float
    dropped_ridge_mass: float
    region_mass_gap: float
    first_variation_values: list = field(default_factory=list)
    transport_bin: float = 0.0


def _binned(points, weights, dim, step) -> MeasureComponent:
    c = MeasureComponent(points, weights, dim=dim)
    return discretize(c, step) if step > 0 else c


def balanced_projection_residual(m: BallComplementRegion, phi: SignedMeasure, mesh: float) -> OptimalityReport:
    """Transport distance between the projected plus and minus mass lying outside M."""
    pushed = []
    dropped = 0.0
    for part in (phi.plus, phi.minus):
        x, w, r = _covered_nodes(m, part, mesh)
        # ridge nodes have no single image; leave them out and report their mass
        dropped += math.fsum(w[~r.unique].tolist())
        pushed.append((r.projection[r.unique], w[r.unique]))
    (pp, wp), (pm, wm) = pushed
    mp, mm = math.fsum(wp.tolist()), math.fsum(wm.tolist())
    gap = abs(mp - mm)
    region_gap = mass_check(m, phi)
    if wp.size == 0 and wm.size == 0:
        return OptimalityReport(0.0, 0.0, dropped, region_gap)
    # pad the lighter side at its own barycenter (the heavier one's if it is empty)
    if mp < mm:
        (pp, wp, mp), (pm, wm, mm) = (pm, wm, mm), (pp, wp, mp)
    if mp > mm:
        ref_p, ref_w = (pm, wm) if wm.size else (pp, wp)
        bary = (ref_w @ ref_p) / ref_w.sum()
        pm = np.vstack([pm, bary])
        wm = np.append(wm, mp - mm)
        # match the heavier total exactly
        wm[-1] += mp - math.fsum(wm.tolist())
    dim = m.dim
    step = 0.0
    if dim > 1:
        step = mesh
        while True:
            a = _binned(pp, wp, dim, step)
            b = _binned(pm, wm, dim, step)
            if len(a.weights) <= MAX_TRANSPORT_ATOMS and len(b.weights) <= MAX_TRANSPORT_ATOMS:
                break
            step *= 2
    else:
        a = _binned(pp, wp, dim, 0.0)
        b = _binned(pm, wm, dim, 0.0)
    residual = w1_distance(a, b)
    return OptimalityReport(residual, gap, dropped, region_gap, transport_bin=step)


def mass_check(m: BallComplementRegion, phi: SignedMeasure) -> float:
    """``phi+(M) - (m+ - m-)``; negative values flag a region that cannot be optimal."""
    x, w = quadrature_nodes(phi.plus)
    inside = math.fsum(w[m.contains(x)].tolist()) if w.size else 0.0
    return inside - (total_mass(phi.plus) - total_mass(phi.minus))


class Separation(enum.Enum):
    HULLS_DISJOINT = "hulls_disjoint"
    DISTANCE_EXCEEDS_DIAMETER = "distance_exceeds_diameter"
    NONE = "none"


def _hull_points(x: np.ndarray) -> np.ndarray:
    if x.shape[1] == 1:
        return np.array([[x.min()], [x.max()]])
    if len(x) > x.shape[1] + 1:
        try:
            return x[ConvexHull(x).vertices]
        except QhullError:
            pass
    return x


def _strictly_separable(a: np.ndarray, b: np.ndarray) -> bool:
    """Feasibility of ``<u, a> >= c + 1`` and ``<u, b> <= c - 1``; equivalent to disjoint hulls."""
    n = a.shape[1]
    A_ub = np.vstack([np.hstack([-a, np.ones((len(a), 1))]), np.hstack([b, -np.ones((len(b), 1))])])
    b_ub = -np.ones(len(a) + len(b))
    res = linprog(np.zeros(n + 1), A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (n + 1), method="highs")
    return res.status == 0


def separation_check(phi: SignedMeasure) -> Separation:
    """First satisfied sufficient condition for the minus support to avoid the optimal region."""
    xp, wp = quadrature_nodes(phi.plus)
    xm, wm = quadrature_nodes(phi.minus)
    xp, xm = xp[wp > 0], xm[wm > 0]
    if len(xp) == 0 or len(xm) == 0:
        return Separation.HULLS_DISJOINT
    if _strictly_separable(_hull_points(xp), _hull_points(xm)):
        return Separation.HULLS_DISJOINT
    gap = float(cKDTree(xp).query(xm)[0].min())
    if gap > _diameter(_hull_points(xp)):
        return Separation.DISTANCE_EXCEEDS_DIAMETER
    return Separation.NONE
