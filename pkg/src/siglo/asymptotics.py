"""Quantization constants, the limit density of optimal points, and k-sweep experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import BallComplementRegion, PointConfig, hausdorff, surface_net, unit_ball_volume
from .measure import DensityField, GriddedDensity, MeasureComponent, SignedMeasure, discretize, w1_distance
from .objective import eval_F_region, rescaled_gap
from .solve_k import SolveReport, SolverConfig, local_search

THETA_1 = 0.25
THETA_2 = (4 + 3 * math.log(3)) / (6 * math.sqrt(2) * 3**0.75)


def theta_lower_bound(n: int) -> float:
    """``omega_n^(-1/n) * n / (n + 1)``: the constant for quantizing by balls of equal volume."""
    return unit_ball_volume(n) ** (-1.0 / n) * n / (n + 1)


def known_theta(n: int) -> float | None:
    return {1: THETA_1, 2: THETA_2}.get(n)


def empirical_measure(sigma: PointConfig) -> MeasureComponent:
    """Uniform probability on the points of ``sigma``; repeated points merge."""
    pts, counts = np.unique(sigma.points, axis=0, return_counts=True)
    return MeasureComponent(pts, counts / len(sigma.points), dim=sigma.dim)


def unit_cube_measure(n: int, grid_res: int) -> SignedMeasure:
    return SignedMeasure(MeasureComponent.from_density(GriddedDensity.uniform(np.zeros(n), np.ones(n), grid_res)))


def theta_experiment(
    n: int, k: int, restarts: int = 1, seed: int = 0, grid_res: int = 256, init: str = "nodes", max_iters: int = 200
) -> SolveReport:
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2 or 3, got {n}")
    cfg = SolverConfig(k=k, restarts=restarts, seed=seed, init=init, max_iters=max_iters)
    return local_search(unit_cube_measure(n, grid_res), cfg)


def estimate_theta(
    n: int, k: int, restarts: int = 1, seed: int = 0, grid_res: int = 256, init: str = "nodes", max_iters: int = 200
) -> float:
    """``k^(1/n)`` times the best average distance to ``k`` points on the unit cube."""
    report = theta_experiment(n, k, restarts, seed, grid_res, init, max_iters)
    return k ** (1.0 / n) * report.value


# ----------------------------------------------------------------------------------------------
# limit density and Gamma-limit value


def _in_region(f: GriddedDensity, m: BallComplementRegion) -> np.ndarray:
    return m.contains(f.midpoints()).reshape(f.resolution)


def limit_density(f_plus: DensityField, m: BallComplementRegion) -> DensityField:
    """Normalized ``(f+)^(n/(n+1))`` on the cells of ``f_plus`` whose midpoint lies in ``m``."""
    n = f_plus.dim
    vals = np.where(_in_region(f_plus, m), f_plus.values, 0.0) ** (n / (n + 1))
    integral = math.fsum((vals.ravel() * f_plus.cell_volume).tolist())
    if not integral > 0:
        raise ValueError("the plus density gives the region no mass")
    return f_plus.with_values(vals / integral)


def gamma_limit_value(rho: DensityField, m: BallComplementRegion, f_plus: DensityField, theta: float) -> float:
    """``theta * integral over M of f+ rho^(-1/n)``; infinite when rho vanishes where f+ does not."""
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if rho.resolution != f_plus.resolution or not (np.allclose(rho.lo, f_plus.lo) and np.allclose(rho.hi, f_plus.hi)):
        raise ValueError("rho and f_plus must share a grid")
    n = f_plus.dim
    inside = _in_region(f_plus, m) & (f_plus.values > 0)
    if np.any(rho.values[inside] <= 0):
        return math.inf
    terms = f_plus.values[inside] * rho.values[inside] ** (-1.0 / n) * f_plus.cell_volume
    return theta * math.fsum(terms.tolist())


def closed_form_limit_value(f_plus: DensityField, m: BallComplementRegion, theta: float) -> float:
    """``theta * (integral over M of (f+)^(n/(n+1)))^((n+1)/n)``, the value at the limit density."""
    n = f_plus.dim
    vals = np.where(_in_region(f_plus, m), f_plus.values, 0.0) ** (n / (n + 1))
    integral = math.fsum((vals.ravel() * f_plus.cell_volume).tolist())
    return theta * integral ** ((n + 1) / n)


def histogram_density(mu: MeasureComponent, grid: GriddedDensity, bins: int | None = None) -> tuple[DensityField, float]:
    """Smooth an atomic probability into a density on ``grid``.

    Atoms are counted on a coarser grid over the same box (``bins`` cells per
    axis) and the resulting density is spread over the fine cells. Returns the
    density and the mass that fell outside the box.
    """
    n = grid.dim
    if bins is None:
        bins = max(1, round((len(mu.weights) / 16) ** (1.0 / n)))
    coarse = (grid.hi - grid.lo) / bins
    idx = np.floor((mu.points - grid.lo) / coarse).astype(int)
    idx = np.where(np.isclose(mu.points, grid.hi), bins - 1, idx)
    inside = np.all((idx >= 0) & (idx < bins), axis=1)
    hist = np.zeros((bins,) * n)
    np.add.at(hist, tuple(idx[inside].T), mu.weights[inside])
    hist /= float(np.prod(coarse))
    fine_idx = np.floor((grid.midpoints() - grid.lo) / coarse).astype(int)
    fine_idx = np.clip(fine_idx, 0, bins - 1)
    values = hist[tuple(fine_idx.T)].reshape(grid.resolution)
    outside = math.fsum(mu.weights[~inside].tolist())
    return grid.with_values(values), outside


def g_infinity(mu, candidate_regions, f_plus: DensityField, theta: float, tol: float = 1e-9, bins: int | None = None) -> float:
    """Smallest Gamma-limit value over candidate regions that carry all of ``mu``."""
    regions = list(candidate_regions)
    if not regions:
        raise ValueError("need at least one candidate region")
    best = math.inf
    for m in regions:
        if isinstance(mu, GriddedDensity):
            rho = mu
            out = np.where(_in_region(f_plus, m), 0.0, rho.values)
            outside = math.fsum((out.ravel() * rho.cell_volume).tolist())
        else:
            rho, outside = histogram_density(mu, f_plus, bins)
            outside += math.fsum(mu.weights[~m.contains(mu.points)].tolist())
        if outside > tol:
            continue
        best = min(best, gamma_limit_value(rho, m, f_plus, theta))
    return best


# ----------------------------------------------------------------------------------------------
# k sweeps


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    F_value: float
    rescaled_gap: float
    hausdorff_to_M: float
    w1_to_rho: float
    extrapolated: bool
    per_restart_values: tuple = ()


def region_reference_points(m: BallComplementRegion, rho: DensityField, mesh: float) -> np.ndarray:
    """A finite stand-in for M clipped to the support of the limit density."""
    mids = rho.midpoints()
    positive = rho.values.ravel() > 0
    pts = [mids[positive]]
    half = rho.cell_size / 2
    boundary = surface_net(m, mesh).points
    if len(boundary):
        cells = np.floor((boundary - rho.lo) / rho.cell_size).astype(int)
        ok = np.all((cells >= 0) & (cells < np.array(rho.resolution)), axis=1)
        near = np.zeros(len(boundary), dtype=bool)
        if ok.any():
            near[ok] = rho.values[tuple(cells[ok].T)] > 0
        # boundary points bordering the support from a neighbouring cell
        if not near.all() and positive.any():
            from scipy.spatial import cKDTree

            d, _ = cKDTree(mids[positive]).query(boundary[~near])
            near[~near] = d <= float(np.linalg.norm(half))
        pts.append(boundary[near])
    return np.vstack(pts)


def convergence_report(
    phi: SignedMeasure,
    k_schedule,
    cfg: SolverConfig,
    m_star: BallComplementRegion,
    rho_star: DensityField,
    mesh: float | None = None,
) -> list[ConvergenceRow]:
    """Solve for each k and compare against the limit region and the limit density."""
    ks = list(k_schedule)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k schedule must be strictly increasing")
    n = phi.dim
    if mesh is None:
        mesh = float(np.min(rho_star.cell_size))
    F_ref = eval_F_region(m_star, phi, mesh).value
    reference = region_reference_points(m_star, rho_star, mesh)
    rho_component = MeasureComponent.from_density(rho_star)
    support_volume = float(np.count_nonzero(rho_star.values)) * rho_star.cell_volume
    rows = []
    for k in ks:
        report = local_search(phi, replace(cfg, k=k))
        step = (support_volume / k) ** (1.0 / n)
        target = discretize(rho_component, step)
        rows.append(
            ConvergenceRow(
                k=k,
                F_value=report.value,
                rescaled_gap=rescaled_gap(k, report.value, F_ref, n),
                hausdorff_to_M=hausdorff(report.best.points, reference),
                w1_to_rho=w1_distance(empirical_measure(report.best), target),
                extrapolated=n < 2,
                per_restart_values=tuple(report.per_restart_values),
            )
        )
    return rows
