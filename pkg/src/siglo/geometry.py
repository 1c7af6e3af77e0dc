"""Point configurations, ball-complement regions, and grid nets on their boundaries.

A ball-complement region is ``M = complement of the union of open balls
B(y_i, r_i)``. Distances to ``M`` are exact whenever the deepest covering ball
has a radial exit point that is not covered by another ball; otherwise they
fall back to the nearest point of a surface net, with the net mesh as the
reported error.

Nets live on the cubic grid of side ``delta / sqrt(n)`` anchored at the
origin, so every cell has diameter ``delta``. Each cell meeting the target set
keeps the candidate closest to its midpoint. Candidates always include the
intersections of the relevant spheres with grid lines, which makes the 1-D and
2-D nets exact coverings.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

# Points with |x - y_i| >= r_i * (1 - COVER_SLACK) for every ball count as inside M.
COVER_SLACK = 1e-9
# Ties between candidate projections are detected at this fraction of the scene diameter.
TIE_FRACTION = 1e-7


def _as_points(x, dim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    return arr


@dataclass(frozen=True, eq=False)
class PointConfig:
    """A finite candidate configuration; duplicates allowed."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a configuration needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("configuration points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def cardinality(self) -> int:
        return len(np.unique(self.points, axis=0))

    def sorted_points(self) -> np.ndarray:
        order = np.lexsort(self.points.T[::-1])
        return self.points[order]


@dataclass(frozen=True, eq=False)
class BallComplementRegion:
    """Complement of a finite union of open balls ``B(centers[i], radii[i])``."""

    centers: np.ndarray
    radii: np.ndarray
    _nets: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        r = np.array(self.radii, dtype=float).ravel()
        if c.ndim == 1:
            c = c.reshape(-1, 1) if r.size == c.size else c.reshape(1, -1)
        if c.ndim != 2 or c.shape[0] != r.size or r.size == 0:
            raise ValueError(f"need matching non-empty centers/radii, got {c.shape} and {r.shape}")
        if not np.all(np.isfinite(c)) or not np.all(np.isfinite(r)):
            raise ValueError("centers and radii must be finite")
        if np.any(r <= 0):
            raise ValueError(f"radii must be > 0, got {r.tolist()}")
        c.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @functools.cached_property
    def scene_diameter(self) -> float:
        return _diameter(self.centers) + 2 * float(self.radii.max())

    @property
    def tie_tol(self) -> float:
        return TIE_FRACTION * self.scene_diameter

    def gaps(self, x) -> np.ndarray:
        """``min_i (|x - y_i| - r_i)``: negative inside the balls, distance to the balls in M."""
        x = _as_points(x, self.dim)
        d = np.linalg.norm(x[:, None, :] - self.centers[None, :, :], axis=2)
        return np.min(d - self.radii, axis=1)

    def contains(self, x) -> np.ndarray:
        """Membership in M with the cover slack."""
        x = _as_points(x, self.dim)
        d = np.linalg.norm(x[:, None, :] - self.centers[None, :, :], axis=2)
        return np.all(d >= self.radii * (1 - COVER_SLACK), axis=1)

    def with_radii(self, radii) -> "BallComplementRegion":
        return BallComplementRegion(self.centers, radii)


@dataclass(frozen=True, eq=False)
class Net:
    points: np.ndarray
    mesh: float
    kind: str
    cardinality_bound: float

    def __post_init__(self):
        if self.kind not in ("surface", "volume"):
            raise ValueError(f"net kind must be surface or volume, got {self.kind!r}")
        if not self.mesh > 0:
            raise ValueError("net mesh must be > 0")

    @property
    def cardinality(self) -> int:
        return len(self.points)


def _diameter(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    if len(points) > 64 and points.shape[1] >= 2:
        from scipy.spatial import ConvexHull, QhullError

        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            pass
    if points.shape[1] == 1:
        return float(points.max() - points.min())
    if len(points) <= 2048:
        return float(pdist(points).max())
    d = 0.0
    for i in range(len(points) - 1):
        d = max(d, float(np.max(np.linalg.norm(points[i + 1:] - points[i], axis=1))))
    return d


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def grid_constant(n: int) -> float:
    """Multiplier in the net cardinality bounds; absorbs grid cells cut at the shell edges."""
    return float(2**n)


def dist_to_config(x, sigma: PointConfig) -> np.ndarray | float:
    """Euclidean distance from each row of ``x`` to the nearest configuration point."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.size == sigma.dim and arr.ndim <= 1
    pts = arr.reshape(1, -1) if scalar else _as_points(arr, sigma.dim)
    if pts.shape[1] != sigma.dim:
        raise ValueError(f"point of dimension {pts.shape[1]} vs configuration of dimension {sigma.dim}")
    d, _ = cKDTree(sigma.points).query(pts)
    return float(d[0]) if scalar else d


def hausdorff(a, b) -> float:
    a = _as_points(a)
    b = _as_points(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance needs two non-empty sets")
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets differ in dimension")
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def perimeter_bound(m: BallComplementRegion) -> float:
    """``n * omega_n * (diam(centers) + max r)^n / min r``, a bound on the area of the boundary."""
    n = m.dim
    return n * unit_ball_volume(n) * (_diameter(m.centers) + float(m.radii.max())) ** n / float(m.radii.min())


# ----------------------------------------------------------------------------------------------
# nets


def _sphere_grid_points(center, radius, step) -> np.ndarray:
    """Points of the sphere on grid hyperplanes ``x_d = j * step``, plus a uniform sample."""
    n = center.size
    if n == 1:
        return np.array([[center[0] - radius], [center[0] + radius]])
    if n == 2:
        out = []
        for d in range(2):
            o = 1 - d
            j = np.arange(math.ceil((center[d] - radius) / step), math.floor((center[d] + radius) / step) + 1)
            t = j * step
            h = np.sqrt(np.maximum(radius**2 - (t - center[d]) ** 2, 0.0))
            for sign in (-1.0, 1.0):
                p = np.empty((t.size, 2))
                p[:, d] = t
                p[:, o] = center[o] + sign * h
                out.append(p)
        count = max(16, int(math.ceil(2 * math.pi * radius / step)))
        ang = 2 * math.pi * np.arange(count) / count
        out.append(center + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1))
        return np.vstack(out)
    # Higher dimensions: Fibonacci-type sample at spacing well below the cell side.
    count = max(64, int(math.ceil(4 * math.pi * radius**2 / (step / 4) ** 2)))
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = math.pi * (1 + 5**0.5) * i
    s = np.sqrt(1 - z**2)
    u = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    if n > 3:
        u = np.hstack([u, np.zeros((count, n - 3))])
    return center + radius * u


def _circle_intersections(c1, r1, c2, r2) -> np.ndarray:
    d = float(np.linalg.norm(c2 - c1))
    if d == 0 or d > r1 + r2 or d < abs(r1 - r2):
        return np.zeros((0, 2))
    a = (r1**2 - r2**2 + d**2) / (2 * d)
    h = math.sqrt(max(r1**2 - a**2, 0.0))
    base = c1 + a * (c2 - c1) / d
    perp = np.array([-(c2 - c1)[1], (c2 - c1)[0]]) / d
    return np.array([base + h * perp, base - h * perp])


def _level_set_candidates(m: BallComplementRegion, offset: float, step: float) -> np.ndarray:
    """Sample the spheres of radius ``r_i + offset``, including their grid-line crossings and corners."""
    parts = []
    radii = m.radii + offset
    for c, r in zip(m.centers, radii):
        parts.append(_sphere_grid_points(c, r, step))
    if m.dim == 2:
        for i in range(len(radii)):
            for j in range(i + 1, len(radii)):
                parts.append(_circle_intersections(m.centers[i], radii[i], m.centers[j], radii[j]))
    return np.vstack(parts)


def _shell_mask(m: BallComplementRegion, pts: np.ndarray, eps: float) -> np.ndarray:
    out = np.zeros(len(pts), dtype=bool)
    for s in range(0, len(pts), 20000):
        x = pts[s:s + 20000]
        d = np.linalg.norm(x[:, None, :] - m.centers[None, :, :], axis=2)
        inside_m = np.all(d >= m.radii * (1 - COVER_SLACK), axis=1)
        gap = np.min(d - m.radii, axis=1)
        out[s:s + 20000] = inside_m & (gap <= eps * (1 + COVER_SLACK) + COVER_SLACK * m.radii.max())
    return out


def _annulus_midpoints(m: BallComplementRegion, eps: float, side: float) -> np.ndarray:
    """Midpoints of grid cells lying in some annulus ``r_i <= |x - y_i| <= r_i + eps``."""
    out = []
    n = m.dim
    for c, r in zip(m.centers, m.radii):
        lo = np.floor((c - r - eps) / side).astype(int)
        hi = np.floor((c + r + eps) / side).astype(int)
        axes = [(np.arange(lo[d], hi[d] + 1) + 0.5) * side for d in range(n)]
        grids = np.meshgrid(*axes, indexing="ij")
        mids = np.stack([g.ravel() for g in grids], axis=1)
        dist = np.linalg.norm(mids - c, axis=1)
        out.append(mids[(dist >= r) & (dist <= r + eps)])
    return np.vstack(out) if out else np.zeros((0, n))


def _pick_per_cell(candidates: np.ndarray, side: float) -> np.ndarray:
    """For every closed cell containing a candidate, keep the candidate nearest its midpoint."""
    if len(candidates) == 0:
        return candidates
    n = candidates.shape[1]
    scaled = candidates / side
    base = np.floor(scaled).astype(np.int64)
    snapped = np.round(scaled).astype(np.int64)
    # A candidate on a grid face also belongs to the neighbouring cell.
    on_face = np.abs(scaled - snapped) <= 1e-9
    cells, owners = [], []
    for combo in itertools.product((0, 1), repeat=n):
        shift = np.array(combo)
        ok = np.all(on_face | (shift == 0), axis=1)
        c = np.where(on_face, snapped - shift, base)[ok]
        cells.append(c)
        owners.append(np.nonzero(ok)[0])
    cells = np.vstack(cells)
    owners = np.concatenate(owners)
    mids = (cells + 0.5) * side
    dist = np.linalg.norm(candidates[owners] - mids, axis=1)
    order = np.lexsort((dist, *cells.T[::-1]))
    cells, owners = cells[order], owners[order]
    first = np.ones(len(cells), dtype=bool)
    first[1:] = np.any(cells[1:] != cells[:-1], axis=1)
    chosen = candidates[owners[first]]
    _, keep = np.unique(chosen, axis=0, return_index=True)
    return chosen[np.sort(keep)]


def volume_net(m: BallComplementRegion, eps: float, delta: float) -> Net:
    """Net of the closed boundary shell ``{x in M : dist(x, complement of M) <= eps}``."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    key = (float(eps), float(delta))
    if key in m._nets:
        return m._nets[key]
    n = m.dim
    side = delta / math.sqrt(n)
    if n == 1 and eps == 0:
        # the boundary is finite: keep every uncovered endpoint
        ends = np.unique(_level_set_candidates(m, 0.0, side)[:, 0])
        ends = ends[m.contains(ends.reshape(-1, 1))].reshape(-1, 1)
        net = Net(ends, float(delta), "surface", grid_constant(1) * perimeter_bound(m))
        m._nets[key] = net
        return net
    parts = [_level_set_candidates(m, 0.0, side)]
    if eps > 0:
        parts.append(_level_set_candidates(m, eps * (1 - COVER_SLACK), side))
        parts.append(_annulus_midpoints(m, eps, side))
    cand = np.vstack(parts)
    cand = cand[_shell_mask(m, cand, eps)]
    points = _pick_per_cell(cand, side)
    bound = grid_constant(n) * perimeter_bound(m)
    bound *= (eps + 2 * delta) / side**n if eps > 0 else 1.0 / delta ** (n - 1)
    net = Net(points, float(delta), "surface" if eps == 0 else "volume", bound)
    m._nets[key] = net
    return net


def surface_net(m: BallComplementRegion, delta: float) -> Net:
    return volume_net(m, 0.0, delta)


# ----------------------------------------------------------------------------------------------
# distance and projection


@dataclass
class RegionDistances:
    """Per-node distance to M, its error bound, a realizing point, and a uniqueness flag."""

    value: np.ndarray
    error: np.ndarray
    projection: np.ndarray
    unique: np.ndarray


def _net_fallback(m, x, net_tree, net_pts, mesh, exact_net):
    d, i = net_tree.query(x)
    err = 0.0 if exact_net else mesh
    near = net_tree.query_ball_point(x, d + err + m.tie_tol)
    pts = net_pts[near]
    unique = True
    if len(pts) > 1:
        link = 2 * err + m.tie_tol
        # single linkage: are the near-minimal net points one cluster?
        seen = np.zeros(len(pts), dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            j = frontier.pop()
            close = np.nonzero(~seen & (np.linalg.norm(pts - pts[j], axis=1) <= link))[0]
            seen[close] = True
            frontier.extend(close.tolist())
        unique = bool(seen.all())
    return float(d), err, net_pts[i], unique


def region_distances(x, m: BallComplementRegion, mesh: float) -> RegionDistances:
    """Vectorised distance/projection onto ``m`` for the rows of ``x``."""
    if not mesh > 0:
        raise ValueError(f"mesh must be > 0, got {mesh}")
    x = _as_points(x, m.dim)
    n_nodes = len(x)
    value = np.zeros(n_nodes)
    error = np.zeros(n_nodes)
    proj = x.copy()
    unique = np.ones(n_nodes, dtype=bool)
    if n_nodes == 0:
        return RegionDistances(value, error, proj, unique)

    tie = m.tie_tol
    if m.dim == 1:
        return _line_distances(x, m, mesh, value, error, proj, unique)
    rows = np.arange(n_nodes)
    d = np.linalg.norm(x[:, None, :] - m.centers[None, :, :], axis=2)
    covered = ~np.all(d >= m.radii * (1 - COVER_SLACK), axis=1)
    depth = m.radii - d
    deepest = np.argmax(depth, axis=1)
    top = depth[rows, deepest]
    ntied = np.sum(depth >= top[:, None] - tie, axis=1)

    # Deepest ball with the node off its center: if its radial exit lies in M it is a projection.
    first = covered & (d[rows, deepest] > tie)
    idx = np.nonzero(first)[0]
    hard = list(np.nonzero(covered & ~first)[0])
    if idx.size:
        c = m.centers[deepest[idx]]
        r = m.radii[deepest[idx]]
        u = (x[idx] - c) / d[idx, deepest[idx]][:, None]
        cand = c + r[:, None] * u
        ok = m.contains(cand)
        value[idx[ok]] = top[idx[ok]]
        proj[idx[ok]] = cand[ok]
        hard += list(idx[~ok])
        # Other balls tied for depth may exit elsewhere; a distinct exit in M makes the projection ambiguous.
        tied = idx[ok & (ntied[idx] > 1)]
        if tied.size:
            ti, tb = np.nonzero(depth[tied] >= top[tied, None] - tie)
            node = tied[ti]
            db = d[node, tb]
            far = db > tie
            node, tb, db = node[far], tb[far], db[far]
            other = m.centers[tb] + m.radii[tb, None] * (x[node] - m.centers[tb]) / db[:, None]
            apart = np.linalg.norm(other - proj[node], axis=1) > tie
            node, other = node[apart], other[apart]
            if node.size:
                unique[node[m.contains(other)]] = False
            # a tied ball centred on the node has a whole sphere of exits
            centred = tied[np.any((depth[tied] >= top[tied, None] - tie) & (d[tied] <= tie), axis=1)]
            hard += list(centred)
    net = None
    for j in sorted(set(hard)):
        xj = x[j]
        balls = np.nonzero(depth[j] >= top[j] - tie)[0]
        cands, radial = [], []
        for b in balls:
            db = d[j, b]
            if db > tie:
                cands.append(m.centers[b] + m.radii[b] * (xj - m.centers[b]) / db)
                radial.append(m.radii[b] - db)
            else:
                if net is None:
                    net = surface_net(m, mesh)
                on_sphere = np.abs(np.linalg.norm(net.points - m.centers[b], axis=1) - m.radii[b]) <= 1e-9 * m.radii[b] + tie
                cands.extend(net.points[on_sphere])
                # exact for a node on the center; net rounding otherwise
                radial.extend([m.radii[b] if db == 0 else np.nan] * int(on_sphere.sum()))
        cands = np.array(cands).reshape(-1, m.dim)
        radial = np.array(radial)
        if len(cands):
            keep = m.contains(cands)
            cands, radial = cands[keep], radial[keep]
        if len(cands):
            dist = np.where(np.isnan(radial), np.linalg.norm(cands - xj, axis=1), radial)
            best = int(np.argmin(dist))
            value[j] = dist[best]
            proj[j] = cands[best]
            close = cands[dist <= dist[best] + tie]
            unique[j] = bool(np.all(np.linalg.norm(close - cands[best], axis=1) <= tie))
            continue
        if net is None:
            net = surface_net(m, mesh)
        if len(net.points) == 0:
            raise RuntimeError("region has an empty boundary net")
        value[j], error[j], proj[j], unique[j] = _net_fallback(
            m, xj, cKDTree(net.points), net.points, mesh, exact_net=(m.dim == 1)
        )
    return RegionDistances(value, error, proj, unique)


def _line_distances(x, m, mesh, value, error, proj, unique) -> RegionDistances:
    """Exact 1-D case: the nearest uncovered interval endpoint on either side."""
    ends = surface_net(m, mesh).points[:, 0]
    xs = x[:, 0]
    covered = ~m.contains(x)
    i = np.searchsorted(ends, xs)
    left = np.where(i > 0, ends[np.maximum(i - 1, 0)], -np.inf)
    right = np.where(i < ends.size, ends[np.minimum(i, ends.size - 1)], np.inf)
    dl, dr = xs - left, right - xs
    nearest = np.where(dl <= dr, left, right)
    value[covered] = np.minimum(dl, dr)[covered]
    proj[covered, 0] = nearest[covered]
    unique[covered] = (np.abs(dl - dr) > m.tie_tol)[covered]
    return RegionDistances(value, error, proj, unique)


def dist_to_region(x, m: BallComplementRegion, mesh: float) -> tuple[float, float]:
    """``(dist(x, M), error_bound)`` for a single point."""
    r = region_distances(np.reshape(np.asarray(x, dtype=float), (1, m.dim)), m, mesh)
    return float(r.value[0]), float(r.error[0])


def project_region(x, m: BallComplementRegion, mesh: float) -> tuple[np.ndarray, bool]:
    """A nearest point of M and whether it is unique up to ``tie_tol``."""
    r = region_distances(np.reshape(np.asarray(x, dtype=float), (1, m.dim)), m, mesh)
    return r.projection[0], bool(r.unique[0])


def external_ball_check(m: BallComplementRegion, R: float, samples: int = 200, seed: int = 0) -> bool:
    """Check that every boundary point is touched from outside M by a ball of radius ``R``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not R > 0:
        raise ValueError("R must be > 0")
    mesh = max(float(m.radii.min()) / 50, 1e-6)
    pts = surface_net(m, mesh).points
    if len(pts) == 0:
        return True
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(pts), size=min(samples, len(pts)), replace=False)
    tol = 1e-6 * m.scene_diameter
    for x in pts[np.sort(pick)]:
        gap = np.abs(np.linalg.norm(m.centers - x, axis=1) - m.radii)
        # where spheres touch, the widest one gives the roomiest inner ball
        on = gap <= max(float(gap.min()), 1e-9 * float(m.radii.max()))
        sphere = int(np.flatnonzero(on)[np.argmax(m.radii[on])])
        y, r = m.centers[sphere], m.radii[sphere]
        z = x + R * (y - x) / r
        value, err = dist_to_region(z, m, mesh)
        if value + err < R - tol:
            return False
    return True


def enlarge(e, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Membership predicate of the open ``eps``-enlargement of ``e``.

    ``e`` is a PointConfig, or a BallComplementRegion standing for the union of
    its balls (the complement of M).
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if isinstance(e, PointConfig):
        tree = cKDTree(e.points)

        def inside(x):
            d, _ = tree.query(_as_points(x, e.dim))
            return d < eps

        return inside
    if isinstance(e, BallComplementRegion):

        def inside(x):
            x = _as_points(x, e.dim)
            d = np.linalg.norm(x[:, None, :] - e.centers[None, :, :], axis=2)
            return np.any(d < e.radii + eps, axis=1)

        return inside
    raise TypeError(f"cannot enlarge {type(e).__name__}")
