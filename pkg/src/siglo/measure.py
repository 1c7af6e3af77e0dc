"""Compactly supported signed measures built from Dirac atoms and gridded densities.

Every integral against a measure goes through :func:`quadrature_nodes`, which
turns atoms into themselves and each density cell into a single node at the
cell midpoint (midpoint rule). Node order is fixed: atoms first, then every
density in insertion order, cells in row-major order. All summations use that
order so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

# Relative tolerance on the mass balance accepted by ``w1_distance``.
MASS_RTOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Atom:
    """A Dirac mass ``weight * delta_location``."""

    location: tuple[float, ...]
    weight: float

    def __post_init__(self):
        loc = tuple(float(v) for v in np.atleast_1d(self.location))
        if not all(math.isfinite(v) for v in loc):
            raise ValueError(f"atom location must be finite, got {loc}")
        if not self.weight > 0:
            raise ValueError(f"atom weight must be > 0, got {self.weight}")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True, eq=False)
class GriddedDensity:
    """Piecewise-constant density on an axis-aligned box.

    ``values`` has one entry per cell (shape == ``resolution``) and is read as
    mass per unit volume.
    """

    lo: np.ndarray
    hi: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lo))
        hi = _frozen(np.atleast_1d(self.hi))
        values = np.array(self.values, dtype=float)
        if values.ndim == 0 or lo.shape != hi.shape or values.ndim != lo.size:
            raise ValueError("box corners and value grid must share the dimension")
        if np.any(hi <= lo):
            raise ValueError("box must have positive volume")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("density values must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        func: Callable[..., np.ndarray],
        lo: Sequence[float],
        hi: Sequence[float],
        resolution: int | Sequence[int],
        subsamples: int = 1,
    ) -> "GriddedDensity":
        """Tabulate ``func(*coords)`` as cell averages over a ``subsamples**n`` midpoint sub-grid."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n = lo.size
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (n,))
        fine = res * subsamples
        axes = [lo[d] + (np.arange(fine[d]) + 0.5) * (hi[d] - lo[d]) / fine[d] for d in range(n)]
        grids = np.meshgrid(*axes, indexing="ij")
        vals = np.broadcast_to(np.asarray(func(*grids), dtype=float), tuple(fine))
        if subsamples > 1:
            shape = []
            for d in range(n):
                shape += [int(res[d]), subsamples]
            vals = vals.reshape(shape).mean(axis=tuple(range(1, 2 * n, 2)))
        return cls(lo, hi, vals)

    @classmethod
    def uniform(cls, lo, hi, resolution, value: float = 1.0) -> "GriddedDensity":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        res = tuple(np.broadcast_to(np.asarray(resolution, dtype=int), (lo.size,)))
        return cls(lo, hi, np.full(res, float(value)))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def resolution(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def cell_size(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_size))

    @property
    def step(self) -> float:
        """Largest cell edge; the quadrature step reported by integrals."""
        return float(np.max(self.cell_size))

    def midpoints(self) -> np.ndarray:
        """Cell midpoints, row-major, shape ``(cells, n)``."""
        h = self.cell_size
        axes = [self.lo[d] + (np.arange(self.resolution[d]) + 0.5) * h[d] for d in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @property
    def mass(self) -> float:
        # sum first, then scale by volume per cell: exact for constants on boxes with exact volume
        box = float(np.prod(self.hi - self.lo))
        return math.fsum(self.values.ravel().tolist()) * box / self.values.size

    @property
    def normalized(self) -> bool:
        return abs(self.mass - 1.0) <= 1e-9

    def with_values(self, values) -> "GriddedDensity":
        return GriddedDensity(self.lo, self.hi, np.asarray(values, dtype=float).reshape(self.resolution))


# The limit density and the Gamma-limit integrands live on the same grids.
DensityField = GriddedDensity


@dataclass(frozen=True, eq=False)
class MeasureComponent:
    """A finite positive measure: atoms (arrays) plus gridded densities."""

    points: np.ndarray
    weights: np.ndarray
    densities: tuple[GriddedDensity, ...] = ()
    dim: int = field(default=0)
    _nodes: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float).ravel()
        dim = int(self.dim)
        if pts.size == 0:
            if dim <= 0:
                dims = {d.dim for d in self.densities}
                if len(dims) != 1:
                    raise ValueError("cannot infer dimension of an empty component")
                dim = dims.pop()
            pts = np.zeros((0, dim))
        else:
            if pts.ndim == 1:
                pts = pts.reshape(-1, 1) if dim in (0, 1) else pts.reshape(1, -1)
            dim = dim or pts.shape[1]
        if pts.shape != (w.size, dim):
            raise ValueError(f"atom arrays disagree: points {pts.shape}, weights {w.shape}, dim {dim}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atom locations must be finite")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be finite and > 0")
        for d in self.densities:
            if d.dim != dim:
                raise ValueError(f"density of dimension {d.dim} in a {dim}-dimensional component")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "densities", tuple(self.densities))
        object.__setattr__(self, "dim", dim)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Atom], dim: int | None = None) -> "MeasureComponent":
        atoms = list(atoms)
        if not atoms:
            if dim is None:
                raise ValueError("dimension required for an empty atom list")
            return cls.empty(dim)
        return cls([a.location for a in atoms], [a.weight for a in atoms], dim=dim or len(atoms[0].location))

    @classmethod
    def empty(cls, dim: int) -> "MeasureComponent":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def from_density(cls, density: GriddedDensity) -> "MeasureComponent":
        return cls(np.zeros((0, density.dim)), np.zeros(0), (density,), dim=density.dim)

    @property
    def atoms(self) -> list[Atom]:
        return [Atom(tuple(p), w) for p, w in zip(self.points, self.weights)]

    @property
    def is_atomic(self) -> bool:
        return not any(np.any(d.values > 0) for d in self.densities)

    @property
    def is_empty(self) -> bool:
        return self.weights.size == 0 and not any(np.any(d.values > 0) for d in self.densities)

    @property
    def step(self) -> float:
        """Quadrature step: largest density cell edge, 0 for purely atomic components."""
        return max((d.step for d in self.densities), default=0.0)


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """``plus - minus`` with both parts compactly supported."""

    plus: MeasureComponent
    minus: MeasureComponent | None = None

    def __post_init__(self):
        minus = self.minus if self.minus is not None else MeasureComponent.empty(self.plus.dim)
        if minus.dim != self.plus.dim:
            raise ValueError(f"plus has dimension {self.plus.dim}, minus has {minus.dim}")
        object.__setattr__(self, "minus", minus)

    @property
    def dim(self) -> int:
        return self.plus.dim

    def signed_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes of both parts; weights negative for the minus part."""
        xp, wp = quadrature_nodes(self.plus)
        xm, wm = quadrature_nodes(self.minus)
        return np.vstack([xp, xm]), np.concatenate([wp, -wm])

    @property
    def step(self) -> float:
        return max(self.plus.step, self.minus.step)


def quadrature_nodes(c: MeasureComponent) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-rule nodes ``(points, weights)``; zero cells are skipped.

    The arrays are cached on the (immutable) component and returned read-only.
    """
    if c._nodes:
        return c._nodes[0]
    pts = [c.points]
    ws = [c.weights]
    for d in c.densities:
        vals = d.values.ravel()
        keep = vals > 0
        pts.append(d.midpoints()[keep])
        ws.append(vals[keep] * d.cell_volume)
    x, w = np.vstack(pts), np.concatenate(ws)
    x.setflags(write=False)
    w.setflags(write=False)
    c._nodes.append((x, w))
    return x, w


def total_mass(c: MeasureComponent) -> float:
    return math.fsum(c.weights.tolist() + [d.mass for d in c.densities])


def discretize(c: MeasureComponent, step: float) -> MeasureComponent:
    """Collapse the component onto a grid of cubes ``[i*step, (i+1)*step)``.

    Each cube with positive mass becomes one atom at the mass-weighted
    centroid of its nodes, clamped into the cube. The transport cost of the
    collapse is at most ``step * sqrt(n)``.
    """
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    x, w = quadrature_nodes(c)
    if w.size == 0:
        return MeasureComponent.empty(c.dim)
    cells = np.floor(x / step).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mass = np.bincount(inverse, weights=w, minlength=len(uniq))
    moment = np.stack([np.bincount(inverse, weights=w * x[:, d], minlength=len(uniq)) for d in range(c.dim)], axis=1)
    centers = moment / mass[:, None]
    lo = uniq * step
    centers = np.clip(centers, lo, lo + step)
    keep = mass > 0
    mass, centers = mass[keep], centers[keep]
    # Repair rounding so the correctly rounded total is conserved exactly.
    target = total_mass(c)
    i = int(np.argmax(mass))
    mass[i] += target - math.fsum(mass.tolist())
    # The residual can be below one ulp of the heaviest atom, or the exact sum
    # can sit on a rounding tie; walk atoms by ulps, lighter ones being finer.
    for i in np.argsort(-mass, kind="stable"):
        r = target - math.fsum(mass.tolist())
        for _ in range(64):
            if r == 0.0:
                break
            mass[i] = np.nextafter(mass[i], math.copysign(math.inf, r))
            r_next = target - math.fsum(mass.tolist())
            if r_next != 0.0 and (r_next > 0) != (r > 0):
                break  # stepped over the target; try a finer atom
            r = r_next
        if target == math.fsum(mass.tolist()):
            break
    return MeasureComponent(centers, mass, dim=c.dim)


def _w1_cdf(x: np.ndarray, a: np.ndarray, y: np.ndarray, b: np.ndarray) -> float:
    locs = np.concatenate([x, y])
    signed = np.concatenate([a, -b])
    order = np.argsort(locs, kind="stable")
    locs, signed = locs[order], signed[order]
    cdf_gap = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(locs)))


def _w1_flow(x: np.ndarray, a: np.ndarray, y: np.ndarray, b: np.ndarray) -> float:
    m, k = len(a), len(b)
    cost = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2).ravel()
    rows = np.repeat(np.arange(m), k)
    cols = np.tile(np.arange(k), m)
    ones = np.ones(m * k)
    supply = coo_matrix((ones, (rows, np.arange(m * k))), shape=(m, m * k)).tocsr()
    demand = coo_matrix((ones, (cols, np.arange(m * k))), shape=(k, m * k)).tocsr()
    # The lighter side is shipped entirely; the heavier side caps receipts.
    if a.sum() <= b.sum():
        eq, rhs_eq, ub, rhs_ub = supply, a, demand, b
    else:
        eq, rhs_eq, ub, rhs_ub = demand, b, supply, a
    res = linprog(
        cost, A_ub=ub, b_ub=rhs_ub, A_eq=eq, b_eq=rhs_eq, bounds=(0, None), method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(cost @ res.x)


def w1_distance(mu: MeasureComponent, nu: MeasureComponent, method: str = "auto") -> float:
    """Exact Kantorovich-Wasserstein-1 distance between the node sets of two components.

    ``method`` is ``"cdf"`` (dimension 1 only), ``"flow"`` (transport LP) or
    ``"auto"``. Masses must agree to ``MASS_RTOL``; nothing is renormalized.
    """
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    x, a = quadrature_nodes(mu)
    y, b = quadrature_nodes(nu)
    ma, mb = math.fsum(a.tolist()), math.fsum(b.tolist())
    if abs(ma - mb) > MASS_RTOL * max(ma, mb, 0.0):
        raise ValueError(f"W1 needs equal masses, got {ma!r} and {mb!r}")
    if a.size == 0 or b.size == 0:
        return 0.0
    if method == "auto":
        method = "cdf" if mu.dim == 1 else "flow"
    if method == "cdf":
        if mu.dim != 1:
            raise ValueError("the CDF formula only applies in dimension 1")
        return _w1_cdf(x[:, 0], a, y[:, 0], b)
    if method == "flow":
        return _w1_flow(x, a, y, b)
    raise ValueError(f"unknown W1 method {method!r}")


def bounding_ball(m: SignedMeasure | MeasureComponent) -> tuple[np.ndarray, float]:
    """A closed ball containing every atom and every positive density cell."""
    parts = [m] if isinstance(m, MeasureComponent) else [m.plus, m.minus]
    lo_list, hi_list = [], []
    boxes = []  # (midpoints, half cell) for positive cells
    for c in parts:
        if c.weights.size:
            lo_list.append(c.points.min(axis=0))
            hi_list.append(c.points.max(axis=0))
        for d in c.densities:
            keep = d.values.ravel() > 0
            if not np.any(keep):
                continue
            mids = d.midpoints()[keep]
            half = d.cell_size / 2
            lo_list.append(mids.min(axis=0) - half)
            hi_list.append(mids.max(axis=0) + half)
            boxes.append((mids, half))
    if not lo_list:
        raise ValueError("bounding ball of an empty measure")
    center = (np.min(lo_list, axis=0) + np.max(hi_list, axis=0)) / 2
    radius = 0.0
    for c in parts:
        if c.weights.size:
            radius = max(radius, float(np.max(np.linalg.norm(c.points - center, axis=1))))
    for mids, half in boxes:
        far = np.abs(mids - center) + half
        radius = max(radius, float(np.max(np.linalg.norm(far, axis=1))))
    return center, radius


def measure_from_arrays(plus_points, plus_weights, minus_points=None, minus_weights=None) -> SignedMeasure:
    """Convenience constructor for purely atomic signed measures."""
    plus = MeasureComponent(plus_points, plus_weights)
    if minus_points is None or len(np.atleast_1d(minus_weights)) == 0:
        return SignedMeasure(plus, MeasureComponent.empty(plus.dim))
    return SignedMeasure(plus, MeasureComponent(minus_points, minus_weights, dim=plus.dim))
