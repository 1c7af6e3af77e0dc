"""Solvers for the k-point problem: exhaustive enumeration and multistart descent."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointConfig
from .measure import MeasureComponent, SignedMeasure, bounding_ball, quadrature_nodes, total_mass
from .objective import eval_F

BRUTE_FORCE_CAP = 10**7
# First trial step is this multiple of the Weiszfeld step |g|/H; backtracking fixes overshoot.
OVER_RELAXATION = 1.8
# Alternations of joint Lloyd jumps and single-point sweeps after the first descent.
POLISH_ROUNDS = 4


class PreconditionError(ValueError):
    """A solver input violates a mathematical hypothesis (not a malformed config)."""


@dataclass(frozen=True)
class SolverConfig:
    """Multistart descent settings.

    ``init_step`` is a fraction of the support radius and caps a single move;
    ``tol`` is also relative to the support radius.
    """

    k: int
    restarts: int = 1
    seed: int = 0
    max_iters: int = 200
    init_step: float = 0.25
    step_decay: float = 0.5
    tol: float = 1e-7
    candidate_grid: tuple | None = None
    init: str = "nodes"
    group_moves: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if not 0 < self.step_decay < 1:
            raise ValueError(f"step_decay must lie in (0, 1), got {self.step_decay}")
        if self.max_iters < 1 or not self.init_step > 0 or not self.tol > 0:
            raise ValueError("max_iters, init_step and tol must be positive")
        if self.init not in ("nodes", "midpoint"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class SolveReport:
    best: PointConfig
    value: float
    per_restart_values: list
    iterations_used: int
    bounding_radius: float
    seed: int
    per_restart_points: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    certificate_radius: float = math.inf
    center: np.ndarray | None = None


def _masses(phi: SignedMeasure) -> tuple[float, float]:
    return total_mass(phi.plus), total_mass(phi.minus)


def boundedness_certificate(phi: SignedMeasure, F_bound: float) -> float:
    """Radius ``(F_bound + R (m+ + m-)) / (m+ - m-)`` around the bounding-ball center.

    Any configuration whose essential part has value at most ``F_bound`` keeps
    its nearest point to the center within this radius.
    """
    mp, mm = _masses(phi)
    if not mp > mm:
        raise PreconditionError(
            f"no bounded minimizing set: needs plus mass > minus mass, got {mp!r} <= {mm!r}"
        )
    _, R = bounding_ball(phi)
    return (F_bound + R * (mp + mm)) / (mp - mm)


# ----------------------------------------------------------------------------------------------
# exhaustive search


def _subset_values(D: np.ndarray, w: np.ndarray, combos: np.ndarray) -> np.ndarray:
    return np.min(D[:, combos], axis=2).T @ w


def brute_force(phi: SignedMeasure, candidates, k: int, cap: int = BRUTE_FORCE_CAP) -> SolveReport:
    """Exact minimum over all subsets of at most ``k`` candidates.

    Ties keep the first subset in (size, lexicographic index) order.
    """
    cand = np.asarray(candidates, dtype=float)
    if cand.ndim == 1:
        cand = cand.reshape(-1, 1) if phi.dim == 1 else cand.reshape(1, -1)
    if cand.shape[1] != phi.dim:
        raise ValueError("candidate dimension does not match the measure")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, len(cand))
    count = sum(math.comb(len(cand), s) for s in range(1, k + 1))
    if count > cap:
        raise ValueError(f"{count} subsets exceed the brute-force cap {cap}; use local_search instead")
    x, w = phi.signed_nodes()
    D = np.linalg.norm(x[:, None, :] - cand[None, :, :], axis=2)
    best_val, best_idx = math.inf, None
    for size in range(1, k + 1):
        gen = itertools.combinations(range(len(cand)), size)
        chunk = max(1, 2**22 // max(1, len(x) * size))
        while True:
            block = list(itertools.islice(gen, chunk))
            if not block:
                break
            combos = np.array(block, dtype=np.intp)
            vals = _subset_values(D, w, combos)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_idx = float(vals[i]), combos[i]
    best = PointConfig(cand[best_idx])
    value = eval_F(best, phi).value
    center, R = bounding_ball(phi)
    return SolveReport(best, value, [value], count, R, seed=0, center=center)


def grid_candidates(lo, hi, resolution) -> np.ndarray:
    """Vertices of a regular grid, row-major; ``resolution`` intervals per axis."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    res = np.broadcast_to(np.asarray(resolution, dtype=int), lo.shape)
    axes = [np.linspace(lo[d], hi[d], res[d] + 1) for d in range(lo.size)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


# ----------------------------------------------------------------------------------------------
# multistart descent


class _Descent:
    """One restart: Gauss-Seidel sweeps with per-point numerical-gradient steps."""

    def __init__(self, x, w, points, cfg, center, clip_radius, scale, rng, widths=None):
        self.x, self.w = x, w
        # extent of the grid cell each node stands for along the first axis, 0 for atoms
        self.widths = np.zeros(len(w)) if widths is None else widths
        self._cdfs = None
        self.rng = rng
        self.tree_nodes = cKDTree(x)
        self.p = np.array(points, dtype=float)
        self.cfg = cfg
        self.center, self.clip = center, clip_radius
        self.scale = scale
        self.tol = cfg.tol * scale
        self.h = self.tol
        self.t_cap = cfg.init_step * scale
        # start at roughly half the spacing of k evenly spread points
        spacing = scale * len(self.p) ** (-1.0 / x.shape[1])
        self.steps = np.full(len(self.p), min(self.t_cap, 0.5 * spacing))
        # strict-decrease threshold, well above the rounding of a local sum
        self.eps = 1e-13 * float(np.sum(np.abs(w))) * scale
        # a sweep gaining less than this ends the descent
        self.stall = 10 * cfg.tol * float(np.sum(np.abs(w))) * scale
        self.minus_idx = np.nonzero(w < 0)[0]
        self.plus_idx = np.nonzero(w > 0)[0]
        self.refresh()

    def refresh(self):
        self.tree_pts = cKDTree(self.p)
        self.d1, self.i1, self.d2, self.i2 = self._two_nearest(self.x)

    def _two_nearest(self, xs):
        if len(self.p) == 1:
            d, i = self.tree_pts.query(xs)
            return d, i, np.full(len(xs), np.inf), np.full(len(xs), -1)
        d, i = self.tree_pts.query(xs, k=2)
        return d[:, 0], i[:, 0], d[:, 1], i[:, 1]

    def value(self) -> float:
        return math.fsum((self.w * self.d1).tolist())

    def _neighbourhood(self, j, margin):
        r2max = float(np.max(self.d2))
        pj = self.p[j]
        if math.isfinite(r2max):
            S = np.asarray(self.tree_nodes.query_ball_point(pj, r2max + margin), dtype=np.intp)
        else:
            S = np.arange(len(self.x))
        if S.size == 0:
            return S
        dist = np.linalg.norm(self.x[S] - pj, axis=1)
        return S[dist <= self.d2[S] + margin]

    def _local(self, j, margin):
        """Nodes that moving point ``j`` by at most ``margin`` can affect, and the change in F."""
        S = self._neighbourhood(j, margin)
        xs, ws, d1 = self.x[S], self.w[S], self.d1[S]
        other = np.where(self.i1[S] == j, self.d2[S], d1)

        def delta(q):
            dx = xs - q
            dq = np.sqrt(np.einsum("ij,ij->i", dx, dx))
            return float(ws @ (np.minimum(dq, other) - d1))

        return S, delta

    def snap(self) -> int:
        """Move points onto their nearest node when that lowers F.

        Minimizers often sit exactly on a node (a kink of F) where numerical
        gradient steps only creep towards it.
        """
        moved = 0
        for j in range(len(self.p)):
            gap, i = self.tree_nodes.query(self.p[j])
            if gap == 0.0:
                continue
            q = self.x[i]
            S, delta = self._local(j, gap + self.h)
            if S.size and np.linalg.norm(q - self.center) <= self.clip and delta(q) < -self.eps:
                self._commit(j, q, S)
                moved += 1
        return moved

    def move_point(self, j) -> float:
        """Try one descent step for point ``j``; returns the accepted step length (0 if none)."""
        # a step may at most double the last accepted one; this bounds the affected nodes
        reach = min(self.t_cap, 2 * self.steps[j] / self.cfg.step_decay)
        S, delta = self._local(j, reach + 2 * self.h)
        if S.size == 0:
            return 0.0
        xs, ws = self.x[S], self.w[S]
        own = self.i1[S] == j
        pj = self.p[j]
        n = pj.size
        base = pj
        dx = xs - pj
        r_own = np.sqrt(np.einsum("ij,ij->i", dx, dx))
        if np.any(r_own < self.h):
            base = pj + self.tol * np.ones(n) / math.sqrt(n)
        g = np.empty(n)
        for d in range(n):
            e = np.zeros(n)
            e[d] = self.h
            g[d] = (delta(base + e) - delta(base - e)) / (2 * self.h)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            return 0.0
        cell = own & (ws > 0)
        H = float(np.sum(ws[cell] / np.maximum(r_own[cell], self.h)))
        t = OVER_RELAXATION * gnorm / H if H > 0 else 0.0
        t = min(max(t, self.steps[j]), reach)
        accepted = self._line_search(j, S, delta, -g / gnorm, t)
        if accepted == 0.0 and np.any(ws < 0):
            # Repelling mass creates convex kinks where the central difference
            # points nowhere useful; descend along one-sided coordinate slopes.
            probe = max(self.h, 0.01 * self.steps[j])
            direction = np.zeros(n)
            for d in range(n):
                e = np.zeros(n)
                e[d] = probe
                up, down = delta(pj + e) / probe, delta(pj - e) / probe
                if up < 0 and up <= down:
                    direction[d] = -up
                elif down < 0:
                    direction[d] = down
            norm = float(np.linalg.norm(direction))
            if norm > 0:
                accepted = self._line_search(j, S, delta, direction / norm, min(max(self.steps[j], probe), reach))
        if accepted == 0.0:
            self.steps[j] = max(self.steps[j] * self.cfg.step_decay, self.tol)
        return accepted

    def _line_search(self, j, S, delta, direction, t) -> float:
        pj = self.p[j]
        while t >= self.tol:
            q = pj + t * direction
            if np.linalg.norm(q - self.center) <= self.clip and delta(q) < -self.eps:
                self._commit(j, q, S)
                self.steps[j] = t * self.cfg.step_decay
                return t
            t *= self.cfg.step_decay
        return 0.0

    def _commit(self, j, q, S):
        self.p[j] = q
        self.tree_pts = cKDTree(self.p)
        self.d1[S], self.i1[S], self.d2[S], self.i2[S] = self._two_nearest(self.x[S])

    def group_moves(self, heaviest: int = 8) -> bool:
        """Radial moves of whole groups around the heaviest repelling nodes.

        Outward: every point closer to the node than a trial radius is pushed
        onto that radius. Inward: the points tied as nearest shrink together.
        Single-point steps cannot do either, since the node's distance only
        changes when all of its nearest points move.
        """
        if self.minus_idx.size == 0 or len(self.p) < 2:
            return False
        tau = max(float(np.median(self.steps)), self.tol)
        order = np.argsort(self.w[self.minus_idx], kind="stable")[:heaviest]
        moved = False
        seen = set()
        for y_idx in self.minus_idx[order]:
            # nodes sharing a nearest point would try the same moves
            if int(self.i1[y_idx]) in seen:
                continue
            seen.add(int(self.i1[y_idx]))
            y = self.x[y_idx]
            u = self.p - y
            norms = np.linalg.norm(u, axis=1)
            a = float(norms.min())
            if a == 0.0:
                continue
            u = u / np.where(norms > 0, norms, 1.0)[:, None]
            t = self.t_cap
            for _ in range(10):
                inside = (norms < a + t) & (norms > 0)
                trial = self.p.copy()
                trial[inside] = y + (a + t) * u[inside]
                if self._try(trial):
                    moved = True
                    break
                t *= self.cfg.step_decay
            if moved:
                continue
            ring = norms <= a + tau
            if ring.sum() < 2:
                continue
            t = min(max(float(np.max(self.steps[ring])), 4 * tau), 0.5 * a)
            for _ in range(8):
                trial = self.p.copy()
                trial[ring] -= t * u[ring]
                if self._try(trial):
                    moved = True
                    break
                t *= self.cfg.step_decay
        return moved

    def _try(self, trial) -> bool:
        if np.any(np.linalg.norm(trial - self.center, axis=1) > self.clip):
            return False
        d = cKDTree(trial).query(self.x)[0]
        # plain dot products screen trials; fsum is kept for reported values
        if float(self.w @ d) < float(self.w @ self.d1) - self.eps:
            self.p = trial
            self.refresh()
            return True
        return False

    def relocate(self, candidates: int = 64) -> int:
        """Move a point that is cheap to remove onto an under-served plus node.

        Repelling mass can pin a row of points between itself and the region
        they should serve; single-point steps cannot clear such a row.
        """
        if self.minus_idx.size == 0 or len(self.p) < 2:
            return 0
        moves = 0
        plus = self.plus_idx
        while moves < len(self.p):
            removal = np.bincount(self.i1, weights=self.w * (self.d2 - self.d1), minlength=len(self.p))
            need = self.w[plus] * self.d1[plus]
            if not need.sum() > 0:
                break
            cand = self.x[plus[self.rng.choice(plus.size, size=candidates, p=need / need.sum())]]
            gains = [float(self.w @ np.minimum(np.linalg.norm(self.x - c, axis=1) - self.d1, 0.0)) for c in cand]
            target = cand[int(np.argmin(gains))]
            trial = self.p.copy()
            trial[int(np.argmin(removal))] = target
            if not self._try(trial):
                break
            moves += 1
        return moves

    def lloyd(self, max_iters: int = 2000) -> bool:
        """Lloyd iterations: every point jumps to the median of its cell at once.

        Sweeps over single points shift a whole group only by slow diffusion;
        simultaneous jumps move all of it together. On the line see
        ``_lloyd_line``. Elsewhere one Weiszfeld step is taken, cells holding
        repelling mass stay put, and a jump that would bring a repelling node
        closer than before is undone, so the value never rises.
        """
        if self.p.shape[1] == 1:
            return self._lloyd_line(max_iters)
        p = self.p.copy()
        k, n = p.shape
        minus = self.minus_idx
        d, i = cKDTree(p).query(self.x)
        value = math.fsum((self.w * d).tolist())
        flat = 0
        for _ in range(max_iters):
            frozen = np.bincount(i[minus], minlength=k) > 0
            new = self._cell_centres(p, d, i, k, n)
            new[frozen] = p[frozen]
            if minus.size:
                for _ in range(k):
                    moved = np.flatnonzero(np.any(new != p, axis=1))
                    if moved.size == 0:
                        break
                    dm, jm = cKDTree(new[moved]).query(self.x[minus])
                    bad = dm < d[minus] * (1 - 1e-12)
                    if not bad.any():
                        break
                    new[moved[np.unique(jm[bad])]] = p[moved[np.unique(jm[bad])]]
            step = float(np.max(np.linalg.norm(new - p, axis=1)))
            if step < self.tol:
                break
            d_new, i_new = cKDTree(new).query(self.x)
            v_new = math.fsum((self.w * d_new).tolist())
            if v_new > value:
                break
            # jumps across flat stretches are allowed, but not for long
            flat = 0 if v_new < value - self.eps else flat + 1
            if flat > 20:
                break
            p, d, i, value = new, d_new, i_new, v_new
        return self._try(p)

    def _lloyd_line(self, max_iters: int, patience: int = 50) -> bool:
        """Lloyd on the line with each density node's weight spread over its grid cell.

        Medians snapped to nodes make nearly every almost-even spacing a fixed
        point, so a smooth drift across a group never relaxes. The spread
        median moves continuously. Single jumps may raise the node sum by a
        rounding amount, so the best iterate is kept and offered at the end.
        """
        p = self.p.copy()
        k = len(p)
        d = cKDTree(p).query(self.x)[0]
        best_p, best_v = p, math.fsum((self.w * d).tolist())
        since = 0
        for _ in range(max_iters):
            new = self._line_medians(p)
            if float(np.max(np.abs(new - p))) < self.tol:
                break
            p = new
            d = cKDTree(p).query(self.x)[0]
            v = math.fsum((self.w * d).tolist())
            if v < best_v - self.eps:
                best_p, best_v, since = p, v, 0
            else:
                since += 1
                if since > patience:
                    break
        return self._try(best_p)

    def _cell_centres(self, p, d, i, k, n):
        live = (d > 0) & (self.w > 0)
        q = self.w[live] / d[live]
        den = np.bincount(i[live], weights=q, minlength=k)
        num = np.stack([np.bincount(i[live], weights=q * self.x[live, c], minlength=k) for c in range(n)], 1)
        return np.where(den[:, None] > 0, num / np.where(den > 0, den, 1.0)[:, None], p)

    def _spread_cdfs(self):
        """Cumulative plus and minus mass on the line, each node spread over its grid cell.

        Knots at atoms appear twice, carrying the values just before and at the jump.
        """
        if self._cdfs is None:
            x, s = self.x[:, 0], self.widths
            grid = np.unique(np.concatenate([x - s / 2, x + s / 2]))
            parts = [
                self._spread_cdf(grid, x[sel] - s[sel] / 2, x[sel] + s[sel] / 2, np.abs(self.w[sel]))
                for sel in (self.w > 0, self.w < 0)
            ]
            jump = parts[0][1] + parts[1][1]
            copies = 1 + (jump > 0)
            left = (np.cumsum(copies) - copies)[jump > 0]
            cdfs = []
            for at, jumps in parts:
                v = np.repeat(at, copies)
                v[left] -= jumps[jump > 0]
                cdfs.append(v)
            self._cdfs = (np.repeat(grid, copies), cdfs[0], cdfs[1])
        return self._cdfs

    @staticmethod
    def _spread_cdf(grid, lo, hi, ws):
        # values at the knots, right-continuous, and the jump at each knot
        wide = hi > lo
        rate = np.zeros(len(grid))
        jumps = np.zeros(len(grid))
        np.add.at(rate, np.searchsorted(grid, lo[wide]), ws[wide] / (hi[wide] - lo[wide]))
        np.add.at(rate, np.searchsorted(grid, hi[wide]), -ws[wide] / (hi[wide] - lo[wide]))
        np.add.at(jumps, np.searchsorted(grid, lo[~wide]), ws[~wide])
        slope = np.cumsum(rate)
        gain = np.concatenate([[0.0], np.cumsum(slope[:-1] * np.diff(grid))])
        return gain + np.cumsum(jumps), jumps

    def _line_medians(self, p):
        """Where each cell's signed cost stops falling, cells cut at the midpoints."""
        grid, cp, cm = self._spread_cdfs()
        order = np.argsort(p[:, 0])
        q = p[order, 0]
        edges = np.concatenate([[grid[0]], 0.5 * (q[1:] + q[:-1]), [grid[-1]]])
        pe, me = np.interp(edges, grid, cp), np.interp(edges, grid, cm)
        # the outer cells reach past every node
        pe[0] = me[0] = 0.0
        pe[-1], me[-1] = cp[-1], cm[-1]
        out = q.copy()
        for j in range(len(q)):
            a, b = edges[j], edges[j + 1]
            if pe[j + 1] <= pe[j]:
                continue
            if me[j + 1] <= me[j]:
                # plain median of the spread plus mass
                half = 0.5 * (pe[j] + pe[j + 1])
                m = int(np.searchsorted(cp, half, side="left"))
                top = int(np.searchsorted(cp, half, side="right"))
                if top - m >= 2:
                    # the cdf sits at the half level over a stretch: any point of it will do
                    out[j] = min(max(q[j], grid[m]), grid[top - 1])
                elif m == 0:
                    out[j] = grid[0]
                else:
                    t = (half - cp[m - 1]) / (cp[m] - cp[m - 1])
                    out[j] = grid[m - 1] + t * (grid[m] - grid[m - 1])
            else:
                root = self._signed_crossing(grid, cp, cm, a, b, q[j], pe[j] - me[j], pe[j + 1] - me[j + 1])
                # neighbours sharing repelling mass pull on each other's edge; half steps keep that from ringing
                out[j] = 0.5 * (q[j] + root)
            out[j] = min(max(out[j], a), b)
        new = p.copy()
        new[order, 0] = out
        return new

    @staticmethod
    def _signed_crossing(grid, cp, cm, a, b, at, ga, gb):
        # the cost slope 2G(y) - G(a) - G(b) turns from negative to positive; take the turn nearest ``at``
        inside = (grid > a) & (grid < b)
        ys = np.concatenate([[a], grid[inside], [b]])
        g = np.concatenate([[ga], (cp - cm)[inside], [gb]])
        slope = 2 * g - ga - gb
        up = np.flatnonzero((slope[:-1] < 0) & (slope[1:] >= 0))
        if up.size == 0:
            return at
        t = slope[up] / (slope[up] - slope[up + 1])
        roots = ys[up] + t * (ys[up + 1] - ys[up])
        return float(roots[np.argmin(np.abs(roots - at))])

    def _polish(self, trace: list) -> int:
        iters = 0
        for _ in range(POLISH_ROUNDS):
            if not self.lloyd():
                break
            more, extra = self._sweeps()
            trace.extend(more)
            iters += extra
        return iters

    def rebalance(self, trace: list, patience: int = 4) -> int:
        """Move one point from a crowded group to an under-served spot, then descend again.

        On the line, groups separated by repelling mass can end up with
        unequal shares of points, since no descent step carries a point across
        that mass. A single transfer only pays off once both groups have
        re-spread, so each trial is polished before it is compared, and it is
        undone unless the value drops. In the plane points pass around
        repelling sets, so this is skipped there.
        """
        if self.minus_idx.size == 0 or len(self.p) < 2 or self.p.shape[1] > 1:
            return 0
        iters = failures = kept = 0
        plus = self.plus_idx
        while failures < min(patience, len(self.p)) and kept < len(self.p):
            need = self.w[plus] * self.d1[plus]
            if not need.sum() > 0:
                break
            saved = (self.p.copy(), self.steps.copy(), self.value(), len(trace))
            removal = np.bincount(self.i1, weights=self.w * (self.d2 - self.d1), minlength=len(self.p))
            # points whose removal pays by itself are left to the relocation move
            order = np.argsort(np.where(removal > 0, removal, np.inf), kind="stable")
            j = int(order[failures])
            if not math.isfinite(removal[j]) or removal[j] <= 0:
                break
            cand = self.x[plus[self.rng.choice(plus.size, size=64, p=need / need.sum())]]
            gains = [float(self.w @ np.minimum(np.linalg.norm(self.x - c, axis=1) - self.d1, 0.0)) for c in cand]
            self.p[j] = cand[int(np.argmin(gains))]
            self.steps[j] = self.steps.max()
            self.refresh()
            more, extra = self._sweeps()
            trace.extend(more)
            iters += extra + self._polish(trace)
            if self.value() < saved[2] - self.eps:
                kept += 1
                failures = 0
            else:
                self.p, self.steps = saved[0], saved[1]
                self.refresh()
                del trace[saved[3]:]
                failures += 1
        return iters

    def run(self) -> tuple[list[float], int]:
        trace, it = self._sweeps()
        it += self._polish(trace)
        if self.cfg.group_moves:
            it += self.rebalance(trace)
        if self.snap():
            self.refresh()
            trace.append(self.value())
        return trace, it

    def _sweeps(self) -> tuple[list[float], int]:
        trace = [self.value()]
        it = 0
        for it in range(1, self.cfg.max_iters + 1):
            longest = 0.0
            for j in range(len(self.p)):
                longest = max(longest, self.move_point(j))
            self.refresh()
            jumped = self.cfg.group_moves and self.group_moves()
            jumped = (self.cfg.group_moves and self.relocate() > 0) or jumped
            trace.append(self.value())
            if jumped:
                continue
            if longest < self.tol or trace[-2] - trace[-1] <= self.stall:
                break
        return trace, it


def _initial_points(x, wp, cfg: SolverConfig, rng, lo, hi) -> np.ndarray:
    if cfg.init == "midpoint":
        n = x.shape[1]
        m = round(cfg.k ** (1.0 / n))
        if m**n != cfg.k:
            raise ValueError(f"midpoint initialisation needs k = m^n, got k={cfg.k}, n={n}")
        axes = [lo[d] + (np.arange(m) + 0.5) * (hi[d] - lo[d]) / m for d in range(n)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)
    # systematic sampling along a space-filling order: every region gets its share of points
    order = _z_order(x)
    cum = np.cumsum(wp[order])
    targets = (np.arange(cfg.k) + rng.random()) / cfg.k * cum[-1]
    pick = order[np.minimum(np.searchsorted(cum, targets, side="right"), len(order) - 1)]
    pick = np.unique(pick)
    if len(pick) < cfg.k:
        # heavy atoms catch several targets; fill up with distinct weighted draws
        rest = np.setdiff1d(np.arange(len(wp)), pick)
        extra = rng.choice(rest, size=cfg.k - len(pick), replace=False, p=wp[rest] / wp[rest].sum())
        pick = np.concatenate([pick, extra])
    return x[np.sort(pick)]


def _z_order(x: np.ndarray, bits: int = 16) -> np.ndarray:
    """Node order along the Morton curve of their bounding box (plain sort on the line)."""
    if x.shape[1] == 1:
        return np.argsort(x[:, 0], kind="stable")
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    q = np.minimum(((x - lo) / span * (1 << bits)).astype(np.uint64), (1 << bits) - 1)
    code = np.zeros(len(x), dtype=np.uint64)
    n = x.shape[1]
    for b in range(bits):
        for d in range(n):
            code |= ((q[:, d] >> np.uint64(b)) & np.uint64(1)) << np.uint64(b * n + d)
    return np.argsort(code, kind="stable")


def _node_widths(c: MeasureComponent) -> np.ndarray:
    # same order as quadrature_nodes: atoms first, then the kept cells of each density
    parts = [np.zeros(len(c.weights))]
    for d in c.densities:
        parts.append(np.full(int(np.count_nonzero(d.values)), float(d.cell_size[0])))
    return np.concatenate(parts)


def _run_restart(r, x, w, xp, wp, cfg, center, R, lo, hi, phi):
    rng = np.random.default_rng(cfg.seed ^ r)
    start = _initial_points(xp, wp, cfg, rng, lo, hi)
    f0 = eval_F(PointConfig(start), phi).value
    r_out = boundedness_certificate(phi, f0)
    clip = r_out + 2 * R
    widths = np.concatenate([_node_widths(phi.plus), _node_widths(phi.minus)])
    search = _Descent(x, w, start, cfg, center, clip, max(R, 1e-12), rng, widths)
    trace, iters = search.run()
    return search.p.copy(), trace, iters, r_out + 2 * R


def _threads(cfg: SolverConfig) -> int:
    cap = os.environ.get("SIGLO_THREADS")
    t = cfg.threads
    if cap:
        t = min(t, max(1, int(cap)))
    return max(1, t)


def local_search(phi: SignedMeasure, cfg: SolverConfig) -> SolveReport:
    """Best of ``cfg.restarts`` seeded descents from points sampled on the plus part."""
    mp, mm = _masses(phi)
    if not mp > mm:
        raise PreconditionError(
            "existence needs the plus part to outweigh the minus part, "
            f"got plus mass {mp!r} <= minus mass {mm!r}"
        )
    xp, wp = quadrature_nodes(phi.plus)
    center, R = bounding_ball(phi)
    x, w = phi.signed_nodes()
    if mm == 0 and cfg.k >= len(xp):
        best = PointConfig(xp)
        value = eval_F(best, phi).value
        return SolveReport(best, value, [value], 0, R, cfg.seed, [xp], [[value]], R, center)
    lo = np.min(xp, axis=0)
    hi = np.max(xp, axis=0)
    if phi.plus.densities:
        lo = np.min([d.lo for d in phi.plus.densities] + [lo], axis=0)
        hi = np.max([d.hi for d in phi.plus.densities] + [hi], axis=0)

    def job(r):
        return _run_restart(r, x, w, xp, wp, cfg, center, R, lo, hi, phi)

    threads = _threads(cfg)
    if threads > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(cfg.restarts)))
    else:
        results = [job(r) for r in range(cfg.restarts)]

    values = [eval_F(PointConfig(p), phi).value for p, *_ in results]

    def rank(r):
        pts = PointConfig(results[r][0]).sorted_points()
        return (values[r], tuple(pts.ravel().tolist()))

    best_r = min(range(cfg.restarts), key=rank)
    best = PointConfig(results[best_r][0])
    return SolveReport(
        best=best,
        value=values[best_r],
        per_restart_values=values,
        iterations_used=sum(res[2] for res in results),
        bounding_radius=results[best_r][3],
        seed=cfg.seed,
        per_restart_points=[res[0] for res in results],
        traces=[res[1] for res in results],
        certificate_radius=results[best_r][3] - 2 * R,
        center=center,
    )


# ----------------------------------------------------------------------------------------------
# nonexistence probe


@dataclass(frozen=True)
class ProbeResult:
    radii: np.ndarray
    values: np.ndarray
    strictly_decreasing: bool

    def table(self) -> list[tuple[float, float]]:
        return list(zip(self.radii.tolist(), self.values.tolist()))


def circle_measure(circle_nodes: int) -> SignedMeasure:
    """Unit mass spread evenly over the unit circle, minus a unit atom at the origin."""
    ang = 2 * math.pi * (np.arange(circle_nodes) + 0.5) / circle_nodes
    plus = MeasureComponent(np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(circle_nodes, 1.0 / circle_nodes))
    minus = MeasureComponent([[0.0, 0.0]], [1.0])
    return SignedMeasure(plus, minus)


def nonexistence_probe(radii, circle_nodes: int = 10_000) -> ProbeResult:
    """Value of the single-point configuration ``{(r, 0)}`` for each radius."""
    if circle_nodes < 8:
        raise ValueError("circle_nodes must be >= 8")
    phi = circle_measure(circle_nodes)
    radii = np.asarray(radii, dtype=float)
    values = np.array([eval_F(PointConfig([[r, 0.0]]), phi).value for r in radii])
    decreasing = bool(np.all(np.diff(values) < 0))
    return ProbeResult(radii, values, decreasing)
