import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TRIALS, random_component
from siglo.geometry import BallComplementRegion, PointConfig, surface_net
from siglo.measure import GriddedDensity, MeasureComponent, SignedMeasure, quadrature_nodes, total_mass
from siglo.objective import essential_part, eval_F, eval_F_region, rescaled_gap

seeds = st.integers(0, 2**32 - 1)


def atoms(points, weights):
    return MeasureComponent(np.asarray(points, dtype=float).reshape(len(weights), -1), weights)


def line_instance():
    # attraction 2 at distance 1 from the origin and 6 at 8; repulsion 1 at 0 and 4 at 4
    return SignedMeasure(atoms([1.0, 8.0], [2.0, 6.0]), atoms([0.0, 4.0], [1.0, 4.0]))


def direct_F(sigma, phi):
    total = 0.0
    for part, sign in ((phi.plus, 1), (phi.minus, -1)):
        x, w = quadrature_nodes(part)
        if len(w):
            d = np.min(np.linalg.norm(x[:, None] - sigma[None], axis=2), axis=1)
            total += sign * float(np.dot(w, d))
    return total


class TestEvalF:
    def test_point_on_atom(self):
        phi = SignedMeasure(atoms([[1.0, 1.0]], [1.0]))
        assert eval_F(PointConfig([[1.0, 1.0]]), phi).value == 0.0

    def test_two_exact_distances(self):
        phi = SignedMeasure(atoms([[3.0, 4.0]], [1.0]), atoms([[0.0, 3.0]], [1.0]))
        assert eval_F(PointConfig([[0.0, 0.0]]), phi).value == 2.0

    def test_line_instance_endpoints(self):
        assert eval_F(PointConfig([[0.0], [8.0]]), line_instance()).value == -14.0

    def test_reports_quadrature_step(self):
        phi = SignedMeasure(MeasureComponent.from_density(GriddedDensity.uniform([0.0], [1.0], 50)))
        assert eval_F(PointConfig([[0.5]]), phi).quadrature_step == pytest.approx(0.02)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_F(PointConfig([[0.0, 0.0]]), line_instance())

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_matches_direct_sum(self, seed):
        rng = np.random.default_rng(seed)
        phi = SignedMeasure(random_component(rng, 2), random_component(rng, 2))
        sigma = rng.uniform(-2, 2, (int(rng.integers(1, 6)), 2))
        assert eval_F(PointConfig(sigma), phi).value == pytest.approx(direct_F(sigma, phi), abs=1e-10)

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_adding_a_point_never_hurts_without_repulsion(self, seed):
        rng = np.random.default_rng(seed)
        phi = SignedMeasure(random_component(rng, 2))
        sigma = rng.uniform(-2, 2, (int(rng.integers(1, 5)), 2))
        more = np.vstack([sigma, rng.uniform(-2, 2, (1, 2))])
        assert eval_F(PointConfig(more), phi).value <= eval_F(PointConfig(sigma), phi).value

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_translation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        pts_p, pts_m = rng.uniform(-1, 1, (4, 2)), rng.uniform(-1, 1, (3, 2))
        wp, wm = rng.uniform(0.1, 1, 4), rng.uniform(0.1, 1, 3)
        sigma = rng.uniform(-1, 1, (3, 2))
        v = rng.uniform(-5, 5, 2)
        a = eval_F(PointConfig(sigma), SignedMeasure(atoms(pts_p, wp), atoms(pts_m, wm))).value
        b = eval_F(PointConfig(sigma + v), SignedMeasure(atoms(pts_p + v, wp), atoms(pts_m + v, wm))).value
        assert abs(a - b) <= 1e-12 * max(1.0, 10 * float(np.abs(v).max()))

    @settings(max_examples=TRIALS)
    @given(seeds, st.floats(0.1, 10.0))
    def test_scaling_homogeneity(self, seed, lam):
        rng = np.random.default_rng(seed)
        pts_p, pts_m = rng.uniform(-1, 1, (4, 2)), rng.uniform(-1, 1, (3, 2))
        wp, wm = rng.uniform(0.1, 1, 4), rng.uniform(0.1, 1, 3)
        sigma = rng.uniform(-1, 1, (3, 2))
        a = eval_F(PointConfig(sigma), SignedMeasure(atoms(pts_p, wp), atoms(pts_m, wm))).value
        b = eval_F(PointConfig(lam * sigma), SignedMeasure(atoms(lam * pts_p, wp), atoms(lam * pts_m, wm))).value
        assert b == pytest.approx(lam * a, abs=1e-12 * lam * 10)


class TestEvalFRegion:
    def uniform_line(self):
        plus = MeasureComponent.from_density(GriddedDensity.uniform([-2.0], [2.0], 4000))
        return SignedMeasure(plus, atoms([0.0], [1.0]))

    @pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 1.5])
    def test_interval_closed_form(self, r):
        # int (r - |x|)^+ dx over the line is r^2, and the repelling atom sits r inside
        value = eval_F_region(BallComplementRegion([[0.0]], [r]), self.uniform_line(), 1e-3).value
        assert value == pytest.approx(r * r - r, abs=1e-6)

    def test_support_inside_region(self):
        phi = SignedMeasure(atoms([[2.0, 0.0], [0.0, 3.0]], [1.0, 1.0]), atoms([[5.0, 5.0]], [0.5]))
        m = BallComplementRegion([[-3.0, -3.0]], [1.0])
        v = eval_F_region(m, phi, 0.01)
        assert v.value == 0.0 and v.distance_error_bound == 0.0

    @settings(max_examples=50)
    @given(seeds)
    def test_dense_net_agrees(self, seed):
        rng = np.random.default_rng(seed)
        m = BallComplementRegion(rng.uniform(-0.5, 0.5, (2, 2)), rng.uniform(0.3, 0.8, 2))
        phi = SignedMeasure(random_component(rng, 2), random_component(rng, 2))
        delta = 0.02
        g = np.arange(-3.0, 3.0 + delta / 2, delta / math.sqrt(2))
        grid = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        sigma = np.vstack([grid[m.contains(grid)], surface_net(m, delta).points])
        net_value = eval_F(PointConfig(sigma), phi).value
        region = eval_F_region(m, phi, delta)
        slack = delta * (total_mass(phi.plus) + total_mass(phi.minus)) + region.distance_error_bound
        assert abs(net_value - region.value) <= slack + 1e-12


class TestEssentialPart:
    def test_drops_far_point(self):
        phi = SignedMeasure(atoms([[0.0, 0.0]], [1.0]))
        kept = essential_part(PointConfig([[1.0, 0.0], [2.0, 0.0]]), phi)
        assert kept.points.tolist() == [[1.0, 0.0]]

    def test_all_needed(self):
        phi = SignedMeasure(atoms([0.0, 4.0], [1.0, 1.0]))
        sigma = PointConfig([[0.5], [3.0]])
        assert essential_part(sigma, phi).points.tolist() == sigma.points.tolist()

    def test_ties_keep_both(self):
        phi = SignedMeasure(atoms([0.0], [1.0]))
        assert essential_part(PointConfig([[-1.0], [1.0]]), phi).cardinality == 2

    @settings(max_examples=200)
    @given(seeds)
    def test_value_unchanged(self, seed):
        rng = np.random.default_rng(seed)
        phi = SignedMeasure(random_component(rng, 2), random_component(rng, 2))
        sigma = PointConfig(rng.uniform(-3, 3, (8, 2)))
        a = eval_F(sigma, phi).value
        b = eval_F(essential_part(sigma, phi), phi).value
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


class TestRescaledGap:
    def test_equal_values(self):
        assert rescaled_gap(10, -1.5, -1.5, 2) == 0.0

    def test_square_root_scaling(self):
        assert rescaled_gap(16, 0.25, 0.0, 2) == 1.0

    def test_linear_scaling(self):
        assert rescaled_gap(8, 1 / 8, 0.0, 1) == 1.0
