import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TRIALS
from siglo.geometry import (
    BallComplementRegion,
    PointConfig,
    dist_to_config,
    dist_to_region,
    enlarge,
    external_ball_check,
    grid_constant,
    hausdorff,
    perimeter_bound,
    project_region,
    region_distances,
    surface_net,
    unit_ball_volume,
    volume_net,
)
from siglo.oracles import brute_min_dist, exact_region_distance_1d, exact_region_distance_2d

seeds = st.integers(0, 2**32 - 1)


def random_region(rng, dim=2, balls=None):
    count = balls or int(rng.integers(1, 5))
    return BallComplementRegion(rng.uniform(-1, 1, (count, dim)), rng.uniform(0.2, 1.2, count))


def lens():
    return BallComplementRegion([[0.0, 0.0], [1.2, 0.0]], [1.0, 1.0])


class TestDistToConfig:
    def test_point_in_config(self):
        assert dist_to_config([1.0, 2.0], PointConfig([[1.0, 2.0], [5.0, 5.0]])) == 0.0

    def test_three_four_five(self):
        assert dist_to_config([0.0, 0.0], PointConfig([[3.0, 4.0]])) == 5.0

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_matches_brute_minimum(self, seed):
        rng = np.random.default_rng(seed)
        sigma = rng.normal(size=(50, 2))
        x = rng.normal(size=2) * 3
        assert dist_to_config(x, PointConfig(sigma)) == pytest.approx(brute_min_dist(x, sigma), abs=1e-12)


class TestDistToRegion:
    def test_uncovered_point_is_exact_zero(self):
        assert dist_to_region([5.0, 0.0], lens(), 0.01) == (0.0, 0.0)

    def test_single_ball_center(self):
        m = BallComplementRegion([[0.0, 0.0]], [1.5])
        assert dist_to_region([0.0, 0.0], m, 0.01) == (1.5, 0.0)

    def test_one_dimensional_nearer_endpoint(self):
        m = BallComplementRegion([[0.0], [1.0]], [3.0, 2.0])
        assert dist_to_region([1.0], m, 0.01) == (2.0, 0.0)

    def test_lens_against_fine_net(self):
        # fine-net oracle: dense sampling of both circles, kept where uncovered
        m = lens()
        x = np.array([0.6, 0.1])
        t = np.linspace(0, 2 * math.pi, int(2 * math.pi / 1e-5), endpoint=False)
        ring = np.stack([np.cos(t), np.sin(t)], axis=1)
        net = np.vstack([ring, ring + [1.2, 0.0]])
        net = net[np.all(np.linalg.norm(net[:, None] - m.centers[None], axis=2) >= m.radii * (1 - 1e-9), axis=1)]
        reference = np.min(np.linalg.norm(net - x, axis=1))
        mesh = 0.01
        value, err = dist_to_region(x, m, mesh)
        assert abs(value - reference) <= max(err, 1e-5)

    @settings(max_examples=10 * TRIALS)
    @given(seeds)
    def test_error_contract_2d(self, seed):
        rng = np.random.default_rng(seed)
        m = random_region(rng)
        x = rng.uniform(-2, 2, 2)
        value, err = dist_to_region(x, m, 0.05)
        exact = exact_region_distance_2d(x, m.centers, m.radii)
        assert abs(value - exact) <= err + 1e-9

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_exact_in_1d(self, seed):
        rng = np.random.default_rng(seed)
        m = random_region(rng, dim=1)
        x = float(rng.uniform(-3, 3))
        value, err = dist_to_region([x], m, 0.05)
        assert err == 0.0
        assert value == pytest.approx(exact_region_distance_1d(x, m.centers[:, 0], m.radii), abs=1e-12)

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_projection_consistency(self, seed):
        rng = np.random.default_rng(seed)
        m = random_region(rng)
        x = rng.uniform(-2, 2, (5, 2))
        r = region_distances(x, m, 0.05)
        assert np.all(np.abs(np.linalg.norm(r.projection - x, axis=1) - r.value) <= r.error + 1e-9)
        assert np.all(m.contains(r.projection))


class TestProjectRegion:
    def test_point_of_region_is_fixed(self):
        p, unique = project_region([3.0, 0.0], lens(), 0.01)
        assert p.tolist() == [3.0, 0.0] and unique

    def test_center_of_single_interval_is_ridge(self):
        _, unique = project_region([0.0], BallComplementRegion([[0.0]], [1.0]), 0.01)
        assert not unique

    def test_off_axis_radial_point(self):
        m = BallComplementRegion([[0.0, 0.0]], [2.0])
        p, unique = project_region([0.3, 0.4], m, 0.01)
        assert unique
        assert p == pytest.approx([1.2, 1.6], abs=1e-12)


class TestHausdorff:
    def test_identical(self):
        a = np.array([[0.0, 1.0], [2.0, 3.0]])
        assert hausdorff(a, a) == 0.0

    def test_singletons(self):
        assert hausdorff([[0.0]], [[3.0]]) == 3.0

    def test_shifted_pair(self):
        assert hausdorff([[0.0], [1.0]], [[1.0], [2.0]]) == 1.0

    def test_empty_set(self):
        with pytest.raises(ValueError):
            hausdorff(np.empty((0, 1)), [[1.0]])

    @settings(max_examples=200)
    @given(seeds)
    def test_matches_sup_min(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(7, 2)), rng.normal(size=(5, 2))
        d = np.linalg.norm(a[:, None] - b[None], axis=2)
        assert hausdorff(a, b) == pytest.approx(max(d.min(1).max(), d.min(0).max()), abs=1e-12)


class TestNets:
    def test_zero_shell_is_surface(self):
        m = lens()
        assert np.array_equal(volume_net(m, 0.0, 0.05).points, surface_net(m, 0.05).points)

    def test_one_dimensional_surface(self):
        net = surface_net(BallComplementRegion([[0.0]], [0.7]), 0.1)
        assert sorted(net.points[:, 0].tolist()) == [-0.7, 0.7]

    def test_one_dimensional_shell(self):
        r, eps, delta = 0.7, 0.2, 0.05
        net = volume_net(BallComplementRegion([[0.0]], [r]), eps, delta)
        x = net.points[:, 0]
        assert np.all((np.abs(x) >= r - 1e-12) & (np.abs(x) <= r + eps + 1e-12))
        probe = np.concatenate([np.linspace(r, r + eps, 500), -np.linspace(r, r + eps, 500)])
        assert np.max(np.min(np.abs(probe[:, None] - x[None]), axis=1)) <= delta
        assert net.cardinality <= net.cardinality_bound

    def test_circle_count(self):
        net = surface_net(BallComplementRegion([[0.0, 0.0]], [1.0]), 0.1)
        assert 0.5 * 2 * math.pi / 0.1 <= net.cardinality <= net.cardinality_bound

    def test_perimeter_bound_circle(self):
        assert perimeter_bound(BallComplementRegion([[0.0, 0.0]], [3.0])) == pytest.approx(2 * math.pi * 3)

    def test_perimeter_bound_interval(self):
        assert perimeter_bound(BallComplementRegion([[0.0]], [3.0])) == pytest.approx(2.0)

    def test_unit_ball_volumes(self):
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)

    @settings(max_examples=200)
    @given(seeds, st.floats(0.02, 0.3))
    def test_surface_cardinality_and_cover(self, seed, delta):
        rng = np.random.default_rng(seed)
        m = random_region(rng)
        net = surface_net(m, delta)
        assert net.cardinality <= grid_constant(2) * perimeter_bound(m) / delta
        # exact boundary samples: points on each circle not covered by the others
        t = rng.uniform(0, 2 * math.pi, 200)
        i = rng.integers(0, len(m.radii), 200)
        y = m.centers[i] + m.radii[i, None] * np.stack([np.cos(t), np.sin(t)], axis=1)
        y = y[m.contains(y)]
        if len(y):
            d = np.min(np.linalg.norm(y[:, None] - net.points[None], axis=2), axis=1)
            assert np.all(d <= delta + 1e-12)

    @settings(max_examples=100)
    @given(seeds, st.floats(0.0, 0.3), st.floats(0.05, 0.3))
    def test_volume_cardinality(self, seed, eps, delta):
        rng = np.random.default_rng(seed)
        m = random_region(rng)
        net = volume_net(m, eps, delta)
        bound = grid_constant(2) * perimeter_bound(m) * (eps + 2 * delta) / (delta / math.sqrt(2)) ** 2
        assert net.cardinality <= bound
        assert np.all(m.contains(net.points))


class TestExternalBall:
    @settings(max_examples=200)
    @given(seeds)
    def test_smallest_radius_always_fits(self, seed):
        rng = np.random.default_rng(seed)
        m = random_region(rng)
        assert external_ball_check(m, float(m.radii.min()), samples=50)

    def test_tiny_ball_fits(self):
        assert external_ball_check(lens(), 1e-9)

    def test_double_radius_fails(self):
        assert not external_ball_check(lens(), 2.0)

    def test_nested_ball_does_not_limit(self):
        m = BallComplementRegion([[0.0], [1.0]], [3.0, 2.0])
        assert external_ball_check(m, 3.0)


class TestEnlarge:
    def test_point_interval(self):
        inside = enlarge(PointConfig([[0.0]]), 1.0)
        assert inside(np.array([[-0.999], [0.0], [0.999]])).all()
        assert not inside(np.array([[-1.0], [1.0], [1.5]])).any()

    def test_nested(self):
        rng = np.random.default_rng(3)
        e = PointConfig(rng.normal(size=(5, 2)))
        x = rng.normal(size=(2000, 2)) * 2
        small, big = enlarge(e, 0.3)(x), enlarge(e, 0.6)(x)
        assert np.all(big[small])

    def test_contains_set(self):
        e = PointConfig([[0.0, 1.0], [2.0, 2.0]])
        assert enlarge(e, 1e-6)(e.points).all()

    def test_region_complement(self):
        inside = enlarge(BallComplementRegion([[0.0]], [1.0]), 0.5)
        assert inside(np.array([[1.4], [0.0]])).all()
        assert not inside(np.array([[1.5]])).any()
