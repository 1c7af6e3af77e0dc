import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TRIALS
from siglo.geometry import PointConfig
from siglo.measure import MeasureComponent, SignedMeasure
from siglo.objective import eval_F
from siglo.solve_k import (
    PreconditionError,
    SolverConfig,
    boundedness_certificate,
    brute_force,
    grid_candidates,
    local_search,
    nonexistence_probe,
)

seeds = st.integers(0, 2**32 - 1)


def atoms(points, weights):
    return MeasureComponent(np.asarray(points, dtype=float).reshape(len(weights), -1), weights)


def line_instance():
    return SignedMeasure(atoms([1.0, 8.0], [2.0, 6.0]), atoms([0.0, 4.0], [1.0, 4.0]))


def random_line_plus(rng):
    count = int(rng.integers(3, 7))
    x = np.sort(rng.choice(np.arange(-20, 21), count, replace=False)).astype(float) / 4
    return x, SignedMeasure(atoms(x, rng.uniform(0.2, 2.0, count)))


class TestBruteForce:
    def test_line_instance(self):
        rep = brute_force(line_instance(), np.arange(0, 8.25, 0.5), 2)
        assert rep.best.points[:, 0].tolist() == [0.0, 8.0]
        assert rep.value == -14.0

    def test_sits_on_every_atom(self):
        pts = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]])
        phi = SignedMeasure(atoms(pts, [1.0, 2.0, 0.5]))
        cand = np.vstack([pts, [[5.0, 5.0], [0.5, 0.5]]])
        assert brute_force(phi, cand, 4).value == 0.0

    def test_equilateral_triangle_centre(self):
        tri = np.array([[1.0, 0.0], [-0.5, math.sqrt(3) / 2], [-0.5, -math.sqrt(3) / 2]])
        phi = SignedMeasure(atoms(tri, [1.0, 1.0, 1.0]))
        step = 0.02
        rep = brute_force(phi, grid_candidates([-0.2, -0.2], [0.2, 0.2], 20), 1)
        assert np.linalg.norm(rep.best.points[0]) <= step * math.sqrt(2)

    def test_cap_points_to_local_search(self):
        with pytest.raises(ValueError, match="local_search"):
            brute_force(line_instance(), np.arange(0, 50.0), 6, cap=1000)

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_no_subset_beats_it(self, seed):
        rng = np.random.default_rng(seed)
        plus = atoms(rng.uniform(-1, 1, (4, 2)), rng.uniform(0.5, 1.0, 4))
        minus = atoms(rng.uniform(-1, 1, (2, 2)), rng.uniform(0.1, 0.5, 2))
        phi = SignedMeasure(plus, minus)
        cand = rng.uniform(-1.5, 1.5, (7, 2))
        k = int(rng.integers(1, 4))
        rep = brute_force(phi, cand, k)
        for _ in range(20):
            sub = cand[rng.choice(7, int(rng.integers(1, k + 1)), replace=False)]
            assert eval_F(PointConfig(sub), phi).value >= rep.value - 1e-12

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_non_increasing_in_k(self, seed):
        rng = np.random.default_rng(seed)
        plus = atoms(rng.uniform(-1, 1, (5, 2)), rng.uniform(0.5, 1.0, 5))
        minus = atoms(rng.uniform(-1, 1, (2, 2)), rng.uniform(0.1, 0.5, 2))
        phi = SignedMeasure(plus, minus)
        cand = rng.uniform(-1.5, 1.5, (6, 2))
        values = [brute_force(phi, cand, k).value for k in (1, 2, 3, 4)]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestLocalSearch:
    def test_single_atom(self):
        p = np.array([[0.7, -0.2]])
        cfg = SolverConfig(k=1, tol=1e-9)
        phi = SignedMeasure(atoms(p, [1.0]), atoms([[5.0, 5.0]], [0.25]))
        rep = local_search(phi, cfg)
        assert np.linalg.norm(rep.best.points[0] - p[0]) <= 1e-6
        assert rep.value - eval_F(PointConfig(p), phi).value <= 1e-6

    def test_line_instance(self):
        rep = local_search(line_instance(), SolverConfig(k=2, restarts=8, seed=0))
        assert rep.value == pytest.approx(-14.0, abs=1e-3)

    def test_balanced_masses_rejected(self):
        phi = SignedMeasure(atoms([1.0], [1.0]), atoms([0.0], [1.0]))
        with pytest.raises(PreconditionError):
            local_search(phi, SolverConfig(k=1))

    def test_returns_nodes_when_k_covers_them(self):
        phi = SignedMeasure(atoms([0.0, 1.0], [1.0, 1.0]))
        rep = local_search(phi, SolverConfig(k=5))
        assert rep.value == 0.0

    def test_seeded_runs_repeat(self):
        cfg = SolverConfig(k=2, restarts=3, seed=11)
        a, b = local_search(line_instance(), cfg), local_search(line_instance(), cfg)
        assert a.value == b.value
        assert np.array_equal(a.best.points, b.best.points)
        assert a.per_restart_values == b.per_restart_values

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_against_exhaustive_search_on_line(self, seed):
        # without repulsion on the line some optimum sits on atoms, so brute force over them is exact
        rng = np.random.default_rng(seed)
        x, phi = random_line_plus(rng)
        for k in (1, 2):
            exact = brute_force(phi, x, k).value
            found = local_search(phi, SolverConfig(k=k, restarts=2, seed=seed)).value
            assert found >= exact - 1e-9
            if k == 1:
                assert found <= exact + 1e-6 * np.sum(np.abs(x))

    @settings(max_examples=100)
    @given(seeds)
    def test_never_worse_than_one_point(self, seed):
        rng = np.random.default_rng(seed)
        _, phi = random_line_plus(rng)
        one = local_search(phi, SolverConfig(k=1, seed=seed)).value
        three = local_search(phi, SolverConfig(k=3, restarts=2, seed=seed)).value
        assert three <= one + 1e-9


class TestCertificate:
    def test_unit_case(self):
        phi = SignedMeasure(atoms([-1.0, 1.0], [0.5, 0.5]))
        assert boundedness_certificate(phi, 0.0) == 1.0

    def test_monotone_in_bound(self):
        phi = line_instance()
        assert boundedness_certificate(phi, 4.0) > boundedness_certificate(phi, 2.0)

    def test_requires_mass_excess(self):
        with pytest.raises(PreconditionError):
            boundedness_certificate(SignedMeasure(atoms([1.0], [1.0]), atoms([0.0], [2.0])), 0.0)

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_minimizer_nearest_point_inside(self, seed):
        rng = np.random.default_rng(seed)
        plus = atoms(rng.uniform(-1, 1, (4, 1)), rng.uniform(0.5, 1.0, 4))
        minus = atoms(rng.uniform(-1, 1, (2, 1)), rng.uniform(0.05, 0.3, 2))
        phi = SignedMeasure(plus, minus)
        cand = np.linspace(-6, 6, 25)
        rep = brute_force(phi, cand, 2)
        radius = boundedness_certificate(phi, rep.value)
        assert np.min(np.linalg.norm(rep.best.points - rep.center, axis=1)) <= radius + 1e-12


class TestNonexistenceProbe:
    def test_centre_value(self):
        assert nonexistence_probe([0.0]).values[0] == pytest.approx(1.0, abs=1e-3)

    def test_on_circle(self):
        assert nonexistence_probe([1.0]).values[0] == pytest.approx(4 / math.pi - 1, abs=1e-3)

    def test_strictly_decreasing(self):
        probe = nonexistence_probe(np.linspace(0, 10, 21))
        assert probe.strictly_decreasing
        assert np.all(np.diff(probe.values) < 0)

    def test_node_floor(self):
        with pytest.raises(ValueError):
            nonexistence_probe([0.0], circle_nodes=4)
