import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TRIALS, random_component, random_probability
from siglo.measure import (
    Atom,
    GriddedDensity,
    MeasureComponent,
    SignedMeasure,
    bounding_ball,
    discretize,
    quadrature_nodes,
    total_mass,
    w1_distance,
)
from siglo.oracles import cdf_w1_1d

seeds = st.integers(0, 2**32 - 1)


def atoms(points, weights):
    return MeasureComponent(np.asarray(points, dtype=float).reshape(len(weights), -1), weights)


class TestTypes:
    def test_atom_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            Atom((0.0,), 0.0)

    def test_atom_rejects_nonfinite_location(self):
        with pytest.raises(ValueError):
            Atom((math.nan,), 1.0)

    def test_density_rejects_negative_values(self):
        with pytest.raises(ValueError):
            GriddedDensity([0.0], [1.0], [1.0, -0.5])

    def test_density_rejects_empty_box(self):
        with pytest.raises(ValueError):
            GriddedDensity([0.0], [0.0], [1.0])

    def test_signed_measure_dimension_mismatch(self):
        with pytest.raises(ValueError):
            SignedMeasure(atoms([0.0], [1.0]), atoms([[0.0, 0.0]], [1.0]))

    def test_arrays_are_read_only(self):
        c = atoms([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            c.weights[0] = 5.0


class TestTotalMass:
    def test_single_atom(self):
        assert total_mass(atoms([0.0], [2.0])) == 2.0

    @pytest.mark.parametrize("res", [1, 3, 7, 64])
    def test_unit_square_constant_is_exact(self, res):
        c = MeasureComponent.from_density(GriddedDensity.uniform([0, 0], [1, 1], res))
        assert total_mass(c) == 1.0

    def test_linear_density(self):
        c = MeasureComponent.from_density(GriddedDensity.from_function(lambda x: x, [0.0], [1.0], 100))
        assert total_mass(c) == pytest.approx(0.5, abs=1e-4)


class TestQuadratureNodes:
    def test_atom_passes_through(self):
        x, w = quadrature_nodes(atoms([[0.3, -1.2]], [0.7]))
        assert x.tolist() == [[0.3, -1.2]] and w.tolist() == [0.7]

    def test_constant_density_midpoints(self):
        x, w = quadrature_nodes(MeasureComponent.from_density(GriddedDensity.uniform([0.0], [1.0], 2, 2.0)))
        assert x[:, 0].tolist() == [0.25, 0.75]
        assert w.tolist() == [1.0, 1.0]

    def test_atoms_come_before_density_rows(self):
        d = GriddedDensity([0, 0], [2, 2], [[1.0, 2.0], [3.0, 4.0]])
        c = MeasureComponent([[9.0, 9.0]], [1.0], (d,))
        x, w = quadrature_nodes(c)
        assert x.tolist() == [[9, 9], [0.5, 0.5], [0.5, 1.5], [1.5, 0.5], [1.5, 1.5]]
        assert w.tolist() == [1, 1, 2, 3, 4]

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_node_weights_sum_to_mass(self, seed):
        rng = np.random.default_rng(seed)
        c = random_component(rng, int(rng.integers(1, 4)))
        _, w = quadrature_nodes(c)
        assert abs(w.sum() - total_mass(c)) <= 1e-12


class TestDiscretize:
    def test_single_atom_is_its_own_representative(self):
        d = discretize(atoms([0.3], [1.0]), 1.0)
        assert d.points.tolist() == [[0.3]] and d.weights.tolist() == [1.0]

    def test_weighted_centroid(self):
        d = discretize(atoms([0.1, 0.2], [1.0, 2.0]), 1.0)
        assert d.weights.tolist() == [3.0]
        assert d.points[0, 0] == pytest.approx((0.1 * 1 + 0.2 * 2) / 3, abs=1e-15)

    def test_constant_density_halves(self):
        d = discretize(MeasureComponent.from_density(GriddedDensity.uniform([0.0], [1.0], 100)), 0.5)
        assert d.weights == pytest.approx([0.5, 0.5], abs=1e-15)
        assert d.points[:, 0] == pytest.approx([0.25, 0.75], abs=1e-12)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            discretize(atoms([0.0], [1.0]), 0.0)

    @settings(max_examples=TRIALS)
    @given(seeds, st.floats(0.01, 2.0))
    def test_mass_conserved_bit_for_bit(self, seed, step):
        rng = np.random.default_rng(seed)
        c = random_component(rng, int(rng.integers(1, 4)))
        assert total_mass(discretize(c, step)) == total_mass(c)

    @settings(max_examples=TRIALS)
    @given(seeds, st.floats(0.05, 1.0))
    def test_transport_cost_within_cell_diameter(self, seed, step):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 3))
        c = random_component(rng, dim)
        x, w = quadrature_nodes(c)
        cost = w1_distance(MeasureComponent(x, w, dim=dim), discretize(c, step))
        assert cost <= step * math.sqrt(dim) * total_mass(c) + 1e-12

    @settings(max_examples=200)
    @given(seeds, st.floats(0.05, 1.0))
    def test_representatives_stay_in_their_cells(self, seed, step):
        rng = np.random.default_rng(seed)
        c = random_component(rng, 2)
        d = discretize(c, step)
        cells = np.floor(d.points / step)
        assert len(np.unique(cells, axis=0)) == len(d.points)


class TestW1:
    def test_unit_shift(self):
        assert w1_distance(atoms([0.0], [1.0]), atoms([1.0], [1.0])) == 1.0

    def test_split_mass(self):
        assert w1_distance(atoms([0.0, 2.0], [0.5, 0.5]), atoms([1.0], [1.0])) == pytest.approx(1.0, abs=1e-15)

    def test_identity(self):
        mu = atoms([[0, 0], [1, 2]], [0.3, 0.7])
        assert w1_distance(mu, mu) == pytest.approx(0.0, abs=1e-15)

    def test_two_dimensional_matching(self):
        # each unit atom moves 1 across the unit square's side
        mu = atoms([[0, 0], [0, 1]], [1.0, 1.0])
        nu = atoms([[1, 0], [1, 1]], [1.0, 1.0])
        assert w1_distance(mu, nu) == pytest.approx(2.0, abs=1e-9)

    def test_mass_mismatch_names_both_masses(self):
        with pytest.raises(ValueError, match=r"1\.0.*1\.5"):
            w1_distance(atoms([0.0], [1.0]), atoms([0.0], [1.5]))

    def test_relative_tolerance_accepts_rounding(self):
        w1_distance(atoms([0.0], [1.0]), atoms([0.0], [1.0 + 1e-12]))

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_metric_axioms(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_probability(rng, 2) for _ in range(3))
        ab = w1_distance(a, b)
        assert abs(ab - w1_distance(b, a)) <= 1e-12
        assert w1_distance(a, c) <= ab + w1_distance(b, c) + 1e-9
        assert w1_distance(a, a) <= 1e-12
        assert ab > 0

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_cdf_matches_transport_in_1d(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_probability(rng, 1), random_probability(rng, 1)
        cdf, flow = w1_distance(a, b, "cdf"), w1_distance(a, b, "flow")
        assert abs(cdf - flow) <= 1e-9
        assert abs(cdf - cdf_w1_1d(a.points, a.weights, b.points, b.weights)) <= 1e-12


class TestBoundingBall:
    def test_single_atom(self):
        center, r = bounding_ball(SignedMeasure(atoms([[1.0, 2.0]], [1.0])))
        assert center.tolist() == [1.0, 2.0] and r == 0.0

    def test_two_atoms_on_line(self):
        center, r = bounding_ball(SignedMeasure(atoms([0.0, 2.0], [1.0, 1.0])))
        assert center.tolist() == [1.0] and r == 1.0

    def test_empty_measure(self):
        with pytest.raises(ValueError):
            bounding_ball(SignedMeasure(MeasureComponent.empty(2)))

    @settings(max_examples=TRIALS)
    @given(seeds)
    def test_contains_every_node_and_cell(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 4))
        phi = SignedMeasure(random_component(rng, dim), random_component(rng, dim))
        center, r = bounding_ball(phi)
        for part in (phi.plus, phi.minus):
            x, _ = quadrature_nodes(part)
            assert np.all(np.linalg.norm(x - center, axis=1) <= r * (1 + 1e-12))
            for d in part.densities:
                corners = np.abs(d.midpoints() - center) + d.cell_size / 2
                keep = d.values.ravel() > 0
                assert np.all(np.linalg.norm(corners[keep], axis=1) <= r * (1 + 1e-12))
