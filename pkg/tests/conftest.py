import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from siglo.measure import GriddedDensity, MeasureComponent

# Fixed example streams so every run checks the same cases.
settings.register_profile(
    "siglo", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow], print_blob=True
)
settings.load_profile("siglo")

TRIALS = 1000


def random_component(rng: np.random.Generator, dim: int, atoms_only: bool = False) -> MeasureComponent:
    count = int(rng.integers(1 if atoms_only else 0, 5))
    pts = rng.uniform(-1, 1, (count, dim))
    w = rng.uniform(0.1, 2.0, count)
    dens = ()
    if not atoms_only and (count == 0 or rng.random() < 0.6):
        res = tuple(int(r) for r in rng.integers(2, 7, dim))
        vals = rng.uniform(0, 2, res) * (rng.random(res) < 0.8)
        vals.flat[0] = max(vals.flat[0], 0.5)
        lo = rng.uniform(-1, 0, dim)
        dens = (GriddedDensity(lo, lo + rng.uniform(0.5, 2, dim), vals),)
    return MeasureComponent(pts, w, dens, dim=dim)


def random_probability(rng: np.random.Generator, dim: int) -> MeasureComponent:
    count = int(rng.integers(1, 6))
    w = rng.uniform(0.1, 1.0, count)
    return MeasureComponent(rng.uniform(-1, 1, (count, dim)), w / w.sum(), dim=dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
