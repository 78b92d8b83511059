from fractions import Fraction

import numpy as np
import pytest

from contactlab.connection import geometry_tables
from contactlab.geometry import build_frame, make_heisenberg, make_perturbed_heisenberg, make_sphere
from contactlab.jets import EXACT, FLOAT


@pytest.fixture(scope="session")
def heis():
    return make_heisenberg(2)


@pytest.fixture(scope="session")
def pert():
    return make_perturbed_heisenberg(2, Fraction(1, 10))


@pytest.fixture(scope="session")
def sphere():
    return make_sphere(2)


def tables_at(model, count, seed=0, mode=None, K=3):
    mode = mode or (FLOAT if model.name == "sphere" else EXACT)
    P = model.sample_points(np.random.default_rng(seed), count, mode)
    fr = build_frame(model, P, K, mode)
    return fr, geometry_tables(fr)


@pytest.fixture(scope="session")
def heis_geo(heis):
    return tables_at(heis, 4)


@pytest.fixture(scope="session")
def pert_geo(pert):
    return tables_at(pert, 4)


@pytest.fixture(scope="session")
def sphere_geo(sphere):
    return tables_at(sphere, 6)
