"""Shared fixtures: standard weights, hypersurfaces, and cached samples."""

import numpy as np
import pytest

import bergmanball as bb


def random_ball_point(rng, n, rmax=0.9, rmin=0.0):
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z * rng.uniform(rmin, rmax) / np.linalg.norm(z)


@pytest.fixture(scope="session")
def plane2():
    """W = {z2 = 0} in dimension 2."""
    return bb.DefiningPolynomial.from_terms({(0, 1): 1.0})


@pytest.fixture(scope="session")
def plane2_sample(plane2):
    return bb.sample_W(plane2, 0.9, 3000, seed=0)


@pytest.fixture(scope="session")
def quadric2():
    """W = {z2 = 0.4 z1^2} in dimension 2."""
    return bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (2, 0): -0.4})


@pytest.fixture(scope="session")
def quadric2_sample(quadric2):
    return bb.sample_W(quadric2, 0.9, 4000, seed=2)


@pytest.fixture(scope="session")
def beta3():
    return bb.Weight(beta=3.0)


@pytest.fixture(scope="session")
def space_d8_beta3(beta3):
    return bb.build_space(1, 8, beta3)
