"""Defining polynomials, hypersurface samples, distance, and flatness."""

import math

import numpy as np
import pytest

import bergmanball as bb
from bergmanball.errors import DomainError, FlatnessViolation
from bergmanball.hypersurface import compose_mobius_terms, poly_partial, substitute_affine

from conftest import random_ball_point


# ---------------------------------------------------------------------------
# polynomial plumbing
# ---------------------------------------------------------------------------

def test_records_roundtrip():
    T = bb.DefiningPolynomial.from_records(
        [{"alpha": [0, 1], "re": 1.0, "im": 0.0},
         {"alpha": [2, 0], "re": -0.4, "im": 0.25}])
    back = bb.DefiningPolynomial.from_records(T.to_records())
    assert back.terms == T.terms
    assert T.degree == 2 and T.nvars == 2


def test_partials_and_gradient():
    T = bb.DefiningPolynomial.from_terms({(2, 1): 1.0, (0, 1): -0.5})
    z = np.array([0.2 + 0.1j, -0.3j])
    g = T.gradient(z)
    assert abs(g[0] - 2 * z[0] * z[1]) < 1e-14
    assert abs(g[1] - (z[0] ** 2 - 0.5)) < 1e-14


def test_compose_mobius_identity():
    # numerator(zeta) = T(F_a(zeta)) * (1 - <zeta,a>)^deg, exactly
    rng = np.random.default_rng(0)
    T = bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (2, 0): -0.4, (1, 1): 0.3j})
    a = random_ball_point(rng, 2, 0.7)
    Ta = T.compose_mobius(a)
    m = bb.MobiusMap.at(a)
    for _ in range(20):
        zeta = random_ball_point(rng, 2, 0.9)
        lhs = Ta(zeta[None, :])[0]
        rhs = T(m(zeta)[None, :])[0] * (1 - zeta @ a.conj()) ** T.degree
        assert abs(lhs - rhs) < 1e-12


def test_compose_mobius_factored_matches_terms():
    roots = np.array([0.3, -0.2 + 0.4j, 0.5j])
    Tf = bb.DefiningPolynomial.from_roots(roots, lead=1.5 - 0.5j)
    Tt = bb.DefiningPolynomial.from_terms(Tf.term_map(), 1)
    a = [0.35 - 0.2j]
    za = np.array([[0.1 + 0.2j]])
    va = Tf.compose_mobius(a)(za)[0]
    vb = Tt.compose_mobius(a)(za)[0]
    assert abs(va - vb) < 1e-12


def test_factored_log_abs2_and_gradient():
    roots = np.array([0.2, -0.5j])
    Tf = bb.DefiningPolynomial.from_roots(roots, lead=2.0)
    z = np.array([[0.3 + 0.1j]])
    want = np.log(abs(2.0 * (z[0, 0] - 0.2) * (z[0, 0] + 0.5j)) ** 2)
    assert abs(Tf.log_abs2(z)[0] - want) < 1e-13
    g = Tf.gradient(np.array([0.3 + 0.1j]))
    h = 1e-7
    fd = (Tf(np.array([[0.3 + 0.1j + h]]))[0] - Tf(np.array([[0.3 + 0.1j - h]]))[0]) / (2 * h)
    assert abs(g[0] - fd) < 1e-6


def test_high_degree_factored_refuses_expansion():
    lat = bb.pseudohyperbolic_lattice(0.4)
    T = bb.lattice_polynomial(lat)
    assert T.degree == len(lat)
    with pytest.raises(OverflowError):
        T.term_map()


def test_substitute_affine():
    T = {(0, 2): 1.0, (1, 0): -0.3}
    base = np.array([0.1, 0.2j])
    direction = np.array([0.0, 1.0 + 0j])
    coeffs = substitute_affine(T, 2, base, direction)
    # T(base + y e2) = (0.2j + y)^2 - 0.03
    want = np.array([(0.2j) ** 2 - 0.03, 2 * 0.2j, 1.0])
    assert np.abs(coeffs - want).max() < 1e-14


# ---------------------------------------------------------------------------
# sampling W
# ---------------------------------------------------------------------------

def test_sample_point_divisor():
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0, (0,): -0.4})
    s = bb.sample_W(T, 0.9, 1, seed=0)
    assert s.size == 1
    assert abs(s.points[0, 0] - 0.4) < 1e-12
    assert s.area_weights[0] == 1.0
    assert s.frames.shape == (1, 0, 1)


def test_sample_plane_coordinates(plane2, plane2_sample):
    s = plane2_sample
    assert np.abs(s.points[:, 1]).max() < 1e-12
    assert s.residuals(plane2).max() < 1e-10
    # omega_B area of the hyperplane slice: 6 pi R^2/(1-R^2)
    R = 0.9
    want = 6 * math.pi * R * R / (1 - R * R)
    assert abs(s.area_weights.sum() / want - 1) < 1e-6
    # frames are metric-orthonormal tangents
    i = s.size // 3
    v = s.frames[i, 0]
    G = bb.bergman_metric(s.points[i]).matrix
    assert abs(np.real(v @ G @ v.conj()) - 1.0) < 1e-10


def test_sample_self_convergence():
    T = bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (2, 0): -1.0})
    a1 = bb.sample_W(T, 0.5, 2000, seed=0).area_weights.sum()
    a2 = bb.sample_W(T, 0.5, 8000, seed=1).area_weights.sum()
    assert abs(a1 / a2 - 1) < 0.01
    assert bb.sample_W(T, 0.5, 2000, seed=0).residuals(T).max() < 1e-10


def test_sample_empty_and_sparse_warning():
    s = bb.sample_W(bb.DefiningPolynomial.constant(1.0, 2), 0.8, 100, seed=0)
    assert s.size == 0
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0})
    s1 = bb.sample_W(T, 0.9, 40, seed=0)   # 1 root versus target 40
    assert s1.warnings


# ---------------------------------------------------------------------------
# distance and tube
# ---------------------------------------------------------------------------

def test_dist_examples(plane2, plane2_sample):
    res = bb.dist_to_W(np.array([0.0j, 0.3 + 0j]), plane2, plane2_sample)
    assert abs(res.distance - 0.3) < 1e-8
    assert np.abs(res.foot - np.array([0, 0])).max() < 1e-6
    # point on W
    on = bb.dist_to_W(np.array([0.2 + 0.1j, 0.0j]), plane2, plane2_sample)
    assert on.distance < 1e-8


def test_dist_one_dimensional():
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0})
    s = bb.sample_W(T, 0.9, 1, seed=0)
    assert abs(bb.dist_to_W([0.5], T, s).distance - 0.5) < 1e-14


def test_dist_plane_oracle(plane2, plane2_sample):
    # delta_B(z, {z2=0}) = |z2| / sqrt(1 - |z1|^2)
    rng = np.random.default_rng(6)
    for _ in range(10):
        z = random_ball_point(rng, 2, 0.7)
        want = abs(z[1]) / math.sqrt(1 - abs(z[0]) ** 2)
        got = bb.dist_to_W(z, plane2, plane2_sample)
        assert abs(got.distance - want) < 1e-6
        # minimizer property against every sampled point
        assert got.distance <= bb.pseudo_distance(z, plane2_sample.points).min() + 1e-12


def test_dist_unique_foot_multistart(plane2, plane2_sample):
    rng = np.random.default_rng(7)
    z = random_ball_point(rng, 2, 0.5)
    feet = []
    for seed_count in range(16):
        res = bb.dist_to_W(z, plane2, plane2_sample, n_seeds=seed_count + 1)
        feet.append(res.foot)
    feet = np.array(feet)
    spread = np.abs(feet - feet[-1]).max()
    assert spread < 1e-6
    assert not bb.dist_to_W(z, plane2, plane2_sample).multiple


def test_dist_multiplicity_flag():
    # two symmetric points: the origin is equidistant from both
    T = bb.DefiningPolynomial.from_roots([0.4, -0.4])
    s = bb.point_divisor_sample(T.roots)
    res = bb.dist_to_W([0.0], T, s)
    assert abs(res.distance - 0.4) < 1e-14
    assert res.multiple


def test_tube_membership(plane2, plane2_sample):
    assert bb.tube_membership(np.array([0.1 + 0j, 0j]), plane2, plane2_sample, 0.05)
    T1 = bb.DefiningPolynomial.from_terms({(1,): 1.0})
    s1 = bb.sample_W(T1, 0.9, 1, seed=0)
    assert not bb.tube_membership([0.5], T1, s1, 0.4)
    # membership flips exactly once along a ray crossing the tube
    flips, prev = 0, None
    for t in np.arange(0.05, 0.7, 1e-3):
        m = bb.tube_membership(np.array([0.1 + 0j, t * 1j]), plane2, plane2_sample, 0.35)
        if prev is not None and m != prev:
            flips += 1
        prev = m
    assert flips == 1


# ---------------------------------------------------------------------------
# flatness
# ---------------------------------------------------------------------------

def test_flatness_plane_zero(plane2):
    assert bb.flatness_profile(plane2, np.zeros(2, complex), 0.1) == 0.0


def test_flatness_quadratic_constant():
    for lam in (0.3, 0.7):
        T = bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (2, 0): -lam})
        C = bb.flatness_profile(T, np.zeros(2, complex), 0.02)
        assert abs(C / lam - 1) < 0.10


def test_flatness_affine_invariance():
    # affine hyperplanes have identically vanishing graph functions at every
    # base point (Moebius maps preserve degree-1 zero sets)
    T = bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (0, 0): -0.3})
    s = bb.sample_W(T, 0.8, 500, seed=0)
    Cs = [bb.flatness_profile(T, s.points[i], 0.1)
          for i in np.linspace(0, s.size - 1, 5).astype(int)]
    assert max(Cs) < 1e-6
    assert max(Cs) - min(Cs) < 1e-6


def test_flatness_violation():
    # wildly curved W: the graph value 50 x^2 leaves the chart inside eps0
    T = bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (2, 0): -50.0})
    with pytest.raises(FlatnessViolation):
        bb.flatness_profile(T, np.zeros(2, complex), 0.2)


def test_flatness_requires_base_on_W(plane2):
    with pytest.raises(DomainError):
        bb.flatness_profile(plane2, np.array([0.1 + 0j, 0.2 + 0j]), 0.1)
