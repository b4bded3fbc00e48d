"""Bergman-ball primitives: automorphisms, metric, Green's function, quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import bergmanball as bb
from bergmanball.errors import DomainError, QuadratureError

from conftest import random_ball_point


# ---------------------------------------------------------------------------
# Moebius involutions
# ---------------------------------------------------------------------------

def test_mobius_examples():
    a = np.array([0.3 + 0.2j, -0.1j])
    m = bb.MobiusMap.at(a)
    assert np.allclose(m(np.zeros(2)), a, atol=1e-15)          # F_a(0) = a
    z = np.array([0.2 + 0.1j, 0.3 + 0j])
    assert np.allclose(bb.MobiusMap.at(np.zeros(2))(z), -z)    # F_0 = -id
    # one-variable quotient (0.5 - 0.3)/(1 - 0.15)
    got = bb.mobius_apply(bb.MobiusMap.at([0.5]), np.array([0.3 + 0j]))[0]
    assert abs(got - 0.23529411764705882) < 1e-15


def test_mobius_projector_invariants():
    m = bb.MobiusMap.at([0.4 + 0.1j, 0.2j, -0.3 + 0j])
    assert np.allclose(m.P_a @ m.P_a, m.P_a, atol=1e-14)
    assert np.allclose(m.P_a + m.Q_a, np.eye(3), atol=1e-14)
    assert 0.0 < m.s_a <= 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
def test_mobius_involution_and_identity(n, seed):
    rng = np.random.default_rng(seed)
    a = random_ball_point(rng, n, 0.95)
    z = random_ball_point(rng, n, 0.95)
    m = bb.MobiusMap.at(a)
    fz = m(z)
    assert np.abs(m(fz) - z).max() < 1e-12
    lhs = 1.0 - np.vdot(fz, fz).real
    rhs = ((1.0 - np.vdot(z, z).real) * (1.0 - np.vdot(a, a).real)
           / abs(1.0 - z @ a.conj()) ** 2)
    assert abs(lhs - rhs) < 1e-12


def test_mobius_domain_error():
    m = bb.MobiusMap.at([0.5])
    with pytest.raises(DomainError):
        m(np.array([1.2 + 0j]))
    with pytest.raises(DomainError):
        bb.MobiusMap.at([1.0])


def test_pseudo_distance():
    rng = np.random.default_rng(0)
    a = random_ball_point(rng, 2)
    assert bb.pseudo_distance(a, a) < 1e-15
    b = random_ball_point(rng, 2)
    assert abs(bb.pseudo_distance(np.zeros(2), b) - np.linalg.norm(b)) < 1e-15
    for _ in range(1000):
        a = random_ball_point(rng, 2, 0.95)
        b = random_ball_point(rng, 2, 0.95)
        assert abs(bb.pseudo_distance(a, b) - bb.pseudo_distance(b, a)) < 1e-12


# ---------------------------------------------------------------------------
# metric and volumes
# ---------------------------------------------------------------------------

def test_metric_examples():
    assert np.allclose(bb.bergman_metric(np.zeros(2)).matrix, 3.0 * np.eye(2))
    got = bb.bergman_metric([0.5]).matrix[0, 0]
    assert abs(got - 32.0 / 9.0) < 1e-14


def test_metric_pullback_invariance():
    # F_a* omega_B = omega_B via a finite-difference Jacobian oracle
    rng = np.random.default_rng(1)
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        a = random_ball_point(rng, n, 0.8)
        z = random_ball_point(rng, n, 0.8)
        m = bb.MobiusMap.at(a)
        J = np.zeros((n, n), dtype=complex)
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = 1.0
            J[:, j] = (m(z + h * e) - m(z - h * e)) / (2 * h)
        pull = J.T @ bb.bergman_metric(m(z)).matrix @ J.conj()
        worst = max(worst, np.abs(pull - bb.bergman_metric(z).matrix).max())
    assert worst < 1e-8


def test_volume_density():
    assert abs(bb.volume_density(np.zeros(1, complex)) - 4.0) < 1e-15
    assert abs(bb.volume_density(np.zeros(2, complex)) - 72.0) < 1e-15
    z = np.array([0.3 + 0.2j])
    t = np.vdot(z, z).real
    ratio = bb.volume_density(z) / bb.volume_density(np.zeros(1, complex))
    assert abs(ratio - (1 - t) ** -2) < 1e-14


def test_ball_volume():
    assert abs(bb.ball_volume(1, 0.5) - 4 * math.pi / 3) < 1e-14
    assert bb.ball_volume(2, 0.0) == 0.0
    with pytest.raises(DomainError):
        bb.ball_volume(1, 1.0)
    # closed form against the radial integral oracle
    for n in (1, 2, 3):
        c = (n + 1) ** n * 2 ** n * math.factorial(n)
        surf = 2 * math.pi ** n / math.gamma(n)
        val, _ = integrate.quad(lambda s: s ** (2 * n - 1) * (1 - s * s) ** (-(n + 1)),
                                0, 0.7)
        assert abs(bb.ball_volume(n, 0.7) / (c * surf * val) - 1) < 1e-12


def test_ball_volume_monotone_and_blowup():
    rs = np.linspace(0.05, 0.99, 40)
    vals = [bb.ball_volume(2, r) for r in rs]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert bb.ball_volume(1, 1 - 1e-12) > 1e10


# ---------------------------------------------------------------------------
# Green's function
# ---------------------------------------------------------------------------

def test_green_one_dimensional_closed_form():
    for rho in np.linspace(0.05, 1 - 1e-6, 30):
        got = bb.green_gamma(1, [rho])
        assert abs(got - math.log(rho * rho) / (2 * math.pi)) < 1e-12


def test_green_profile_against_integral():
    for n in (1, 2, 3):
        C = bb.green_constant(n)
        for t in (0.05, 0.4, 0.9, 0.9999):
            want = -C * integrate.quad(lambda u: (1 - u) ** (n - 1) / u ** n, t, 1)[0]
            assert abs(bb.green_radial_profile(n, t) - want) < 1e-13


def test_green_profile_monotone_and_signs():
    for n in (1, 2, 3):
        t = np.linspace(0.01, 1.0, 60)
        f = bb.green_radial_profile(n, t)
        assert np.all(np.diff(f) > 0)
        assert np.all(f[:-1] < 0)
        assert abs(f[-1]) < 1e-15                   # f(1) = 0
        assert bb.green_gamma(n, np.zeros(n)) == -math.inf


def test_green_symmetry_and_reduction():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 4))
        a = random_ball_point(rng, n, 0.9)
        b = random_ball_point(rng, n, 0.9)
        assert abs(bb.green(n, a, b) - bb.green(n, b, a)) < 1e-12
    z = random_ball_point(rng, 2, 0.8)
    assert abs(bb.green(2, z, np.zeros(2)) - bb.green_gamma(2, z)) < 1e-15
    assert bb.green(2, z, z) == -math.inf


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def test_rule_invariants():
    rule = bb.ball_rule(2, 0.7)
    assert np.all(rule.weights > 0)
    assert np.all(np.einsum("ij,ij->i", rule.nodes, rule.nodes.conj()).real
                  < 0.7 ** 2 + 1e-12)
    assert abs(rule.weights.sum() / bb.ball_volume(2, 0.7) - 1) < 1e-12


def test_quad_ball_volume_consistency():
    for n in (1, 2):
        for r in (0.3, 0.7, 0.9):
            got = bb.quad_ball(lambda p: np.ones(len(p)), np.zeros(n, complex), r)
            assert abs(got / bb.ball_volume(n, r) - 1) < 1e-6


def test_quad_ball_monte_carlo_dimension3():
    got, se = bb.quad_ball(lambda p: np.ones(len(p)), np.zeros(3, complex), 0.6,
                           return_stderr=True)
    want = bb.ball_volume(3, 0.6)
    assert abs(got - want) <= 3 * se
    assert se / want < 0.01


def test_quad_ball_pluriharmonic_mean_value():
    # equality in the sub-mean value inequality for Delta_B-harmonic functions
    banks = {
        1: [lambda p: np.real(p[:, 0]), lambda p: np.real(p[:, 0] ** 3)],
        2: [lambda p: np.real(p[:, 0]),
            lambda p: np.real(p[:, 0] * p[:, 1]),
            lambda p: np.real(p[:, 0] ** 3)],
    }
    rng = np.random.default_rng(3)
    for n, gs in banks.items():
        for g in gs:
            center = random_ball_point(rng, n, 0.6, 0.2)
            avg = bb.quad_ball(g, center, 0.5) / bb.ball_volume(n, 0.5)
            want = g(center[None, :])[0]
            assert abs(avg - want) <= 1e-6 * max(abs(want), 1e-3)


def test_quad_ball_submean_value():
    # finite-difference Delta_B check feeding the sub-mean value inequality
    subharmonic = [
        lambda p: np.abs(p[:, 0]) ** 2,
        lambda p: np.einsum("ij,ij->i", p, p.conj()).real,
        lambda p: np.abs(p[:, 0] + 0.5 * p[:, 1]) ** 2,
    ]
    rng = np.random.default_rng(4)
    for g in subharmonic:
        center = random_ball_point(rng, 2, 0.5)
        assert bb.bergman_laplacian_fd(g, center, 1e-3) > -1e-8
        avg = bb.quad_ball(g, center, 0.4) / bb.ball_volume(2, 0.4)
        assert avg >= g(center[None, :])[0] - 1e-10


def test_quad_ball_doubling_convergence():
    g = lambda p: np.exp(np.real(p[:, 0])) * (1 + np.abs(p[:, 1]) ** 2)
    base = bb.quad_ball(g, np.array([0.1 + 0j, 0.2j]), 0.6,
                        bb.ball_rule(2, 0.6, 24, 24))
    fine = bb.quad_ball(g, np.array([0.1 + 0j, 0.2j]), 0.6,
                        bb.ball_rule(2, 0.6, 48, 48))
    assert abs(base - fine) < 1e-8 * max(abs(fine), 1)


def test_quad_ball_singularity_policy():
    def bad(p):
        out = np.ones(len(p))
        out[0] = np.inf
        return out
    with pytest.raises(QuadratureError):
        bb.quad_ball(bad, np.zeros(1, complex), 0.5)
    val = bb.quad_ball(bad, np.zeros(1, complex), 0.5, singular=True)
    assert np.isfinite(val)


# ---------------------------------------------------------------------------
# finite-difference Hessians and direction designs
# ---------------------------------------------------------------------------

def test_complex_hessian_oracles():
    H = bb.complex_hessian_fd(lambda p: np.abs(p[:, 0] + 2 * p[:, 1]) ** 2,
                              np.array([0.1 + 0.05j, 0.02 - 0.1j]), 1e-3)
    assert np.abs(H - np.array([[1, 2], [2, 4]])).max() < 1e-8
    H2 = bb.complex_hessian_fd(lambda p: np.abs(p[:, 0] + 2j * p[:, 1]) ** 2,
                               np.array([0.1 + 0.05j, 0.02 - 0.1j]), 1e-3)
    assert np.abs(H2 - np.array([[1, -2j], [2j, 4]])).max() < 1e-8
    Hp = bb.complex_hessian_fd(lambda p: np.real(p[:, 0] ** 2 * p[:, 1]),
                               np.array([0.1 + 0.05j, 0.02 - 0.1j]), 1e-3)
    assert np.abs(Hp).max() < 1e-10


def test_direction_design():
    D = bb.direction_design(2, 64)
    assert D.shape == (64, 2)
    assert np.allclose(np.linalg.norm(D, axis=1), 1.0)
    assert bb.direction_design(1).shape == (1, 1)
    # Bloch-sphere covering keeps the worst Rayleigh shortfall under 2%
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(4000):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        s = 1.0 - np.abs(D @ v.conj()) ** 2
        worst = max(worst, s.min())
    assert worst < 0.02


def test_hermitian_form():
    with pytest.raises(ValueError):
        bb.HermitianForm(np.array([[0.0, 1.0], [0.0, 0.0]]))
    F = bb.HermitianForm(np.array([[2.0, 1j], [-1j, 3.0]]))
    assert F.is_positive_definite()
    assert abs(F.value(np.array([1.0, 0.0])) - 2.0) < 1e-15
