"""Gamma_r, the singular function s_r by two routes, and its regularization."""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate

import bergmanball as bb
from bergmanball.potential import NEAR_W_CUTOFF

from conftest import random_ball_point


# ---------------------------------------------------------------------------
# the kernel Gamma_r
# ---------------------------------------------------------------------------

def test_gamma_r_support_and_sign():
    for n in (1, 2):
        # harmonic mean value off the support: exactly zero
        assert bb.gamma_r_profile(n, 0.9, 0.5) == 0.0
        rhos = np.linspace(1e-4, 0.95, 200)
        vals = bb.gamma_r_profile(n, rhos, 0.6)
        assert np.all(vals <= 1e-6)
        assert bb.gamma_r_profile(n, 0.0, 0.5) == -math.inf


def test_gamma_r_against_quadrature_definition():
    # the closed radial form versus the defining quad_ball average of the
    # Green function in the first slot
    rng = np.random.default_rng(0)
    for n in (1, 2):
        rule = bb.ball_rule(n, 0.6, 32, 32)
        for _ in range(3):
            z = random_ball_point(rng, n, 0.5)
            zeta = random_ball_point(rng, n, 0.6)
            avg = bb.quad_ball(lambda pts: np.array([bb.green(n, x, zeta) for x in pts]),
                               z, 0.6, rule, singular=True) / bb.ball_volume(n, 0.6)
            want = bb.green(n, z, zeta) - avg
            got = bb.gamma_r_kernel(z, zeta, 0.6)
            assert abs(got - want) < 2e-4 * max(abs(want), 1.0)


def test_gamma_r_kernel_pole_and_warning():
    z = np.array([0.2 + 0j])
    assert bb.gamma_r_kernel(z, z, 0.5) == -math.inf
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        bb.gamma_r_kernel(z, z + 1e-8, 0.5)
    assert any("near-pole" in str(w.message) for w in rec)


# ---------------------------------------------------------------------------
# s_r: potential form
# ---------------------------------------------------------------------------

def test_s_r_vanishes_off_tube():
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0})
    assert bb.s_r_potential(T, [0.8], 0.5) == 0.0
    T2 = bb.DefiningPolynomial.from_terms({(0, 1): 1.0})
    assert abs(bb.s_r_potential(T2, np.array([0.2 + 0j, 0.7 + 0j]), 0.3)) < 1e-12


def test_s_r_nonpositive_everywhere():
    rng = np.random.default_rng(1)
    T = bb.DefiningPolynomial.from_roots([0.0, 0.3, -0.2 + 0.4j])
    vals = bb.s_r_potential_many(T, random_ball_point(rng, 1, 0.9)[None, :], 0.5)
    for _ in range(200):
        z = random_ball_point(rng, 1, 0.92)
        assert bb.s_r_potential(T, z, 0.5) <= 1e-9
    T2 = bb.DefiningPolynomial.from_terms({(0, 1): 1.0, (2, 0): -0.4})
    for _ in range(25):
        z = random_ball_point(rng, 2, 0.7)
        assert bb.s_r_potential(T2, z, 0.5) <= 1e-9


def test_s_r_on_W_is_minus_inf():
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0, (0,): -0.3})
    assert bb.s_r_potential(T, [0.3], 0.5) == -math.inf
    assert bb.s_r_potential(T, [0.3 + 0.3 * NEAR_W_CUTOFF], 0.5) == -math.inf


def test_s_r_log_singularity_slope():
    # fitted slope of s_r against log delta^2 near a hyperplane
    T2 = bb.DefiningPolynomial.from_terms({(0, 1): 1.0})
    z1 = 0.2 + 0.1j
    xs, ys = [], []
    for d in np.geomspace(1e-4, 3e-2, 8):
        z2 = d * math.sqrt(1 - abs(z1) ** 2)
        xs.append(math.log(d * d))
        ys.append(bb.s_r_potential(T2, np.array([z1, z2]), 0.5))
    slope = np.polyfit(xs, ys, 1)[0]
    assert abs(slope - 1.0) < 0.05


# ---------------------------------------------------------------------------
# s_r: green form and the cross-oracle
# ---------------------------------------------------------------------------

def test_s_r_green_empty_and_point_divisor():
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0})
    empty = bb.point_divisor_sample(np.zeros((0,), dtype=complex))
    assert bb.s_r_green(T, empty, [0.3], 0.5) == 0.0
    samp = bb.point_divisor_sample([0.0])
    z = np.array([0.25 + 0j])
    want = 2 * math.pi * bb.gamma_r_kernel(z, np.array([0.0j]), 0.5)
    assert abs(bb.s_r_green(T, samp, z, 0.5) - want) < 1e-14


def test_s_r_two_formula_oracle_n1():
    # the module's flagship mutual oracle, dimension 1 (counting measure)
    rng = np.random.default_rng(2)
    T = bb.DefiningPolynomial.from_roots([0.0, 0.3, -0.2 + 0.4j, 0.5j])
    samp = bb.point_divisor_sample(T.roots)
    checked = 0
    while checked < 100:
        z = random_ball_point(rng, 1, 0.9)
        sp = bb.s_r_potential(T, z, 0.5)
        if not np.isfinite(sp) or abs(sp) < 1e-8:
            continue
        sg = bb.s_r_green(T, samp, z, 0.5)
        assert abs(sp - sg) <= 1e-3 * abs(sp)
        checked += 1


def test_s_r_two_formula_oracle_n2(plane2, plane2_sample):
    # hyperplane in dimension 2, points inside the tube at resolvable depth
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 30:
        z = random_ball_point(rng, 2, 0.55)
        delta = abs(z[1]) / math.sqrt(1 - abs(z[0]) ** 2)
        if not 0.1 <= delta <= 0.42:
            continue
        sp = bb.s_r_potential(plane2, z, 0.5)
        sg = bb.s_r_green(plane2, plane2_sample, z, 0.5)
        assert abs(sp - sg) <= 1e-3 * abs(sp)
        checked += 1


def test_s_r_coverage_cross_check(plane2, plane2_sample):
    # if the sample misses W cap E(z,r) entirely the green form returns 0;
    # the potential form then flags the mismatch (CLI-level coverage error)
    z = np.array([0.1 + 0j, 0.15 + 0j])
    sp = bb.s_r_potential(plane2, z, 0.5)
    sg = bb.s_r_green(plane2, plane2_sample, z, 0.5)
    assert sg != 0.0 and abs(sp) > 1e-6


# ---------------------------------------------------------------------------
# distributional identity (n = 1 contour check)
# ---------------------------------------------------------------------------

def test_dd_c_s_r_reproduces_current():
    # (1/2pi) contour integral of d^c s_r around a small loop around one zero
    # equals 1 minus the smeared-tensor mass inside, within 2%
    a, r, rho0 = 0.2, 0.6, 0.15
    T = bb.DefiningPolynomial.from_terms({(1,): 1.0, (0,): -a})
    thetas = 2 * math.pi * (np.arange(64) + 0.5) / 64
    h = 1e-5
    flux = 0.0
    for th in thetas:
        e = np.exp(1j * th)
        up = bb.s_r_potential(T, [a + (rho0 + h) * e], r)
        dn = bb.s_r_potential(T, [a + (rho0 - h) * e], r)
        flux += (up - dn) / (2 * h) * rho0 * (2 * math.pi / 64)
    lhs = flux / 2.0 / (2 * math.pi)     # (1/2pi) int dd^c s_r over the disk
    # smeared mass inside the Euclidean loop: (1/2pi) int 2 u dA with the
    # point-divisor coefficient u(z) on the r-tube of a
    def u(x, y):
        z = complex(x, y)
        if abs((z - a) / (1 - np.conj(a) * z)) >= r:
            return 0.0
        return (1 - r * r) / (r * r * (1 - abs(z) ** 2) ** 2)
    mass, _ = integrate.dblquad(lambda yy, xx: u(a + xx, yy),
                                -rho0, rho0,
                                lambda xx: -math.sqrt(rho0 ** 2 - xx ** 2),
                                lambda xx: math.sqrt(rho0 ** 2 - xx ** 2))
    rhs = 1.0 - 2.0 * mass / (2 * math.pi)
    assert abs(lhs - rhs) < 0.02 * max(abs(rhs), 1.0)


# ---------------------------------------------------------------------------
# s_{r,eps}
# ---------------------------------------------------------------------------

def test_s_r_smooth_nonpositive_and_convergence():
    T = bb.DefiningPolynomial.from_roots([0.0, 0.35])
    z = np.array([0.2 + 0.1j])
    s_exact = bb.s_r_potential(T, z, 0.5)
    prev_err = None
    for eps in (0.2, 0.1, 0.05):
        v = bb.s_r_smooth(T, z, 0.5, eps)
        assert v <= 1e-9
        err = abs(v - s_exact)
        if prev_err is not None:
            assert err < prev_err    # first-order shrinkage toward s_r
        prev_err = err
    with pytest.raises(bb.DomainError):
        bb.s_r_smooth(T, z, 0.5, 0.5)


def test_smoothing_bounds_small():
    # log eps^2 - C_r <= s_{r,eps} <= 0 near W, C_r fitted on a disjoint set
    T = bb.DefiningPolynomial.from_roots([0.0, 0.35, -0.2 + 0.4j])
    rng = np.random.default_rng(4)
    eps, r = 0.1, 0.5

    def near_W(count, cluster):
        out = []
        while len(out) < count:
            w = T.roots[rng.integers(len(T.roots))]
            t = eps * rng.random() ** (3 if cluster else 1) * np.exp(2j * math.pi * rng.random())
            z = bb.mobius_apply(bb.MobiusMap.at([w]), np.array([t]))
            if abs(z[0]) <= 0.95:
                out.append(z)
        return out

    Cr = bb.smoothing_bound_constant(T, r, eps, near_W(30, True))
    for z in near_W(40, False):
        v = bb.s_r_smooth(T, z, r, eps)
        assert math.log(eps * eps) - Cr - 1e-9 <= v <= 0.0


def test_potential_sample_validation():
    with pytest.raises(ValueError):
        bb.PotentialSample(np.array([0.1]), 0.5, 0.1, "potential_form")
    with pytest.raises(ValueError):
        bb.PotentialSample(np.array([0.1]), 0.5, -1.0, "nope")
    ps = bb.PotentialSample(np.array([0.1]), 0.5, -1.0, "green_form")
    assert ps.method == "green_form"
