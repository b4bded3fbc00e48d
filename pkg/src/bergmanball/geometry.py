"""Closed-form Bergman-ball primitives and quadrature.

The unit ball B in C^n carries the Bergman metric with (1,1)-form matrix

    g[i,j](z) = (n+1) * ((1-|z|^2) delta_ij + conj(z_i) z_j) / (1-|z|^2)^2,

so that g(0) = (n+1)*I.  All volume integrals use the convention
omega_E^n = 2^n n! * Lebesgue, which makes the invariant volume density

    (n+1)^n 2^n n! (1-|z|^2)^(-(n+1))

with respect to Lebesgue measure on R^{2n}; ratios and normalized averages are
convention-free.  The invariant Green's function with pole at 0 is radial,
gamma(z) = f(|z|^2), with f the exact binomial antiderivative of
-C_n (1-u)^(n-1)/u^n and C_n = (2 pi)^(-n) (n+1)^(-(n-1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import DomainError, QuadratureError

__all__ = [
    "as_point",
    "MobiusMap",
    "mobius_apply",
    "pseudo_distance",
    "HermitianForm",
    "bergman_metric",
    "volume_density",
    "ball_volume",
    "green_constant",
    "green_radial_profile",
    "green_gamma",
    "green",
    "QuadratureRule",
    "ball_rule",
    "quad_ball",
    "complex_hessian_fd",
    "bergman_laplacian_fd",
    "direction_design",
]


# ---------------------------------------------------------------------------
# points and automorphisms
# ---------------------------------------------------------------------------

def as_point(z, n=None):
    """Validate a point of the unit ball and return it as a complex 1-d array."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim != 1:
        raise DomainError(f"a ball point must be a vector, got shape {z.shape}")
    if n is not None and z.size != n:
        raise DomainError(f"expected a point of C^{n}, got C^{z.size}")
    if np.vdot(z, z).real >= 1.0:
        raise DomainError(f"point lies outside the open unit ball: |z|={np.linalg.norm(z):.6g}")
    return z


def _norms2(Z):
    """Squared Euclidean norms along the last axis."""
    Z = np.asarray(Z, dtype=complex)
    return np.einsum("...i,...i->...", Z, Z.conj()).real


@dataclass(frozen=True)
class MobiusMap:
    """The involution F_a of the ball swapping 0 and a.

    F_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z,a>), with P_a the rank-one
    projector a a^dag / |a|^2, Q_a = I - P_a and s_a = sqrt(1 - |a|^2).
    For a = 0 the map is z -> -z.
    """

    a: np.ndarray
    s_a: float
    P_a: np.ndarray
    Q_a: np.ndarray

    @classmethod
    def at(cls, a):
        a = as_point(a)
        n = a.size
        aa = np.vdot(a, a).real
        if aa == 0.0:
            P = np.zeros((n, n), dtype=complex)
        else:
            P = np.outer(a, a.conj()) / aa
        return cls(a=a, s_a=math.sqrt(1.0 - aa), P_a=P, Q_a=np.eye(n) - P)

    def __call__(self, z):
        return mobius_apply(self, z)


def mobius_apply(m: MobiusMap, z):
    """Apply F_a to one point or to an array of points with shape (..., n).

    Satisfies 1 - |F_a(z)|^2 = (1-|z|^2)(1-|a|^2) / |1 - <z,a>|^2.
    """
    z = np.asarray(z, dtype=complex)
    squeeze = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[-1] != m.a.size:
        raise DomainError("dimension mismatch between map and points")
    if np.any(_norms2(Z) >= 1.0):
        raise DomainError("mobius_apply: point outside the open unit ball")
    a = m.a
    aa = np.vdot(a, a).real
    if aa == 0.0:
        out = -Z
    else:
        inner = Z @ a.conj()                       # <z, a>
        pz = (inner / aa)[..., None] * a
        out = (a - pz - m.s_a * (Z - pz)) / (1.0 - inner)[..., None]
    return out[0] if squeeze else out.reshape(z.shape)


def pseudo_distance(a, b):
    """Bergman-Green distance |F_a(b)|; b may be an array of points (..., n)."""
    m = MobiusMap.at(a)
    fb = mobius_apply(m, b)
    return np.sqrt(np.clip(_norms2(fb), 0.0, None))


# ---------------------------------------------------------------------------
# Hermitian (1,1)-forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermitianForm:
    """Coefficient matrix h[i,j] of a real (1,1)-form; value(v) = sum h[i,j] v_i conj(v_j)."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        scale = max(np.abs(M).max(), 1.0)
        if np.abs(M - M.conj().T).max() > 1e-12 * scale:
            raise ValueError("matrix is not Hermitian to 1e-12")
        object.__setattr__(self, "matrix", (M + M.conj().T) / 2.0)

    @property
    def n(self):
        return self.matrix.shape[0]

    def value(self, v):
        v = np.asarray(v, dtype=complex)
        return float(np.real(v @ self.matrix @ v.conj()))

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def is_positive_definite(self, tol=0.0):
        return bool(self.eigenvalues().min() > tol)


def bergman_metric(z) -> HermitianForm:
    """Matrix of the Bergman (1,1)-form at z; equals (n+1)*I at the origin."""
    z = as_point(z)
    n = z.size
    t = np.vdot(z, z).real
    M = (n + 1) * ((1.0 - t) * np.eye(n) + np.outer(z.conj(), z)) / (1.0 - t) ** 2
    return HermitianForm(M)


def volume_density(z, n=None):
    """Density of omega_B^n against Lebesgue measure on R^{2n} (convention above)."""
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        n = z.size
        t = np.vdot(z, z).real
    else:
        if n is None:
            n = z.shape[-1]
        t = _norms2(z)
    c = (n + 1) ** n * 2 ** n * math.factorial(n)
    return c * (1.0 - t) ** (-(n + 1))


def ball_volume(n: int, r: float) -> float:
    """Invariant volume V_n(r) of B(0,r): the incomplete-Beta radial integral
    int_0^{r^2} t^{n-1}(1-t)^{-(n+1)} dt collapses to (r^2/(1-r^2))^n / n, so

        V_n(r) = (2 pi (n+1) r^2 / (1-r^2))^n.
    """
    if not 0.0 <= r < 1.0:
        raise DomainError(f"radius must lie in [0,1), got {r}")
    return (2.0 * math.pi * (n + 1) * r * r / (1.0 - r * r)) ** n


# ---------------------------------------------------------------------------
# Green's function
# ---------------------------------------------------------------------------

def green_constant(n: int) -> float:
    """C_n = (2 pi)^(-n) (n+1)^(-(n-1))."""
    return (2.0 * math.pi) ** (-n) * (n + 1) ** (-(n - 1))


def green_radial_profile(n: int, t):
    """f(t) = -C_n int_t^1 (1-u)^{n-1}/u^n du via the exact binomial antiderivative.

    Evaluated term by term (one logarithmic term, k = n-1) so there is no
    cancellation as t -> 1; f(1) = 0 and f is strictly increasing.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t > 1.0):
        raise DomainError("green_radial_profile needs 0 < t <= 1")
    C = green_constant(n)
    total = np.zeros_like(t)
    for k in range(n):
        b = math.comb(n - 1, k) * (-1) ** k
        e = k - n + 1
        if e == 0:
            total += b * (-np.log(t))
        else:
            # 1 - t^e with e < 0, written to stay accurate near t = 1
            total += b * (-np.expm1(e * np.log(t))) / e
    out = -C * total
    return float(out) if out.ndim == 0 else out


def green_gamma(n: int, z):
    """gamma_B(z) = f(|z|^2); -inf at the pole z = 0."""
    z = as_point(z, n)
    t = np.vdot(z, z).real
    if t == 0.0:
        return -math.inf
    return green_radial_profile(n, t)


def green(n: int, z, a):
    """G_B(z,a) = gamma_B(F_a(z)); -inf at the pole z = a."""
    z = as_point(z, n)
    a = as_point(a, n)
    if np.array_equal(z, a):
        return -math.inf
    rho2 = float(pseudo_distance(a, z) ** 2)
    if rho2 == 0.0:
        return -math.inf
    return green_radial_profile(n, rho2)


# ---------------------------------------------------------------------------
# quadrature over Bergman-Green balls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in B(0,r) with weights absorbing the invariant volume density.

    sum(weights * g(nodes)) approximates int_{B(0,r)} g omega_B^n; the weights are
    positive and sum to V_n(r) (exactly for the tensor rules, statistically for
    the Monte Carlo fallback).
    """

    nodes: np.ndarray          # (N, n) complex
    weights: np.ndarray        # (N,) positive
    r: float
    seed: int = 0
    is_monte_carlo: bool = False
    counts: tuple = field(default=())

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        if np.any(_norms2(self.nodes) >= self.r ** 2 + 1e-15):
            raise ValueError("quadrature nodes outside the integration region")


def _angles(count):
    return 2.0 * math.pi * (np.arange(count) + 0.5) / count


@lru_cache(maxsize=64)
def ball_rule(n: int, r: float, n_radial: int = 0, n_angular: int = 0,
              mc_samples: int = 200_000, seed: int = 0) -> QuadratureRule:
    """Tensor-product polar rule on B(0,r) (n <= 2), Monte Carlo for n = 3.

    Defaults: 48 radial x 48 angular for n = 1, 24 per radial/angular variable
    for n = 2.  Radial directions use Gauss-Legendre, angles are equispaced
    midpoints (spectrally accurate for the periodic directions).
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"rule radius must lie in (0,1), got {r}")
    cn = (n + 1) ** n * 2 ** n * math.factorial(n)
    if n == 1:
        nr = n_radial or 48
        na = n_angular or 48
        x, wx = roots_legendre(nr)
        rho = 0.5 * r * (x + 1.0)
        wr = 0.5 * r * wx
        th = _angles(na)
        nodes = (rho[:, None] * np.exp(1j * th)[None, :]).reshape(-1, 1)
        t = (rho ** 2)[:, None].repeat(na, axis=1).reshape(-1)
        w = (wr[:, None] * (2.0 * math.pi / na)).repeat(na, axis=1).reshape(-1)
        weights = w * np.abs(nodes[:, 0]) * cn * (1.0 - t) ** (-(n + 1))
        return QuadratureRule(nodes, weights, r, counts=(nr, na))
    if n == 2:
        nr = n_radial or 24
        na = n_angular or 24
        xs, ws = roots_legendre(nr)
        s = 0.5 * (xs + 1.0)
        w_s = 0.5 * ws
        sg, wg = roots_legendre(nr)
        sig = 0.5 * (sg + 1.0)
        w_sig = 0.5 * wg
        th = _angles(na)
        S, SIG, TH1, TH2 = np.meshgrid(s, sig, th, th, indexing="ij")
        WS, WSIG = np.meshgrid(w_s, w_sig, indexing="ij")
        t1 = r * r * S * SIG
        t2 = r * r * S * (1.0 - SIG)
        z1 = np.sqrt(t1) * np.exp(1j * TH1)
        z2 = np.sqrt(t2) * np.exp(1j * TH2)
        nodes = np.stack([z1.ravel(), z2.ravel()], axis=-1)
        # Leb = (1/4) dt1 dt2 dphi1 dphi2, simplex map Jacobian dt1 dt2 = r^4 s ds dsig
        base = 0.25 * r ** 4 * S * WS[:, :, None, None] * WSIG[:, :, None, None] \
            * (2.0 * math.pi / na) ** 2
        dens = cn * (1.0 - (t1 + t2)) ** (-(n + 1))
        weights = (base * dens).ravel()
        return QuadratureRule(nodes, weights, r, counts=(nr, nr, na, na))
    if n == 3:
        rng = np.random.default_rng(seed)
        N = mc_samples
        g = rng.standard_normal((N, 2 * n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        radii = r * rng.random(N) ** (1.0 / (2 * n))
        pts = g * radii[:, None]
        nodes = pts[:, :n] + 1j * pts[:, n:]
        vol_eucl = math.pi ** n / math.factorial(n) * r ** (2 * n)
        weights = volume_density(nodes, n) * vol_eucl / N
        return QuadratureRule(nodes, weights, r, seed=seed, is_monte_carlo=True,
                              counts=(mc_samples,))
    raise DomainError(f"no quadrature rule for dimension n={n}")


def _eval_on_points(g, pts):
    try:
        vals = np.asarray(g(pts))
        if vals.shape == (pts.shape[0],):
            return vals
    except Exception:
        pass
    return np.array([g(p) for p in pts])


def quad_ball(g, center, r, rule: QuadratureRule | None = None, *,
              singular=False, return_stderr=False):
    """Integrate g over the Bergman-Green ball E(center, r) against omega_B^n.

    The integral is pulled back through F_center (Aut-invariance of omega_B^n)
    and evaluated on a rule over B(0,r).  Accumulation uses numpy pairwise
    summation, so the result does not depend on evaluation order.

    With singular=True the caller asserts any non-finite node values come from
    an integrable logarithmic singularity; those nodes are excluded (the shell
    policy: their integrated log mass at pseudoradius ~1e-6 is negligible).
    Otherwise a non-finite node value raises QuadratureError with its location.
    """
    center = as_point(center)
    n = center.size
    if rule is None:
        rule = ball_rule(n, float(r))
    m = MobiusMap.at(center)
    pts = mobius_apply(m, rule.nodes)
    vals = _eval_on_points(g, pts)
    finite = np.isfinite(vals)
    if not finite.all():
        if not singular:
            bad = pts[~finite][0]
            raise QuadratureError(f"non-integrable singularity at node {bad}")
        vals = np.where(finite, vals, 0.0)
        w = np.where(finite, rule.weights, 0.0)
    else:
        w = rule.weights
    contrib = w * vals
    total = float(np.sum(contrib))
    if return_stderr:
        if rule.is_monte_carlo:
            N = len(vals)
            se = float(np.std(contrib * N, ddof=1) / math.sqrt(N))
        else:
            se = 0.0
        return total, se
    return total


# ---------------------------------------------------------------------------
# finite-difference complex Hessians and the invariant Laplacian
# ---------------------------------------------------------------------------

def _stencil_offsets(h):
    # 9-point stencil in the complex t-plane of one direction
    return np.array([h, -h, 1j * h, -1j * h,
                     h + 1j * h, h - 1j * h, -h + 1j * h, -h - 1j * h])


def complex_hessian_fd(f, z, h=1e-3):
    """Complex Hessian H[j,k] = d^2 f / dz_j dzbar_k by 9-point central stencils.

    f must accept an (m, n) array of points and return (m,) real values; the
    directional values d_t d_tbar f(z + t v) come from the compact 9-point
    Laplacian, and off-diagonal entries from sesquilinear polarization over the
    directions e_j +- e_k and e_j +- i e_k.
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    dirs = []
    for j in range(n):
        e = np.zeros(n, complex)
        e[j] = 1.0
        dirs.append(e)
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for (j, k) in pairs:
        for coef in (1.0, -1.0, 1j, -1j):
            e = np.zeros(n, complex)
            e[j] = 1.0
            e[k] = coef
            dirs.append(e)
    offs = _stencil_offsets(h)
    pts = [z[None, :]]
    for d in dirs:
        pts.append(z[None, :] + offs[:, None] * d[None, :])
    pts = np.concatenate(pts, axis=0)
    vals = np.asarray(f(pts), dtype=float)
    f0 = vals[0]
    per = vals[1:].reshape(len(dirs), 8)

    def q(i):
        v = per[i]
        lap = (4.0 * (v[0] + v[1] + v[2] + v[3]) + v[4] + v[5] + v[6] + v[7]
               - 20.0 * f0) / (6.0 * h * h)
        return lap / 4.0

    H = np.zeros((n, n), dtype=complex)
    for j in range(n):
        H[j, j] = q(j)
    base = n
    for idx, (j, k) in enumerate(pairs):
        qpp, qpm, qip, qim = (q(base + 4 * idx + i) for i in range(4))
        H[j, k] = ((qpp - qpm) + 1j * (qip - qim)) / 4.0
        H[k, j] = np.conj(H[j, k])
    return (H + H.conj().T) / 2.0


def bergman_laplacian_fd(f, a, h=1e-3):
    """Invariant Laplacian via n(n+1) Delta_B f(a) = tr(DF_a(0)^dag D^{1,1}f(a) DF_a(0)).

    DF_a(0) = -(s_a^2 P_a + s_a Q_a) in closed form.
    """
    a = as_point(a)
    n = a.size
    m = MobiusMap.at(a)
    DF = -(m.s_a ** 2 * m.P_a + m.s_a * m.Q_a)
    H = complex_hessian_fd(f, a, h)
    return float(np.trace(DF.conj().T @ H @ DF).real) / (n * (n + 1))


def direction_design(n: int, count: int = 64, seed: int | None = None):
    """Unit direction vectors in C^n probing the Rayleigh quotient.

    n = 1: the single direction.  n = 2: a deterministic Fibonacci covering of
    the Bloch sphere mapped to CP^1 (covering radius keeps the worst Rayleigh
    shortfall below 2% at count 64).  n >= 3: seeded uniform points on the
    complex sphere.
    """
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    if n == 2:
        i = np.arange(count)
        cz = 1.0 - 2.0 * (i + 0.5) / count
        theta = np.arccos(np.clip(cz, -1.0, 1.0))
        golden = math.pi * (3.0 - math.sqrt(5.0))
        phi = golden * i
        return np.stack([np.cos(theta / 2.0) + 0j,
                         np.sin(theta / 2.0) * np.exp(1j * phi)], axis=-1)
    rng = np.random.default_rng(0 if seed is None else seed)
    v = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
