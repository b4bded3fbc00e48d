"""Truncated weighted Bergman spaces and the desk-scale sampling experiments.

A truncated space is the span of monomials z^alpha, |alpha| <= d, with the
Gram matrix of the weighted ball inner product; restriction data adds the
hypersurface Gram matrix and the reproducing kernel at the sample nodes.  The
extreme generalized eigenvalues of (gram_W, gram_ball) are the best two-sided
sampling constants over the truncated space, the finite-dimensional surrogate
for the sampling inequality constant; least-norm extension solves the kernel
system at the nodes.  Truncation degree is the honest stand-in for the full
space, so every claim is reported per degree with stability diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.linalg import eigh
from scipy.special import roots_jacobi, roots_legendre

from .density import Weight, density_grid, density_sweep
from .errors import CoverageError, DomainError, IntegrabilityError
from .geometry import MobiusMap, bergman_metric, mobius_apply
from .hypersurface import (DefiningPolynomial, HypersurfaceSample,
                           point_divisor_sample)

__all__ = [
    "monomial_basis",
    "monomial_matrix",
    "TruncatedSpace",
    "build_space",
    "RestrictionData",
    "restriction",
    "sampling_constants",
    "ExtensionResult",
    "least_norm_extension",
    "worst_extension_ratio",
    "FlatteningResult",
    "holomorphic_flattening",
    "tube_quadrature",
    "RestrictionCheck",
    "restriction_inequality_check",
    "pseudohyperbolic_lattice",
    "lattice_polynomial",
    "seip_sweep",
]

KERNEL_CUTOFF = 1e-12    # spectral cutoff relative to the top kernel eigenvalue


# ---------------------------------------------------------------------------
# basis and Gram matrices
# ---------------------------------------------------------------------------

def monomial_basis(n: int, d: int):
    """Multi-indices |alpha| <= d in graded lexicographic order."""
    basis = []
    for total in range(d + 1):
        for combo in combinations_with_replacement(range(n), total):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            basis.append(tuple(alpha))
    return basis


def monomial_matrix(points, basis):
    """V[i, a] = points_i ^ basis_a, for points of shape (m, n)."""
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    V = np.empty((pts.shape[0], len(basis)), dtype=complex)
    for a, alpha in enumerate(basis):
        col = np.ones(pts.shape[0], dtype=complex)
        for i, e in enumerate(alpha):
            if e:
                col = col * pts[:, i] ** e
        V[:, a] = col
    return V


@dataclass(frozen=True)
class TruncatedSpace:
    """Monomial truncation of the weighted Bergman space with its Gram matrix."""

    n: int
    degree: int
    basis: tuple
    gram: np.ndarray
    weight: Weight

    def __post_init__(self):
        np.linalg.cholesky(self.gram)  # raises if the Gram matrix is not PD

    @property
    def dim(self):
        return len(self.basis)

    def monomials(self, points):
        return monomial_matrix(points, self.basis)

    def evaluate(self, coeffs, points):
        return self.monomials(points) @ np.asarray(coeffs, dtype=complex)

    def norm2(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        return float(np.real(c @ self.gram @ c.conj()))

    def kernel_matrix(self, points):
        """K[i,j] = K(w_i, w_j) of the truncated reproducing kernel."""
        V = self.monomials(points)
        Ginv = np.linalg.inv(self.gram)
        K = V @ Ginv.conj() @ V.conj().T
        return (K + K.conj().T) / 2.0


def _ball_weight_nodes(n, beta, n_radial, n_angular):
    """Nodes and weights of int_B . (1-|z|^2)^(beta-(n+1)) c_n dLeb to the boundary.

    Radial directions use Gauss-Jacobi rules absorbing the boundary weight
    exactly; angles are equispaced (exact monomial orthogonality for counts
    above twice the degree).
    """
    cn = (n + 1) ** n * 2 ** n * math.factorial(n)
    if n == 1:
        x, wx = roots_jacobi(n_radial, beta - 2.0, 0.0)
        t = (x + 1.0) / 2.0
        wt = wx * 0.5 ** (beta - 1.0)
        th = 2.0 * math.pi * (np.arange(n_angular) + 0.5) / n_angular
        nodes = (np.sqrt(t)[:, None] * np.exp(1j * th)[None, :]).reshape(-1, 1)
        w = (wt[:, None] * (2.0 * math.pi / n_angular) * cn / 2.0).repeat(n_angular, axis=1)
        return nodes, w.ravel()
    if n == 2:
        xs, ws = roots_jacobi(n_radial, beta - 3.0, 1.0)
        s = (xs + 1.0) / 2.0
        w_s = ws * 0.5 ** (beta - 1.0)
        xg, wg = roots_legendre(n_radial)
        sig = (xg + 1.0) / 2.0
        w_sig = wg / 2.0
        th = 2.0 * math.pi * (np.arange(n_angular) + 0.5) / n_angular
        S, SIG, T1, T2 = np.meshgrid(s, sig, th, th, indexing="ij")
        WS, WSIG = np.meshgrid(w_s, w_sig, indexing="ij")
        t1, t2 = S * SIG, S * (1.0 - SIG)
        nodes = np.stack([(np.sqrt(t1) * np.exp(1j * T1)).ravel(),
                          (np.sqrt(t2) * np.exp(1j * T2)).ravel()], axis=-1)
        w = (0.25 * cn * WS[:, :, None, None] * WSIG[:, :, None, None]
             * (2.0 * math.pi / n_angular) ** 2 * np.ones_like(S))
        return nodes, w.ravel()
    raise DomainError("truncated spaces are implemented for n <= 2")


def build_space(n: int, d: int, kappa: Weight, n_radial: int = 0,
                n_angular: int = 0) -> TruncatedSpace:
    """Gram matrix of the monomials under int_B . e^{-kappa} omega_B^n.

    Needs beta > n (otherwise even constants have infinite norm).  For radial
    weights the exact diagonal structure is enforced after checking the
    off-diagonal entries are at quadrature-noise level.
    """
    if kappa.beta <= n:
        raise IntegrabilityError(f"beta must exceed n={n} for square-integrability")
    basis = monomial_basis(n, d)
    nr = n_radial or max(48, 2 * d + 8)
    na = n_angular or max(2 * d + 3, 32)
    nodes, w = _ball_weight_nodes(n, kappa.beta, nr, na)
    if not kappa.is_radial:
        extra = kappa.kappa(nodes) + kappa.beta * np.log1p(
            -np.einsum("ij,ij->i", nodes, nodes.conj()).real)
        w = w * np.exp(-extra)
    V = monomial_matrix(nodes, basis)
    G = (V * w[:, None]).T @ V.conj()
    G = (G + G.conj().T) / 2.0
    if kappa.is_radial:
        off = G - np.diag(np.diag(G))
        if np.abs(off).max() > 1e-10 * np.abs(np.diag(G)).max():
            raise RuntimeError("radial weight produced non-diagonal Gram entries")
        G = np.diag(np.diag(G).real.astype(complex))
    return TruncatedSpace(n=n, degree=d, basis=tuple(basis), gram=G, weight=kappa)


# ---------------------------------------------------------------------------
# restriction to W
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RestrictionData:
    """Hypersurface Gram matrix and node kernel for a truncated space."""

    space: TruncatedSpace
    w_sample: HypersurfaceSample
    gram_W: np.ndarray
    kernel_at_nodes: np.ndarray
    ridged: bool = False

    @property
    def node_data_weights(self):
        """Diagonal of the W-norm of node data: e^{-kappa(w_i)} area_weights_i."""
        pts = self.w_sample.points
        if len(pts) == 0:
            return np.zeros(0)
        return np.exp(-self.space.weight.kappa(pts)) * self.w_sample.area_weights


def restriction(space: TruncatedSpace, T: DefiningPolynomial,
                w_sample: HypersurfaceSample, ridge: float = 1e-12) -> RestrictionData:
    """Weighted sums over the sample: gram_W and the kernel at the nodes."""
    pts = w_sample.points
    m = len(pts)
    if m == 0:
        Z = np.zeros((space.dim, space.dim), dtype=complex)
        return RestrictionData(space, w_sample, Z, np.zeros((0, 0), dtype=complex))
    V = space.monomials(pts)
    wts = np.exp(-space.weight.kappa(pts)) * w_sample.area_weights
    GW = (V * wts[:, None]).T @ V.conj()
    GW = (GW + GW.conj().T) / 2.0
    lam = np.linalg.eigvalsh(GW)
    if lam.min() < -1e-8 * max(np.trace(GW).real, 1e-30):
        raise RuntimeError("hypersurface Gram matrix is not PSD")
    K = space.kernel_matrix(pts)
    ridged = False
    if m > 1:
        diff = pts[:, None, :] - pts[None, :, :]
        dmin = np.min(np.linalg.norm(diff, axis=-1) + np.eye(m) * 1e9)
        if dmin < 1e-12:
            K = K + (ridge * np.trace(K).real / m) * np.eye(m)
            ridged = True
    return RestrictionData(space, w_sample, GW, K, ridged)


def sampling_constants(rd: RestrictionData):
    """Best constants (lambda_min, lambda_max) in the two-sided comparison of
    int_W |F|^2 e^{-kappa} with int_B |F|^2 e^{-kappa} over the truncated space."""
    lam = eigh(rd.gram_W, rd.space.gram, eigvals_only=True)
    return float(max(lam[0], 0.0)), float(lam[-1])


@dataclass(frozen=True)
class ExtensionResult:
    node_coefficients: np.ndarray
    basis_coefficients: np.ndarray
    norm2: float
    cond: float
    truncated: bool


def _kernel_spectral(K):
    lam, U = np.linalg.eigh(K)
    top = max(lam.max(), 0.0)
    keep = lam > KERNEL_CUTOFF * top if top > 0 else np.zeros_like(lam, dtype=bool)
    return lam, U, keep


def least_norm_extension(rd: RestrictionData, values) -> ExtensionResult:
    """Minimal-ball-norm element interpolating the node values.

    Solves kernel_at_nodes . c = values by spectral factorization with cutoff
    1e-12 * lambda_max (conditioning reported); the extension is
    sum_i c_i K(., w_i) and its squared norm is Re <values, c>.
    """
    values = np.asarray(values, dtype=complex)
    lam, U, keep = _kernel_spectral(rd.kernel_at_nodes)
    if not keep.any():
        dim = rd.space.dim
        return ExtensionResult(np.zeros_like(values), np.zeros(dim, dtype=complex),
                               0.0, math.inf, True)
    proj = U.conj().T @ values
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    c = U @ (inv * proj)
    cond = float(lam.max() / lam[keep].min())
    truncated = bool((~keep).any() or cond > 1e12)
    Ginv = np.linalg.inv(rd.space.gram)
    V = rd.space.monomials(rd.w_sample.points)
    basis_coeffs = Ginv.conj() @ (V.conj().T @ c)
    norm2 = float(np.real(values.conj() @ c))
    return ExtensionResult(c, basis_coeffs, norm2, cond, truncated)


def worst_extension_ratio(rd: RestrictionData) -> float:
    """Worst case of (least-norm extension ball-norm^2) / (W-norm^2 of the data)
    over feasible node data: the top generalized eigenvalue of (K^+, D)."""
    lam, U, keep = _kernel_spectral(rd.kernel_at_nodes)
    if not keep.any():
        return 0.0
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    Kplus = (U * inv) @ U.conj().T
    D = rd.node_data_weights
    vals = eigh((Kplus + Kplus.conj().T) / 2.0, np.diag(D.astype(complex)),
                eigvals_only=True)
    return float(vals[-1])


# ---------------------------------------------------------------------------
# holomorphic flattening (dimension 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatteningResult:
    g_coefficients: np.ndarray   # ascending Taylor coefficients on D(0,1/2), g_0 = 0
    K: float
    fourier_residual: float

    def g(self, z):
        z = np.asarray(z, dtype=complex)
        return np.polyval(self.g_coefficients[::-1], z)


def holomorphic_flattening(phi, laplacian=None, *, domain_radius=0.75,
                           circle_radius=0.7, modes=96, pot_nodes=(48, 96),
                           grid_step=0.01, residual_tol=1e-3) -> FlatteningResult:
    """Berndtsson-Ortega Cerda flattening of a subharmonic phi on the disk.

    Builds the logarithmic potential p of the Laplacian mass of phi over
    D(0, 3/4), completes the harmonic remainder h = phi - p to a holomorphic
    H from circle Fourier coefficients, and returns G = (H - H(0))/2 with
    G(0) = 0 together with the measured bound
    K = sup_{D(0,1/2)} |phi - phi(0) - 2 Re G|.

    phi (and laplacian, if given) must accept a complex array of points and
    return real values; the Laplacian falls back to 5-point differences.
    """
    def lap(pts):
        if laplacian is not None:
            return np.asarray(laplacian(pts), dtype=float)
        h = 1e-4
        return (np.asarray(phi(pts + h)) + np.asarray(phi(pts - h))
                + np.asarray(phi(pts + 1j * h)) + np.asarray(phi(pts - 1j * h))
                - 4.0 * np.asarray(phi(pts))) / (h * h)

    nr, na = pot_nodes
    x, wx = roots_legendre(nr)
    rho = 0.5 * domain_radius * (x + 1.0)
    wr = 0.5 * domain_radius * wx
    th = 2.0 * math.pi * (np.arange(na) + 0.5) / na
    wpts = (rho[:, None] * np.exp(1j * th)[None, :]).ravel()
    wq = np.repeat(wr * (2.0 * math.pi / na) * rho, na)
    mass = lap(wpts)
    if mass.min() < -1e-6 * max(abs(mass).max(), 1.0):
        raise DomainError("phi is not subharmonic on D(0, 3/4)")

    def log_potential(Z):
        Z = np.asarray(Z, dtype=complex)
        d = np.abs(Z[..., None] - wpts)
        d = np.maximum(d, 1e-12)
        return (np.log(d) * (mass * wq)).sum(axis=-1) / (2.0 * math.pi)

    M = 4 * modes
    circle = circle_radius * np.exp(2j * math.pi * np.arange(M) / M)
    h_circ = np.asarray(phi(circle), dtype=float) - log_potential(circle)
    hhat = np.fft.fft(h_circ) / M
    k = np.arange(1, modes + 1)
    g = np.zeros(modes + 1, dtype=complex)
    g[1:] = hhat[1:modes + 1] / circle_radius ** k

    # completion residual: reconstruct h on an interior circle
    tc = 0.6 * np.exp(2j * math.pi * (np.arange(M) + 0.5) / M)
    h_tc = np.asarray(phi(tc), dtype=float) - log_potential(tc)
    h_rec = hhat[0].real + 2.0 * np.real(np.polyval(g[::-1], tc))
    residual = float(np.abs(h_tc - h_tc.mean() - (h_rec - hhat[0].real)).max())
    scale = 1.0 + float(np.abs(h_circ).max())
    if residual > residual_tol * scale + 1e-8:
        raise RuntimeError(f"Fourier completion residual {residual:.3g} too large")

    xs = np.arange(-0.5, 0.5 + grid_step / 2, grid_step)
    gx, gy = np.meshgrid(xs, xs)
    gpts = (gx + 1j * gy).ravel()
    gpts = gpts[np.abs(gpts) <= 0.5]
    phi0 = float(np.asarray(phi(np.array([0.0 + 0j])))[0])
    vals = (np.asarray(phi(gpts), dtype=float) - phi0
            - 2.0 * np.real(np.polyval(g[::-1], gpts)))
    K = float(np.abs(vals).max())
    return FlatteningResult(g_coefficients=g, K=K, fourier_residual=residual)


# ---------------------------------------------------------------------------
# tube restriction
# ---------------------------------------------------------------------------

def tube_quadrature(T: DefiningPolynomial, sample: HypersurfaceSample, eps: float,
                    n_radial: int = 10, n_angular: int = 20):
    """Nodes and omega_B^n weights covering the pseudohyperbolic eps-tube of W.

    Each sample point carries the pseudohyperbolic normal disk F_w(t nu_w),
    |t| < eps, with the exact constant fiber density
    2n(n+1)(1-|t|^2)^(-(n+1)) relative to the base area weight (exact for
    hyperplanes through the Moebius center; O(eps * curvature) bias else).
    """
    n = T.nvars
    x, wx = roots_legendre(n_radial)
    rr = 0.5 * eps * (x + 1.0)
    wr = 0.5 * eps * wx
    th = 2.0 * math.pi * (np.arange(n_angular) + 0.5) / n_angular
    tdisk = (rr[:, None] * np.exp(1j * th)[None, :]).ravel()
    fiber = (2.0 * n * (n + 1) * (1.0 - np.abs(tdisk) ** 2) ** (-(n + 1))
             * np.repeat(wr * (2.0 * math.pi / n_angular) * rr, n_angular))
    pts, wts = [], []
    for i in range(sample.size):
        w = sample.points[i]
        m = MobiusMap.at(w)
        # grad of T o F_w at 0 by the chain rule, DF_w(0) = -(s^2 P + s Q)
        DF = -(m.s_a ** 2 * m.P_a + m.s_a * m.Q_a)
        grad0 = DF.T @ T.gradient(w)
        gn = np.linalg.norm(grad0)
        if gn < 1e-10:
            continue
        nu = grad0.conj() / gn
        pts.append(mobius_apply(m, tdisk[:, None] * nu[None, :]))
        wts.append(sample.area_weights[i] * fiber)
    if not pts:
        return np.zeros((0, n), dtype=complex), np.zeros(0)
    return np.concatenate(pts, axis=0), np.concatenate(wts)


@dataclass(frozen=True)
class RestrictionCheck:
    measured_C: float
    ratios: np.ndarray
    lambda_max: float
    lambda_max_quotient: float


def restriction_inequality_check(space: TruncatedSpace, T: DefiningPolynomial,
                                 w_sample: HypersurfaceSample, eps: float,
                                 n_random: int = 100, seed: int = 0) -> RestrictionCheck:
    """Empirical constant C in C eps^2 int_W |F|^2 <= int_tube |F|^2.

    Evaluates the ratio tube-integral / (eps^2 W-integral) for every basis
    element and n_random space elements and returns the minimum; also reports
    the upper-direction consistency: the top sampling eigenvalue against the
    same Rayleigh quotient evaluated on its eigenvector.
    """
    tpts, tw = tube_quadrature(T, w_sample, eps)
    if len(tpts) == 0:
        raise CoverageError("tube quadrature is empty")
    kap_t = np.exp(-space.weight.kappa(tpts)) * tw
    Vt = space.monomials(tpts)
    rd = restriction(space, T, w_sample)
    Vw = space.monomials(w_sample.points)
    kap_w = rd.node_data_weights

    rng = np.random.default_rng(seed)
    coeff_list = [np.eye(space.dim, dtype=complex)[a] for a in range(space.dim)]
    coeff_list += list(rng.standard_normal((n_random, space.dim))
                       + 1j * rng.standard_normal((n_random, space.dim)))
    ratios = []
    for c in coeff_list:
        tube = float(np.sum(kap_t * np.abs(Vt @ c) ** 2))
        wint = float(np.sum(kap_w * np.abs(Vw @ c) ** 2))
        if wint <= 1e-300:
            continue
        ratios.append(tube / (eps * eps * wint))
    ratios = np.array(ratios)

    lam, vecs = eigh(rd.gram_W, space.gram)
    top = vecs[:, -1].conj()   # the c^T G conj(c) pairing extremizes at conj vectors
    quot = float(np.real(top @ rd.gram_W @ top.conj())
                 / np.real(top @ space.gram @ top.conj()))
    return RestrictionCheck(measured_C=float(ratios.min()), ratios=ratios,
                            lambda_max=float(lam[-1]), lambda_max_quotient=quot)


# ---------------------------------------------------------------------------
# lattices and the transition sweep
# ---------------------------------------------------------------------------

def pseudohyperbolic_lattice(separation: float, max_pseudoradius: float = 0.95,
                             min_gap_factor: float = 0.55):
    """Orbit of 0 under Moebius translations by the separation along +-x, +-y.

    Breadth-first orbit enumeration with pseudohyperbolic deduplication
    (candidates closer than min_gap_factor * separation to an accepted point
    are merged), capped at the pseudoradius.  The result is a uniformly
    separated quasi-lattice of the disk; deterministic.
    """
    if not 0.0 < separation < 1.0:
        raise DomainError("separation must lie in (0,1)")
    s = separation
    gens = np.array([s, -s, 1j * s, -1j * s])
    pts = [0.0 + 0.0j]
    frontier = [0.0 + 0.0j]
    while frontier:
        new = []
        for z in frontier:
            cand = (z + gens) / (1.0 + np.conj(gens) * z)
            for w in cand:
                if abs(w) >= max_pseudoradius:
                    continue
                arr = np.array(pts)
                gap = np.abs((w - arr) / (1.0 - np.conj(arr) * w))
                if gap.min() > min_gap_factor * s:
                    pts.append(w)
                    new.append(w)
        frontier = new
    return np.array(pts, dtype=complex)


def lattice_polynomial(points) -> DefiningPolynomial:
    return DefiningPolynomial.from_roots(np.asarray(points, dtype=complex))


def seip_sweep(beta: float, degree: int, separations, seed: int = 0,
               r_ladder=(0.5, 0.6, 0.7, 0.8, 0.9), grid=None,
               stability_degrees=(8, 12, 16)):
    """Transition experiment rows for pseudohyperbolic lattices.

    Per separation: the sweep density estimate (extrapolated upper density),
    the sampling constants of the lattice restriction at the working degree,
    the worst-case extension-to-data norm ratio, and the lambda_max stability
    across the diagnostic degrees.
    """
    kappa = Weight(beta=beta)
    if grid is None:
        grid = density_grid(1, 6, 10, max_pseudoradius=0.9)
    rows = []
    for sep in separations:
        lat = pseudohyperbolic_lattice(sep)
        T = lattice_polynomial(lat)
        report = density_sweep(T, kappa, grid, np.asarray(r_ladder, float))
        sample = point_divisor_sample(lat)
        lam_by_deg = {}
        row_main = {}
        for d in sorted(set(stability_degrees) | {degree}):
            space = build_space(1, d, kappa)
            rd = restriction(space, T, sample)
            lmin, lmax = sampling_constants(rd)
            lam_by_deg[d] = (lmin, lmax)
            if d == degree:
                row_main = {
                    "lambda_min": lmin,
                    "lambda_max": lmax,
                    "extension_norm_ratio": worst_extension_ratio(rd),
                }
        rows.append({
            "separation": float(sep),
            "points": int(len(lat)),
            "density_estimate": report.extrapolated_plus,
            **row_main,
            "lambda_max_by_degree": {str(d): lam_by_deg[d][1] for d in lam_by_deg},
        })
    return rows
