"""The averaged potential, the total density tensor, and density sweeps.

The averaged potential of a defining polynomial T at z is the E(z,r)-average
of log|T|^2, computed after pulling back through F_z.  The pullback integrand
is the log-modulus of a polynomial (plus an exactly pluriharmonic term from
the cleared Moebius denominator), so the innermost complex coordinate is
integrated exactly: the angular average of log|zeta - b| over a circle of
radius s is log max(s, |b|), and the remaining radial factors
s (A - s^2)^{-p} have elementary antiderivatives.  The pluriharmonic envelope
is likewise integrated exactly in the outer angle, which leaves a nonnegative,
compactly supported correction field for ordinary quadrature.  Off the r-tube
of W the result is exact, and the correction structure makes
s_r = log|T|^2 - (average) nonpositive by construction, not up to noise.

The total density tensor is the complex Hessian in z of the averaged
potential, by 9-point central finite differences per entry pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.special import roots_legendre

from .errors import FDFailure, SweepError, WeightError
from .geometry import (HermitianForm, as_point, ball_rule, ball_volume,
                       bergman_metric, complex_hessian_fd, direction_design,
                       mobius_apply, MobiusMap, quad_ball)
from .hypersurface import (DefiningPolynomial, compose_mobius_terms,
                           poly_eval, univariate_roots)

__all__ = [
    "Weight",
    "averaged_potential",
    "averaged_potential_many",
    "s_r_raw",
    "upsilon",
    "local_density",
    "theta_density",
    "DensityReport",
    "density_sweep",
    "density_grid",
    "extrapolate_in_one_minus_r",
]

# outer polar resolutions for the n = 2 correction field (radial, angular):
# values get the fine rule; Hessian stencils keep the coarser one, where the
# smoothness of the error field matters more than its size
OUTER_NODES = (96, 96)
FD_OUTER_NODES = (48, 48)
# plain rule used for the smooth exponent-factor average
EXP_RULE_NODES = (12, 12)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Weight:
    """kappa_beta(z) = -beta log(1-|z|^2), optionally perturbed by a polynomial.

    perturbation_mode "re" adds 2 Re p (pluriharmonic, density-neutral);
    "abs2" adds |p|^2 (a small smooth plurisubharmonic term with the exact
    rank-one Hessian grad p grad p^dag).
    """

    beta: float
    perturbation: DefiningPolynomial | None = None
    perturbation_mode: str = "re"

    def __post_init__(self):
        if self.beta <= 0:
            raise WeightError("beta must be positive")
        if self.perturbation_mode not in ("re", "abs2"):
            raise WeightError(f"unknown perturbation mode {self.perturbation_mode!r}")

    @property
    def kind(self):
        return "log_family" if self.perturbation is None else "polynomial_perturbation"

    @property
    def is_radial(self):
        return self.perturbation is None

    def kappa(self, Z):
        Z = np.asarray(Z, dtype=complex)
        t = np.einsum("...i,...i->...", Z, Z.conj()).real
        out = -self.beta * np.log1p(-t)
        if self.perturbation is not None:
            pv = self.perturbation(Z)
            out = out + (2.0 * pv.real if self.perturbation_mode == "re"
                         else np.abs(pv) ** 2)
        return out

    def hessian(self, z) -> HermitianForm:
        z = as_point(z)
        n = z.size
        t = np.vdot(z, z).real
        H = self.beta * ((1.0 - t) * np.eye(n) + np.outer(z.conj(), z)) / (1.0 - t) ** 2
        if self.perturbation is not None and self.perturbation_mode == "abs2":
            g = self.perturbation.gradient(z)
            H = H + np.outer(g, g.conj())
        return HermitianForm(H)

    def scaled(self, c: float) -> "Weight":
        """The weight c * kappa (eigenvalue homogeneity tests)."""
        p = self.perturbation
        if p is not None:
            p = p.scaled(c if self.perturbation_mode == "re" else math.sqrt(c))
        return Weight(self.beta * c, p, self.perturbation_mode)

    def comparability(self, points):
        """Envelope of the generalized eigenvalues of i ddbar kappa against
        omega_B over a point set; the standing hypothesis needs min > 0."""
        lo, hi = math.inf, -math.inf
        for z in np.atleast_2d(np.asarray(points, dtype=complex)):
            lam = eigh(self.hessian(z).matrix, bergman_metric(z).matrix,
                       eigvals_only=True)
            lo, hi = min(lo, lam[0]), max(hi, lam[-1])
        return lo, hi


# ---------------------------------------------------------------------------
# elementary antiderivatives for disk integrals of log|t - b|^2
# against c (A - |t|^2)^(-p) Lebesgue
# ---------------------------------------------------------------------------

def _E1(s, A, p):
    return (A - s * s) ** (1 - p) / (2 * (p - 1))


def _Q(u, A, q):
    # antiderivative of 1/(u (A-u)^q)
    val = (np.log(u) - np.log(A - u)) / A ** q
    for j in range(2, q + 1):
        val = val + (A - u) ** (1 - j) / ((j - 1) * A ** (q + 1 - j))
    return val


def _E2(s, A, p):
    return np.log(s) * (A - s * s) ** (1 - p) / (2 * (p - 1)) - _Q(s * s, A, p - 1) / (4 * (p - 1))


def _E2_at0(A, p):
    H = sum(1.0 / j for j in range(1, p - 1))
    return -(H - np.log(A)) / (4 * (p - 1) * A ** (p - 1))


def _I0(A, R, p, c):
    """Mass of the density over the disk |t| < R."""
    return math.pi * c / (p - 1) * ((A - R * R) ** (1 - p) - A ** (1 - p))


def _delta_correction(babs, A, R, p, c):
    """Delta(b) = int_{|t|<R} log|t-b|^2 dmu - log|b|^2 mu(|t|<R), vectorized.

    Nonnegative (sub-mean value of log at the disk center), zero for |b| >= R.
    Inputs broadcast; |b| is floored at 1e-9 (node-collision shell policy).
    """
    babs, A, R = np.broadcast_arrays(np.asarray(babs, float), np.asarray(A, float),
                                     np.asarray(R, float))
    b = np.maximum(babs, 1e-9)
    inside = b < R
    bs = np.where(inside, b, R / 2.0)  # dummy safe values outside the branch
    J_in = 4 * math.pi * c * (np.log(bs) * (_E1(bs, A, p) - _E1(0.0, A, p))
                              + _E2(R, A, p) - _E2(bs, A, p))
    I0 = _I0(A, R, p, c)
    delta = J_in - np.log(bs ** 2) * I0
    out = np.where(inside, delta, 0.0)
    return np.clip(out, 0.0, None)  # >= 0 analytically; clip rounding residue


def _J_at_zero(A, R, p, c):
    """int_{|t|<R} log|t|^2 dmu: the pole-at-center disk integral, exact."""
    return 4 * math.pi * c * (_E2(R, A, p) - _E2_at0(A, p))


def _J_full(babs, A, R, p, c):
    """int_{|t|<R} log|t-b|^2 dmu, vectorized and C^1 in b (no spike at b=0).

    This regrouping of _delta_correction + the center log is what the
    finite-difference Hessian path integrates: the per-root disk potentials
    are smooth in the moving roots, so the quadrature error field stays
    smooth in z and does not pollute second differences.
    """
    babs, A, R = np.broadcast_arrays(np.asarray(babs, float), np.asarray(A, float),
                                     np.asarray(R, float))
    b = np.clip(babs, 1e-12, 1e15)
    inside = b < R
    near0 = b < 1e-9
    bs = np.where(inside & ~near0, b, R / 2.0)
    J_in = 4 * math.pi * c * (np.log(bs) * (_E1(bs, A, p) - _E1(0.0, A, p))
                              + _E2(R, A, p) - _E2(bs, A, p))
    J_out = np.log(b ** 2) * _I0(A, R, p, c)
    J_0 = 4 * math.pi * c * (_E2(R, A, p) - _E2_at0(A, p))
    return np.where(near0, J_0, np.where(inside, J_in, J_out))


_ON_W = 1e-9  # a pullback root below this modulus marks the point as on W


# ---------------------------------------------------------------------------
# averaged potential
# ---------------------------------------------------------------------------

def _sum_log_abs(lead, roots):
    """log|lead * prod(roots)|^2 as a stable sum of logs; -inf if a root is 0."""
    with np.errstate(divide="ignore"):
        return float(2.0 * np.log(abs(lead)) + 2.0 * np.sum(np.log(np.abs(roots))))


def _univariate_parts(terms, nvars):
    """Ascending coefficient array of a polynomial of one variable."""
    d = max((a[0] for a in terms), default=0)
    c = np.zeros(d + 1, dtype=complex)
    for a, v in terms.items():
        c[a[0]] = v
    return c


class _OuterRule:
    """Polar nodes of the outer zeta_1 disk with plain Euclidean area weights."""

    _cache: dict = {}

    def __new__(cls, r, counts):
        key = (round(r, 14), counts)
        if key not in cls._cache:
            self = object.__new__(cls)
            nr, na = counts
            x, wx = roots_legendre(nr)
            rho = 0.5 * r * (x + 1.0)
            wr = 0.5 * r * wx
            th = 2.0 * math.pi * (np.arange(na) + 0.5) / na
            self.zeta = (rho[:, None] * np.exp(1j * th)[None, :]).ravel()
            self.w = np.repeat(wr * (2.0 * math.pi / na) * rho, na)
            cls._cache[key] = self
        return cls._cache[key]


_FAR = 10.0  # sentinel modulus, always outside the inner disks


def _rootmoduli_lastvar(C):
    """Moduli of the roots along the last variable, row-wise, shape (N, deg).

    Rows whose leading coefficients are numerically negligible have fewer
    roots (the extra ones escaped to infinity); those slots carry the sentinel
    modulus 10.0, which lies outside every inner disk and contributes nothing.
    Degrees 1 and 2 are solved in stable closed form, higher degrees per row.
    """
    N, m = C.shape
    d = m - 1
    scale = np.abs(C).max(axis=1)
    scale[scale == 0.0] = 1.0
    out = np.full((N, d), _FAR)
    if d == 0:
        return out
    eff = np.abs(C) > 1e-12 * scale[:, None]
    if d == 1:
        ok = eff[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[ok, 0] = np.abs(-C[ok, 0] / C[ok, 1])
        return out
    if d == 2:
        quad = eff[:, 2]
        lin = ~quad & eff[:, 1]
        a, b, c = C[quad, 2], C[quad, 1], C[quad, 0]
        s = np.sqrt(b * b - 4 * a * c)
        s = np.where(np.abs(b + s) >= np.abs(b - s), s, -s)
        q = -(b + s) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.abs(q / a)
            r2 = np.where(np.abs(q) > 0, np.abs(c / q), 0.0)
        out[quad, 0], out[quad, 1] = r1, r2
        with np.errstate(divide="ignore", invalid="ignore"):
            out[lin, 0] = np.abs(-C[lin, 0] / C[lin, 1])
        return out
    for i in range(N):
        nz = np.nonzero(eff[i])[0]
        if len(nz) == 0 or nz[-1] == 0:
            continue
        roots = univariate_roots(C[i, : nz[-1] + 1])
        out[i, : len(roots)] = np.abs(roots)
    return out


def _corrections_n1(T: DefiningPolynomial, Z, r):
    """Per-point decomposition for n = 1; returns (base, corr, singular, on_W).

    base is log|T_poly(z)|^2 as a stable sum of logs over the roots away from
    z, corr >= 0 is the averaged-potential correction of those roots, and
    singular carries the exact (finite) contribution of roots sitting at z
    itself, so that the average is base + corr + singular; on_W flags points
    whose pullback has a root at pseudoradius < 1e-9.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    z = Z[:, 0]
    if T.factored:
        roots, lead = T.roots, T.lead
    else:
        coeffs = _univariate_parts(T.terms, 1)
        roots, lead = univariate_roots(coeffs), coeffs[-1]
    V = ball_volume(1, r)
    if len(roots) == 0:
        base = np.full(z.shape, 2.0 * math.log(abs(lead)))
        zero = np.zeros_like(base)
        return base, zero, zero.copy(), np.zeros(z.shape, dtype=bool)
    # pseudohyperbolic moduli of the pullback roots F_z(a_i); roots outside the
    # closed ball (formal modulus > 1, or at the Moebius pole 1/conj(z)) never
    # land inside B(0,r) and contribute no correction
    az = z[:, None] * np.conj(roots)[None, :]
    denom = np.abs(1.0 - az) ** 2
    num = (1.0 - np.abs(z[:, None]) ** 2) * (1.0 - np.abs(roots)[None, :] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho2 = np.where(denom > 1e-30, 1.0 - num / denom, 4.0)
    rho = np.sqrt(np.clip(rho2, 0.0, None))
    at_z = rho < _ON_W
    with np.errstate(divide="ignore"):
        logdist = 2.0 * np.log(np.abs(z[:, None] - roots[None, :]))
    base = 2.0 * math.log(abs(lead)) + np.sum(np.where(at_z, 0.0, logdist), axis=1)
    corr = np.sum(np.where(at_z, 0.0, _delta_correction(rho, 1.0, r, 2, 4.0)),
                  axis=1) / V
    # a root at z contributes its pole integral plus the pullback scale factor
    J0 = _J_at_zero(1.0, r, 2, 4.0) / V
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.log(np.abs(1.0 - az) ** 2)
    singular = np.sum(np.where(at_z, J0 + scale, 0.0), axis=1)
    return base, corr, singular, at_z.any(axis=1)


def _rotate_terms(terms, U):
    """Coefficient map of P(U zeta) for a 2x2 unitary U."""
    lin = [{(1, 0): U[i, 0], (0, 1): U[i, 1]} for i in range(2)]
    out: dict = {}
    for (a1, a2), c in terms.items():
        piece = {(0, 0): complex(c)}
        for _ in range(a1):
            piece = _poly_mul2(piece, lin[0])
        for _ in range(a2):
            piece = _poly_mul2(piece, lin[1])
        for k, v in piece.items():
            out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0}


def _poly_mul2(p, q):
    out: dict = {}
    for a, c in p.items():
        for b, d in q.items():
            k = (a[0] + b[0], a[1] + b[1])
            out[k] = out.get(k, 0.0) + c * d
    return out


# a fixed generic rotation used when W contains the zeta2 = 0 chart slice;
# the ball average is invariant under unitary changes of the zeta variable
_GENERIC_U = np.array([[math.cos(0.37), -math.sin(0.37)],
                       [math.sin(0.37), math.cos(0.37)]], dtype=complex)


def _corrections_n2(T: DefiningPolynomial, z, r, outer_counts=None, _terms=None):
    """Decomposition for n = 2; returns (base, corr, singular, on_W) with base
    the stable log|T(z)|^2 through the chart polynomial q(zeta1) = P(zeta1, 0),
    corr the exact-angular piece plus the correction field, and singular the
    finite contribution of a chart root at the origin (z on W)."""
    z = as_point(z, 2)
    P = _terms if _terms is not None else compose_mobius_terms(T.terms, 2, z)
    d = T.degree
    V = ball_volume(2, r)
    c2, p = 72.0, 3

    # chart polynomial q(zeta1) = P(zeta1, 0)
    q_terms = {a[0]: v for a, v in P.items() if a[1] == 0}
    q = np.zeros(max(q_terms, default=0) + 1, dtype=complex)
    for k, v in q_terms.items():
        q[k] = v
    nz = np.nonzero(np.abs(q) > 1e-14 * max(np.abs(q).max(), 1e-300))[0]
    if len(nz) == 0:
        if _terms is not None:
            raise NotImplementedError("degenerate chart after generic rotation")
        return _corrections_n2(T, z, r, outer_counts,
                               _terms=_rotate_terms(P, _GENERIC_U))
    q_roots = univariate_roots(q)
    q_lead = q[nz[-1]]
    at_z = np.abs(q_roots) < _ON_W
    on_W = bool(at_z.any())
    kept = q_roots[~at_z]
    base = (_sum_log_abs(q_lead, kept) if len(kept)
            else 2.0 * math.log(abs(q_lead)))

    xg, wg = roots_legendre(32)

    def radial_log_piece(b):
        # int_b^r rho I0(rho) 2 log(rho/b) drho on a log grid (u = log rho)
        u = 0.5 * (xg + 1.0) * (math.log(r) - math.log(b)) + math.log(b)
        wu = 0.5 * (math.log(r) - math.log(b)) * wg
        rho = np.exp(u)
        I0rho = _I0(1.0 - rho ** 2, np.sqrt(r * r - rho ** 2), p, c2)
        return float(np.sum(wu * rho ** 2 * I0rho * 2.0 * (u - math.log(b)))) * 2.0 * math.pi

    # piece A: exact outer-angular average, radial correction per inner root of q
    A_corr = 0.0
    for b in np.abs(kept):
        if b >= r:
            continue
        A_corr += radial_log_piece(b)
    # chart roots at the origin: their full radial integral of 2 log rho
    singular = at_z.sum() * radial_log_piece(1e-10) / V if on_W else 0.0
    if on_W:
        singular += at_z.sum() * 2.0 * math.log(1e-10) * 1.0  # undo the b-offset
        # radial_log_piece(b) integrates 2 log(rho/b); adding 2 log b restores 2 log rho

    # piece B: correction field of the inner (zeta2) roots over the outer disk
    rule = _OuterRule(r, outer_counts or OUTER_NODES)
    zeta1 = rule.zeta
    d2 = max(a[1] for a in P)
    if d2 > 0:
        d1 = max(a[0] for a in P)
        pow1 = np.vander(zeta1, d1 + 1, increasing=True)
        coef = np.zeros((d1 + 1, d2 + 1), dtype=complex)
        for (a1, a2), v in P.items():
            coef[a1, a2] = v
        Cmat = pow1 @ coef
        Arow = 1.0 - np.abs(zeta1) ** 2
        Rrow = np.sqrt(np.maximum(r * r - np.abs(zeta1) ** 2, 0.0))
        rho_roots = _rootmoduli_lastvar(Cmat)   # (N, d2), sentinel 10.0 pads
        dl = _delta_correction(rho_roots, Arow[:, None], Rrow[:, None], p, c2)
        B_corr = float(rule.w @ dl.sum(axis=1))
    else:
        B_corr = 0.0

    # the cleared denominator (1 - <zeta, z>)^d integrates to exactly zero;
    # its chart polynomial 1 - zeta1 conj(z1) has lead -conj(z1), root 1/conj(z1)
    if d > 0 and z[0] != 0:
        mlog = 2.0 * math.log(abs(z[0])) + 2.0 * math.log(1.0 / abs(z[0]))
    else:
        mlog = 0.0
    corr = (A_corr + B_corr) / V - d * mlog
    return float(base), float(corr), float(singular), on_W


def _phi_n2_fd(T: DefiningPolynomial, z, r, outer_counts=None):
    """Averaged potential for n = 2 through the smooth J-regrouping.

    Same integral as _corrections_n2, grouped as (Jensen-exact piece of the
    top zeta2-coefficient polynomial) + (sum of per-root disk potentials J
    over the outer nodes): the field under quadrature is C^1 in z, which the
    Hessian stencils need.  The exponent factor is handled by the caller.
    """
    z = as_point(z, 2)
    P = compose_mobius_terms(T.terms, 2, z)
    V = ball_volume(2, r)
    c2, p = 72.0, 3
    rule = _OuterRule(r, outer_counts or OUTER_NODES)
    zeta1 = rule.zeta
    rho_out = np.abs(zeta1)
    Arow = 1.0 - rho_out ** 2
    Rrow = np.sqrt(np.maximum(r * r - rho_out ** 2, 0.0))

    d2 = max(a[1] for a in P)
    d1 = max(a[0] for a in P)
    lead = np.zeros(d1 + 1, dtype=complex)
    for (a1, a2), v in P.items():
        if a2 == d2:
            lead[a1] = v

    def jensen_radial(coeffs):
        # 2 pi int_0^r rho I0(rho) [circle mean of log|poly|^2](rho) drho, exact
        # angular means via Jensen, panels split at the root radii
        roots = univariate_roots(coeffs)
        nz = np.nonzero(np.abs(coeffs) > 1e-14 * max(np.abs(coeffs).max(), 1e-300))[0]
        top = coeffs[nz[-1]] if len(nz) else 0.0
        if abs(top) == 0.0:
            return -math.inf
        radii = sorted({0.0, r} | {float(b) for b in np.abs(roots) if b < r})
        xg, wg = roots_legendre(24)
        total = 0.0
        for lo, hi in zip(radii[:-1], radii[1:]):
            rho = 0.5 * (hi - lo) * (xg + 1.0) + lo
            wq = 0.5 * (hi - lo) * wg
            I0rho = _I0(1.0 - rho ** 2, np.sqrt(r * r - rho ** 2), p, c2)
            mean = 2.0 * math.log(abs(top)) * np.ones_like(rho)
            for b in np.abs(roots):
                mean = mean + 2.0 * np.log(np.maximum(rho, max(b, 1e-300)))
            total += float(np.sum(wq * rho * I0rho * mean))
        return 2.0 * math.pi * total

    if d2 == 0:
        return jensen_radial(lead) / V

    nzl = np.abs(lead) > 1e-14 * max(np.abs(lead).max(), 1e-300)
    if nzl.sum() == 1 and nzl[0]:
        lead_piece = V * 2.0 * math.log(abs(lead[0]))   # constant top coefficient
    else:
        lead_piece = jensen_radial(lead)

    coef = np.zeros((d1 + 1, d2 + 1), dtype=complex)
    for (a1, a2), v in P.items():
        coef[a1, a2] = v
    Cmat = np.vander(zeta1, d1 + 1, increasing=True) @ coef
    rho_roots = _rootmoduli_lastvar(Cmat)
    Jvals = _J_full(rho_roots, Arow[:, None], Rrow[:, None], p, c2)
    return (lead_piece + float(rule.w @ Jvals.sum(axis=1))) / V


def _exp_part(T: DefiningPolynomial, z, r):
    """E(z,r)-average of 2 Re h(F_z(.)) for the exponent factor, by plain quadrature."""
    if T.exp_terms is None:
        return 0.0, 0.0
    z = as_point(z, T.nvars)
    h_at_z = 2.0 * float(poly_eval(T.exp_terms, T.nvars, z).real)
    rule = ball_rule(T.nvars, float(r), *EXP_RULE_NODES)
    avg = quad_ball(lambda pts: 2.0 * poly_eval(T.exp_terms, T.nvars, pts).real,
                    z, r, rule) / ball_volume(T.nvars, r)
    return h_at_z, avg


def _decomposition(T: DefiningPolynomial, z, r):
    """(stable log|T_eff(z)|^2, average - that, singular piece, on_W flag)."""
    z = as_point(z, T.nvars)
    if T.nvars == 1:
        base, corr, sing, on_W = _corrections_n1(T, z[None, :], r)
        base, corr, sing, on_W = float(base[0]), float(corr[0]), float(sing[0]), bool(on_W[0])
    elif T.nvars == 2:
        base, corr, sing, on_W = _corrections_n2(T, z, r)
    else:
        raise NotImplementedError("averaged potentials are implemented for n <= 2")
    h_at_z, h_avg = _exp_part(T, z, r)
    return base + h_at_z, corr + (h_avg - h_at_z), sing, on_W


def averaged_potential(T: DefiningPolynomial, z, r) -> float:
    """(1/V_n(r)) int_{B(0,r)} log|T(F_z(zeta))|^2 omega_B^n(zeta).

    Equals log|T(z)|^2 exactly when E(z,r) does not meet W (mean value of a
    pluriharmonic function); finite (locally bounded) even on W itself.
    """
    base, corr, sing, _ = _decomposition(T, z, r)
    return base + corr + sing


def averaged_potential_many(T: DefiningPolynomial, Z, r, fd_mode: bool = False):
    """Vectorized averaged_potential over points Z of shape (m, n).

    fd_mode switches the n = 2 evaluation to the smooth J-regrouping of the
    same integral, whose quadrature error field is C^1 in z; finite-difference
    Hessians must use it.  Values agree with the default assembly to
    quadrature accuracy.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    if T.nvars == 1 and T.exp_terms is None:
        base, corr, sing, _ = _corrections_n1(T, Z, r)
        return base + corr + sing
    if T.nvars == 2 and fd_mode:
        out = np.array([_phi_n2_fd(T, z, r) for z in Z])
        if T.exp_terms is not None:
            out += np.array([_exp_part(T, z, r)[1] for z in Z])
        return out
    return np.array([averaged_potential(T, z, r) for z in Z])


def s_r_raw(T: DefiningPolynomial, z, r) -> float:
    """log|T(z)|^2 minus its E(z,r)-average, assembled so the sign survives.

    This is the stable kernel the potential module wraps; it is <= 0 by the
    sub-mean value property, exactly 0 once delta_B(z, W) >= r, and -inf on W.
    """
    base, corr, _, on_W = _decomposition(T, z, r)
    if on_W or not math.isfinite(base):
        return -math.inf
    return -corr


# ---------------------------------------------------------------------------
# the total density tensor and pointwise densities
# ---------------------------------------------------------------------------

def upsilon(T: DefiningPolynomial, z, r, h_fd: float = 1e-3,
            noise_rtol: float = 0.02, noise_atol: float = 1e-3,
            max_retries: int = 2) -> HermitianForm:
    """Total density tensor: complex Hessian in z of the averaged potential.

    9-point central differences per entry pair, symmetrized to exact
    Hermitian.  Finite-difference noise is detected by step-halving
    consistency (the entrywise drift between steps h and h/2 must stay inside
    noise_atol + noise_rtol * scale); on a violation the step is halved, up to
    max_retries, then FDFailure is raised.  z must stay off W by a few h_fd.

    In dimension 1 the tensor is nonnegative; on the ball in higher dimension
    the moving-ball average does not preserve plurisubharmonicity, so genuine
    negative eigenvalues of moderate size occur near the r-tube of W and are
    not an error condition.
    """
    z = as_point(z, T.nvars)
    h = h_fd
    for _ in range(max_retries + 1):
        H_h = complex_hessian_fd(
            lambda pts: averaged_potential_many(T, pts, r, fd_mode=True), z, h)
        H = complex_hessian_fd(
            lambda pts: averaged_potential_many(T, pts, r, fd_mode=True), z, h / 2.0)
        if np.all(np.isfinite(H)) and np.all(np.isfinite(H_h)):
            drift = np.abs(H - H_h).max()
            scale = max(np.abs(H).max(), 1.0)
            if drift <= noise_atol + noise_rtol * scale:
                return HermitianForm(H)
        h /= 2.0
    raise FDFailure(f"upsilon finite differences failed to settle at z={z}")


def local_density(T: DefiningPolynomial, kappa: Weight, z, r,
                  h_fd: float = 1e-3, ups: HermitianForm | None = None) -> float:
    """D_{z,r}: largest eigenvalue of Upsilon_r + (n/(n+1)) omega_B against i ddbar kappa."""
    z = as_point(z, T.nvars)
    n = T.nvars
    B = kappa.hessian(z)
    if not B.is_positive_definite():
        raise WeightError("weight Hessian is not positive definite at z")
    Y = ups if ups is not None else upsilon(T, z, r, h_fd)
    A = Y.matrix + (n / (n + 1)) * bergman_metric(z).matrix
    lam = eigh((A + A.conj().T) / 2.0, B.matrix, eigvals_only=True)
    return float(lam[-1])


def theta_density(T: DefiningPolynomial, kappa: Weight, z, r, v,
                  h_fd: float = 1e-3, ups: HermitianForm | None = None) -> float:
    """Rayleigh quotient of the density pencil along the direction v.

    This realizes the density of the constant-coefficient form theta_v
    matched to v; its supremum over directions is local_density.
    """
    z = as_point(z, T.nvars)
    v = np.asarray(v, dtype=complex)
    if np.linalg.norm(v) == 0:
        raise ValueError("direction must be nonzero")
    n = T.nvars
    Y = ups if ups is not None else upsilon(T, z, r, h_fd)
    A = Y.matrix + (n / (n + 1)) * bergman_metric(z).matrix
    num = float(np.real(v @ A @ v.conj()))
    den = kappa.hessian(z).value(v)
    if den <= 0:
        raise WeightError("weight Hessian is not positive along the direction")
    return num / den


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def extrapolate_in_one_minus_r(r_values, curve):
    """Least-squares line in (1-r) through the last three points; value at r=1."""
    rs = np.asarray(r_values, float)[-3:]
    ys = np.asarray(curve, float)[-3:]
    x = 1.0 - rs
    A = np.stack([np.ones_like(x), x], axis=1)
    sol, *_ = np.linalg.lstsq(A, ys, rcond=None)
    return float(sol[0])


@dataclass
class DensityReport:
    """Grid x r-ladder densities with per-r extremes and r -> 1 extrapolants."""

    grid: np.ndarray
    r_ladder: np.ndarray
    values: np.ndarray              # (m, R), NaN where excluded
    sup_curve: np.ndarray
    inf_curve: np.ndarray
    extrapolated_plus: float
    extrapolated_minus: float
    excluded: int = 0
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        for i, z in enumerate(self.grid):
            for j, r in enumerate(self.r_ladder):
                yield list(z), float(r), float(self.values[i, j])

    def summary(self):
        return {
            "extrapolated_plus": self.extrapolated_plus,
            "extrapolated_minus": self.extrapolated_minus,
            "r_ladder": [float(r) for r in self.r_ladder],
            "sup_curve": [float(v) for v in self.sup_curve],
            "inf_curve": [float(v) for v in self.inf_curve],
            "excluded": self.excluded,
            "grid_size": int(len(self.grid)),
            "diagnostics": self.diagnostics,
        }


def density_grid(n: int, radial: int, angular: int, max_pseudoradius: float = 0.9):
    """Pseudohyperbolic-equispaced grid: tanh-spaced radii times directions."""
    radii = np.tanh(np.arange(1, radial + 1) / radial * math.atanh(max_pseudoradius))
    pts = [np.zeros(n, dtype=complex)]
    if n == 1:
        th = 2.0 * math.pi * (np.arange(angular) + 0.37) / angular
        for rho in radii:
            for t in th:
                pts.append(np.array([rho * np.exp(1j * t)]))
    else:
        dirs = direction_design(n, angular)
        for rho in radii:
            for v in dirs:
                pts.append(rho * v)
    return np.array(pts)


def _sweep_cell(args):
    T, kappa, z, r, h_fd = args
    try:
        Y = upsilon(T, z, r, h_fd)
        return Y, local_density(T, kappa, z, r, ups=Y)
    except FDFailure:
        return None, np.nan


def density_sweep(T: DefiningPolynomial, kappa: Weight, grid, r_ladder,
                  h_fd: float = 1e-3, n_directions: int = 64,
                  max_excluded_frac: float = 0.10, workers: int = 1) -> DensityReport:
    """Fill D_{z,r} over grid x r_ladder, with sup/inf curves and extrapolants.

    FD failures at grid points are excluded and counted; more than
    max_excluded_frac exclusions raise SweepError.  Diagnostics record, per r,
    the ratio (sup over sampled theta_v directions) / (eigenvalue density) at
    the extremal grid points: the computable direction of the equivalence of
    the density notions (the family realizes the eigenvalue from below).
    Cells are independent; workers > 1 maps them over a thread pool with
    deterministic assembly.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=complex))
    r_ladder = np.asarray(r_ladder, dtype=float)
    if np.any(np.diff(r_ladder) <= 0) or r_ladder[-1] > 0.95:
        raise ValueError("r_ladder must be increasing with max <= 0.95")
    m, R = len(grid), len(r_ladder)
    values = np.full((m, R), np.nan)
    ups_cache: dict = {}
    cells = [(i, j) for j in range(R) for i in range(m)]
    tasks = [(T, kappa, grid[i], r_ladder[j], h_fd) for i, j in cells]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]
    excluded = 0
    for (i, j), (Y, val) in zip(cells, results):
        if Y is None:
            excluded += 1
        else:
            ups_cache[(i, j)] = Y
            values[i, j] = val
    if excluded > max_excluded_frac * m * R:
        raise SweepError(f"{excluded}/{m * R} grid cells failed the FD Hessian")

    sup_curve = np.nanmax(values, axis=0)
    inf_curve = np.nanmin(values, axis=0)
    dirs = direction_design(T.nvars, n_directions)
    theta_ratios = {}
    for j, r in enumerate(r_ladder):
        ratios = []
        for pick in (int(np.nanargmax(values[:, j])), int(np.nanargmin(values[:, j]))):
            Y = ups_cache.get((pick, j))
            if Y is None:
                continue
            D = values[pick, j]
            sup_theta = max(theta_density(T, kappa, grid[pick], r, v, ups=Y)
                            for v in dirs)
            ratios.append(sup_theta / D if D else np.nan)
        theta_ratios[float(r)] = ratios
    return DensityReport(
        grid=grid, r_ladder=r_ladder, values=values,
        sup_curve=sup_curve, inf_curve=inf_curve,
        extrapolated_plus=extrapolate_in_one_minus_r(r_ladder, sup_curve),
        extrapolated_minus=extrapolate_in_one_minus_r(r_ladder, inf_curve),
        excluded=excluded,
        diagnostics={"theta_sup_over_eigen": theta_ratios},
    )
