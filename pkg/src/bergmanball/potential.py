"""The kernel Gamma_r, the singular function s_r by two routes, and s_{r,eps}.

Gamma_r(z, zeta) is the Green's function minus its E(z,r)-average in the
first slot.  Averaging the rotation-invariant Green profile over moving
Bergman-Green balls reduces, by the shell theorem for the invariant Laplacian
(uniform sphere averages of G(., p) equal f(max(s,|p|)^2)), to the exact
radial form

    Gamma_r = g_r(|F_z(zeta)|),
    g_r(rho) = f(rho^2) - f(r^2) + (n+1)/V_n(r) * log((1-rho^2)/(1-r^2))

for rho < r and 0 beyond; it is nonpositive, supported on the pseudohyperbolic
r-neighborhood of the diagonal, with the Green pole at rho = 0.  The
quadrature definition is kept as the test oracle.

s_r has a potential form (log|T|^2 minus its E(z,r)-average) and a Green form
(2 pi times the integral of Gamma_r over W cap E(z,r) against omega_B^{n-1});
their agreement is the module's flagship cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .density import _corrections_n1, s_r_raw
from .errors import DomainError
from .geometry import (as_point, ball_rule, ball_volume, green_radial_profile,
                       pseudo_distance, quad_ball)
from .hypersurface import (DefiningPolynomial, HypersurfaceSample,
                           univariate_roots)

__all__ = [
    "gamma_r_profile",
    "gamma_r_kernel",
    "PotentialSample",
    "s_r_potential",
    "s_r_potential_many",
    "s_r_green",
    "s_r_smooth",
    "smoothing_bound_constant",
]

NEAR_W_CUTOFF = 1e-5   # delta_B below this reports s_r as -inf


def gamma_r_profile(n: int, rho, r: float):
    """g_r(rho): the radial closed form of Gamma_r; 0 for rho >= r, -inf at 0."""
    if not 0.0 < r < 1.0:
        raise DomainError("r must lie in (0,1)")
    rho = np.asarray(rho, dtype=float)
    out = np.zeros(rho.shape)
    inside = (rho < r) & (rho > 0.0)
    t = rho[inside] ** 2
    out[inside] = (green_radial_profile(n, t) - green_radial_profile(n, r * r)
                   + (n + 1) / ball_volume(n, r) * (np.log1p(-t) - math.log1p(-r * r)))
    out[rho == 0.0] = -math.inf
    return float(out) if out.ndim == 0 else out


def gamma_r_kernel(z, zeta, r: float) -> float:
    """Gamma_r(z, zeta); warns on near-pole evaluations |F_z(zeta)| < 1e-6."""
    z = as_point(z)
    rho = float(pseudo_distance(z, as_point(zeta, z.size)))
    if 0.0 < rho < 1e-6:
        warnings.warn(f"near-pole Gamma_r evaluation at pseudoradius {rho:.2e}")
    return float(gamma_r_profile(z.size, rho, r))


# ---------------------------------------------------------------------------
# s_r
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialSample:
    """One evaluation of s_r with its route recorded."""

    z: np.ndarray
    r: float
    s_r_value: float
    method: str              # "potential_form" | "green_form"
    est_error: float = math.nan

    def __post_init__(self):
        if self.method not in ("potential_form", "green_form"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.s_r_value > 1e-9:
            raise ValueError(f"s_r must be nonpositive, got {self.s_r_value:.3g}")


def _roots_1d(T: DefiningPolynomial):
    if T.factored:
        return T.roots
    d = T.degree
    coeffs = np.zeros(d + 1, dtype=complex)
    for (k,), c in T.terms.items():
        coeffs[k] = c
    return univariate_roots(coeffs)


def _delta_proxy(T: DefiningPolynomial, z) -> float:
    """Cheap pseudohyperbolic distance estimate of z to W (for the -inf policy)."""
    z = as_point(z, T.nvars)
    if T.is_constant():
        return math.inf
    if T.nvars == 1:
        roots = _roots_1d(T)
        return float(np.min(pseudo_distance(z, roots.reshape(-1, 1)))) if len(roots) else math.inf
    g = T.gradient(z)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return math.inf
    return abs(complex(T(z[None, :])[0])) / gn / (1.0 - np.vdot(z, z).real)


def s_r_potential(T: DefiningPolynomial, z, r) -> float:
    """s_r(z) = log|T(z)|^2 - (1/V_n(r)) int_{E(z,r)} log|T|^2 omega_B^n.

    Assembled through the stable decomposition of the averaged potential, so
    the value is nonpositive by construction and vanishes exactly once
    delta_B(z, W) >= r.  Points with delta_B(z, W) < 1e-5 report -inf.
    """
    if _delta_proxy(T, z) < NEAR_W_CUTOFF:
        return -math.inf
    return s_r_raw(T, z, r)


def s_r_potential_many(T: DefiningPolynomial, Z, r):
    """Vectorized s_r_potential over points Z of shape (m, n)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    if T.nvars == 1 and T.exp_terms is None:
        _, corr, _, on_W = _corrections_n1(T, Z, r)
        out = np.where(on_W, -math.inf, -corr)
        roots = _roots_1d(T)
        if len(roots):
            for i, z in enumerate(Z):
                if out[i] > -math.inf and \
                   np.min(pseudo_distance(z, roots.reshape(-1, 1))) < NEAR_W_CUTOFF:
                    out[i] = -math.inf
        return out
    return np.array([s_r_potential(T, z, r) for z in Z])


def s_r_green(T: DefiningPolynomial, sample: HypersurfaceSample, z, r) -> float:
    """s_r(z) = 2 pi int_{W cap E(z,r)} Gamma_r(z, .) omega_B^{n-1}.

    Uses the sample's area weights (counting measure in dimension 1).  An
    empty intersection gives 0; whether the sample actually covers
    W cap E(z,r) is cross-checked against the potential form by the callers.
    """
    z = as_point(z, T.nvars)
    if sample.size == 0:
        return 0.0
    rho = pseudo_distance(z, sample.points)
    mask = rho < r
    if not mask.any():
        return 0.0
    vals = gamma_r_profile(T.nvars, rho[mask], r)
    return float(2.0 * math.pi * np.sum(sample.area_weights[mask] * vals))


def s_r_smooth(T: DefiningPolynomial, z, r, eps, rule=None) -> float:
    """s_{r,eps}(z): the E(z,eps)-average of s_r (log singularity integrable).

    Nodes landing inside the 1e-5 cutoff shell around W evaluate to -inf and
    are excluded by the singular quadrature policy; their integrated log mass
    is negligible at that pseudoradius.
    """
    if not 0.0 < eps <= 0.2:
        raise DomainError("eps must lie in (0, 0.2]")
    z = as_point(z, T.nvars)
    if rule is None:
        counts = (16, 16) if T.nvars == 1 else (8, 8)
        rule = ball_rule(T.nvars, float(eps), *counts)
    total = quad_ball(lambda pts: s_r_potential_many(T, pts, r), z, eps, rule,
                      singular=True)
    return total / ball_volume(T.nvars, eps)


def smoothing_bound_constant(T: DefiningPolynomial, r, eps, points) -> float:
    """Fit of C_r in log(eps^2) - C_r <= s_{r,eps} over a calibration set."""
    vals = np.array([s_r_smooth(T, z, r, eps) for z in np.atleast_2d(points)])
    return float(np.max(math.log(eps * eps) - vals))
