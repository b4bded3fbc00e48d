"""Hypersurfaces W = {T = 0} cut out by holomorphic polynomials.

Polynomials are stored as multi-index -> coefficient maps (exact derivatives,
no AD).  In dimension 1 a factored representation (roots + leading
coefficient) is also supported: expanded coefficients of high-degree products
such as lattice polynomials overflow and cancel catastrophically, while the
factored form is exact.  An optional polynomial exponent h turns T into
e^h * T without changing W, which is how the T -> e^h T well-definedness
experiments are run.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import roots_legendre

from .errors import DomainError, FlatnessViolation
from .geometry import (MobiusMap, as_point, bergman_metric, mobius_apply,
                       pseudo_distance)

__all__ = [
    "DefiningPolynomial",
    "HypersurfaceSample",
    "point_divisor_sample",
    "sample_W",
    "DistanceResult",
    "dist_to_W",
    "flatness_profile",
    "tube_membership",
]

Terms = dict  # multi-index tuple -> complex coefficient


# ---------------------------------------------------------------------------
# raw term-map algebra
# ---------------------------------------------------------------------------

def _trim(terms: Terms, tol=0.0) -> Terms:
    if not terms:
        return {}
    cap = max(abs(c) for c in terms.values())
    return {a: c for a, c in terms.items() if abs(c) > tol * cap and c != 0}


def poly_eval(terms: Terms, nvars: int, Z):
    """Evaluate on points of shape (..., nvars)."""
    Z = np.asarray(Z, dtype=complex)
    out = np.zeros(Z.shape[:-1], dtype=complex)
    for alpha, c in terms.items():
        mono = np.ones(Z.shape[:-1], dtype=complex)
        for i, e in enumerate(alpha):
            if e:
                mono = mono * Z[..., i] ** e
        out += c * mono
    return out


def poly_partial(terms: Terms, i: int) -> Terms:
    out = {}
    for alpha, c in terms.items():
        if alpha[i]:
            b = list(alpha)
            b[i] -= 1
            out[tuple(b)] = out.get(tuple(b), 0.0) + c * alpha[i]
    return _trim(out)


def poly_mul(p: Terms, q: Terms) -> Terms:
    out = {}
    for a, c in p.items():
        for b, d in q.items():
            key = tuple(x + y for x, y in zip(a, b))
            out[key] = out.get(key, 0.0) + c * d
    return _trim(out)


def poly_add(p: Terms, q: Terms, scale=1.0) -> Terms:
    out = dict(p)
    for a, c in q.items():
        out[a] = out.get(a, 0.0) + scale * c
    return _trim(out)


def poly_degree(terms: Terms) -> int:
    return max((sum(a) for a in terms), default=0)


def _const_terms(nvars: int, value=1.0) -> Terms:
    return {tuple([0] * nvars): complex(value)}


def _linear_terms(nvars: int, const, coeffs) -> Terms:
    out = {tuple([0] * nvars): complex(const)}
    for j, c in enumerate(coeffs):
        if c != 0:
            a = [0] * nvars
            a[j] = 1
            out[tuple(a)] = complex(c)
    return _trim(out)


def compose_mobius_terms(terms: Terms, nvars: int, a) -> Terms:
    """Numerator of T(F_a(zeta)): substitute and clear (1 - <zeta,a>)^deg."""
    a = as_point(a, nvars)
    d = poly_degree(terms)
    aa = np.vdot(a, a).real
    if aa == 0.0:
        return _trim({alpha: c * (-1.0) ** sum(alpha) for alpha, c in terms.items()})
    s = math.sqrt(1.0 - aa)
    # F_a components: (a_i - sum_j [a_i conj(a_j)(1-s)/|a|^2 + s delta_ij] z_j) / M
    lin = []
    for i in range(nvars):
        coeffs = [-(a[i] * np.conj(a[j]) * (1.0 - s) / aa + (s if i == j else 0.0))
                  for j in range(nvars)]
        lin.append(_linear_terms(nvars, a[i], coeffs))
    M = _linear_terms(nvars, 1.0, [-np.conj(a[j]) for j in range(nvars)])
    Mpow = [_const_terms(nvars)]
    for _ in range(d):
        Mpow.append(poly_mul(Mpow[-1], M))
    out: Terms = {}
    for alpha, c in terms.items():
        piece = _const_terms(nvars, c)
        for i, e in enumerate(alpha):
            for _ in range(e):
                piece = poly_mul(piece, lin[i])
        piece = poly_mul(piece, Mpow[d - sum(alpha)])
        out = poly_add(out, piece)
    return _trim(out, tol=1e-14)


def substitute_affine(terms: Terms, nvars: int, base, direction):
    """1-variable coefficients (ascending) of y -> T(base + y * direction)."""
    base = np.asarray(base, dtype=complex)
    direction = np.asarray(direction, dtype=complex)
    d = poly_degree(terms)
    coeffs = np.zeros(d + 1, dtype=complex)
    for alpha, c in terms.items():
        piece = np.array([1.0 + 0j])
        for i, e in enumerate(alpha):
            fac = np.array([base[i], direction[i]])
            for _ in range(e):
                piece = np.convolve(piece, fac)
        coeffs[: len(piece)] += c * piece
    return coeffs


def univariate_roots(coeffs_ascending):
    """Roots of a 1-variable polynomial given ascending coefficients."""
    c = np.asarray(coeffs_ascending, dtype=complex)
    nz = np.nonzero(np.abs(c) > 1e-14 * max(np.abs(c).max(), 1e-300))[0]
    if len(nz) == 0:
        return np.array([], dtype=complex)
    c = c[: nz[-1] + 1]
    if len(c) <= 1:
        return np.array([], dtype=complex)
    return np.roots(c[::-1])


# ---------------------------------------------------------------------------
# defining polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DefiningPolynomial:
    """Holomorphic polynomial T with W = {T = 0}; optionally e^h * T.

    Either `terms` holds the coefficient map, or (dimension-1 only) `roots`
    plus `lead` hold the factored form lead * prod(z - root).  `exp_terms`, if
    present, is the coefficient map of a polynomial h multiplying T as e^h.
    """

    nvars: int
    terms: Terms | None = None
    roots: np.ndarray | None = None
    lead: complex = 1.0
    exp_terms: Terms | None = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_terms(cls, terms: Terms, nvars: int | None = None):
        terms = _trim({tuple(a): complex(c) for a, c in terms.items()})
        if nvars is None:
            if not terms:
                raise ValueError("cannot infer dimension from an empty polynomial")
            nvars = len(next(iter(terms)))
        return cls(nvars=nvars, terms=terms)

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        return cls(nvars=1, roots=np.asarray(roots, dtype=complex), lead=complex(lead))

    @classmethod
    def constant(cls, value, nvars):
        return cls.from_terms({tuple([0] * nvars): complex(value)}, nvars)

    @classmethod
    def from_records(cls, records, nvars=None):
        """Shared text format: [{"alpha": [i1,...,in], "re": x, "im": y}, ...]."""
        terms = {}
        for rec in records:
            alpha = tuple(int(i) for i in rec["alpha"])
            terms[alpha] = terms.get(alpha, 0.0) + complex(float(rec.get("re", 0.0)),
                                                           float(rec.get("im", 0.0)))
        return cls.from_terms(terms, nvars)

    def to_records(self):
        terms = self.term_map()
        return [{"alpha": list(a), "re": float(c.real), "im": float(c.imag)}
                for a, c in sorted(terms.items())]

    # -- structure -----------------------------------------------------------
    @property
    def factored(self):
        return self.roots is not None

    def term_map(self) -> Terms:
        if not self.factored:
            return self.terms
        if len(self.roots) > 24:
            raise OverflowError("expanded coefficients of a high-degree factored "
                                "polynomial are numerically meaningless")
        c = np.atleast_1d(self.lead * np.poly(self.roots))[::-1]  # ascending
        return _trim({(k,): c[k] for k in range(len(c))})

    @property
    def degree(self) -> int:
        if self.factored:
            return len(self.roots)
        return poly_degree(self.terms)

    def is_constant(self):
        return self.degree == 0

    # -- evaluation ----------------------------------------------------------
    def __call__(self, Z):
        Z = np.asarray(Z, dtype=complex)
        if self.factored:
            z = Z[..., 0]
            val = np.full(z.shape, self.lead, dtype=complex)
            for a in self.roots:
                val = val * (z - a)
        else:
            val = poly_eval(self.terms, self.nvars, Z)
        if self.exp_terms is not None:
            val = val * np.exp(poly_eval(self.exp_terms, self.nvars, Z))
        return val

    def log_abs2(self, Z):
        """log |e^h T|^2 = log|T|^2 + 2 Re h, stable for factored polynomials."""
        Z = np.asarray(Z, dtype=complex)
        if self.factored:
            z = Z[..., 0]
            with np.errstate(divide="ignore"):
                out = 2.0 * math.log(abs(self.lead)) + np.sum(
                    np.log(np.abs(z[..., None] - self.roots[None, :])) * 2.0, axis=-1)
        else:
            with np.errstate(divide="ignore"):
                out = np.log(np.abs(poly_eval(self.terms, self.nvars, Z)) ** 2)
        if self.exp_terms is not None:
            out = out + 2.0 * np.real(poly_eval(self.exp_terms, self.nvars, Z))
        return out

    def gradient(self, z):
        """Holomorphic gradient of e^h T at a point."""
        z = np.asarray(z, dtype=complex)
        if self.factored:
            vals = z[0] - self.roots
            prod = self.lead * np.prod(vals)
            if np.any(vals == 0):
                i = int(np.nonzero(vals == 0)[0][0])
                rest = self.lead * np.prod(np.delete(vals, i))
                g = np.array([rest])
            else:
                g = np.array([prod * np.sum(1.0 / vals)])
            tval = prod
        else:
            g = np.array([poly_eval(poly_partial(self.terms, i), self.nvars, z)
                          for i in range(self.nvars)])
            tval = poly_eval(self.terms, self.nvars, z)
        if self.exp_terms is not None:
            eh = np.exp(poly_eval(self.exp_terms, self.nvars, z))
            gh = np.array([poly_eval(poly_partial(self.exp_terms, i), self.nvars, z)
                           for i in range(self.nvars)])
            g = eh * (g + gh * tval)
        return g

    # -- transforms ----------------------------------------------------------
    def with_exponent(self, h_terms: Terms):
        return DefiningPolynomial(nvars=self.nvars, terms=self.terms,
                                  roots=self.roots, lead=self.lead,
                                  exp_terms=_trim({tuple(a): complex(c)
                                                   for a, c in h_terms.items()}))

    def compose_mobius(self, a) -> "DefiningPolynomial":
        """Defining polynomial of F_a(W): numerator of T o F_a (involution)."""
        if self.exp_terms is not None:
            raise ValueError("compose_mobius does not support exponent factors")
        if self.factored:
            m = MobiusMap.at(np.asarray([a]).ravel())
            new_roots = mobius_apply(m, self.roots.reshape(-1, 1))[:, 0]
            z = complex(np.asarray(a).ravel()[0])
            d = len(self.roots)
            if z == 0:
                new_lead = self.lead * (-1.0) ** d
            else:
                # leading coefficient of prod(z - zeta)^... cleared by (1 - zeta zbar)^d
                new_lead = self.lead * np.prod(np.conj(z) * self.roots - 1.0)
            return DefiningPolynomial.from_roots(new_roots, new_lead)
        return DefiningPolynomial.from_terms(
            compose_mobius_terms(self.terms, self.nvars, a), self.nvars)

    def scaled(self, c):
        if self.factored:
            return DefiningPolynomial(nvars=1, roots=self.roots,
                                      lead=self.lead * c, exp_terms=self.exp_terms)
        return DefiningPolynomial(nvars=self.nvars,
                                  terms={a: v * c for a, v in self.terms.items()},
                                  exp_terms=self.exp_terms)


# ---------------------------------------------------------------------------
# samples of W
# ---------------------------------------------------------------------------

@dataclass
class HypersurfaceSample:
    """Quadrature nodes on W with tangent frames and omega_B^{n-1} area weights.

    In dimension 1 the weights are counting measure (all ones) and the frames
    array has zero columns.  sum(area_weights * g(points)) approximates
    int_{W cap B(0, region_radius)} g omega_B^{n-1}.
    """

    points: np.ndarray          # (m, n)
    frames: np.ndarray          # (m, n-1, n) metric-orthonormal tangent bases
    area_weights: np.ndarray    # (m,)
    region_radius: float
    seed: int = 0
    warnings: list = field(default_factory=list)

    @property
    def size(self):
        return self.points.shape[0]

    def residuals(self, T: DefiningPolynomial):
        if self.size == 0:
            return np.zeros(0)
        return np.abs(T(self.points))


def point_divisor_sample(points, region_radius=1.0) -> HypersurfaceSample:
    """The n = 1 divisor convention: counting measure on a finite point set."""
    pts = np.asarray(points, dtype=complex).reshape(-1, 1)
    return HypersurfaceSample(points=pts,
                              frames=np.zeros((len(pts), 0, 1), dtype=complex),
                              area_weights=np.ones(len(pts)),
                              region_radius=float(region_radius))


def _choose_axis(T: DefiningPolynomial, region_radius, seed):
    """Projection axis: maximize the typical size of dT along a coordinate."""
    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((32, T.nvars)) + 1j * rng.standard_normal((32, T.nvars))
    probes *= (0.7 * region_radius * rng.random((32, 1)) ** 0.5
               / np.linalg.norm(probes, axis=1, keepdims=True))
    score = np.zeros(T.nvars)
    for i in range(T.nvars):
        dTi = poly_partial(T.terms, i)
        score[i] = np.median(np.abs(poly_eval(dTi, T.nvars, probes))) if dTi else 0.0
    return int(np.argmax(score))


def sample_W(T: DefiningPolynomial, region_radius: float, target_count: int,
             seed: int = 0) -> HypersurfaceSample:
    """Sample W cap B(0, region_radius) with tangent frames and area weights.

    Points come from root solves along the rays {chart point} x C of a seeded
    polar chart grid (every sheet at once), polished by one Newton step; the
    area weight of a point is the chart node's Euclidean patch area times the
    Gram determinant of the tangent frame under the Bergman metric.
    """
    if T.is_constant():
        empty = np.zeros((0, T.nvars), dtype=complex)
        return HypersurfaceSample(points=empty,
                                  frames=np.zeros((0, T.nvars - 1, T.nvars), dtype=complex),
                                  area_weights=np.zeros(0),
                                  region_radius=region_radius, seed=seed)
    if region_radius >= 1.0:
        raise DomainError("region_radius must be < 1")
    n = T.nvars
    if n == 1:
        if T.factored:
            roots = T.roots
        else:
            coeffs = np.zeros(T.degree + 1, dtype=complex)
            for (k,), c in T.terms.items():
                coeffs[k] = c
            roots = univariate_roots(coeffs)
        keep = roots[np.abs(roots) < region_radius]
        samp = point_divisor_sample(keep, region_radius)
        samp.seed = seed
        if len(keep) < max(1, target_count) / 2:
            samp.warnings.append("sparse-surface: fewer roots than half the target count")
        return samp

    axis = _choose_axis(T, region_radius, seed)
    others = [i for i in range(n) if i != axis]
    d_ax = max(a[axis] for a in T.terms)
    if d_ax == 0:
        raise DomainError("defining polynomial does not depend on any usable axis")
    dT = [poly_partial(T.terms, i) for i in range(n)]

    rng = np.random.default_rng(seed)
    sheets = max(d_ax, 1)
    if n != 2:
        raise DomainError("sample_W supports n <= 2 charts (n = 3 surfaces are out "
                          "of the desk-scale scope)")
    e_ax = np.zeros(n, dtype=complex)
    e_ax[axis] = 1.0

    def sheet_points(chart_value):
        """Points of W over one chart value of the free coordinate."""
        base = np.zeros(n, dtype=complex)
        base[others[0]] = chart_value
        out = []
        for root in univariate_roots(substitute_affine(T.terms, n, base, e_ax)):
            w = base + root * e_ax
            if np.vdot(w, w).real >= region_radius ** 2:
                continue
            g_ax = poly_eval(dT[axis], n, w)
            if abs(g_ax) > 1e-12:  # one Newton polish along the axis
                w = w - (poly_eval(T.terms, n, w) / g_ax) * e_ax
            grad = np.array([poly_eval(dT[i], n, w) for i in range(n)])
            if abs(grad[axis]) < 1e-10:
                continue  # vertical tangency: this chart ray cannot carry weight
            tangent = np.zeros(n, dtype=complex)
            tangent[others[0]] = 1.0
            tangent[axis] = -grad[others[0]] / grad[axis]
            gval = float(np.real(tangent @ bergman_metric(w).matrix @ tangent.conj()))
            out.append((w, tangent / math.sqrt(gval), gval))
        return out

    def sheet_count(chart_value):
        base = np.zeros(n, dtype=complex)
        base[others[0]] = chart_value
        roots = univariate_roots(substitute_affine(T.terms, n, base, e_ax))
        if len(roots) == 0:
            return 0
        w2 = np.abs(chart_value) ** 2 + np.abs(roots) ** 2
        return int(np.sum(w2 < region_radius ** 2))

    # per angular ray: radial panels split where the sheet count jumps (the
    # preimage of the region boundary), Gauss-Legendre inside each panel
    q_nodes, q_w = roots_legendre(16)
    na = max(12, int(target_count / (16 * sheets)))
    offset = 2.0 * math.pi * rng.random()
    pts, weights, frames = [], [], []
    for k in range(na):
        th = 2.0 * math.pi * (k + 0.5) / na + offset
        direction = np.exp(1j * th)
        scan = np.linspace(0.0, region_radius, 33)[1:]
        counts = [sheet_count(rho * direction) for rho in scan]
        cuts = [0.0]
        for j in range(1, len(scan)):
            if counts[j] != counts[j - 1]:
                lo, hi = scan[j - 1], scan[j]
                c_lo = counts[j - 1]
                for _ in range(40):
                    mid = 0.5 * (lo + hi)
                    if sheet_count(mid * direction) == c_lo:
                        lo = mid
                    else:
                        hi = mid
                cuts.append(0.5 * (lo + hi))
        cuts.append(region_radius)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            rho = 0.5 * (hi - lo) * (q_nodes + 1.0) + lo
            wrho = 0.5 * (hi - lo) * q_w
            for rr, ww in zip(rho, wrho):
                cw = ww * (2.0 * math.pi / na) * rr
                for w, frame, gval in sheet_points(rr * direction):
                    pts.append(w)
                    weights.append(2.0 * gval * cw)
                    frames.append(frame[None, :])

    warns = []
    if len(pts) < target_count / 2:
        warns.append("sparse-surface: found fewer points than half the target count")
        warnings.warn(warns[-1])
    if not pts:
        return HypersurfaceSample(points=np.zeros((0, n), dtype=complex),
                                  frames=np.zeros((0, n - 1, n), dtype=complex),
                                  area_weights=np.zeros(0),
                                  region_radius=region_radius, seed=seed,
                                  warnings=warns)
    return HypersurfaceSample(points=np.array(pts), frames=np.array(frames),
                              area_weights=np.array(weights),
                              region_radius=region_radius, seed=seed, warnings=warns)


# ---------------------------------------------------------------------------
# distance to W and flatness diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceResult:
    distance: float
    foot: np.ndarray
    approximate: bool = False
    multiple: bool = False

    def __float__(self):
        return self.distance


def _project_to_W(T: DefiningPolynomial, c, max_step=0.4):
    """Nearest point of W along the conjugate-gradient direction through c."""
    grad = T.gradient(c)
    gn = np.linalg.norm(grad)
    if gn < 1e-12:
        return None
    nu = grad.conj() / gn
    coeffs = substitute_affine(T.terms, T.nvars, c, nu)
    roots = univariate_roots(coeffs)
    if len(roots) == 0:
        return None
    y = roots[np.argmin(np.abs(roots))]
    if abs(y) > max_step:
        return None
    w = c + y * nu
    return w if np.vdot(w, w).real < 1.0 else None


def dist_to_W(z, T: DefiningPolynomial, sample: HypersurfaceSample,
              n_seeds: int = 4, refine: bool = True) -> DistanceResult:
    """delta_B(z, W) = inf_{w in W} |F_z(w)| by seeded local descent on T = 0.

    Seeds are the best sample points; each is refined by a derivative-free
    minimization over a tangent chart with Newton re-projection onto W.  If
    descent fails the best sampled value is returned flagged approximate.
    """
    z = as_point(z, T.nvars)
    if sample.size == 0:
        return DistanceResult(math.inf, np.full(T.nvars, np.nan), approximate=True)
    rho = pseudo_distance(z, sample.points)
    order = np.argsort(rho)
    if T.nvars == 1:
        best = order[0]
        ties = np.sum(np.abs(rho - rho[best]) < 1e-6) > 1
        multiple = bool(ties and sample.size > 1 and
                        np.any((np.abs(rho - rho[best]) < 1e-6) &
                               (pseudo_distance(sample.points[best],
                                                sample.points).ravel() > 1e-3)))
        return DistanceResult(float(rho[best]), sample.points[best], multiple=multiple)

    candidates = []
    for idx in order[:n_seeds]:
        w0 = sample.points[idx]
        frame = sample.frames[idx]
        if not refine:
            candidates.append((float(rho[idx]), w0, False))
            continue

        def objective(u, w0=w0, frame=frame):
            disp = (u[0::2] + 1j * u[1::2]) @ frame
            c = w0 + disp
            if np.vdot(c, c).real >= 0.998:
                return 2.0
            w = _project_to_W(T, c)
            if w is None:
                return 2.0
            return float(pseudo_distance(z, w))

        res = minimize(objective, np.zeros(2 * (T.nvars - 1)), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
        w = None
        if res.success or res.fun < rho[idx]:
            disp = (res.x[0::2] + 1j * res.x[1::2]) @ frame
            w = _project_to_W(T, w0 + disp)
        if w is None:
            candidates.append((float(rho[idx]), w0, True))
        else:
            candidates.append((float(pseudo_distance(z, w)), w, False))

    candidates.sort(key=lambda t: t[0])
    dist, foot, approx = candidates[0]
    multiple = any(abs(d - dist) < 1e-6 and
                   float(pseudo_distance(foot, w)) > 1e-3
                   for d, w, _ in candidates[1:])
    return DistanceResult(dist, foot, approximate=approx, multiple=multiple)


def tube_membership(z, T: DefiningPolynomial, sample: HypersurfaceSample,
                    eps: float, coarse_margin: float = 0.02) -> bool:
    """z in N_eps^B(W), i.e. dist_to_W(z) < eps.

    The sampled distance decides directly when it clears eps by
    coarse_margin; descent refinement runs only near the tube boundary.
    """
    z = as_point(z, T.nvars)
    if sample.size == 0:
        return False
    coarse = float(pseudo_distance(z, sample.points).min())
    if abs(coarse - eps) > coarse_margin:
        return coarse < eps
    return dist_to_W(z, T, sample).distance < eps


def flatness_profile(T: DefiningPolynomial, w, eps0: float,
                     n_radial: int = 10, n_angular: int = 16) -> float:
    """Fit of sup |f(x)| / |x|^2 for the graph of F_w(W) over its tangent plane.

    W is mapped through F_w so w sits at the origin; near 0 the image is a
    graph x -> f(x) over the tangent plane, and the returned C estimates the
    quadratic bound constant.  Raises FlatnessViolation when the graph solve
    fails inside |x| < eps0 (vertical tangency).
    """
    w = as_point(w, T.nvars)
    if abs(complex(T(w[None, :])[0])) > 1e-8:
        raise DomainError("flatness_profile needs a base point on W")
    if T.nvars == 1:
        return 0.0  # a point divisor has no graph direction
    if T.nvars > 2:
        raise DomainError("flatness charts are implemented for n = 2")
    Tw = T.compose_mobius(w)
    g = Tw.gradient(np.zeros(T.nvars, dtype=complex))
    gn = np.linalg.norm(g)
    if gn < 1e-8:
        raise DomainError("dT vanishes at the base point (singular W)")
    nu = g.conj() / gn
    # tangent directions: unitary completion of nu
    Q, _ = np.linalg.qr(np.column_stack([nu, np.eye(T.nvars)]).astype(complex))
    tangents = [Q[:, k] for k in range(1, T.nvars)]

    C = 0.0
    radii = eps0 * (np.arange(1, n_radial + 1)) / n_radial
    for rad in radii:
        for k in range(n_angular):
            phase = np.exp(2j * math.pi * (k + 0.5) / n_angular)
            x = rad * phase
            base = x * tangents[0]
            coeffs = substitute_affine(Tw.terms, T.nvars, base, nu)
            roots = univariate_roots(coeffs)
            roots = roots[np.abs(roots) <= 0.5]
            if len(roots) == 0:
                raise FlatnessViolation(
                    f"no graph value over |x| = {rad:.3g} (vertical tangency?)")
            f = roots[np.argmin(np.abs(roots))]
            C = max(C, abs(f) / rad ** 2)
    return C
