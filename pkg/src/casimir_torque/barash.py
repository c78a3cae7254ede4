"""Retarded fluctuation free energy between two in-plane uniaxial plates.

The free energy per unit area is a Matsubara sum over imaginary frequencies
xi_n of a two-dimensional integral over the in-plane wave vector (modulus
r, azimuth phi) of ln D_n, where D_n couples the ordinary and
extraordinary waves of both plates through the isotropic gap.

Notes on the kernel as implemented here:

* The ratio ``(rho1~ - rho1) eps1_perp / (rho1^2 - r^2 sin^2 phi)`` equals
  ``(eps1_par - eps1_perp) / (rho1~ + rho1)`` identically (and likewise for
  plate 2 with phi -> phi + theta).  The apparent singularity at
  ``rho1^2 = r^2 sin^2 phi`` is therefore removed algebraically rather than
  by perturbing quadrature nodes.
* The numerator of D_n is a quadratic polynomial in ``e = exp(-2 rho3 d)``;
  its constant coefficient is the d -> infinity value.  We integrate
  ``ln(N(e) / N(0)) = log1p(e (N1 + N2 e) / N0)`` which vanishes at large
  separation and keeps full relative precision in the exponential tail.
* The integrand is pi-periodic in phi, so only [0, pi) is sampled.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .constants import C_LIGHT, K_B
from .materials import MaterialDatabase, default_database, matsubara_xi
from .scenario import Scenario


class QuadratureError(RuntimeError):
    """Panel refinement hit its limit before meeting the tolerance."""

    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved relative error {achieved_error:.3g})")
        self.achieved_error = achieved_error


class TruncationError(RuntimeError):
    """The Matsubara sum did not meet the stopping rule within the cap."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6
    u_max: float = 60.0
    panels_phi: int = 32
    panels_u: int = 15
    grading_levels: int = 10
    order: int = 8
    max_refine: int = 3
    max_matsubara: int = 2000
    term_stop_ratio: float = 1e-7
    workers: int = 1

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.u_max < 30:
            raise ValueError("u_max must be >= 30")
        if self.panels_phi < 16 or self.panels_phi % 2:
            raise ValueError("panels_phi must be even and >= 16")
        if self.panels_u < 1 or self.order < 2 or self.grading_levels < 0:
            raise ValueError("panels_u >= 1, order >= 2 and grading_levels >= 0 required")
        if self.max_matsubara < 4:
            raise ValueError("max_matsubara must be >= 4")
        if not self.term_stop_ratio > 0:
            raise ValueError("term_stop_ratio must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class KernelContext:
    xi_n: float
    eps1_par: float
    eps1_perp: float
    eps2_par: float
    eps2_perp: float
    eps3: float
    d: float
    theta: float
    T: float

    @property
    def k2(self) -> float:
        return (self.xi_n / C_LIGHT) ** 2


@dataclass(frozen=True)
class RhoSet:
    rho1: np.ndarray
    rho2: np.ndarray
    rho3: np.ndarray
    rho1_tilde: np.ndarray
    rho2_tilde: np.ndarray


def _permittivities(n: int, T: float, scenario: Scenario, db: MaterialDatabase):
    xi = matsubara_xi(n, T)
    e1p, e1s = db[scenario.plate1].eps(xi)
    e2p, e2s = db[scenario.plate2].eps(xi)
    medium = db[scenario.medium]
    if not medium.is_isotropic:
        raise ValueError(f"gap medium {medium.name!r} must be isotropic")
    e3 = medium.eps(xi)[0]
    return xi, (e1p, e1s, e2p, e2s, e3)


def make_context(n: int, theta: float, d: float, scenario: Scenario,
                 db: MaterialDatabase | None = None) -> KernelContext:
    db = default_database() if db is None else db
    xi, eps = _permittivities(n, scenario.T, scenario, db)
    return KernelContext(xi, *eps, d=d, theta=theta, T=scenario.T)


def rho_factors(r, phi, ctx: KernelContext) -> RhoSet:
    """Decay constants of the waves in the three media (1/m)."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    k2 = ctx.k2
    r2 = r * r
    cos1 = np.cos(phi)
    cos2 = np.cos(phi + ctx.theta)
    return RhoSet(
        rho1=np.sqrt(r2 + k2 * ctx.eps1_perp),
        rho2=np.sqrt(r2 + k2 * ctx.eps2_perp),
        rho3=np.sqrt(r2 + k2 * ctx.eps3),
        rho1_tilde=np.sqrt(r2 + (ctx.eps1_par / ctx.eps1_perp - 1.0) * r2 * cos1**2
                           + k2 * ctx.eps1_par),
        rho2_tilde=np.sqrt(r2 + (ctx.eps2_par / ctx.eps2_perp - 1.0) * r2 * cos2**2
                           + k2 * ctx.eps2_par),
    )


def gamma_factor(r, phi, ctx: KernelContext):
    """Normalizing denominator of D_n, written as printed but with the plate-2
    bracket denominator taken as ``rho2^2 - r^2 sin^2(phi + theta)``."""
    rs = rho_factors(r, phi, ctx)
    r = np.asarray(r, dtype=float)
    sin1sq = np.sin(phi) ** 2
    sin2sq = (np.cos(phi) * np.sin(ctx.theta) + np.sin(phi) * np.cos(ctx.theta)) ** 2
    r1, r2, r3 = rs.rho1, rs.rho2, rs.rho3
    e1, e2, e3 = ctx.eps1_perp, ctx.eps2_perp, ctx.eps3
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = (e3 * r1 + e1 * r3) - e1 * (rs.rho1_tilde - r1) * (r * r * sin1sq - r1 * r3) \
            / (r1**2 - r * r * sin1sq)
        b2 = (e3 * r2 + e2 * r3) - e2 * (rs.rho2_tilde - r2) * (r * r * sin2sq - r2 * r3) \
            / (r2**2 - r * r * sin2sq)
    return (r1 + r3) * (r2 + r3) * b1 * b2


# -- compiled kernel ---------------------------------------------------------

@njit(cache=True, nogil=True)
def _numerator(r2, s1, c1, s2, c2, sth, cth, k2, e1p, e1s, e2p, e2s, e3):
    """Coefficients (N0, N1, N2) of the D_n numerator in e = exp(-2 rho3 d)."""
    rho1 = math.sqrt(r2 + k2 * e1s)
    rho2 = math.sqrt(r2 + k2 * e2s)
    rho3 = math.sqrt(r2 + k2 * e3)
    rt1 = math.sqrt(r2 + (e1p / e1s - 1.0) * r2 * c1 * c1 + k2 * e1p)
    rt2 = math.sqrt(r2 + (e2p / e2s - 1.0) * r2 * c2 * c2 + k2 * e2p)
    x1 = (e1p - e1s) / (rt1 + rho1)
    x2 = (e2p - e2s) / (rt2 + rho2)
    q1 = r2 * s1 * s1
    q2 = r2 * s2 * s2
    r33 = rho3 * rho3

    p = (rho1 + rho3) * (rho2 + rho3)
    q = (rho1 - rho3) * (rho2 - rho3)
    f1p = e3 * rho1 + e1s * rho3
    f1m = e3 * rho1 - e1s * rho3
    f2p = e3 * rho2 + e2s * rho3
    f2m = e3 * rho2 - e2s * rho3

    a0 = p * f1p * f2p - x1 * (q1 - rho1 * rho3) * f2p * p
    a1 = -(p * f1m * f2m + q * f1p * f2p) - x1 * 2.0 * (e2s - e3) * (
        q1 * (r2 * rho1 - rho2 * r33) + rho1 * r33 * (r2 - 2.0 * q1 + rho1 * rho2))
    a2 = q * f1m * f2m - x1 * (q1 + rho1 * rho3) * f2m * q

    b0 = f1p * p - x1 * (q1 - rho1 * rho3) * p
    b1 = 2.0 * (e1s - e3) * (r2 * rho2 - rho1 * r33 - 2.0 * rho2 * r33) + x1 * 2.0 * (
        q1 * (rho1 * rho2 + r33) - rho1 * rho1 * r33 + rho1 * rho2 * r33)
    b2 = f1m * q - x1 * (q1 + rho1 * rho3) * q

    w = rho2 * rho3
    c0 = -w * f1p * p + x1 * w * (q1 - rho1 * rho3) * p
    c1_ = w * 2.0 * rho3 * (e1s - e3) * (r2 + rho1 * rho2) + x1 * w * 2.0 * rho3 * (
        rho1 * rho1 * rho2 + rho1 * r33 + q1 * (rho1 - rho2))
    c2_ = w * f1m * q - x1 * w * (q1 + rho1 * rho3) * q

    ecoef = 4.0 * rho1 * rho2 * r33 * x1
    geo = 2.0 * r2 * s1 * cth * s2 + r33 * sth * sth

    n0 = a0 - x2 * (b0 * q2 + c0)
    n1 = a1 - x2 * (b1 * q2 - ecoef * geo + c1_)
    n2 = a2 - x2 * (b2 * q2 + c2_)
    return n0, n1, n2, rho3


@njit(cache=True, nogil=True)
def _log_ratio(r, phi, theta, d, k2, e1p, e1s, e2p, e2s, e3):
    s1 = math.sin(phi)
    c1 = math.cos(phi)
    sth = math.sin(theta)
    cth = math.cos(theta)
    s2 = s1 * cth + c1 * sth
    c2 = c1 * cth - s1 * sth
    n0, n1, n2, rho3 = _numerator(r * r, s1, c1, s2, c2, sth, cth, k2, e1p, e1s, e2p, e2s, e3)
    e = math.exp(-2.0 * rho3 * d)
    return math.log1p(e * (n1 + n2 * e) / n0)


@njit(cache=True, nogil=True)
def _log_ratio_flat(r, phi, theta, d, k2, e1p, e1s, e2p, e2s, e3):
    out = np.empty(r.size)
    for i in range(r.size):
        out[i] = _log_ratio(r[i], phi[i], theta[i], d[i], k2, e1p, e1s, e2p, e2s, e3)
    return out


@njit(cache=True, nogil=True)
def _integrate(t_nodes, t_weights, phi_nodes, phi_weights, thetas, d, u0, k2,
               e1p, e1s, e2p, e2s, e3):
    """Integral of r dr dphi ln(D/D_inf) over phi in [0, 2 pi), one per theta.

    Radial variable is u = 2 rho3 d = u0 + t, so r dr = u du / (4 d^2).
    """
    nth = thetas.size
    out = np.zeros(nth)
    sth = np.sin(thetas)
    cth = np.cos(thetas)
    s1 = np.sin(phi_nodes)
    c1 = np.cos(phi_nodes)
    inv4d2 = 1.0 / (4.0 * d * d)
    for i in range(t_nodes.size):
        t = t_nodes[i]
        u = u0 + t
        r2 = t * (t + 2.0 * u0) * inv4d2
        e = math.exp(-u)
        wr = t_weights[i] * u * inv4d2
        for j in range(phi_nodes.size):
            wij = wr * phi_weights[j]
            for k in range(nth):
                s2 = s1[j] * cth[k] + c1[j] * sth[k]
                c2 = c1[j] * cth[k] - s1[j] * sth[k]
                n0, n1, n2, _ = _numerator(r2, s1[j], c1[j], s2, c2, sth[k], cth[k],
                                           k2, e1p, e1s, e2p, e2s, e3)
                out[k] += wij * math.log1p(e * (n1 + n2 * e) / n0)
    return 2.0 * out


def log_integrand(r, phi, ctx: KernelContext):
    """ln(D_n(d) / D_n(d -> inf)) at in-plane wave vector (r, phi)."""
    r, phi = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(phi, dtype=float))
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    shape = r.shape
    flat = _log_ratio_flat(
        np.ascontiguousarray(r).ravel(), np.ascontiguousarray(phi).ravel(),
        np.full(r.size, float(ctx.theta)), np.full(r.size, float(ctx.d)), ctx.k2,
        ctx.eps1_par, ctx.eps1_perp, ctx.eps2_par, ctx.eps2_perp, ctx.eps3)
    out = flat.reshape(shape)
    return float(out) if out.ndim == 0 else out


# -- quadrature rules --------------------------------------------------------

def _composite(edges: np.ndarray, order: int, level: int):
    sub = 2**level
    fine = np.concatenate([np.linspace(a, b, sub + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
                          + [edges[-1:]])
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = fine[:-1, None], fine[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


@lru_cache(maxsize=64)
def _radial_rule(spec: QuadratureSpec, level: int):
    # geometric grading towards t = 0 resolves branch points just below u0
    graded = [0.0] + [2.0**-k for k in range(spec.grading_levels, -1, -1)]
    uniform = np.linspace(1.0, spec.u_max, spec.panels_u + 1)[1:]
    return _composite(np.array(graded + list(uniform)), spec.order, level)


@lru_cache(maxsize=64)
def _azimuthal_rule(spec: QuadratureSpec, level: int):
    edges = np.linspace(0.0, math.pi, spec.panels_phi // 2 + 1)
    return _composite(edges, spec.order, level)


# -- Matsubara terms and their sum -------------------------------------------

def _raw_integrals(level, spec, thetas, ds, xi, eps):
    t, wt = _radial_rule(spec, level)
    p, wp = _azimuthal_rule(spec, level)
    e3 = eps[4]
    k2 = (xi / C_LIGHT) ** 2
    out = np.empty((len(ds), len(thetas)))
    for i, d in enumerate(ds):
        u0 = 2.0 * d * xi * math.sqrt(e3) / C_LIGHT
        out[i] = _integrate(t, wt, p, wp, thetas, d, u0, k2, *eps)
    return out


def _term_batch(n, thetas, ds, scenario, spec, db, abs_tol=0.0):
    """One Matsubara term for every (d, theta) pair; returns (values, errors)."""
    xi, eps = _permittivities(n, scenario.T, scenario, db)
    weight = 0.5 if n == 0 else 1.0
    pref = K_B * scenario.T / (4.0 * math.pi**2) * weight
    coarse = _raw_integrals(0, spec, thetas, ds, xi, eps)
    for level in range(1, spec.max_refine + 1):
        fine = _raw_integrals(level, spec, thetas, ds, xi, eps)
        err = np.abs(fine - coarse)
        if np.all(err <= spec.rel_tol * np.abs(fine) + abs_tol / pref):
            return pref * fine, pref * err
        coarse = fine
    worst = float(np.max(err / np.maximum(np.abs(fine), 1e-300)))
    raise QuadratureError(f"Matsubara term n={n} did not converge", worst)


def matsubara_term(n: int, theta: float, d: float, scenario: Scenario,
                   spec: QuadratureSpec | None = None, db: MaterialDatabase | None = None,
                   abs_tol: float = 0.0) -> float:
    """Contribution of Matsubara frequency n to the free energy (J/m^2),
    including the factor 1/2 on the n = 0 term."""
    if n < 0:
        raise ValueError("n must be >= 0")
    spec = QuadratureSpec() if spec is None else spec
    db = default_database() if db is None else db
    values, _ = _term_batch(n, np.array([float(theta)]), [float(d)], scenario, spec, db, abs_tol)
    return float(values[0, 0])


@dataclass(frozen=True)
class FreeEnergyGrid:
    """Free energies on a (distance x angle) grid sharing one quadrature."""
    thetas: np.ndarray
    distances: np.ndarray
    values: np.ndarray  # shape (len(distances), len(thetas)), J/m^2
    quad_error: np.ndarray
    n_terms: int


def free_energy_grid(thetas, distances, scenario: Scenario,
                     spec: QuadratureSpec | None = None,
                     db: MaterialDatabase | None = None) -> FreeEnergyGrid:
    """Free energy per unit area for every combination of angle and distance.

    All points use the same nodes and the same number of Matsubara terms, so
    differences between them are smooth in the parameters (no adaptive
    jitter), which is what finite-difference derivatives need.
    """
    spec = QuadratureSpec() if spec is None else spec
    db = default_database() if db is None else db
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ds = np.atleast_1d(np.asarray(distances, dtype=float))
    if np.any(ds <= 0):
        raise ValueError("distances must be > 0")
    for name in (scenario.plate1, scenario.plate2, scenario.medium):
        db[name]

    first = [_term_batch(n, thetas, ds, scenario, spec, db) for n in (0, 1)]
    ref = max(float(np.max(np.abs(v))) for v, _ in first)
    abs_tol = spec.rel_tol * 1e-3 * ref

    total = first[0][0] + first[1][0]
    qerr = first[0][1] + first[1][1]
    small = [np.all(np.abs(v) <= spec.term_stop_ratio * np.abs(total)) for v, _ in first]

    def compute(n):
        return _term_batch(n, thetas, ds, scenario, spec, db, abs_tol)

    chunk = max(4, 2 * spec.workers)
    n = 2
    pool = ThreadPoolExecutor(spec.workers) if spec.workers > 1 else None
    try:
        while n < spec.max_matsubara:
            idx = range(n, min(n + chunk, spec.max_matsubara))
            results = list(pool.map(compute, idx)) if pool else [compute(i) for i in idx]
            for i, (v, e) in zip(idx, results):
                total = total + v
                qerr = qerr + e
                small.append(bool(np.all(np.abs(v) <= spec.term_stop_ratio * np.abs(total))))
                if len(small) >= 4 and all(small[-3:]):
                    return FreeEnergyGrid(thetas, ds, total, qerr, i + 1)
            n = idx[-1] + 1
    finally:
        if pool:
            pool.shutdown()
    raise TruncationError(
        f"Matsubara sum not converged after {spec.max_matsubara} terms "
        f"(stop ratio {spec.term_stop_ratio:g}); raise max_matsubara")


def free_energy(theta: float, d: float, scenario: Scenario,
                spec: QuadratureSpec | None = None,
                db: MaterialDatabase | None = None) -> float:
    """Helmholtz free energy per unit area (J/m^2), zero at infinite separation."""
    if not d > 0:
        raise ValueError("d must be > 0")
    grid = free_energy_grid([theta], [d], scenario, spec, db)
    return float(grid.values[0, 0])
