"""Small-separation torque for weakly birefringent plates.

In the non-retarded, weak-anisotropy limit the torque is

    M = -hbar * wbar * S * sin(2 theta) / (64 pi^2 d^2)

with a characteristic frequency ``wbar`` given by a double integral over
imaginary frequency xi and a damped variable x.  The x integral has the
closed form ``-ln(1 - q) / (a b)`` with a = (e1+e3)(e2+e3),
b = (e1-e3)(e2-e3), q = b/a (perpendicular permittivities), so ``wbar`` is
computed two independent ways here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .constants import HBAR
from .materials import UniaxialMaterial

XI_LOW = 1e10
XI_HIGH = 1e19
X_MAX = 60.0


class OmegaBarConvergenceError(RuntimeError):
    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved relative error {achieved_error:.3g})")
        self.achieved_error = achieved_error


@dataclass(frozen=True)
class OmegaBarResult:
    omega_bar: float  # rad/s
    method: Literal["numeric", "closed_form"]
    error_estimate: float = 0.0


def _gl_panels(edges, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (a + b)).ravel(), (0.5 * (b - a) * w).ravel()


def _xi_rule(panels: int):
    """Nodes on [0, XI_LOW] (linear) and [XI_LOW, XI_HIGH] (log-spaced)."""
    lin_x, lin_w = _gl_panels(np.array([0.0, XI_LOW]))
    s, ws = _gl_panels(np.linspace(math.log(XI_LOW), math.log(XI_HIGH), panels + 1))
    xi = np.exp(s)
    return np.concatenate([lin_x, xi]), np.concatenate([lin_w, ws * xi])


def _adaptive_xi(f: Callable[[np.ndarray], np.ndarray], rel_tol: float,
                 panels: int = 32, max_panels: int = 4096) -> tuple[float, float]:
    xi, w = _xi_rule(panels)
    prev = float(np.dot(w, f(xi)))
    while panels < max_panels:
        panels *= 2
        xi, w = _xi_rule(panels)
        cur = float(np.dot(w, f(xi)))
        err = abs(cur - prev)
        if err <= rel_tol * abs(cur) or cur == prev:
            return cur, err
        prev = cur
    raise OmegaBarConvergenceError("xi quadrature did not converge",
                                   err / max(abs(cur), 1e-300))


def _components(plate1: UniaxialMaterial, plate2: UniaxialMaterial,
                medium: UniaxialMaterial, xi):
    e1p, e1s = plate1.eps(xi)
    e2p, e2s = plate2.eps(xi)
    e3 = medium.eps(xi)[0]
    return e1p, e1s, e2p, e2s, e3


_X_RULE = _gl_panels(np.concatenate([[0.0], 2.0 ** np.arange(-12, 0), np.linspace(1.0, X_MAX, 31)]))


def omega_bar_numeric(plate1: UniaxialMaterial, plate2: UniaxialMaterial,
                      medium: UniaxialMaterial, rel_tol: float = 1e-7) -> OmegaBarResult:
    """wbar by nested quadrature of the x-damped double integral."""
    x, wx = _X_RULE
    ex = np.exp(-x)

    def integrand(xi):
        e1p, e1s, e2p, e2s, e3 = (np.asarray(v)[:, None] for v in _components(plate1, plate2, medium, xi))
        den = (e1s + e3) * (e2s + e3) - (e1s - e3) * (e2s - e3) * ex[None, :]
        inner = (x * ex / den**2) @ wx
        return ((e2p - e2s) * (e1p - e1s) * e3**2)[:, 0] * inner

    value, err = _adaptive_xi(integrand, rel_tol)
    return OmegaBarResult(value, "numeric", err)


def _log_kernel(a, b):
    """-ln(1 - b/a) / (a b), continued to b -> 0 where it tends to 1/a^2."""
    q = b / a
    small = np.abs(q) < 1e-9
    safe_q = np.where(small, 0.5, q)
    general = -np.log1p(-safe_q) / (safe_q * a * a)
    series = (1.0 + 0.5 * q + q * q / 3.0) / (a * a)
    return np.where(small, series, general)


def omega_bar_closed(plate1: UniaxialMaterial, plate2: UniaxialMaterial,
                     medium: UniaxialMaterial, rel_tol: float = 1e-9) -> OmegaBarResult:
    """wbar with the x integral done analytically (single xi quadrature)."""

    def integrand(xi):
        e1p, e1s, e2p, e2s, e3 = _components(plate1, plate2, medium, xi)
        a = (e1s + e3) * (e2s + e3)
        b = (e1s - e3) * (e2s - e3)
        return (e2p - e2s) * (e1p - e1s) * e3**2 * _log_kernel(a, b)

    value, err = _adaptive_xi(integrand, rel_tol)
    return OmegaBarResult(value, "closed_form", err)


def torque_nonretarded(theta: float, d: float, S: float, omega_bar: float) -> float:
    """Non-retarded weak-anisotropy torque in N m."""
    if not d > 0:
        raise ValueError("d must be > 0")
    return -HBAR * omega_bar * S * math.sin(2.0 * theta) / (64.0 * math.pi**2 * d * d)
