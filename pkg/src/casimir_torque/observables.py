"""Torque, force and derived quantities from the fluctuation free energy.

Derivatives are central differences with one Richardson step: for a step h,

    D(h) = (f(x + h) - f(x - h)) / 2h,   D* = (4 D(h/2) - D(h)) / 3

and the reported error is |D(h) - D(h/2)| plus a floor for the rounding
error of the finite difference itself.  All four free energies of a
derivative are evaluated in one ``free_energy_grid`` call so they share
quadrature nodes and Matsubara truncation.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .barash import QuadratureSpec, free_energy_grid
from .materials import MaterialDatabase, UniaxialMaterial, default_database
from .scenario import Scenario

__all__ = [
    "Scenario", "TorqueSample", "ForceSample", "AmplitudeFit", "DistanceTorque",
    "SensitivityRow", "torque", "force", "torque_vs_theta", "fit_sin2theta",
    "torque_vs_distance", "force_vs_distance", "sensitivity_scan",
    "DEFAULT_THETA_STEP", "DEFAULT_DISTANCE_STEP",
]

DEFAULT_THETA_STEP = 1e-3
DEFAULT_DISTANCE_STEP = 1e-3  # relative to d

# relative rounding level of a computed free energy
_ROUNDING = 1e-12


class TorqueSample(NamedTuple):
    theta: float
    torque: float  # N m, positive drives theta upwards
    error_estimate: float


class ForceSample(NamedTuple):
    d: float
    force: float  # N, positive is repulsive
    error_estimate: float


class DistanceTorque(NamedTuple):
    d: float
    torque: float  # |M| at theta = pi/4, N m
    error_estimate: float


@dataclass(frozen=True)
class AmplitudeFit:
    a: float
    rms_residual: float


@dataclass(frozen=True)
class SensitivityRow:
    variant: str
    torque: float
    force: float
    torque_rel_change: float
    force_rel_change: float


def _richardson(fp, fm, fp2, fm2, h):
    d1 = (fp - fm) / (2.0 * h)
    d2 = (fp2 - fm2) / h
    best = (4.0 * d2 - d1) / 3.0
    scale = np.maximum.reduce([np.abs(fp), np.abs(fm), np.abs(fp2), np.abs(fm2)])
    err = np.abs(d1 - d2) + _ROUNDING * scale / h
    return best, err


def torque_vs_theta(scenario: Scenario, thetas: Sequence[float],
                    spec: QuadratureSpec | None = None,
                    db: MaterialDatabase | None = None,
                    step: float = DEFAULT_THETA_STEP) -> list[TorqueSample]:
    """Torque M = -S dOmega/dtheta at each angle, at the scenario distance."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ValueError("thetas must be non-empty")
    offsets = np.array([step, -step, step / 2, -step / 2])
    grid = free_energy_grid((thetas[:, None] + offsets[None, :]).ravel(), [scenario.d],
                            scenario, spec, db)
    omega = grid.values[0].reshape(thetas.size, 4)
    slope, err = _richardson(omega[:, 0], omega[:, 1], omega[:, 2], omega[:, 3], step)
    area = scenario.area
    return [TorqueSample(float(t), float(-area * s), float(area * e))
            for t, s, e in zip(thetas, slope, err)]


def torque(scenario: Scenario, spec: QuadratureSpec | None = None,
           db: MaterialDatabase | None = None,
           step: float = DEFAULT_THETA_STEP) -> TorqueSample:
    return torque_vs_theta(scenario, [scenario.theta], spec, db, step)[0]


def force(scenario: Scenario, spec: QuadratureSpec | None = None,
          db: MaterialDatabase | None = None,
          rel_step: float = DEFAULT_DISTANCE_STEP) -> ForceSample:
    """Force F = -S dOmega/dd; positive values push the plates apart."""
    d = scenario.d
    h = rel_step * d
    ds = d + np.array([h, -h, h / 2, -h / 2])
    grid = free_energy_grid([scenario.theta], ds, scenario, spec, db)
    omega = grid.values[:, 0]
    slope, err = _richardson(omega[0], omega[1], omega[2], omega[3], h)
    area = scenario.area
    return ForceSample(d, float(-area * slope), float(area * err))


def fit_sin2theta(samples: Sequence[TorqueSample]) -> AmplitudeFit:
    """Unweighted least-squares fit of M = a sin(2 theta)."""
    theta = np.array([s.theta for s in samples], dtype=float)
    m = np.array([s.torque for s in samples], dtype=float)
    basis = np.sin(2.0 * theta)
    norm = float(np.dot(basis, basis))
    if len(np.unique(theta)) < 3:
        raise ValueError("need at least 3 samples at distinct angles")
    if norm < 1e-24:
        raise ValueError("degenerate design: every sample sits on a zero of sin(2 theta)")
    a = float(np.dot(m, basis) / norm)
    rms = float(np.sqrt(np.mean((m - a * basis) ** 2)))
    return AmplitudeFit(a, rms)


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def torque_vs_distance(scenario: Scenario, distances: Sequence[float],
                       spec: QuadratureSpec | None = None,
                       db: MaterialDatabase | None = None,
                       workers: int = 1) -> list[DistanceTorque]:
    """|M| at theta = pi/4 for each distance (input order preserved)."""
    if any(d <= 0 for d in distances):
        raise ValueError("distances must be positive")

    def one(d):
        s = torque(scenario.replace(d=float(d), theta=math.pi / 4), spec, db)
        return DistanceTorque(float(d), abs(s.torque), s.error_estimate)

    return _map(one, list(distances), workers)


def force_vs_distance(scenario: Scenario, distances: Sequence[float],
                      spec: QuadratureSpec | None = None,
                      db: MaterialDatabase | None = None,
                      workers: int = 1) -> list[ForceSample]:
    if any(d <= 0 for d in distances):
        raise ValueError("distances must be positive")
    return _map(lambda d: force(scenario.replace(d=float(d)), spec, db),
                list(distances), workers)


def sensitivity_scan(scenario: Scenario,
                     variants: Mapping[str, Mapping[str, UniaxialMaterial]],
                     spec: QuadratureSpec | None = None,
                     db: MaterialDatabase | None = None) -> list[SensitivityRow]:
    """Relative change of torque and force when materials are swapped out.

    ``variants`` maps a label to overrides ``{material name: replacement}``;
    each override re-binds the name in a copy of the database.
    """
    db = default_database() if db is None else db
    base_m = torque(scenario, spec, db).torque
    base_f = force(scenario, spec, db).force
    rows = []
    for label, overrides in variants.items():
        vdb = db.with_overrides(overrides)
        m = torque(scenario, spec, vdb).torque
        f = force(scenario, spec, vdb).force
        rows.append(SensitivityRow(label, m, f, (m - base_m) / base_m, (f - base_f) / base_f))
    return rows
