"""Levitating-disk experiment: float height and relaxation of the angle.

A disk of radius R and thickness h sits above a large plate in a liquid.
It floats where the Casimir-Lifshitz repulsion balances its buoyancy-
corrected weight, and its axis relaxes under

    I theta'' + gamma_d theta' = a sin(2 theta),   gamma_d = (pi/2) R^4 eta / d

with I the moment of inertia of a solid disk about its symmetry axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .barash import QuadratureSpec
from .constants import ETHANOL_VISCOSITY, G_ACCEL
from .materials import MaterialDatabase, default_database
from .observables import force
from .scenario import Scenario


class NoLevitationError(RuntimeError):
    """Repulsion never exceeds the disk weight inside the search bracket."""


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiskSpec:
    R: float
    h: float
    density: float
    material: str = ""

    def __post_init__(self):
        if not (self.R > 0 and self.h > 0 and self.density > 0):
            raise ValueError("disk radius, thickness and density must be positive")

    @classmethod
    def from_scenario(cls, scenario: Scenario, db: MaterialDatabase | None = None) -> "DiskSpec":
        db = default_database() if db is None else db
        mat = db[scenario.plate1]
        if mat.density is None:
            raise ValueError(f"material {mat.name!r} has no density")
        return cls(scenario.R, scenario.h, mat.density, mat.name)

    @property
    def area(self) -> float:
        return math.pi * self.R**2

    @property
    def mass(self) -> float:
        return self.density * self.area * self.h

    @property
    def moment_of_inertia(self) -> float:
        return 0.5 * self.mass * self.R**2


class TrajectorySample(NamedTuple):
    t: float
    theta: float
    theta_dot: float


@dataclass(frozen=True)
class Trajectory:
    samples: list[TrajectorySample]
    theta_eq: float
    converged: bool  # stopped early on reaching the equilibrium

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def theta(self) -> np.ndarray:
        return np.array([s.theta for s in self.samples])

    @property
    def theta_dot(self) -> np.ndarray:
        return np.array([s.theta_dot for s in self.samples])


def net_weight(disk: DiskSpec, liquid_density: float) -> float:
    """Buoyancy-corrected weight in N (negative = downward)."""
    if liquid_density < 0:
        raise ValueError("liquid density must be >= 0")
    return -disk.area * disk.h * (disk.density - liquid_density) * G_ACCEL


def gap_drag_coefficient(R: float, d: float, eta: float) -> float:
    """Viscous torque per unit angular velocity from the liquid in the gap (N m s)."""
    if not (R > 0 and d > 0 and eta >= 0):
        raise ValueError("R and d must be positive and eta non-negative")
    return 0.5 * math.pi * R**4 * eta / d


def bulk_drag_coefficient(R: float, eta: float) -> float:
    """Rotational drag coefficient of a disk spinning far from any wall (N m s)."""
    if not (R > 0 and eta >= 0):
        raise ValueError("R must be positive and eta non-negative")
    return 32.0 / 3.0 * eta * R**3


def equilibrium_distance(scenario: Scenario, spec: QuadratureSpec | None = None,
                         db: MaterialDatabase | None = None,
                         bracket: tuple[float, float] = (5e-9, 2e-6),
                         rel_tol: float = 1e-3, scan_ratio: float = 1.5) -> float:
    """Stable float height d* where force(d) + net weight = 0.

    The bracket is scanned downward from its top in geometric steps until
    the net vertical force turns positive (repulsion wins); the crossing
    above that point is the stable one and is refined by bisection in log d.
    """
    db = default_database() if db is None else db
    disk = DiskSpec.from_scenario(scenario, db)
    liquid = db[scenario.medium].density or 0.0
    weight = net_weight(disk, liquid)
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    def net(d):
        return force(scenario.replace(d=d), spec, db).force + weight

    upper = hi
    f_upper = net(upper)
    if f_upper > 0:
        raise NoLevitationError(
            f"repulsion exceeds the weight even at {hi:g} m; no float height inside bracket")
    while True:
        lower = max(upper / scan_ratio, lo)
        f_lower = net(lower)
        if f_lower > 0:
            break
        if lower <= lo:
            raise NoLevitationError(
                f"no separation in [{lo:g}, {hi:g}] m where repulsion exceeds the weight")
        upper = lower

    while upper / lower - 1.0 > rel_tol:
        mid = math.sqrt(lower * upper)
        if net(mid) > 0:
            lower = mid
        else:
            upper = mid
    return math.sqrt(lower * upper)


def _stable_angle(theta0: float, a: float) -> float:
    # minima of -a/2 cos(2 theta)... stable where 2 a cos(2 theta) < 0
    if a < 0:
        return math.pi * round(theta0 / math.pi)
    return math.pi / 2 + math.pi * round((theta0 - math.pi / 2) / math.pi)


def rotate_disk(theta0: float, a: float, disk: DiskSpec, d: float, t_end: float,
                mode: Literal["full", "quasi_static"] = "full",
                eta: float = ETHANOL_VISCOSITY, n_samples: int = 201,
                rtol: float = 1e-8, atol: float = 1e-8,
                stop_tol: float = 1e-4) -> Trajectory:
    """Relax the in-plane angle from rest at ``theta0`` under torque a sin(2 theta).

    ``full`` keeps the inertial term and uses an implicit stiff integrator
    (the inertial time I/gamma_d is microseconds against minutes of
    motion); ``quasi_static`` drops inertia and uses an explicit
    Runge-Kutta scheme.  Both stop once within ``stop_tol`` of the
    equilibrium angle.
    """
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    gamma = gap_drag_coefficient(disk.R, d, eta)
    inertia = disk.moment_of_inertia
    theta_eq = _stable_angle(theta0, a) if a != 0 else theta0
    t_eval = np.linspace(0.0, t_end, n_samples)

    def arrived(t, y):
        return abs(y[0] - theta_eq) - stop_tol
    arrived.terminal = True

    if a == 0 or math.sin(2.0 * theta0) == 0.0:
        samples = [TrajectorySample(float(t), theta0 % (2 * math.pi), 0.0) for t in t_eval]
        return Trajectory(samples, theta_eq, False)

    if mode == "quasi_static":
        def rhs(t, y):
            return [a * math.sin(2.0 * y[0]) / gamma]
        sol = solve_ivp(rhs, (0.0, t_end), [theta0], method="DOP853", t_eval=t_eval,
                        rtol=rtol, atol=atol, events=arrived)
        thetas = sol.y[0]
        rates = a * np.sin(2.0 * thetas) / gamma
    elif mode == "full":
        def rhs(t, y):
            return [y[1], (a * math.sin(2.0 * y[0]) - gamma * y[1]) / inertia]

        def jac(t, y):
            return [[0.0, 1.0], [2.0 * a * math.cos(2.0 * y[0]) / inertia, -gamma / inertia]]
        # first step must resolve the inertial transient
        sol = solve_ivp(rhs, (0.0, t_end), [theta0, 0.0], method="Radau", t_eval=t_eval,
                        rtol=rtol, atol=atol, jac=jac, events=arrived,
                        first_step=1e-3 * inertia / gamma)
        thetas, rates = sol.y[0], sol.y[1]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if sol.status == -1:
        raise IntegrationError(sol.message)

    t_out = list(sol.t)
    theta_out = list(thetas)
    rate_out = list(rates)
    converged = sol.status == 1
    if converged:
        y_end = sol.y_events[0][0]
        t_out.append(float(sol.t_events[0][0]))
        theta_out.append(float(y_end[0]))
        rate_out.append(float(y_end[1]) if mode == "full"
                        else a * math.sin(2.0 * y_end[0]) / gamma)
    samples = [TrajectorySample(float(t), float(th) % (2 * math.pi), float(w))
               for t, th, w in zip(t_out, theta_out, rate_out)]
    # an event time can coincide with the last t_eval point
    dedup = [samples[0]] + [s for p, s in zip(samples, samples[1:]) if s.t > p.t]
    return Trajectory(dedup, theta_eq, converged)


def simulate_rotation(theta0: float, scenario: Scenario, a: float,
                      mode: Literal["full", "quasi_static"] = "full", t_end: float = 600.0,
                      db: MaterialDatabase | None = None,
                      eta: float = ETHANOL_VISCOSITY, **kwargs) -> Trajectory:
    """``rotate_disk`` for the scenario's disk held at the scenario distance."""
    disk = DiskSpec.from_scenario(scenario, db)
    return rotate_disk(theta0, a, disk, scenario.d, t_end, mode, eta, **kwargs)
