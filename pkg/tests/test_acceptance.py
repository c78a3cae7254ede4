"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``CRITERION n: PASS|FAIL`` line (visible without -s)
before asserting.  Expected runtime on one core: roughly ten minutes.
"""
import math

import numpy as np
import pytest

from casimir_torque.barash import free_energy_grid, matsubara_term
from casimir_torque.constants import K_B
from casimir_torque.experiment import (
    DiskSpec, bulk_drag_coefficient, gap_drag_coefficient, simulate_rotation,
)
from casimir_torque.materials import MaterialDatabase, OscillatorModel, UniaxialMaterial, default_database
from casimir_torque.nonretarded import omega_bar_closed, omega_bar_numeric, torque_nonretarded
from casimir_torque.observables import (
    fit_sin2theta, force, sensitivity_scan, torque, torque_vs_theta,
)
from casimir_torque.scenario import Scenario

from conftest import ethanol_scenario

DB = default_database()
THETAS_17 = np.linspace(0.0, math.pi, 17)


def report(capsys, number, checks):
    """Print one verdict line for a criterion, then fail on any failed check."""
    ok = all(passed for passed, _ in checks)
    detail = "; ".join(f"{'ok' if passed else 'FAILED'} {text}" for passed, text in checks)
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def test_criterion_1_torque_scans(capsys):
    checks = []
    fits = {}
    for disk, target in (("quartz", 5.3e-20), ("calcite", 7e-19)):
        sc = Scenario(disk, "BaTiO3", "vacuum", d=100e-9, T=300.0)
        fit = fit_sin2theta(torque_vs_theta(sc, THETAS_17))
        fits[disk] = fit
        rel = abs(abs(fit.a) - target) / target
        checks.append((rel <= 0.25, f"{disk} a={fit.a:.4e} N m ({rel:.1%} from {target:g})"))
        ratio = fit.rms_residual / abs(fit.a)
        checks.append((ratio < 0.02, f"{disk} rms/|a|={ratio:.2e}"))
    opposite = fits["quartz"].a * fits["calcite"].a < 0
    checks.append((opposite, "quartz and calcite amplitudes have opposite signs"))
    report(capsys, 1, checks)


def test_criterion_2_nonretarded_oracle(capsys):
    checks = []
    for disk in ("quartz", "calcite"):
        for medium in ("vacuum", "ethanol"):
            mats = (DB[disk], DB["BaTiO3"], DB[medium])
            num = omega_bar_numeric(*mats).omega_bar
            closed = omega_bar_closed(*mats).omega_bar
            rel = abs(num - closed) / abs(closed)
            checks.append((rel <= 1e-6, f"{disk}/{medium} wbar rel diff {rel:.1e}"))
    w, S = omega_bar_closed(DB["calcite"], DB["BaTiO3"], DB["vacuum"]).omega_bar, math.pi * 4e-10
    base = torque_nonretarded(math.pi / 4, 10e-9, S, w)
    thetas = np.linspace(0.05, 3.0, 13)
    shape = max(abs(torque_nonretarded(t, 10e-9, S, w) / (base * math.sin(2 * t)) - 1) for t in thetas)
    dist = max(abs(torque_nonretarded(math.pi / 4, d, S, w) * (d / 10e-9) ** 2 / base - 1)
               for d in (1e-9, 3e-9, 37e-9, 2e-7))
    checks.append((shape <= 4e-16, f"sin(2 theta) proportionality dev {shape:.1e}"))
    checks.append((dist <= 4e-16, f"1/d^2 proportionality dev {dist:.1e}"))
    report(capsys, 2, checks)


def test_criterion_3_force_sign_and_float_height(capsys, float_heights):
    sc = ethanol_scenario("quartz").replace(theta=math.pi / 4)
    checks = []
    for d in (2e-9, 4e-9):
        f = force(sc.replace(d=d)).force
        checks.append((f < 0, f"F({d * 1e9:g} nm)={f:.3e} N attractive"))
    f = force(sc.replace(d=100e-9)).force
    checks.append((f > 0, f"F(100 nm)={f:.3e} N repulsive"))
    for disk, d_star in float_heights.items():
        checks.append((60e-9 <= d_star <= 160e-9, f"{disk} d*={d_star * 1e9:.1f} nm"))
    report(capsys, 3, checks)


def test_criterion_4_ethanol_vs_vacuum(capsys):
    checks = []
    for disk in ("quartz", "calcite"):
        for d in (100e-9, 10e-9, 5e-9):
            vac = abs(torque(Scenario(disk, "BaTiO3", "vacuum", d=d)).torque)
            eth = abs(torque(Scenario(disk, "BaTiO3", "ethanol", d=d)).torque)
            if d == 100e-9:
                ratio = vac / eth
                checks.append((1.5 <= ratio <= 2.5, f"{disk} 100 nm vacuum/ethanol={ratio:.3f}"))
            else:
                checks.append((eth > vac, f"{disk} {d * 1e9:g} nm ethanol/vacuum={eth / vac:.3f}"))
    report(capsys, 4, checks)


def test_criterion_5_infrared_sensitivity(capsys):
    sc = ethanol_scenario("quartz").replace(d=100e-9, theta=math.pi / 4)
    variants = {name: {"BaTiO3": DB[name]} for name in ("BaTiO3-wIR-0.7e14", "BaTiO3-wIR-1.0e14")}
    checks = []
    for row in sensitivity_scan(sc, variants):
        checks.append((abs(row.torque_rel_change) < 0.14,
                       f"{row.variant} torque change {row.torque_rel_change:+.2%}"))
        checks.append((abs(row.force_rel_change) < 0.14,
                       f"{row.variant} force change {row.force_rel_change:+.2%}"))
    report(capsys, 5, checks)


def test_criterion_6_drag_ratio(capsys):
    checks = []
    for R, d in ((20e-6, 100e-9), (5e-6, 37e-9), (1e-4, 2e-6)):
        ratio = gap_drag_coefficient(R, d, 1.2e-3) / bulk_drag_coefficient(R, 1.2e-3)
        rel = abs(ratio / (3 * math.pi / 64 * R / d) - 1)
        checks.append((rel <= 1e-12, f"R={R:g} d={d:g} ratio={ratio:.4f} rel dev {rel:.1e}"))
    ratio = gap_drag_coefficient(20e-6, 100e-9, 1.2e-3) / bulk_drag_coefficient(20e-6, 1.2e-3)
    checks.append((abs(ratio - 29.45) < 0.01, f"20 um / 100 nm ratio {ratio:.3f} (about 30)"))
    report(capsys, 6, checks)


def test_criterion_7_dynamics(capsys, float_heights, calcite_amplitude):
    sc = ethanol_scenario("calcite").replace(d=float_heights["calcite"])
    a = calcite_amplitude
    full = simulate_rotation(math.pi / 4, sc, a, "full", 600.0)
    quasi = simulate_rotation(math.pi / 4, sc, a, "quasi_static", 600.0)
    th = full.theta
    gamma = gap_drag_coefficient(sc.R, sc.d, 1.2e-3)
    exact = np.arctan(math.tan(math.pi / 4) * np.exp(2 * a * quasi.t / gamma))
    rates = full.theta_dot[1:]
    checks = [
        (a < 0, f"calcite a={a:.4e} N m at d*={sc.d * 1e9:.1f} nm"),
        (bool(np.all(np.diff(th) <= 0)), "theta(t) monotone"),
        (bool(np.all(th >= 0) and np.all(rates <= 0)), "no overshoot, theta_dot sign constant"),
        (th[0] - th[-1] > 0.1, f"delta theta in 600 s = {th[0] - th[-1]:.4f} rad"),
        (float(np.max(np.abs(quasi.theta - exact))) <= 1e-6,
         f"quasi-static vs closed form {np.max(np.abs(quasi.theta - exact)):.1e} rad"),
    ]
    report(capsys, 7, checks)


def test_criterion_8_property_suite(capsys):
    checks = []
    qbt = Scenario("quartz", "BaTiO3", "vacuum", d=100e-9)

    for s in torque_vs_theta(qbt.replace(plate1="ethanol"), [0.4, math.pi / 4, 2.0]):
        checks.append((abs(s.torque) <= s.error_estimate,
                       f"isotropic disk torque {s.torque:.1e} vs err {s.error_estimate:.1e}"))

    thetas = np.array([0.3, 0.3 + math.pi, -0.3, math.pi - 0.3, 0.0, math.pi / 8, math.pi / 4,
                       math.pi / 2])
    grid = free_energy_grid(thetas, [qbt.d], qbt)
    v, err = grid.values[0], grid.quad_error[0]
    tol = 2 * err[0] + 1e-7 * abs(v[0])
    checks.append((abs(v[1] - v[0]) <= tol, f"period pi: dOmega={abs(v[1] - v[0]):.1e}"))
    refl = max(abs(v[2] - v[0]), abs(v[3] - v[0]))
    checks.append((refl <= tol, f"reflection: dOmega={refl:.1e} (tol {tol:.1e})"))
    swapped = free_energy_grid(thetas[4:], [qbt.d], qbt.replace(plate1="BaTiO3", plate2="quartz"))
    dswap = np.abs(swapped.values[0] - v[4:])
    stol = 2 * (err[4:] + swapped.quad_error[0]) + 1e-7 * np.abs(v[4:])
    checks.append((bool(np.all(dswap <= stol)), f"swap: max dOmega={dswap.max():.1e}"))

    two = UniaxialMaterial.isotropic("two", OscillatorModel.from_pairs([(1.0, 1e15)]))
    db = MaterialDatabase({**DB.entries, "two": two})
    d = 100e-9
    term = matsubara_term(0, 0.0, d, Scenario("two", "two", "vacuum", d=d), db=db)
    series = sum((1 / 9) ** k / k**3 for k in range(1, 80))
    oracle = -K_B * 300.0 / (4 * math.pi) * series / (4 * d * d)
    rel = abs(term / oracle - 1)
    checks.append((rel <= 1e-6, f"n=0 series oracle rel dev {rel:.1e}"))

    warm = torque(qbt).torque
    cold = torque(qbt.replace(T=30.0)).torque
    change = abs(cold / warm - 1)
    checks.append((change < 0.05, f"torque 300 K vs 30 K differs {change:.2%}"))
    report(capsys, 8, checks)
