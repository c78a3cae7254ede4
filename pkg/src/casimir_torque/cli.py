"""Command-line front end.

Every output file starts with '#' comment lines holding the resolved
configuration as JSON and the physical-constants version, so a result can be
regenerated with ``casimir-torque rerun <file>``.
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .barash import QuadratureError, QuadratureSpec, TruncationError
from .constants import CONSTANTS_VERSION
from .experiment import (DiskSpec, IntegrationError, NoLevitationError, equilibrium_distance,
                         net_weight, rotate_disk)
from .materials import (MaterialDatabase, MaterialError, UnknownMaterialError, default_database,
                        load_material_db)
from .nonretarded import (OmegaBarConvergenceError, omega_bar_closed, omega_bar_numeric,
                          torque_nonretarded)
from .observables import fit_sin2theta, force_vs_distance, sensitivity_scan, torque_vs_theta
from .scenario import Scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

CONFIG_PREFIX = "# config: "


class ConfigError(ValueError):
    pass


class Table:
    def __init__(self, columns, rows, notes=()):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.notes = list(notes)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12e}"


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def render(table: Table, config: dict, fmt: str, timestamp: bool) -> str:
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    if fmt == "json":
        doc = {"program": f"casimir-torque {__version__}",
               "constants_version": CONSTANTS_VERSION,
               "config": config,
               "notes": table.notes,
               "columns": table.columns,
               "rows": [[_jsonable(v) for v in r] for r in table.rows]}
        if timestamp:
            doc["generated"] = stamp
        return json.dumps(doc, indent=1) + "\n"
    lines = [f"# casimir-torque {__version__}",
             f"# constants: {CONSTANTS_VERSION}",
             CONFIG_PREFIX + json.dumps(config, sort_keys=True)]
    lines += [f"# {n}" for n in table.notes]
    if timestamp:
        lines.append(f"# generated: {stamp}")
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in r) for r in table.rows]
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- configuration ----------------------------------------------------------

def _database(config: dict) -> MaterialDatabase:
    path = config.get("materials")
    if not path:
        return default_database()
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read materials file {path}: {exc}") from exc
    extra = load_material_db(raw)
    entries = dict(default_database().entries)
    entries.update(extra.entries)
    return MaterialDatabase(entries)


def _scenario(config: dict, db: MaterialDatabase) -> Scenario:
    sc = Scenario(plate1=config["plate1"], plate2=config["plate2"], medium=config["medium"],
                  d=config["distance_m"], theta=config["theta_rad"], T=config["temperature_k"],
                  R=config["radius_m"], h=config["thickness_m"])
    for name in (sc.plate1, sc.plate2, sc.medium):
        db[name]
    if not db[sc.medium].is_isotropic:
        raise ConfigError(f"medium {sc.medium!r} must be isotropic")
    return sc


def _spec(config: dict) -> QuadratureSpec:
    return QuadratureSpec(rel_tol=config["rel_tol"], workers=config["workers"],
                          max_matsubara=config["max_matsubara"])


# -- commands ---------------------------------------------------------------

def eps_crossover(xi, curve_a, curve_b):
    """Imaginary frequencies where two permittivity curves cross (log-interpolated)."""
    diff = np.asarray(curve_a) - np.asarray(curve_b)
    out = []
    for i in np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)[0]:
        la, lb = math.log(xi[i]), math.log(xi[i + 1])
        frac = diff[i] / (diff[i] - diff[i + 1])
        out.append(math.exp(la + frac * (lb - la)))
    return out


def cmd_eps_table(config: dict, db: MaterialDatabase) -> Table:
    names = config["names"] or list(db)
    mats = [db[n] for n in names]
    if config["n_points"] < 2 or not 0 < config["xi_min_rad_s"] < config["xi_max_rad_s"]:
        raise ConfigError("need n_points >= 2 and 0 < xi_min < xi_max")
    xi = np.geomspace(config["xi_min_rad_s"], config["xi_max_rad_s"], config["n_points"])
    columns = ["xi_rad_s"]
    data = [xi]
    for m in mats:
        par, perp = m.eps(xi)
        columns += [f"{m.name}_eps_par", f"{m.name}_eps_perp", f"{m.name}_eps_avg"]
        data += [par, perp, 0.5 * (par + perp)]
    notes = []
    if config["crossover"]:
        a, b = config["crossover"]
        for x in eps_crossover(xi, db[a].eps_average(xi), db[b].eps_average(xi)):
            notes.append(f"crossover {a} avg / {b} avg at xi_rad_s={x:.6e}")
    return Table(columns, np.column_stack(data), notes)


def cmd_torque_scan(config, db):
    sc = _scenario(config, db)
    thetas = np.linspace(0.0, math.pi, config["n_theta"])
    samples = torque_vs_theta(sc, thetas, _spec(config), db)
    fit = fit_sin2theta(samples)
    notes = [f"sin2theta fit: a_N_m={fit.a:.9e} rms_residual_N_m={fit.rms_residual:.9e}"]
    return Table(["theta_rad", "torque_N_m", "error_N_m"], samples, notes)


def cmd_force_scan(config, db):
    sc = _scenario(config, db)
    ds = np.geomspace(config["d_min_m"], config["d_max_m"], config["n_points"])
    samples = force_vs_distance(sc, ds, _spec(config), db, workers=config["workers"])
    weight = 0.0
    if db[sc.plate1].density is not None:
        weight = net_weight(DiskSpec.from_scenario(sc, db), db[sc.medium].density or 0.0)
    rows = [(s.d, s.force, s.error_estimate, s.force + weight) for s in samples]
    return Table(["d_m", "force_N", "error_N", "net_force_N"], rows,
                 [f"net weight of disk: {weight:.9e} N"])


def cmd_equilibrium(config, db):
    sc = _scenario(config, db)
    bracket = (config["d_min_m"], config["d_max_m"])
    d_star = equilibrium_distance(sc, _spec(config), db, bracket=bracket)
    weight = net_weight(DiskSpec.from_scenario(sc, db), db[sc.medium].density or 0.0)
    return Table(["d_star_m", "net_weight_N"], [(d_star, weight)])


def cmd_dynamics(config, db):
    sc = _scenario(config, db)
    a = config["amplitude_n_m"]
    notes = []
    if a is None:
        fine = torque_vs_theta(sc, np.linspace(0.0, math.pi, 9), _spec(config), db)
        a = fit_sin2theta(fine).a
        notes.append(f"amplitude from sin2theta fit at d={sc.d:.6e} m: {a:.9e} N m")
    disk = DiskSpec.from_scenario(sc, db)
    traj = rotate_disk(sc.theta, a, disk, sc.d, config["t_end_s"], config["mode"],
                       eta=config["viscosity_pa_s"], n_samples=config["n_points"])
    return Table(["t_s", "theta_rad", "theta_dot_rad_s"], traj.samples, notes)


def cmd_oracle(config, db):
    sc = _scenario(config, db)
    p1, p2, med = db[sc.plate1], db[sc.plate2], db[sc.medium]
    rows = []
    for res in (omega_bar_numeric(p1, p2, med), omega_bar_closed(p1, p2, med)):
        m = torque_nonretarded(sc.theta, sc.d, sc.area, res.omega_bar)
        rows.append((res.method, res.omega_bar, res.error_estimate, m))
    return Table(["method", "omega_bar_rad_s", "error_rad_s", "torque_nonretarded_N_m"], rows)


def cmd_sensitivity(config, db):
    sc = _scenario(config, db)
    variants = {name: {sc.plate2: db[name]} for name in config["variants"]}
    rows = sensitivity_scan(sc, variants, _spec(config), db)
    return Table(["variant", "torque_N_m", "force_N", "torque_rel_change", "force_rel_change"],
                 [(r.variant, r.torque, r.force, r.torque_rel_change, r.force_rel_change)
                  for r in rows])


COMMANDS = {
    "eps-table": cmd_eps_table,
    "torque-scan": cmd_torque_scan,
    "force-scan": cmd_force_scan,
    "equilibrium": cmd_equilibrium,
    "dynamics": cmd_dynamics,
    "oracle": cmd_oracle,
    "sensitivity": cmd_sensitivity,
}

# keys that only affect where/how output is written, not what is computed
_OUTPUT_KEYS = {"out", "format", "no_timestamp", "source"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--materials", help="JSON material file merged over the bundled table")
    common.add_argument("--plate1", default="quartz", help="disk material (default: quartz)")
    common.add_argument("--plate2", default="BaTiO3", help="plate material (default: BaTiO3)")
    common.add_argument("--medium", default="vacuum", help="gap medium (default: vacuum)")
    common.add_argument("--distance-m", type=float, default=100e-9)
    common.add_argument("--theta-rad", type=float, default=math.pi / 4)
    common.add_argument("--temperature-k", type=float, default=300.0)
    common.add_argument("--radius-m", type=float, default=20e-6)
    common.add_argument("--thickness-m", type=float, default=20e-6)
    common.add_argument("--rel-tol", type=float, default=1e-6)
    common.add_argument("--max-matsubara", type=int, default=2000)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the generation time so reruns are byte-identical")

    parser = argparse.ArgumentParser(prog="casimir-torque",
                                     description="Casimir-Lifshitz torque between birefringent plates")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eps-table", parents=[common], help="permittivities on an imaginary-frequency grid")
    p.add_argument("--names", nargs="*", default=None, help="materials (default: all)")
    p.add_argument("--xi-min-rad-s", type=float, default=1e12)
    p.add_argument("--xi-max-rad-s", type=float, default=1e18)
    p.add_argument("--n-points", type=int, default=121)
    p.add_argument("--crossover", nargs=2, metavar=("A", "B"), default=None,
                   help="report where the averaged permittivities of A and B cross")

    p = sub.add_parser("torque-scan", parents=[common], help="torque versus angle")
    p.add_argument("--n-theta", type=int, default=17)

    for name, lo, hi, n in (("force-scan", 2e-9, 200e-9, 12), ("equilibrium", 5e-9, 2e-6, None)):
        p = sub.add_parser(name, parents=[common],
                           help="force versus distance" if n else "float height of the disk")
        p.add_argument("--d-min-m", type=float, default=lo)
        p.add_argument("--d-max-m", type=float, default=hi)
        if n:
            p.add_argument("--n-points", type=int, default=n)

    p = sub.add_parser("dynamics", parents=[common], help="relaxation of the angle in time")
    p.add_argument("--amplitude-n-m", type=float, default=None,
                   help="torque amplitude a; fitted at --distance-m if omitted")
    p.add_argument("--t-end-s", type=float, default=600.0)
    p.add_argument("--mode", choices=("full", "quasi_static"), default="full")
    p.add_argument("--viscosity-pa-s", type=float, default=1.2e-3)
    p.add_argument("--n-points", type=int, default=201)

    sub.add_parser("oracle", parents=[common], help="non-retarded characteristic frequency and torque")

    p = sub.add_parser("sensitivity", parents=[common],
                       help="torque and force change when plate2 is swapped for variants")
    p.add_argument("--variants", nargs="+", default=["BaTiO3-wIR-0.7e14", "BaTiO3-wIR-1.0e14"])

    p = sub.add_parser("rerun", help="repeat the computation recorded in an output file's header")
    p.add_argument("source", help="CSV or JSON output of an earlier run")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--no-timestamp", action="store_true")
    return parser


def read_config(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return json.loads(text)["config"]
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            return json.loads(line[len(CONFIG_PREFIX):])
    raise ConfigError(f"{path}: no embedded configuration found")


def run(config: dict, out: str | None, fmt: str, timestamp: bool) -> None:
    db = _database(config)
    table = COMMANDS[config["command"]](config, db)
    text = render(table, config, fmt, timestamp)
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            config = read_config(args.source)
            fmt = args.format or ("json" if args.source.endswith(".json") else "csv")
        else:
            config = {k: v for k, v in vars(args).items() if k not in _OUTPUT_KEYS}
            fmt = args.format
        if config.get("command") not in COMMANDS:
            raise ConfigError(f"unknown command {config.get('command')!r}")
        run(config, args.out, fmt, not args.no_timestamp)
    except (ConfigError, MaterialError, UnknownMaterialError, KeyError, ValueError) as exc:
        print(f"casimir-torque: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, TruncationError, NoLevitationError, IntegrationError,
            OmegaBarConvergenceError, ArithmeticError) as exc:
        print(f"casimir-torque: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"casimir-torque: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
