"""Dielectric response at imaginary frequency and the material database.

Permittivities follow the damped-oscillator (Ninham-Parsegian) form

    eps(i xi) = 1 + sum_j C_j / (1 + (xi/w_j)^2 + g_j xi/w_j)

A uniaxial material carries one such model along its optical axis and one
across it; isotropic media (liquids, vacuum) use the same model for both.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Iterator, Mapping

import numpy as np

from .constants import HBAR, K_B


class MaterialError(ValueError):
    """Base class for material-database problems."""


class MaterialParseError(MaterialError):
    pass


class DuplicateMaterialError(MaterialError):
    pass


class MissingFieldError(MaterialError):
    pass


class UnknownMaterialError(KeyError):
    def __str__(self) -> str:
        return f"unknown material {self.args[0]!r}"


@dataclass(frozen=True)
class Oscillator:
    C: float
    omega: float
    g: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"oscillator strength must be > 0, got {self.C}")
        if not self.omega > 0:
            raise ValueError(f"oscillator frequency must be > 0, got {self.omega}")
        if not self.g >= 0:
            raise ValueError(f"oscillator damping must be >= 0, got {self.g}")


@dataclass(frozen=True)
class OscillatorModel:
    oscillators: tuple[Oscillator, ...] = ()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "OscillatorModel":
        """Build from ``(C, omega)`` or ``(C, omega, g)`` tuples."""
        return cls(tuple(Oscillator(*p) for p in pairs))

    @property
    def static(self) -> float:
        return 1.0 + sum(o.C for o in self.oscillators)

    def __call__(self, xi):
        return eval_epsilon(self, xi)


VACUUM_MODEL = OscillatorModel()


@dataclass(frozen=True)
class UniaxialMaterial:
    name: str
    eps_parallel: OscillatorModel
    eps_perp: OscillatorModel
    density: float | None = None

    @classmethod
    def isotropic(cls, name: str, model: OscillatorModel, density: float | None = None):
        return cls(name, model, model, density)

    @property
    def is_isotropic(self) -> bool:
        return self.eps_parallel == self.eps_perp

    def eps(self, xi) -> tuple:
        """Return ``(eps_parallel, eps_perp)`` at imaginary frequency ``xi``."""
        return eval_epsilon(self.eps_parallel, xi), eval_epsilon(self.eps_perp, xi)

    def eps_average(self, xi):
        par, perp = self.eps(xi)
        return 0.5 * (par + perp)


@dataclass(frozen=True)
class MaterialDatabase(Mapping):
    entries: Mapping[str, UniaxialMaterial] = field(default_factory=dict)

    def __getitem__(self, name: str) -> UniaxialMaterial:
        try:
            return self.entries[name]
        except KeyError:
            raise UnknownMaterialError(name) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def with_overrides(self, overrides: Mapping[str, UniaxialMaterial]) -> "MaterialDatabase":
        """Copy of the database with some names re-bound to other materials."""
        for key in overrides:
            self[key]
        entries = dict(self.entries)
        entries.update(overrides)
        return MaterialDatabase(entries)


def eval_epsilon(model: OscillatorModel, xi):
    """Permittivity of ``model`` at imaginary angular frequency ``xi`` (rad/s)."""
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0) or np.any(np.isnan(xi_arr)):
        raise ValueError("imaginary frequency must be >= 0")
    eps = np.ones_like(xi_arr)
    for osc in model.oscillators:
        x = xi_arr / osc.omega
        eps = eps + osc.C / (1.0 + x * x + osc.g * x)
    return float(eps) if eps.ndim == 0 else eps


def matsubara_xi(n: int, T: float) -> float:
    """Matsubara frequency 2 pi k_B T n / hbar in rad/s."""
    if not T > 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    if n < 0:
        raise ValueError(f"Matsubara index must be >= 0, got {n}")
    return 2.0 * np.pi * K_B * T * n / HBAR


# -- file format -------------------------------------------------------------

def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise MissingFieldError(f"{where}: missing required field {key!r}")
    return obj[key]


def _parse_model(obj, where: str) -> OscillatorModel:
    if not isinstance(obj, dict):
        raise MaterialParseError(f"{where}: expected an object")
    oscs = _require(obj, "oscillators", where)
    if not isinstance(oscs, list):
        raise MaterialParseError(f"{where}.oscillators: expected an array")
    out = []
    for i, o in enumerate(oscs):
        w = f"{where}.oscillators[{i}]"
        if not isinstance(o, dict):
            raise MaterialParseError(f"{w}: expected an object")
        try:
            out.append(Oscillator(float(_require(o, "C", w)),
                                  float(_require(o, "omega_rad_s", w)),
                                  float(o.get("g", 0.0))))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, MaterialError):
                raise
            raise MaterialParseError(f"{w}: {exc}") from None
    return OscillatorModel(tuple(out))


def _parse_entry(obj, index: int) -> UniaxialMaterial:
    where = f"entry[{index}]"
    if not isinstance(obj, dict):
        raise MaterialParseError(f"{where}: expected an object")
    name = _require(obj, "name", where)
    if not isinstance(name, str) or not name:
        raise MaterialParseError(f"{where}: name must be a non-empty string")
    where = f"{where} ({name})"
    density = obj.get("density_kg_m3")
    if density is not None:
        try:
            density = float(density)
        except (TypeError, ValueError):
            raise MaterialParseError(f"{where}: density_kg_m3 is not a number") from None
    if "isotropic" in obj:
        if "parallel" in obj or "perpendicular" in obj:
            raise MaterialParseError(f"{where}: give either 'isotropic' or the parallel/perpendicular pair")
        model = _parse_model(obj["isotropic"], f"{where}.isotropic")
        return UniaxialMaterial(name, model, model, density)
    par = _parse_model(_require(obj, "parallel", where), f"{where}.parallel")
    perp = _parse_model(_require(obj, "perpendicular", where), f"{where}.perpendicular")
    return UniaxialMaterial(name, par, perp, density)


def load_material_db(source: bytes | str) -> MaterialDatabase:
    """Parse a material database document (UTF-8 JSON array)."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MaterialParseError(f"not UTF-8: {exc}") from None
    if not source.strip():
        return MaterialDatabase({})
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise MaterialParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise MaterialParseError("top level must be an array of materials")
    entries: dict[str, UniaxialMaterial] = {}
    for i, obj in enumerate(doc):
        mat = _parse_entry(obj, i)
        if mat.name in entries:
            raise DuplicateMaterialError(f"duplicate material name {mat.name!r}")
        entries[mat.name] = mat
    return MaterialDatabase(entries)


def _dump_model(model: OscillatorModel) -> dict:
    return {"oscillators": [{"C": o.C, "omega_rad_s": o.omega, "g": o.g}
                            for o in model.oscillators]}


def dump_material_db(db: MaterialDatabase) -> bytes:
    """Serialize ``db`` to the JSON file format; floats round-trip exactly."""
    doc = []
    for mat in db.values():
        obj: dict = {"name": mat.name}
        if mat.density is not None:
            obj["density_kg_m3"] = mat.density
        if mat.is_isotropic:
            obj["isotropic"] = _dump_model(mat.eps_parallel)
        else:
            obj["parallel"] = _dump_model(mat.eps_parallel)
            obj["perpendicular"] = _dump_model(mat.eps_perp)
        doc.append(obj)
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


@lru_cache(maxsize=1)
def default_database() -> MaterialDatabase:
    """The bundled database with the two-oscillator parameters of the study."""
    data = resources.files("casimir_torque").joinpath("data/materials.json").read_bytes()
    return load_material_db(data)
