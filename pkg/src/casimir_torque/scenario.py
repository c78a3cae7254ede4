from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Scenario:
    """Two uniaxial plates facing each other across an isotropic gap.

    ``plate1`` is the disk (optical axis along x); ``plate2`` is the large
    plate, its axis rotated in-plane by ``theta``. Distances are in metres,
    angles in radians, temperature in kelvin.
    """

    plate1: str = "quartz"
    plate2: str = "BaTiO3"
    medium: str = "vacuum"
    d: float = 100e-9
    theta: float = math.pi / 4
    T: float = 300.0
    R: float = 20e-6
    h: float = 20e-6

    def __post_init__(self):
        for name in ("d", "T", "R", "h"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"scenario field {name} must be positive, got {value}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")

    @property
    def area(self) -> float:
        return math.pi * self.R**2

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
