"""Shared, expensive computations (each is a few tens of seconds)."""
import math

import numpy as np
import pytest

from casimir_torque.experiment import equilibrium_distance
from casimir_torque.observables import fit_sin2theta, torque_vs_theta
from casimir_torque.scenario import Scenario


def ethanol_scenario(disk: str) -> Scenario:
    return Scenario(disk, "BaTiO3", "ethanol")


@pytest.fixture(scope="session")
def float_heights():
    return {disk: equilibrium_distance(ethanol_scenario(disk)) for disk in ("quartz", "calcite")}


@pytest.fixture(scope="session")
def calcite_amplitude(float_heights):
    sc = ethanol_scenario("calcite").replace(d=float_heights["calcite"])
    return fit_sin2theta(torque_vs_theta(sc, np.linspace(0.0, math.pi, 9))).a
