"""Physical constants used throughout the package (CODATA 2018, SI)."""

CONSTANTS_VERSION = "CODATA-2018"

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
C_LIGHT = 299792458.0  # m/s
G_ACCEL = 9.81  # m/s^2

ETHANOL_VISCOSITY = 1.2e-3  # Pa s


def as_dict() -> dict:
    return {
        "version": CONSTANTS_VERSION,
        "hbar_J_s": HBAR,
        "k_B_J_K": K_B,
        "c_m_s": C_LIGHT,
        "g_m_s2": G_ACCEL,
    }
