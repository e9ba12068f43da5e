"""Conversion between natural units (hbar = mu_B = 1, B in tesla) and lab units."""
from __future__ import annotations

import math

from scipy import constants

# mu_B * 1 T expressed in meV
ENERGY_UNIT_MEV = constants.physical_constants["Bohr magneton in eV/T"][0] * 1e3
# hbar / (mu_B * 1 T) expressed in picoseconds
TIME_UNIT_PS = constants.hbar / constants.physical_constants["Bohr magneton"][0] * 1e12


def mev_to_natural(j_mev: float) -> float:
    return j_mev / ENERGY_UNIT_MEV


def natural_to_mev(j: float) -> float:
    return j * ENERGY_UNIT_MEV


def natural_to_ps(t: float) -> float:
    return t * TIME_UNIT_PS


def ps_to_natural(t_ps: float) -> float:
    return t_ps / TIME_UNIT_PS


def omega_to_ghz(omega: float) -> float:
    """Angular frequency (per natural time unit) to ordinary frequency in GHz."""
    return omega / (2 * math.pi) / TIME_UNIT_PS * 1e3


def ghz_to_omega(f_ghz: float) -> float:
    return f_ghz * 1e-3 * TIME_UNIT_PS * 2 * math.pi
