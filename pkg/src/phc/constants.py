"""Shared physical constants and unit conversions.

All spectroscopic energies in this package are expressed in micro-eV and
wavelengths in nm unless a function says otherwise.  FDTD quantities use
normalized units (c = 1, lengths in units of the lattice constant a), so
frequencies come out in c/a and convert to vacuum wavelength via
lambda_nm = a_nm / (f c/a).
"""

from __future__ import annotations

import math

# h*c expressed in micro-eV * nm (CODATA 1239.84193 eV*nm).
HC_UEV_NM = 1.23984193e9

SQRT3 = math.sqrt(3.0)


def photon_energy_uev(wavelength_nm: float) -> float:
    """Photon energy in micro-eV for a vacuum wavelength in nm."""
    if wavelength_nm <= 0.0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm!r}")
    return HC_UEV_NM / wavelength_nm


def photon_wavelength_nm(energy_uev: float) -> float:
    """Vacuum wavelength in nm for a photon energy in micro-eV."""
    if energy_uev <= 0.0:
        raise ValueError(f"energy must be positive, got {energy_uev!r}")
    return HC_UEV_NM / energy_uev
