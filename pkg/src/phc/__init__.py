"""Photonic-crystal nanocavity toolkit.

Design generation, FDTD simulation, resonance/mode-volume extraction,
cavity-QED spectra, and spectral fitting for slab nanocavities.
"""

__version__ = "0.1.0"

from . import cavity, cqed, fdtd, geometry, modes, specfit, svgplot  # noqa: F401
from .constants import HC_UEV_NM, photon_energy_uev, photon_wavelength_nm  # noqa: F401
