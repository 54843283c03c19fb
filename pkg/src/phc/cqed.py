"""Coupled quantum-dot / cavity-mode model (dissipative Jaynes-Cummings).

The one-excitation sector of an emitter-cavity system with decay maps onto
the non-Hermitian 2x2 Hamiltonian (energies in micro-eV)

    H = [[E_qd - i*gamma/2,  g],
         [g,                 E_cav - i*kappa/2]]

whose complex eigenvalues give polariton positions (real part) and
linewidths (-2 * imaginary part).  At zero detuning the vacuum Rabi
splitting is VRS = 2*sqrt(g^2 - ((kappa - gamma)/4)^2), which reduces to the
familiar 2*sqrt(g^2 - (kappa/4)^2) for a long-lived emitter.

Also provided: emission spectra as sums of Voigt lines (cavity Lorentzians
convolved analytically with the spectrometer Gaussian), anti-crossing
detuning sweeps, the normalized g_max comparison across cavity designs
(g scales with f / sqrt(V)), and projection of a reference coupling rate
onto another cavity geometry.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .specfit import Spectrum, VoigtPeak, model_spectrum

Array = np.ndarray


@dataclass(frozen=True)
class JCParams:
    """Emitter-cavity parameters, all in micro-eV.

    ``detuning_uev`` is E_qd - E_cavity; ``e_cavity_uev`` anchors the
    absolute energy scale (set it to 0 to work in relative energies).
    """

    g_uev: float
    kappa_uev: float
    gamma_uev: float = 0.0
    detuning_uev: float = 0.0
    e_cavity_uev: float = 0.0

    def validate(self) -> None:
        if self.g_uev < 0.0:
            raise ValueError(f"coupling g must be non-negative, got {self.g_uev!r}")
        if self.kappa_uev < 0.0 or self.gamma_uev < 0.0:
            raise ValueError("linewidths kappa and gamma must be non-negative")
        for name in ("g_uev", "kappa_uev", "gamma_uev", "detuning_uev", "e_cavity_uev"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def hamiltonian(params: JCParams) -> Array:
    """The non-Hermitian 2x2 matrix in the (QD, cavity) basis."""
    params.validate()
    e_qd = params.e_cavity_uev + params.detuning_uev
    return np.array(
        [
            [e_qd - 0.5j * params.gamma_uev, params.g_uev],
            [params.g_uev, params.e_cavity_uev - 0.5j * params.kappa_uev],
        ],
        dtype=complex,
    )


def polariton_eigenvalues(params: JCParams) -> tuple[complex, complex]:
    """Complex polariton energies (E_upper, E_lower).

    Closed form: mean(H) +- sqrt(g^2 + (delta/2 - i*(gamma - kappa)/4)^2),
    branches ordered by real part (upper first).  Real parts are peak
    positions; linewidth FWHM of each branch is -2*Im.
    """
    params.validate()
    e_qd = params.e_cavity_uev + params.detuning_uev
    mean = 0.5 * (e_qd + params.e_cavity_uev) - 0.25j * (params.gamma_uev + params.kappa_uev)
    half = 0.5 * params.detuning_uev - 0.25j * (params.gamma_uev - params.kappa_uev)
    root = cmath.sqrt(params.g_uev**2 + half * half)
    upper, lower = mean + root, mean - root
    if upper.real < lower.real:
        upper, lower = lower, upper
    return upper, lower


def linewidth_fwhm(eigenvalue: complex) -> float:
    """FWHM in micro-eV of a complex polariton energy."""
    return -2.0 * eigenvalue.imag


def g_from_vrs(vrs_uev: float, kappa_uev: float, gamma_uev: float = 0.0) -> float:
    """Coupling rate from an observed vacuum Rabi splitting.

    Inverts VRS = 2*sqrt(g^2 - ((kappa - gamma)/4)^2):

        g = sqrt((VRS/2)^2 + ((kappa - gamma)/4)^2)
    """
    if vrs_uev <= 0.0:
        raise ValueError(f"splitting must be positive, got {vrs_uev!r}")
    if kappa_uev < 0.0 or gamma_uev < 0.0:
        raise ValueError("linewidths must be non-negative")
    quarter = 0.25 * (kappa_uev - gamma_uev)
    return math.hypot(0.5 * vrs_uev, quarter)


def vrs_from_g(g_uev: float, kappa_uev: float, gamma_uev: float = 0.0) -> float:
    """Vacuum Rabi splitting 2*sqrt(g^2 - ((kappa - gamma)/4)^2).

    Raises ValueError when g is at or below the exceptional point
    |kappa - gamma|/4 (no real splitting).
    """
    if g_uev < 0.0 or kappa_uev < 0.0 or gamma_uev < 0.0:
        raise ValueError("rates must be non-negative")
    quarter = 0.25 * abs(kappa_uev - gamma_uev)
    if g_uev <= quarter:
        raise ValueError(
            f"g = {g_uev} ueV does not exceed |kappa - gamma|/4 = {quarter} ueV: "
            "no real splitting"
        )
    return 2.0 * math.sqrt(g_uev**2 - quarter**2)


def strong_coupling(
    g_uev: float, kappa_uev: float, gamma_uev: float = 0.0
) -> tuple[bool, float]:
    """Whether the system is strongly coupled, plus the figure of merit g/kappa.

    The criterion is g > |kappa - gamma|/4 (a real splitting exists); for a
    slow emitter this is the usual g > kappa/4.  Equality counts as not
    strongly coupled.
    """
    if g_uev < 0.0 or kappa_uev < 0.0 or gamma_uev < 0.0:
        raise ValueError("rates must be non-negative")
    if kappa_uev == 0.0:
        raise ValueError("kappa must be positive to form g/kappa")
    return g_uev > 0.25 * abs(kappa_uev - gamma_uev), g_uev / kappa_uev


def emission_spectrum(
    params: JCParams,
    axis_uev: Array,
    resolution_fwhm_uev: float = 21.0,
    include_bare_cavity: bool = False,
    weights: Sequence[float] | None = None,
) -> Spectrum:
    """Model PL spectrum: polariton lines (+ optional bare-cavity line).

    Each component is a Lorentzian at the complex-eigenvalue position with
    FWHM -2*Im(E), convolved with the Gaussian spectrometer response of FWHM
    ``resolution_fwhm_uev``; the convolution is done analytically, so each
    component is an area-normalized Voigt scaled by its weight.  ``weights``
    orders as (upper, lower[, bare cavity]) and defaults to equal weights.
    """
    params.validate()
    if resolution_fwhm_uev < 0.0:
        raise ValueError("resolution FWHM must be non-negative")
    upper, lower = polariton_eigenvalues(params)
    centers = [upper.real, lower.real]
    lorentz = [linewidth_fwhm(upper), linewidth_fwhm(lower)]
    if include_bare_cavity:
        centers.append(params.e_cavity_uev)
        lorentz.append(params.kappa_uev)
    if weights is None:
        weights = [1.0] * len(centers)
    if len(weights) != len(centers):
        raise ValueError(f"expected {len(centers)} weights, got {len(weights)}")
    if any(w < 0.0 for w in weights):
        raise ValueError("weights must be non-negative")
    peaks = [
        VoigtPeak(center=c, lorentz_fwhm=lw, gauss_fwhm=resolution_fwhm_uev, area=w)
        for c, lw, w in zip(centers, lorentz, weights)
    ]
    axis = np.asarray(axis_uev, dtype=float)
    return Spectrum(axis, model_spectrum(axis, peaks), "ueV")


@dataclass(frozen=True)
class SweepResult:
    """Anti-crossing sweep output; arrays are aligned with ``detunings_uev``."""

    detunings_uev: Array
    upper: Array  # complex eigenvalues, upper branch
    lower: Array
    min_gap_uev: float
    gap_at_detuning_uev: float

    @property
    def upper_fwhm_uev(self) -> Array:
        return -2.0 * self.upper.imag

    @property
    def lower_fwhm_uev(self) -> Array:
        return -2.0 * self.lower.imag


def detuning_sweep(params: JCParams, detunings_uev: Array) -> SweepResult:
    """Polariton branches across a detuning range, with the minimum gap.

    The gap is Re(E_upper) - Re(E_lower); for gamma < kappa and g above the
    exceptional point its minimum sits at zero detuning with value equal to
    the vacuum Rabi splitting.
    """
    params.validate()
    detunings = np.asarray(detunings_uev, dtype=float)
    if detunings.ndim != 1 or detunings.size < 2:
        raise ValueError("detunings must be a 1-D array with at least 2 points")
    upper = np.empty(detunings.size, dtype=complex)
    lower = np.empty(detunings.size, dtype=complex)
    for n, delta in enumerate(detunings):
        up, lo = polariton_eigenvalues(replace(params, detuning_uev=float(delta)))
        upper[n], lower[n] = up, lo
    gaps = upper.real - lower.real
    k = int(np.argmin(gaps))
    return SweepResult(
        detunings_uev=detunings,
        upper=upper,
        lower=lower,
        min_gap_uev=float(gaps[k]),
        gap_at_detuning_uev=float(detunings[k]),
    )


@dataclass(frozen=True)
class CavityRecord:
    """One cavity design: normalized mode volume, Q, and the fraction of the
    maximum field available at the emitter location (1.0 = at antinode)."""

    name: str
    v_norm: float
    q: float
    field_fraction: float = 1.0

    def validate(self) -> None:
        if self.v_norm <= 0.0 or self.q <= 0.0:
            raise ValueError(f"{self.name}: V and Q must be positive")
        if not 0.0 < self.field_fraction <= 1.0:
            raise ValueError(f"{self.name}: field_fraction must be in (0, 1]")


# Published comparison set: mode volumes in (lambda/n)^3 and theoretical Q.
DEFAULT_CAVITY_TABLE: tuple[CavityRecord, ...] = (
    CavityRecord("L4/3", v_norm=0.32, q=8.0e6),
    CavityRecord("H0", v_norm=0.25, q=1.0e6),
    CavityRecord("L3", v_norm=0.95, q=4.2e6),
    CavityRecord("heterostructure", v_norm=1.5, q=1.58e9),
)


def gmax_table(
    records: Sequence[CavityRecord] = DEFAULT_CAVITY_TABLE,
    reference: str | None = None,
    fraction_convention: str = "field",
) -> list[dict]:
    """Relative maximum coupling g_max for each cavity design.

    g scales as field_fraction / sqrt(V); rows are normalized so the
    reference design (by default the largest-V entry, the weakest confiner)
    reads 1.0.  ``fraction_convention`` controls how ``field_fraction`` is
    interpreted: "field" uses it directly, "intensity" takes its square root
    first (for fractions quoted on |E|^2); designs quoted loosely in the
    literature can be compared under both.
    """
    if not records:
        raise ValueError("records must be non-empty")
    if fraction_convention not in ("field", "intensity"):
        raise ValueError(f"unknown fraction_convention {fraction_convention!r}")
    for rec in records:
        rec.validate()
    if reference is None:
        ref = max(records, key=lambda r: r.v_norm)
    else:
        matches = [r for r in records if r.name == reference]
        if not matches:
            raise ValueError(f"reference {reference!r} not among records")
        ref = matches[0]

    def effective_fraction(rec: CavityRecord) -> float:
        return rec.field_fraction if fraction_convention == "field" else math.sqrt(rec.field_fraction)

    ref_g = effective_fraction(ref) / math.sqrt(ref.v_norm)
    rows = []
    for rec in records:
        g_rel = effective_fraction(rec) / math.sqrt(rec.v_norm) / ref_g
        rows.append(
            {
                "name": rec.name,
                "v_norm": rec.v_norm,
                "q": rec.q,
                "field_fraction": rec.field_fraction,
                "g_rel": g_rel,
            }
        )
    return rows


def project_g(
    g_ref_uev: float,
    v_ref: float,
    field_ref: float,
    v_target: float,
    field_target: float = 1.0,
    pol_factor: float = 1.0,
) -> float:
    """Project a measured coupling rate onto another cavity geometry.

    g scales with the local field amplitude and 1/sqrt(V):

        g_target = g_ref * (field_target / field_ref)
                         * sqrt(v_ref / v_target) * pol_factor

    ``pol_factor`` covers systematic amplitude factors such as sqrt(2) for a
    dipole aligned with the cavity polarization instead of averaged over it.
    """
    if g_ref_uev <= 0.0:
        raise ValueError("g_ref must be positive")
    if v_ref <= 0.0 or v_target <= 0.0:
        raise ValueError("mode volumes must be positive")
    if not 0.0 < field_ref <= 1.0 or not 0.0 < field_target <= 1.0:
        raise ValueError("field fractions must be in (0, 1]")
    if pol_factor <= 0.0:
        raise ValueError("pol_factor must be positive")
    return g_ref_uev * (field_target / field_ref) * math.sqrt(v_ref / v_target) * pol_factor
