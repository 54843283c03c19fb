"""Voigt line-shape evaluation and multi-peak spectral fitting.

A measured micro-photoluminescence line is modeled as a Lorentzian
(homogeneous linewidth) convolved with a Gaussian (spectrometer response).
That convolution is the Voigt profile, evaluated here through the Faddeeva
function (`scipy.special.voigt_profile`); a pseudo-Voigt sum would bias the
recovered Lorentzian widths and is deliberately not used.

Fitting is damped least squares (trust-region Levenberg-Marquardt) over
{center, lorentz_fwhm, area} per peak plus a constant baseline.  The Gaussian
width is usually clamped to the known instrument resolution so that the
Lorentzian component carries all the physics (Q factor, cavity decay rate).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks
from scipy.special import voigt_profile

from .constants import HC_UEV_NM

Array = np.ndarray

_GAUSS_SIGMA_PER_FWHM = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

AXIS_UNITS = ("ueV", "eV", "nm")


@dataclass(frozen=True)
class VoigtPeak:
    """One Voigt component, area-normalized.

    Attributes
    ----------
    center : float
        Line center, in the same units as the spectrum axis (micro-eV after
        internal conversion).
    lorentz_fwhm : float
        Full width at half maximum of the Lorentzian part.
    gauss_fwhm : float
        Full width at half maximum of the Gaussian part.
    area : float
        Integrated intensity of the component.
    """

    center: float
    lorentz_fwhm: float
    gauss_fwhm: float
    area: float = 1.0

    def validate(self) -> None:
        if not math.isfinite(self.center):
            raise ValueError(f"peak center must be finite, got {self.center!r}")
        if self.lorentz_fwhm < 0.0 or self.gauss_fwhm < 0.0:
            raise ValueError("peak widths must be non-negative")
        if self.lorentz_fwhm == 0.0 and self.gauss_fwhm == 0.0:
            raise ValueError("peak needs a nonzero Lorentzian or Gaussian width")
        if self.area < 0.0:
            raise ValueError(f"peak area must be non-negative, got {self.area!r}")


@dataclass(frozen=True)
class Spectrum:
    """Sampled intensity spectrum with a tagged axis unit."""

    axis: Array
    intensity: Array
    axis_unit: str = "ueV"

    def validate(self) -> None:
        axis = np.asarray(self.axis, dtype=float)
        inten = np.asarray(self.intensity, dtype=float)
        if axis.ndim != 1 or inten.ndim != 1 or axis.size != inten.size:
            raise ValueError("axis and intensity must be 1-D arrays of equal length")
        if axis.size < 4:
            raise ValueError("spectrum needs at least 4 samples")
        if self.axis_unit not in AXIS_UNITS:
            raise ValueError(f"axis_unit must be one of {AXIS_UNITS}, got {self.axis_unit!r}")

    def to_uev(self) -> "Spectrum":
        """Return the spectrum with its axis converted to micro-eV."""
        self.validate()
        axis = np.asarray(self.axis, dtype=float)
        if self.axis_unit == "ueV":
            return Spectrum(axis, np.asarray(self.intensity, dtype=float), "ueV")
        if self.axis_unit == "eV":
            return Spectrum(axis * 1.0e6, np.asarray(self.intensity, dtype=float), "ueV")
        # nm -> micro-eV; the axis reverses order, keep samples paired.
        energy = HC_UEV_NM / axis
        order = np.argsort(energy)
        return Spectrum(energy[order], np.asarray(self.intensity, dtype=float)[order], "ueV")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a multi-peak Voigt fit (all quantities in micro-eV)."""

    peaks: tuple[VoigtPeak, ...]
    baseline: float
    converged: bool
    cost: float
    residual_rms: float
    message: str = ""

    def sorted_by_center(self) -> tuple[VoigtPeak, ...]:
        return tuple(sorted(self.peaks, key=lambda p: p.center))


def voigt_eval(x: Array | float, peak: VoigtPeak) -> Array | float:
    """Evaluate one area-normalized Voigt component.

    Parameters
    ----------
    x : array_like
        Points at which to evaluate, same units as ``peak.center``.
    peak : VoigtPeak
        Line parameters; ``gauss_fwhm = 0`` gives a pure Lorentzian and
        ``lorentz_fwhm = 0`` a pure Gaussian (both handled exactly).

    Returns
    -------
    ndarray or float
        Intensity with integral equal to ``peak.area``.
    """
    peak.validate()
    sigma = peak.gauss_fwhm * _GAUSS_SIGMA_PER_FWHM
    gamma = 0.5 * peak.lorentz_fwhm
    xs = np.asarray(x, dtype=float)
    out = peak.area * voigt_profile(xs - peak.center, sigma, gamma)
    if np.isscalar(x):
        return float(out)
    return out


def model_spectrum(x: Array, peaks: Sequence[VoigtPeak], baseline: float = 0.0) -> Array:
    """Sum of Voigt components plus a constant baseline."""
    xs = np.asarray(x, dtype=float)
    total = np.full_like(xs, float(baseline))
    for peak in peaks:
        total += voigt_eval(xs, peak)
    return total


def _initial_guess(axis: Array, intensity: Array, n_peaks: int, gauss_fwhm: float) -> tuple[list[float], float]:
    """Heuristic starting point: highest local maxima, ties toward lower energy."""
    base = float(np.min(intensity))
    span = float(axis[-1] - axis[0])
    step = span / (axis.size - 1)
    residual = intensity - base
    idx, props = find_peaks(residual, prominence=0.05 * float(np.max(residual)))
    if idx.size < n_peaks:
        idx, props = find_peaks(residual)
    if idx.size == 0:
        idx = np.array([int(np.argmax(residual))])
        props = {"prominences": residual[idx]}
    heights = residual[idx]
    # Stable sort: descending height, ascending energy breaks ties.
    order = np.lexsort((axis[idx], -heights))
    chosen = np.sort(idx[order[:n_peaks]])
    centers = list(axis[chosen])
    while len(centers) < n_peaks:
        centers.append(axis[int(np.argmax(residual))] + step * len(centers))
    width0 = max(4.0 * step, gauss_fwhm if gauss_fwhm > 0 else 4.0 * step)
    guess: list[float] = []
    for c in centers[:n_peaks]:
        height = float(np.interp(c, axis, residual))
        area0 = max(height, 1e-30) * width0 * 0.5 * math.pi
        guess.extend([float(c), width0, area0])
    return guess, base


def fit_spectrum(
    spectrum: Spectrum,
    n_peaks: int,
    fixed_gauss_fwhm: float | None = None,
    initial: Sequence[VoigtPeak] | None = None,
    max_iter: int = 500,
) -> FitResult:
    """Fit ``n_peaks`` Voigt components plus a constant baseline.

    Parameters
    ----------
    spectrum : Spectrum
        Input data; a nm axis is converted to micro-eV before fitting so that
        recovered widths are energy-domain FWHMs.
    n_peaks : int
        Number of components to fit.
    fixed_gauss_fwhm : float, optional
        When given, every component's Gaussian FWHM is clamped to this value
        (the instrument resolution).  Otherwise the Gaussian width is a free
        shared parameter.
    initial : sequence of VoigtPeak, optional
        Explicit starting components; defaults to automatic peak picking.
    max_iter : int
        Iteration cap for the trust-region optimizer.

    Returns
    -------
    FitResult
        ``converged`` is False (never an exception) for degenerate data such
        as an all-zero spectrum.
    """
    if n_peaks < 1:
        raise ValueError(f"n_peaks must be >= 1, got {n_peaks}")
    if fixed_gauss_fwhm is not None and fixed_gauss_fwhm < 0.0:
        raise ValueError("fixed_gauss_fwhm must be non-negative")
    spec = spectrum.to_uev()
    axis = np.asarray(spec.axis, dtype=float)
    inten = np.asarray(spec.intensity, dtype=float)
    order = np.argsort(axis)
    axis, inten = axis[order], inten[order]

    if not np.all(np.isfinite(inten)) or float(np.ptp(inten)) == 0.0:
        return FitResult(
            peaks=(),
            baseline=float(inten[0]) if inten.size else 0.0,
            converged=False,
            cost=0.0,
            residual_rms=0.0,
            message="degenerate spectrum: intensity is constant or non-finite",
        )

    free_gauss = fixed_gauss_fwhm is None
    gauss0 = float(np.median(np.diff(axis))) * 4.0 if free_gauss else float(fixed_gauss_fwhm)

    if initial is not None:
        if len(initial) != n_peaks:
            raise ValueError("initial must supply exactly n_peaks components")
        params = []
        for p in initial:
            params.extend([p.center, p.lorentz_fwhm, p.area])
        base0 = float(np.min(inten))
    else:
        params, base0 = _initial_guess(axis, inten, n_peaks, gauss0)
    params.append(base0)
    if free_gauss:
        params.append(gauss0)

    span = float(axis[-1] - axis[0])
    lo: list[float] = []
    hi: list[float] = []
    for _ in range(n_peaks):
        lo.extend([float(axis[0]), 0.0, 0.0])
        hi.extend([float(axis[-1]), 4.0 * span, np.inf])
    lo.append(-np.inf)
    hi.append(np.inf)
    if free_gauss:
        lo.append(0.0)
        hi.append(4.0 * span)
    x0 = np.clip(np.asarray(params, dtype=float), lo, hi)

    def unpack(vec: Array) -> tuple[tuple[VoigtPeak, ...], float]:
        gw = vec[-1] if free_gauss else float(fixed_gauss_fwhm)
        base = vec[3 * n_peaks]
        peaks = []
        for m in range(n_peaks):
            c, lw, area = vec[3 * m : 3 * m + 3]
            # Keep the component evaluable even when the optimizer probes
            # the lw = gw = 0 corner.
            if lw <= 0.0 and gw <= 0.0:
                lw = 1e-12
            peaks.append(VoigtPeak(float(c), float(lw), float(gw), float(area)))
        return tuple(peaks), float(base)

    def residuals(vec: Array) -> Array:
        peaks, base = unpack(vec)
        return model_spectrum(axis, peaks, base) - inten

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = least_squares(
            residuals,
            x0,
            bounds=(lo, hi),
            method="trf",
            ftol=1e-12,
            xtol=1e-12,
            gtol=1e-12,
            max_nfev=max_iter * (x0.size + 1),
        )

    peaks, baseline = unpack(result.x)
    rms = float(np.sqrt(np.mean(result.fun**2)))
    return FitResult(
        peaks=tuple(sorted(peaks, key=lambda p: p.center)),
        baseline=baseline,
        converged=bool(result.success),
        cost=float(result.cost),
        residual_rms=rms,
        message=str(result.message),
    )


def q_from_fit(center_uev: float, lorentz_fwhm_uev: float) -> float:
    """Quality factor Q = E / Lorentzian FWHM, both in micro-eV.

    Returns ``math.inf`` when the fitted Lorentzian width is zero
    (resolution-limited line).
    """
    if center_uev <= 0.0:
        raise ValueError(f"center energy must be positive, got {center_uev!r}")
    if lorentz_fwhm_uev < 0.0:
        raise ValueError("lorentz_fwhm must be non-negative")
    if lorentz_fwhm_uev == 0.0:
        return math.inf
    return center_uev / lorentz_fwhm_uev


_CSV_UNIT_COLUMNS = {
    "energy_uev": "ueV",
    "energy_ev": "eV",
    "wavelength_nm": "nm",
}


def read_spectrum_csv(path: str | Path) -> Spectrum:
    """Read a two-column spectrum CSV; the axis unit comes from the header.

    Accepted headers: ``energy_uev,intensity``, ``energy_ev,intensity``,
    ``wavelength_nm,intensity``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty spectrum file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0] not in _CSV_UNIT_COLUMNS or header[1] != "intensity":
        raise ValueError(
            f"{path}: expected header like 'energy_uev,intensity', got {rows[0]!r}"
        )
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    return Spectrum(data[:, 0], data[:, 1], _CSV_UNIT_COLUMNS[header[0]])


def write_spectrum_csv(path: str | Path, spectrum: Spectrum) -> None:
    """Write a spectrum in the same two-column format read_spectrum_csv expects."""
    spectrum.validate()
    unit_col = {v: k for k, v in _CSV_UNIT_COLUMNS.items()}[spectrum.axis_unit]
    lines = [f"{unit_col},intensity"]
    for x, y in zip(spectrum.axis, spectrum.intensity):
        lines.append(f"{float(x)!r},{float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
