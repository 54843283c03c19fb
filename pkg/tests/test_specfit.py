"""Voigt evaluation and multi-peak fitting tests.

Width oracles: a Voigt with zero Gaussian part must reduce exactly to the
Lorentzian closed form, zero Lorentzian part to the Gaussian closed form,
and mixed widths must match the Olivero-Longbothum FWHM approximation
(accurate to 0.02 percent).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phc.constants import HC_UEV_NM
from phc.specfit import (
    FitResult,
    Spectrum,
    VoigtPeak,
    fit_spectrum,
    model_spectrum,
    q_from_fit,
    read_spectrum_csv,
    voigt_eval,
    write_spectrum_csv,
)


def lorentzian(x, center, fwhm, area=1.0):
    g = 0.5 * fwhm
    return area * g / (math.pi * ((x - center) ** 2 + g * g))


def gaussian(x, center, fwhm, area=1.0):
    s = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return area * np.exp(-0.5 * ((x - center) / s) ** 2) / (s * math.sqrt(2.0 * math.pi))


def measured_fwhm(x, y):
    """Width between the half-maximum crossings via linear interpolation."""
    y = np.asarray(y)
    half = y.max() / 2.0
    above = np.nonzero(y >= half)[0]
    lo, hi = above[0], above[-1]

    def cross(i0, i1):
        x0, x1, y0, y1 = x[i0], x[i1], y[i0], y[i1]
        return x0 + (half - y0) * (x1 - x0) / (y1 - y0)

    return cross(hi, hi + 1) - cross(lo, lo - 1)


class TestVoigtEval:
    def test_pure_lorentzian_matches_closed_form(self):
        x = np.linspace(-50, 50, 2001)
        peak = VoigtPeak(center=3.0, lorentz_fwhm=8.0, gauss_fwhm=0.0, area=2.5)
        np.testing.assert_allclose(voigt_eval(x, peak), lorentzian(x, 3.0, 8.0, 2.5), rtol=1e-12)

    def test_pure_gaussian_matches_closed_form(self):
        x = np.linspace(-50, 50, 2001)
        peak = VoigtPeak(center=-2.0, lorentz_fwhm=0.0, gauss_fwhm=10.0, area=0.7)
        np.testing.assert_allclose(voigt_eval(x, peak), gaussian(x, -2.0, 10.0, 0.7), rtol=1e-12)

    def test_area_normalization(self):
        x = np.linspace(-4000, 4000, 400001)
        peak = VoigtPeak(center=0.0, lorentz_fwhm=6.0, gauss_fwhm=21.0, area=3.0)
        integral = np.trapezoid(voigt_eval(x, peak), x)
        # Lorentzian wings fall off as 1/x^2, so a finite window loses a bit.
        assert integral == pytest.approx(3.0, rel=1e-3)

    @pytest.mark.parametrize("fl,fg", [(6.0, 21.0), (40.0, 21.0), (1.0, 1.0), (15.0, 2.0)])
    def test_fwhm_olivero_longbothum(self, fl, fg):
        # f_V ~ 0.5346 f_L + sqrt(0.2166 f_L^2 + f_G^2), accurate to 0.02%
        expected = 0.5346 * fl + math.sqrt(0.2166 * fl * fl + fg * fg)
        span = 6.0 * expected
        x = np.linspace(-span, span, 200001)
        y = voigt_eval(x, VoigtPeak(0.0, fl, fg))
        assert measured_fwhm(x, y) == pytest.approx(expected, rel=5e-4)

    def test_scalar_input_returns_float(self):
        peak = VoigtPeak(0.0, 5.0, 5.0)
        value = voigt_eval(1.5, peak)
        assert isinstance(value, float)

    def test_invalid_peaks_rejected(self):
        with pytest.raises(ValueError):
            voigt_eval(0.0, VoigtPeak(0.0, -1.0, 5.0))
        with pytest.raises(ValueError):
            voigt_eval(0.0, VoigtPeak(0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            voigt_eval(0.0, VoigtPeak(0.0, 1.0, 1.0, area=-2.0))


class TestSpectrum:
    def test_nm_axis_converts_to_uev_and_sorts(self):
        wl = np.array([940.0, 935.0, 930.0, 925.0])
        inten = np.array([1.0, 2.0, 3.0, 4.0])
        spec = Spectrum(axis=wl, intensity=inten, axis_unit="nm").to_uev()
        assert spec.axis_unit == "ueV"
        assert np.all(np.diff(spec.axis) > 0)
        # 925 nm is the highest energy and must keep intensity 4.0
        np.testing.assert_allclose(spec.axis[-1], HC_UEV_NM / 925.0)
        assert spec.intensity[-1] == 4.0

    def test_ev_axis_scales(self):
        spec = Spectrum(axis=np.array([1.0, 2.0, 3.0, 4.0]),
                        intensity=np.ones(4), axis_unit="eV").to_uev()
        np.testing.assert_allclose(spec.axis, [1e6, 2e6, 3e6, 4e6])

    def test_unknown_unit_rejected(self):
        with pytest.raises(ValueError):
            Spectrum(np.arange(3.0), np.ones(3), axis_unit="angstrom").validate()


class TestFitSpectrum:
    def synth(self, peaks, baseline=0.0, noise=0.0, seed=0, n=600, span=400.0):
        x = np.linspace(-span / 2, span / 2, n) + 1_323_000.0
        y = model_spectrum(x, peaks, baseline)
        if noise:
            y = y + np.random.default_rng(seed).normal(0.0, noise, n)
        return Spectrum(axis=x, intensity=y)

    def test_two_peak_recovery_noiseless(self):
        truth = (
            VoigtPeak(1_322_950.0, 20.0, 21.0, area=120.0),
            VoigtPeak(1_323_030.0, 45.0, 21.0, area=100.0),
        )
        result = fit_spectrum(self.synth(truth, baseline=3.0), n_peaks=2, fixed_gauss_fwhm=21.0)
        assert result.converged
        fitted = result.sorted_by_center()
        for got, want in zip(fitted, truth):
            assert got.center == pytest.approx(want.center, abs=1e-3)
            assert got.lorentz_fwhm == pytest.approx(want.lorentz_fwhm, rel=1e-4)
            assert got.area == pytest.approx(want.area, rel=1e-4)
        assert result.baseline == pytest.approx(3.0, abs=1e-3)

    def test_recovery_with_noise(self):
        truth = (
            VoigtPeak(1_322_960.0, 16.0, 21.0, area=150.0),
            VoigtPeak(1_323_038.0, 16.0, 21.0, area=150.0),
        )
        spec = self.synth(truth, baseline=5.0, noise=0.05, seed=7)
        result = fit_spectrum(spec, n_peaks=2, fixed_gauss_fwhm=21.0)
        assert result.converged
        fitted = result.sorted_by_center()
        sep = fitted[1].center - fitted[0].center
        assert sep == pytest.approx(78.0, abs=2.0)

    def test_free_shared_gauss_width(self):
        truth = (VoigtPeak(1_323_000.0, 30.0, 14.0, area=80.0),)
        result = fit_spectrum(self.synth(truth), n_peaks=1)
        assert result.converged
        assert result.peaks[0].gauss_fwhm == pytest.approx(14.0, rel=5e-3)
        assert result.peaks[0].lorentz_fwhm == pytest.approx(30.0, rel=5e-3)

    def test_explicit_initial_guess_used(self):
        truth = (VoigtPeak(1_323_010.0, 25.0, 21.0, area=60.0),)
        result = fit_spectrum(
            self.synth(truth), n_peaks=1, fixed_gauss_fwhm=21.0,
            initial=(VoigtPeak(1_323_005.0, 20.0, 21.0, area=50.0),),
        )
        assert result.converged
        assert result.peaks[0].center == pytest.approx(1_323_010.0, abs=0.01)

    def test_nm_axis_spectrum_fits_in_energy_domain(self):
        # One Lorentzian line at 936.73 nm observed through a 21 ueV Gaussian.
        center = HC_UEV_NM / 936.73
        truth = (VoigtPeak(center, 40.1, 21.0, area=50.0),)
        energies = np.linspace(center - 300, center + 300, 800)
        wavelengths = HC_UEV_NM / energies
        spec = Spectrum(axis=wavelengths, intensity=model_spectrum(energies, truth),
                        axis_unit="nm")
        result = fit_spectrum(spec, n_peaks=1, fixed_gauss_fwhm=21.0)
        assert result.converged
        assert result.peaks[0].lorentz_fwhm == pytest.approx(40.1, rel=1e-3)

    def test_degenerate_flat_spectrum_does_not_raise(self):
        spec = Spectrum(axis=np.linspace(0, 1, 50), intensity=np.full(50, 2.0))
        result = fit_spectrum(spec, n_peaks=2)
        assert isinstance(result, FitResult)
        assert not result.converged

    def test_nonfinite_spectrum_does_not_raise(self):
        y = np.ones(50)
        y[3] = np.nan
        result = fit_spectrum(Spectrum(np.linspace(0, 1, 50), y), n_peaks=1)
        assert not result.converged

    def test_n_peaks_validation(self):
        with pytest.raises(ValueError):
            fit_spectrum(Spectrum(np.linspace(0, 1, 50), np.ones(50)), n_peaks=0)

    @settings(max_examples=20, deadline=None)
    @given(
        center=st.floats(-50.0, 50.0),
        fl=st.floats(5.0, 40.0),
        area=st.floats(10.0, 200.0),
    )
    def test_single_peak_roundtrip_property(self, center, fl, area):
        truth = (VoigtPeak(center, fl, 21.0, area=area),)
        x = np.linspace(-400.0, 400.0, 600)
        spec = Spectrum(axis=x, intensity=model_spectrum(x, truth, baseline=1.0))
        result = fit_spectrum(spec, n_peaks=1, fixed_gauss_fwhm=21.0)
        assert result.converged
        assert result.peaks[0].center == pytest.approx(center, abs=0.05)
        assert result.peaks[0].lorentz_fwhm == pytest.approx(fl, rel=1e-3)


class TestQFromFit:
    def test_q_is_energy_over_linewidth(self):
        assert q_from_fit(1_323_585.9, 40.1) == pytest.approx(1_323_585.9 / 40.1)

    def test_zero_width_gives_infinite_q(self):
        assert math.isinf(q_from_fit(1e6, 0.0))

    def test_rejects_nonpositive_center(self):
        with pytest.raises(ValueError):
            q_from_fit(0.0, 1.0)


class TestCsvRoundTrip:
    @pytest.mark.parametrize("unit", ["ueV", "eV", "nm"])
    def test_roundtrip(self, tmp_path, unit):
        axis = np.linspace(900.0, 950.0, 20)
        inten = np.linspace(0.0, 1.0, 20) ** 2
        path = tmp_path / "spec.csv"
        write_spectrum_csv(path, Spectrum(axis, inten, axis_unit=unit))
        back = read_spectrum_csv(path)
        assert back.axis_unit == unit
        np.testing.assert_array_equal(back.axis, axis)
        np.testing.assert_array_equal(back.intensity, inten)

    def test_comment_lines_ignored(self, tmp_path):
        path = tmp_path / "spec.csv"
        path.write_text("# measured 2026-01-01\nenergy_uev,intensity\n1.0,2.0\n2.0,3.0\n")
        spec = read_spectrum_csv(path)
        np.testing.assert_array_equal(spec.axis, [1.0, 2.0])

    def test_unknown_header_rejected(self, tmp_path):
        path = tmp_path / "spec.csv"
        path.write_text("frequency_thz,intensity\n1.0,2.0\n")
        with pytest.raises(ValueError):
            read_spectrum_csv(path)
