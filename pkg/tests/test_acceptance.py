"""Acceptance suite: one test per published claim the toolkit must hit.

Criteria 1-7 and 8a-8c run in seconds to minutes.  8d and 9 drive full
cavity simulations at up to 20 cells per lattice constant through
session-scoped fixtures; expect on the order of an hour for the whole
file on a single desktop core.
"""

import math
import time

import numpy as np
import pytest

from phc import cavity, cqed, geometry, modes, specfit
from phc.constants import photon_wavelength_nm
from phc.fdtd import GaussianSource, ProbeSpec, SimConfig, Simulation, run


def pair_mismatch(got, want):
    """Distance between two unordered eigenvalue pairs, scale-normalized."""
    direct = max(abs(got[0] - want[0]), abs(got[1] - want[1]))
    crossed = max(abs(got[0] - want[1]), abs(got[1] - want[0]))
    scale = max(1.0, *(abs(w) for w in want))
    return min(direct, crossed) / scale


# ---------------------------------------------------------------------------
# 1. coupling arithmetic


def test_01_coupling_splitting_arithmetic():
    assert cqed.g_from_vrs(78.0, 40.0) == pytest.approx(40.3, abs=0.1)
    assert cqed.vrs_from_g(40.26, 40.0) == pytest.approx(78.0, abs=0.1)
    strong, ratio = cqed.strong_coupling(40.0, 40.0)
    assert strong is True
    assert ratio == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# 2. anti-crossing vs an independent eigenvalue oracle


def test_02_anticrossing_minimum_and_eigen_oracle():
    g, kappa = 40.26, 40.0
    detunings = np.linspace(-200.0, 200.0, 801)  # grid step 0.5 ueV
    step = detunings[1] - detunings[0]
    sweep = cqed.detuning_sweep(cqed.JCParams(g, kappa, 0.0), detunings)

    assert sweep.min_gap_uev == pytest.approx(78.0, abs=0.5)
    assert abs(sweep.gap_at_detuning_uev - 0.0) <= step

    for i, delta in enumerate(detunings):
        h = np.array([[0.0 - 0.5j * kappa, g],
                      [g, delta]], dtype=complex)
        oracle = np.linalg.eigvals(h)
        got = (sweep.upper[i], sweep.lower[i])
        assert pair_mismatch(got, oracle) < 1e-10


# ---------------------------------------------------------------------------
# 3. Q <-> kappa conversions


def test_03_q_kappa_conversions():
    assert modes.q_to_kappa(33000.0, 936.73) == pytest.approx(40.1, abs=0.4)
    lam = photon_wavelength_nm(1.2832e6)
    assert modes.q_to_kappa(80200.0, lam) == pytest.approx(16.0, abs=0.2)


# ---------------------------------------------------------------------------
# 4. relative maximum-coupling table


def test_04_relative_coupling_table():
    expected = {"L4/3": 2.2, "H0": 2.4, "L3": 1.3, "heterostructure": 1.0}
    rows = {r["name"]: r["g_rel"] for r in cqed.gmax_table()}
    assert rows.keys() == expected.keys()
    for name, value in expected.items():
        assert rows[name] == pytest.approx(value, abs=0.05), name

    # The off-antinode H0 variant is reported under both readings of its
    # 90% field fraction; the two numbers are informational, not asserted
    # against any quoted figure.
    offset = tuple(
        cqed.CavityRecord(r.name, r.v_norm, r.q,
                          0.9 if r.name == "H0" else 1.0)
        for r in cqed.DEFAULT_CAVITY_TABLE
    )
    as_field = {r["name"]: r["g_rel"]
                for r in cqed.gmax_table(offset, fraction_convention="field")}
    as_intensity = {r["name"]: r["g_rel"]
                    for r in cqed.gmax_table(offset, fraction_convention="intensity")}
    assert as_field["H0"] == pytest.approx(0.9 * rows["H0"], rel=1e-12)
    assert as_intensity["H0"] == pytest.approx(math.sqrt(0.9) * rows["H0"], rel=1e-12)
    print(f"\nH0 at a 90% antinode fraction: {as_field['H0']:.3f} (field) / "
          f"{as_intensity['H0']:.3f} (intensity); reported, not asserted")


# ---------------------------------------------------------------------------
# 5. projected coupling for the QD-in-L4/3 scenario


def test_05_projected_coupling_chain():
    g = cqed.project_g(110.0, 0.75, 0.93, 0.32, 1.0, 1)
    assert g == pytest.approx(181.0, abs=2.0)
    g_pol = g * math.sqrt(2.0)
    assert g_pol == pytest.approx(256.0, abs=3.0)
    ratio = g_pol / 16.0
    assert ratio > 15.0
    assert ratio == pytest.approx(16.0, abs=0.3)


# ---------------------------------------------------------------------------
# 6. spectral fitting round trips


def test_06_voigt_fit_round_trip():
    params = cqed.JCParams(g_uev=40.26, kappa_uev=40.0, gamma_uev=0.0)
    axis = np.linspace(-220.0, 220.0, 1201)
    spectrum = cqed.emission_spectrum(params, axis, resolution_fwhm_uev=21.0,
                                      include_bare_cavity=True)
    fit = specfit.fit_spectrum(spectrum, n_peaks=3, fixed_gauss_fwhm=21.0)
    assert fit.converged
    peaks = fit.sorted_by_center()
    assert peaks[-1].center - peaks[0].center == pytest.approx(78.0, abs=1.0)

    upper, lower = cqed.polariton_eigenvalues(params)
    truth = (cqed.linewidth_fwhm(lower), params.kappa_uev,
             cqed.linewidth_fwhm(upper))
    for peak, expected in zip(peaks, truth):
        assert peak.lorentz_fwhm == pytest.approx(expected, rel=0.05)

    center = 1.2832e6
    line_axis = np.linspace(center - 200.0, center + 200.0, 801)
    intensity = specfit.model_spectrum(
        line_axis,
        [specfit.VoigtPeak(center=center, lorentz_fwhm=16.0, gauss_fwhm=21.0)])
    single = specfit.fit_spectrum(specfit.Spectrum(line_axis, intensity),
                                  n_peaks=1, fixed_gauss_fwhm=21.0)
    assert single.converged
    q = specfit.q_from_fit(single.peaks[0].center, single.peaks[0].lorentz_fwhm)
    assert q == pytest.approx(80200.0, rel=0.01)


# ---------------------------------------------------------------------------
# 7. harmonic inversion across randomized pole families


def test_07_harmonic_inversion_hundred_seeded_cases():
    t0 = time.time()
    dt, n = 1.0, 1200
    t = dt * np.arange(1, n + 1)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n_modes = int(rng.integers(2, 5))
        qs = 10.0 ** rng.uniform(3.0, 6.0, n_modes)
        freqs: list[float] = []
        while len(freqs) < n_modes:
            f = float(rng.uniform(0.1, 0.4))
            fwhm = f / qs[len(freqs)]
            # at least three linewidths from every accepted neighbor
            if all(abs(f - other) > 3.0 * max(fwhm, other / qs[j])
                   for j, other in enumerate(freqs)):
                freqs.append(f)
        amps = rng.uniform(0.5, 2.0, n_modes)
        phases = rng.uniform(-math.pi, math.pi, n_modes)
        signal = np.zeros(n)
        for f, q, a, ph in zip(freqs, qs, amps, phases):
            signal += a * np.exp(-math.pi * f * t / q) * np.cos(
                2.0 * math.pi * f * t + ph)

        found = modes.harmonic_inversion(signal, dt, band=(0.05, 0.45),
                                         max_poles=n_modes + 4)
        assert len(found) >= n_modes, f"seed {seed}: missed poles"
        for f, q in zip(freqs, qs):
            best = min(found, key=lambda m: abs(m.frequency - f))
            assert abs(best.frequency - f) / f < 1e-6, f"seed {seed}"
            assert abs(best.q - q) / q < 0.01, f"seed {seed}"
    assert time.time() - t0 < 30.0


# ---------------------------------------------------------------------------
# 8a. PEC box resonance and convergence order


BOX_LX, BOX_LY, BOX_LZ = 1.0, 0.8, 0.3
BOX_F_EXACT = 0.5 * math.sqrt(1.0 / BOX_LX ** 2 + 1.0 / BOX_LY ** 2)


def pec_box_frequency(res: int) -> float:
    nx, ny, nz = round(BOX_LX * res), round(BOX_LY * res), round(BOX_LZ * res)
    config = SimConfig(
        eps=np.ones((nz, ny, nx)),
        spacing=1.0 / res,
        total_steps=3000 * res // 10,
        sources=(GaussianSource("ez", (nx // 2, ny // 2, nz // 2),
                                center_freq=0.8, bandwidth_frac=0.5),),
        probes=(ProbeSpec("p", "ez", (nx // 3, ny // 3, nz // 2)),),
    )
    result = run(config)
    found = modes.harmonic_inversion(result.probes["p"].values, result.dt,
                                     band=(0.5, 1.0))
    assert found, f"no box resonance found at {res} cells/unit"
    return found[0].frequency


def test_08a_pec_box_resonance_and_convergence_order():
    errors = []
    for res in (10, 20, 40):
        f = pec_box_frequency(res)
        errors.append(abs(f - BOX_F_EXACT) / BOX_F_EXACT)
    assert errors[1] < 0.01  # within 1% at 20 cells per unit
    log_h = np.log([1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0])
    order = np.polyfit(log_h, np.log(errors), 1)[0]
    assert order >= 1.8


# ---------------------------------------------------------------------------
# 8b. lossless energy conservation


def test_08b_energy_drift_per_ten_thousand_steps():
    n = 20
    config = SimConfig(
        eps=np.ones((n, n, n)),
        spacing=0.05,
        total_steps=11500,
        track_energy=True,
        sources=(GaussianSource("ey", (n // 2, n // 2, n // 2),
                                center_freq=0.7, bandwidth_frac=0.8),),
    )
    source_end = Simulation(config).source_end_step
    assert source_end + 10000 <= config.total_steps
    result = run(config)
    tail = result.energy[source_end:source_end + 10000]
    drift = (tail.max() - tail.min()) / tail.mean()
    assert drift <= 1e-10


# ---------------------------------------------------------------------------
# 8c. absorbing-boundary reflection


def witness_trace(n_lat: int, n_z: int, steps: int) -> np.ndarray:
    config = SimConfig(
        eps=np.ones((n_z, n_lat, n_lat)),
        spacing=0.05,
        total_steps=steps,
        boundary_low=("even", "odd", "even"),
        boundary_high=("pml", "pml", "pml"),
        sources=(GaussianSource("ey", (0, 0, 0), center_freq=0.6,
                                bandwidth_frac=0.5),),
        probes=(ProbeSpec("w", "ey", (0, 0, 10), start_step=0),),
    )
    return run(config).probes["w"].values


def test_08c_pml_reflection_below_1e6():
    steps = 3000
    near = witness_trace(30, 30, steps)
    # reference domain 3x as deep on every open side: its own boundary
    # returns cannot reach the witness inside the compared window
    far = witness_trace(90, 90, steps)[: near.size]
    reflection = np.abs(near - far).max() / np.abs(far).max()
    assert reflection < 1e-6


# ---------------------------------------------------------------------------
# 8d / 9. full-cavity runs (session fixtures, the expensive part)


RESOLUTIONS = (12, 16, 20)
MOD_COMPARE_RESOLUTION = 20
RING_TIME = 300.0


@pytest.fixture(scope="session")
def default_design():
    return geometry.load_default_design()


@pytest.fixture(scope="session")
def unmod_results(default_design):
    results = {}
    for res in RESOLUTIONS:
        results[res] = cavity.characterize(default_design, resolution=res,
                                           ring_time=RING_TIME)
    return results


@pytest.fixture(scope="session")
def modulated_result(default_design):
    modulated = geometry.apply_modulation(default_design,
                                          geometry.ModulationSpec(0.01))
    return cavity.characterize(modulated, resolution=MOD_COMPARE_RESOLUTION,
                               ring_time=RING_TIME)


@pytest.mark.slow
def test_08d_default_design_resonance_volume_and_field_peak(unmod_results):
    result = unmod_results[20]
    assert result.frequency == pytest.approx(0.268, rel=0.03)
    assert result.mode_volume == pytest.approx(0.32, rel=0.20)
    ey = np.abs(result.run.snapshot.ey)
    peak = np.unravel_index(np.argmax(ey), ey.shape)
    assert peak == (0, 0, 0)  # octant origin = cavity center


@pytest.mark.slow
def test_09a_unmodulated_q_positive_finite_nondecreasing(unmod_results):
    qs = [unmod_results[res].q for res in RESOLUTIONS]
    for q in qs:
        assert q > 0.0 and math.isfinite(q)
    assert qs[0] <= qs[1] <= qs[2]


@pytest.mark.slow
def test_09b_radius_modulation_lowers_q(unmod_results, modulated_result):
    """Double-period radius modulation must cost Q at equal resolution.

    Known to fail at desk-scale settings: the modulation's vertical loss
    channel is equivalent to Q ~ 7e5, but the affordable supercell and
    resolutions put the baseline Q floor near 1.4e4-3.3e4 (in-plane leakage
    plus discretization), where the 1% radius texture happens to stiffen the
    lateral mirror and raises measured Q by 27-55% instead.  Measured at
    12/16 cells/a on the packaged 9x6-period crystal and at 12 cells/a on a
    12x8-period one; extrapolating the discretization floor puts the
    crossover beyond 40 cells/a (days of runtime).  The assertion states the
    converged-physics ordering and is kept strict rather than loosened.
    """
    reference = unmod_results[MOD_COMPARE_RESOLUTION]
    assert modulated_result.q < reference.q
