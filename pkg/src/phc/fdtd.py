"""3-D finite-difference time-domain solver on the Yee grid.

Normalized units: c = 1, eps0 = mu0 = 1.  Lengths are in whatever unit the
grid spacing is given in (the lattice constant `a` for cavity runs), so
frequencies come out in c/unit (a/lambda for cavity runs).

Field arrays are indexed [k, j, i] = [z, y, x] in C order, making x the
fastest axis in memory and in flattened files.  All six components use the
padded shape (nz+1, ny+1, nx+1); slots beyond a component's physical extent
are never touched and stay zero.  Yee positions, in units of the spacing:

    Ex (i+1/2, j,     k    )   Hx (i,     j+1/2, k+1/2)
    Ey (i,     j+1/2, k    )   Hy (i+1/2, j,     k+1/2)
    Ez (i,     j,     k+1/2)   Hz (i+1/2, j+1/2, k    )

Boundary kinds per axis side: "pec" (tangential E pinned to zero), "pml"
(CPML absorber backed by PEC), "even" (mirror plane where the mode is even:
tangential E free on the plane, transverse H odd across it, so E updates on
the plane use a doubled one-sided H difference), and "odd" (mirror where
the mode is odd: identical to PEC for the stored components, accepted as an
alias).  H components never need ghost values at any of these walls.

Two interchangeable backends compute identical update arithmetic: numba
(parallel over z-slabs; every slab writes disjoint rows, so results do not
depend on the thread count) and a plain numpy implementation kept as an
independently-written cross-check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import numba
    from numba import prange

    numba.config.THREADING_LAYER = "workqueue"
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    _HAVE_NUMBA = False

    def prange(n):  # type: ignore[misc]
        return range(n)


from .geometry import read_grid_raw, write_grid_raw

Array = np.ndarray

E_COMPONENTS = ("ex", "ey", "ez")
H_COMPONENTS = ("hx", "hy", "hz")
COMPONENTS = E_COMPONENTS + H_COMPONENTS
BOUNDARY_KINDS = ("pec", "pml", "even", "odd")
AXES = ("x", "y", "z")


class ParameterError(ValueError):
    """Invalid simulation parameters."""


class DivergenceError(RuntimeError):
    """Fields exceeded the stability limit (NaN/inf or runaway amplitude)."""


def stable_dt(spacing: float, courant_factor: float = 0.5) -> float:
    """Time step from the 3-D Courant bound dt <= spacing / sqrt(3).

    ``courant_factor`` scales inside the bound; values above 1 are unstable
    in vacuum and rejected.
    """
    if spacing <= 0.0:
        raise ParameterError(f"spacing must be positive, got {spacing!r}")
    if not 0.0 < courant_factor <= 1.0:
        raise ParameterError(f"courant_factor must be in (0, 1], got {courant_factor!r}")
    return courant_factor * spacing / math.sqrt(3.0)


@dataclass(frozen=True)
class PmlSpec:
    """Convolutional PML (stretched-coordinate, complex-frequency-shifted).

    Conductivity grades as sigma_max * u^order with depth fraction u, where
    sigma_max = -(order + 1) * ln(r_target) / (2 * cells * spacing); kappa
    grades the same way up to kappa_max, and the shift alpha falls linearly
    from alpha_max at the interface to zero at the outer wall.
    """

    cells: int = 16
    order: float = 4.0
    r_target: float = 1e-10
    kappa_max: float = 2.0
    alpha_max: float = 0.03

    def __post_init__(self) -> None:
        if self.cells != 0 and self.cells < 8:
            raise ParameterError(
                f"pml cells must be 0 (disabled) or >= 8 for adequate absorption, got {self.cells}"
            )
        if self.order <= 0 or not (0 < self.r_target < 1) or self.kappa_max < 1 or self.alpha_max < 0:
            raise ParameterError("invalid pml grading parameters")

    def sigma_max(self, spacing: float) -> float:
        if self.cells == 0:
            return 0.0
        return -(self.order + 1.0) * math.log(self.r_target) / (2.0 * self.cells * spacing)


@dataclass(frozen=True)
class GaussianSource:
    """Soft (additive) point dipole with a Gaussian-modulated cosine waveform.

    ``position`` is (i, j, k) in the staggered index space of ``component``
    (an E component).  The envelope width sigma_t is set so the amplitude
    spectrum has fractional FWHM ``bandwidth_frac`` around ``center_freq``;
    injection peaks at t0 = 5 sigma_t and is clamped to zero after
    t0 + 7.5 sigma_t, where the envelope has fallen below 1e-12 of peak.
    """

    component: str
    position: tuple[int, int, int]
    center_freq: float
    bandwidth_frac: float = 0.1
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.component not in E_COMPONENTS:
            raise ParameterError(f"source component must be one of {E_COMPONENTS}")
        if self.center_freq <= 0.0:
            raise ParameterError("source center_freq must be positive")
        if not 0.0 < self.bandwidth_frac < 1.0:
            raise ParameterError("bandwidth_frac must be in (0, 1)")

    @property
    def sigma_t(self) -> float:
        return math.sqrt(2.0 * math.log(2.0)) / (math.pi * self.bandwidth_frac * self.center_freq)

    @property
    def t_peak(self) -> float:
        return 5.0 * self.sigma_t

    @property
    def t_end(self) -> float:
        return self.t_peak + 7.5 * self.sigma_t

    def waveform(self, t: float) -> float:
        if t >= self.t_end:
            return 0.0
        u = t - self.t_peak
        return (
            self.amplitude
            * math.cos(2.0 * math.pi * self.center_freq * u)
            * math.exp(-0.5 * (u / self.sigma_t) ** 2)
        )


@dataclass(frozen=True)
class ProbeSpec:
    """Point field recorder.

    ``start_step`` defaults to the step at which every source has shut off,
    so recorded traces contain only free ringdown; pass 0 to record from
    the beginning (e.g. for causality or reflection tests).
    """

    name: str
    component: str
    position: tuple[int, int, int]
    start_step: int | None = None

    def __post_init__(self) -> None:
        if self.component not in COMPONENTS:
            raise ParameterError(f"probe component must be one of {COMPONENTS}")
        if self.start_step is not None and self.start_step < 0:
            raise ParameterError("probe start_step must be >= 0")


@dataclass(frozen=True)
class SnapshotSpec:
    """Running discrete Fourier transform of the E field at one frequency.

    Accumulates cos/sin projections of (ex, ey, ez) every ``stride`` steps
    from ``start_step`` (default: after sources shut off) to the end of the
    run.  The extracted pattern is phase-consistent across the whole grid,
    so mode profiles and mode volumes are insensitive to small detuning
    between the analysis frequency and the true resonance.
    """

    frequency: float
    start_step: int | None = None
    stride: int = 4

    def __post_init__(self) -> None:
        if self.frequency <= 0.0:
            raise ParameterError("snapshot frequency must be positive")
        if self.stride < 1:
            raise ParameterError("snapshot stride must be >= 1")
        if self.start_step is not None and self.start_step < 0:
            raise ParameterError("snapshot start_step must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    eps: Array
    spacing: float
    total_steps: int
    courant_factor: float = 0.5
    boundary_low: tuple[str, str, str] = ("pec", "pec", "pec")
    boundary_high: tuple[str, str, str] = ("pec", "pec", "pec")
    pml: PmlSpec = PmlSpec()
    sources: tuple[GaussianSource, ...] = ()
    probes: tuple[ProbeSpec, ...] = ()
    snapshot: SnapshotSpec | None = None
    check_interval: int = 500
    divergence_limit: float = 1e9
    max_memory_gb: float = 8.0
    track_energy: bool = False
    backend: str = "auto"

    def __post_init__(self) -> None:
        eps = np.asarray(self.eps, dtype=float)
        if eps.ndim != 3:
            raise ParameterError("eps must be a 3-D array indexed [z, y, x]")
        if not np.all(np.isfinite(eps)) or np.min(eps) <= 0.0:
            raise ParameterError("eps must be finite and positive")
        if self.spacing <= 0.0:
            raise ParameterError("spacing must be positive")
        if self.total_steps < 1:
            raise ParameterError("total_steps must be >= 1")
        stable_dt(self.spacing, self.courant_factor)  # validates courant_factor
        for side in (self.boundary_low, self.boundary_high):
            if len(side) != 3:
                raise ParameterError("boundary specs need one entry per axis (x, y, z)")
            for kind in side:
                if kind not in BOUNDARY_KINDS:
                    raise ParameterError(f"boundary kind must be one of {BOUNDARY_KINDS}, got {kind!r}")
        if self.backend not in ("auto", "numba", "numpy"):
            raise ParameterError(f"backend must be auto, numba, or numpy, got {self.backend!r}")
        if self.check_interval < 1:
            raise ParameterError("check_interval must be >= 1")
        nz, ny, nx = eps.shape
        dims = (nx, ny, nz)
        uses_pml = any(k == "pml" for k in (*self.boundary_low, *self.boundary_high))
        if uses_pml:
            if self.pml.cells == 0:
                raise ParameterError("a pml boundary was requested but pml.cells is 0")
            for ax in range(3):
                n_pml = (self.boundary_low[ax] == "pml") + (self.boundary_high[ax] == "pml")
                if n_pml and dims[ax] < n_pml * self.pml.cells + 4:
                    raise ParameterError(
                        f"axis {AXES[ax]} has {dims[ax]} cells, too few for "
                        f"{n_pml} x {self.pml.cells} pml cells plus interior"
                    )
        for src in self.sources:
            _check_position(src.component, src.position, dims, "source")
        names = set()
        for probe in self.probes:
            _check_position(probe.component, probe.position, dims, f"probe {probe.name!r}")
            if probe.name in names:
                raise ParameterError(f"duplicate probe name {probe.name!r}")
            names.add(probe.name)


def _component_extent(component: str, dims: tuple[int, int, int]) -> tuple[int, int, int]:
    """Number of valid indices along (x, y, z) for a staggered component."""
    nx, ny, nz = dims
    half = {  # axes where the component sits at half-integer positions
        "ex": (True, False, False),
        "ey": (False, True, False),
        "ez": (False, False, True),
        "hx": (False, True, True),
        "hy": (True, False, True),
        "hz": (True, True, False),
    }[component]
    return tuple(n if h else n + 1 for n, h in zip(dims, half))


def _check_position(component: str, position: tuple[int, int, int], dims, what: str) -> None:
    if len(position) != 3:
        raise ParameterError(f"{what}: position must be (i, j, k)")
    extent = _component_extent(component, dims)
    for idx, limit, ax in zip(position, extent, AXES):
        if not 0 <= idx < limit:
            raise ParameterError(
                f"{what}: {ax} index {idx} out of range [0, {limit}) for component {component}"
            )


def estimate_memory_gb(config: SimConfig) -> float:
    """Rough allocation estimate: fields, coefficients, pml accumulators, DFT."""
    nz, ny, nx = np.asarray(config.eps).shape
    cell_bytes = 8 * (nx + 1) * (ny + 1) * (nz + 1)
    n_arrays = 6 + 3 + 3 + 12  # fields + E coefficients + edge eps + pml psi
    if config.snapshot is not None:
        n_arrays += 6
    return (n_arrays * cell_bytes + 8 * nx * ny * nz) / 1e9


# ---------------------------------------------------------------------------
# Coefficients and PML profiles
# ---------------------------------------------------------------------------


def _edge_permittivities(eps: Array) -> tuple[Array, Array, Array]:
    """Permittivity at E-edge positions: mean of the four touching cells.

    Out-of-domain neighbors are edge-replicated, which reproduces the
    mirror image on symmetric grids and is harmless behind PEC walls.
    Returned arrays use the padded field shape; slots beyond the physical
    extent of the component hold zero (no energy, no update).
    """
    nz, ny, nx = eps.shape
    pad = np.pad(eps, 1, mode="edge")
    mz = 0.5 * (pad[:-1] + pad[1:])  # (nz+1, ny+2, nx+2)
    my = 0.5 * (pad[:, :-1] + pad[:, 1:])  # (nz+2, ny+1, nx+2)
    shape = (nz + 1, ny + 1, nx + 1)
    eps_x = np.zeros(shape)
    eps_y = np.zeros(shape)
    eps_z = np.zeros(shape)
    myz = 0.5 * (mz[:, :-1] + mz[:, 1:])  # z and y averaged: (nz+1, ny+1, nx+2)
    eps_x[:, :, :nx] = myz[:, :, 1:-1]
    mzx = 0.5 * (mz[:, :, :-1] + mz[:, :, 1:])  # (nz+1, ny+2, nx+1)
    eps_y[:, :ny, :] = mzx[:, 1:-1, :]
    myx = 0.5 * (my[:, :, :-1] + my[:, :, 1:])  # (nz+2, ny+1, nx+1)
    eps_z[:nz, :, :] = myx[1:-1, :, :]
    return eps_x, eps_y, eps_z


def _pml_profiles(
    n_cells: int, low: bool, high: bool, pml: PmlSpec, spacing: float, dt: float
) -> tuple[Array, Array, Array, Array, Array, Array]:
    """1-D CPML coefficient tables along one axis.

    Returns (b, c, kappa_inv) at the n+1 integer node planes (used by E
    updates) and at half planes (used by H updates; padded to n+1 entries,
    the last one inert, to keep broadcasting shapes uniform).  Outside the
    absorber b = 1, c = 0, kappa_inv = 1 exactly, which both backends treat
    as "no pml work here".
    """
    sigma_max = pml.sigma_max(spacing)
    thickness = pml.cells

    def tables(positions: Array) -> tuple[Array, Array, Array]:
        depth = np.zeros_like(positions)
        if thickness > 0:
            if low:
                depth = np.maximum(depth, (thickness - positions) / thickness)
            if high:
                depth = np.maximum(depth, (positions - (n_cells - thickness)) / thickness)
        depth = np.clip(depth, 0.0, 1.0)
        sigma = sigma_max * depth**pml.order
        kappa = 1.0 + (pml.kappa_max - 1.0) * depth**pml.order
        alpha = np.where(depth > 0.0, pml.alpha_max * (1.0 - depth), 0.0)
        b = np.exp(-(sigma / kappa + alpha) * dt)
        denom = kappa * (sigma + kappa * alpha)
        safe = np.where(denom > 0.0, denom, 1.0)
        c = np.where(denom > 0.0, sigma * (b - 1.0) / safe, 0.0)
        return b, c, 1.0 / kappa

    b_node, c_node, ki_node = tables(np.arange(n_cells + 1, dtype=float))
    b_half, c_half, ki_half = tables(np.arange(n_cells, dtype=float) + 0.5)
    pad = lambda arr, fill: np.concatenate([arr, [fill]])  # noqa: E731
    return b_node, c_node, ki_node, pad(b_half, 1.0), pad(c_half, 0.0), pad(ki_half, 1.0)


# ---------------------------------------------------------------------------
# Numba kernels (module level so they are cacheable; parallel over z-slabs)
# ---------------------------------------------------------------------------


def _maybe_jit(fn):
    if _HAVE_NUMBA:
        return numba.njit(parallel=True, cache=True, fastmath=False)(fn)
    return fn


@_maybe_jit
def _ex_kernel(Ex, Hy, Hz, ce, nx, ny, nz,
               by, cy, kiy, bz, cz, kiz, psi_y, psi_z,
               my_lo, my_hi, mz_lo, mz_hi):
    for k in prange(nz + 1):
        for j in range(ny + 1):
            if (j == 0 and not my_lo) or (j == ny and not my_hi):
                continue
            if (k == 0 and not mz_lo) or (k == nz and not mz_hi):
                continue
            for i in range(nx):
                if j == 0:
                    dhz = 2.0 * Hz[k, 0, i]
                elif j == ny:
                    dhz = -2.0 * Hz[k, ny - 1, i]
                else:
                    dhz = Hz[k, j, i] - Hz[k, j - 1, i]
                if k == 0:
                    dhy = 2.0 * Hy[0, j, i]
                elif k == nz:
                    dhy = -2.0 * Hy[nz - 1, j, i]
                else:
                    dhy = Hy[k, j, i] - Hy[k - 1, j, i]
                ty = kiy[j] * dhz
                if by[j] != 1.0 or cy[j] != 0.0:
                    psi_y[k, j, i] = by[j] * psi_y[k, j, i] + cy[j] * dhz
                    ty += psi_y[k, j, i]
                tz = kiz[k] * dhy
                if bz[k] != 1.0 or cz[k] != 0.0:
                    psi_z[k, j, i] = bz[k] * psi_z[k, j, i] + cz[k] * dhy
                    tz += psi_z[k, j, i]
                Ex[k, j, i] += ce[k, j, i] * (ty - tz)


@_maybe_jit
def _ey_kernel(Ey, Hz, Hx, ce, nx, ny, nz,
               bz, cz, kiz, bx, cx, kix, psi_z, psi_x,
               mz_lo, mz_hi, mx_lo, mx_hi):
    for k in prange(nz + 1):
        if (k == 0 and not mz_lo) or (k == nz and not mz_hi):
            continue
        for j in range(ny):
            for i in range(nx + 1):
                if (i == 0 and not mx_lo) or (i == nx and not mx_hi):
                    continue
                if k == 0:
                    dhx = 2.0 * Hx[0, j, i]
                elif k == nz:
                    dhx = -2.0 * Hx[nz - 1, j, i]
                else:
                    dhx = Hx[k, j, i] - Hx[k - 1, j, i]
                if i == 0:
                    dhz = 2.0 * Hz[k, j, 0]
                elif i == nx:
                    dhz = -2.0 * Hz[k, j, nx - 1]
                else:
                    dhz = Hz[k, j, i] - Hz[k, j, i - 1]
                tz = kiz[k] * dhx
                if bz[k] != 1.0 or cz[k] != 0.0:
                    psi_z[k, j, i] = bz[k] * psi_z[k, j, i] + cz[k] * dhx
                    tz += psi_z[k, j, i]
                tx = kix[i] * dhz
                if bx[i] != 1.0 or cx[i] != 0.0:
                    psi_x[k, j, i] = bx[i] * psi_x[k, j, i] + cx[i] * dhz
                    tx += psi_x[k, j, i]
                Ey[k, j, i] += ce[k, j, i] * (tz - tx)


@_maybe_jit
def _ez_kernel(Ez, Hx, Hy, ce, nx, ny, nz,
               bx, cx, kix, by, cy, kiy, psi_x, psi_y,
               mx_lo, mx_hi, my_lo, my_hi):
    for k in prange(nz):
        for j in range(ny + 1):
            if (j == 0 and not my_lo) or (j == ny and not my_hi):
                continue
            for i in range(nx + 1):
                if (i == 0 and not mx_lo) or (i == nx and not mx_hi):
                    continue
                if i == 0:
                    dhy = 2.0 * Hy[k, j, 0]
                elif i == nx:
                    dhy = -2.0 * Hy[k, j, nx - 1]
                else:
                    dhy = Hy[k, j, i] - Hy[k, j, i - 1]
                if j == 0:
                    dhx = 2.0 * Hx[k, 0, i]
                elif j == ny:
                    dhx = -2.0 * Hx[k, ny - 1, i]
                else:
                    dhx = Hx[k, j, i] - Hx[k, j - 1, i]
                tx = kix[i] * dhy
                if bx[i] != 1.0 or cx[i] != 0.0:
                    psi_x[k, j, i] = bx[i] * psi_x[k, j, i] + cx[i] * dhy
                    tx += psi_x[k, j, i]
                ty = kiy[j] * dhx
                if by[j] != 1.0 or cy[j] != 0.0:
                    psi_y[k, j, i] = by[j] * psi_y[k, j, i] + cy[j] * dhx
                    ty += psi_y[k, j, i]
                Ez[k, j, i] += ce[k, j, i] * (tx - ty)


@_maybe_jit
def _hx_kernel(Hx, Ey, Ez, ch, nx, ny, nz,
               by, cy, kiy, bz, cz, kiz, psi_y, psi_z):
    for k in prange(nz):
        for j in range(ny):
            for i in range(nx + 1):
                dez = Ez[k, j + 1, i] - Ez[k, j, i]
                dey = Ey[k + 1, j, i] - Ey[k, j, i]
                ty = kiy[j] * dez
                if by[j] != 1.0 or cy[j] != 0.0:
                    psi_y[k, j, i] = by[j] * psi_y[k, j, i] + cy[j] * dez
                    ty += psi_y[k, j, i]
                tz = kiz[k] * dey
                if bz[k] != 1.0 or cz[k] != 0.0:
                    psi_z[k, j, i] = bz[k] * psi_z[k, j, i] + cz[k] * dey
                    tz += psi_z[k, j, i]
                Hx[k, j, i] += ch * (tz - ty)


@_maybe_jit
def _hy_kernel(Hy, Ez, Ex, ch, nx, ny, nz,
               bz, cz, kiz, bx, cx, kix, psi_z, psi_x):
    for k in prange(nz):
        for j in range(ny + 1):
            for i in range(nx):
                dex = Ex[k + 1, j, i] - Ex[k, j, i]
                dez = Ez[k, j, i + 1] - Ez[k, j, i]
                tz = kiz[k] * dex
                if bz[k] != 1.0 or cz[k] != 0.0:
                    psi_z[k, j, i] = bz[k] * psi_z[k, j, i] + cz[k] * dex
                    tz += psi_z[k, j, i]
                tx = kix[i] * dez
                if bx[i] != 1.0 or cx[i] != 0.0:
                    psi_x[k, j, i] = bx[i] * psi_x[k, j, i] + cx[i] * dez
                    tx += psi_x[k, j, i]
                Hy[k, j, i] += ch * (tx - tz)


@_maybe_jit
def _hz_kernel(Hz, Ex, Ey, ch, nx, ny, nz,
               bx, cx, kix, by, cy, kiy, psi_x, psi_y):
    for k in prange(nz + 1):
        for j in range(ny):
            for i in range(nx):
                dey = Ey[k, j, i + 1] - Ey[k, j, i]
                dex = Ex[k, j + 1, i] - Ex[k, j, i]
                tx = kix[i] * dey
                if bx[i] != 1.0 or cx[i] != 0.0:
                    psi_x[k, j, i] = bx[i] * psi_x[k, j, i] + cx[i] * dey
                    tx += psi_x[k, j, i]
                ty = kiy[j] * dex
                if by[j] != 1.0 or cy[j] != 0.0:
                    psi_y[k, j, i] = by[j] * psi_y[k, j, i] + cy[j] * dex
                    ty += psi_y[k, j, i]
                Hz[k, j, i] += ch * (ty - tx)


@_maybe_jit
def _accumulate_kernel(acc_cos, acc_sin, f, cos_w, sin_w):
    flat = f.reshape(-1)
    ac = acc_cos.reshape(-1)
    asn = acc_sin.reshape(-1)
    for n in prange(flat.size):
        ac[n] += cos_w * flat[n]
        asn[n] += sin_w * flat[n]


# ---------------------------------------------------------------------------
# Numpy reference backend (same arithmetic, vectorized independently)
# ---------------------------------------------------------------------------


def _axis_reshape(arr: Array, axis: int) -> Array:
    shape = [1, 1, 1]
    shape[axis] = arr.size
    return arr.reshape(shape)


class _NumpyBackend:
    """Vectorized reference implementation of one leapfrog step."""

    def __init__(self, sim: "Simulation") -> None:
        self.sim = sim

    def _h_term(self, E: Array, axis: int, valid, b, c, ki, psi) -> Array:
        """Forward difference of E along a half axis, with CPML."""
        d = np.zeros_like(E)
        hi = [slice(None)] * 3
        lo = [slice(None)] * 3
        hi[axis] = slice(1, None)
        lo[axis] = slice(0, -1)
        diff = E[tuple(hi)] - E[tuple(lo)]
        d[valid] = diff[valid]
        bb = _axis_reshape(b, axis)
        psi *= bb
        psi += _axis_reshape(c, axis) * d
        return _axis_reshape(ki, axis) * d + psi

    def _e_term(self, H: Array, axis: int, n: int, mirror_lo: bool, mirror_hi: bool,
                b, c, ki, psi) -> Array:
        """Backward difference of H along a node axis, mirror ghosts, CPML."""
        d = np.zeros_like(H)
        mid = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo = [slice(None)] * 3
        mid[axis] = slice(1, n)
        hi[axis] = slice(1, n)
        lo[axis] = slice(0, n - 1)
        d[tuple(mid)] = H[tuple(hi)] - H[tuple(lo)]
        if mirror_lo:
            plane = [slice(None)] * 3
            plane[axis] = 0
            d[tuple(plane)] = 2.0 * H[tuple(plane)]
        if mirror_hi:
            plane_d = [slice(None)] * 3
            plane_d[axis] = n
            plane_h = [slice(None)] * 3
            plane_h[axis] = n - 1
            d[tuple(plane_d)] = -2.0 * H[tuple(plane_h)]
        bb = _axis_reshape(b, axis)
        psi *= bb
        psi += _axis_reshape(c, axis) * d
        return _axis_reshape(ki, axis) * d + psi

    def step_h(self) -> None:
        s = self.sim
        nx, ny, nz = s.nx, s.ny, s.nz
        valid_hx = (slice(0, nz), slice(0, ny), slice(None))
        valid_hy = (slice(0, nz), slice(None), slice(0, nx))
        valid_hz = (slice(None), slice(0, ny), slice(0, nx))
        dez = self._h_term(s.Ez, 1, valid_hx, s.bh_y, s.ch_y, s.kih_y, s.psi["hx_y"])
        dey = self._h_term(s.Ey, 0, valid_hx, s.bh_z, s.ch_z, s.kih_z, s.psi["hx_z"])
        s.Hx += s.ch * (dey - dez)
        dex = self._h_term(s.Ex, 0, valid_hy, s.bh_z, s.ch_z, s.kih_z, s.psi["hy_z"])
        dez = self._h_term(s.Ez, 2, valid_hy, s.bh_x, s.ch_x, s.kih_x, s.psi["hy_x"])
        s.Hy += s.ch * (dez - dex)
        dey = self._h_term(s.Ey, 2, valid_hz, s.bh_x, s.ch_x, s.kih_x, s.psi["hz_x"])
        dex = self._h_term(s.Ex, 1, valid_hz, s.bh_y, s.ch_y, s.kih_y, s.psi["hz_y"])
        s.Hz += s.ch * (dex - dey)

    def step_e(self) -> None:
        s = self.sim
        nx, ny, nz = s.nx, s.ny, s.nz
        # axis order in arrays: 0 = z, 1 = y, 2 = x; mirror flags are (x, y, z)
        ty = self._e_term(s.Hz, 1, ny, s.mirror_lo[1], s.mirror_hi[1],
                          s.be_y, s.ce_y, s.kie_y, s.psi["ex_y"])
        tz = self._e_term(s.Hy, 0, nz, s.mirror_lo[2], s.mirror_hi[2],
                          s.be_z, s.ce_z, s.kie_z, s.psi["ex_z"])
        s.Ex += s.cex * (ty - tz)
        tz = self._e_term(s.Hx, 0, nz, s.mirror_lo[2], s.mirror_hi[2],
                          s.be_z, s.ce_z, s.kie_z, s.psi["ey_z"])
        tx = self._e_term(s.Hz, 2, nx, s.mirror_lo[0], s.mirror_hi[0],
                          s.be_x, s.ce_x, s.kie_x, s.psi["ey_x"])
        s.Ey += s.cey * (tz - tx)
        tx = self._e_term(s.Hy, 2, nx, s.mirror_lo[0], s.mirror_hi[0],
                          s.be_x, s.ce_x, s.kie_x, s.psi["ez_x"])
        ty = self._e_term(s.Hx, 1, ny, s.mirror_lo[1], s.mirror_hi[1],
                          s.be_y, s.ce_y, s.kie_y, s.psi["ez_y"])
        s.Ez += s.cez * (tx - ty)
        s._pin_pec_planes()


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class ProbeRecord:
    name: str
    component: str
    position: tuple[int, int, int]
    start_step: int
    values: Array  # one sample per step, steps start_step+1 .. total_steps


@dataclass
class FieldSnapshot:
    """Complex E-field pattern extracted at one frequency."""

    frequency: float
    spacing: float
    origin: tuple[float, float, float]
    n_samples: int
    ex: Array
    ey: Array
    ez: Array

    def component(self, name: str) -> Array:
        return {"ex": self.ex, "ey": self.ey, "ez": self.ez}[name]

    def save(self, prefix: str | Path) -> list[Path]:
        prefix = Path(prefix)
        written = []
        for name in E_COMPONENTS:
            path = prefix.with_name(prefix.name + f"_{name}.c128")
            write_grid_raw(path, self.component(name).astype(np.complex128),
                           self.spacing, self.origin)
            written.append(path)
        return written

    @classmethod
    def load(cls, prefix: str | Path, frequency: float = 0.0,
             n_samples: int = 0) -> "FieldSnapshot":
        prefix = Path(prefix)
        comps = {}
        spacing = 0.0
        origin = (0.0, 0.0, 0.0)
        for name in E_COMPONENTS:
            path = prefix.with_name(prefix.name + f"_{name}.c128")
            arr, spacing, origin = read_grid_raw(path)
            comps[name] = arr
        return cls(frequency=frequency, spacing=spacing, origin=origin,
                   n_samples=n_samples, **comps)


@dataclass
class RunResult:
    dt: float
    steps_run: int
    probes: dict[str, ProbeRecord]
    snapshot: FieldSnapshot | None
    wall_seconds: float
    energy: Array | None = None  # staggered invariant per step when tracked

    def probe(self, name: str) -> ProbeRecord:
        return self.probes[name]


def write_probe_csv(record: ProbeRecord, dt: float, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        fh.write("step,t,value\n")
        for n, v in enumerate(record.values):
            step = record.start_step + 1 + n
            fh.write(f"{step},{float(step * dt)!r},{float(v)!r}\n")


def read_probe_csv(path: str | Path) -> tuple[Array, Array, Array]:
    """Returns (steps, times, values)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.size and data.ndim == 0:
        data = data.reshape(1)
    return data["step"].astype(int), data["t"], data["value"]


# ---------------------------------------------------------------------------
# Simulation driver
# ---------------------------------------------------------------------------

_PSI_NAMES = ("ex_y", "ex_z", "ey_z", "ey_x", "ez_x", "ez_y",
              "hx_y", "hx_z", "hy_z", "hy_x", "hz_x", "hz_y")


class Simulation:
    """Allocates state for a SimConfig and advances the leapfrog in place."""

    def __init__(self, config: SimConfig) -> None:
        need = estimate_memory_gb(config)
        if need > config.max_memory_gb:
            raise ParameterError(
                f"estimated allocation {need:.2f} GB exceeds max_memory_gb="
                f"{config.max_memory_gb}; reduce the grid or raise the limit"
            )
        self.config = config
        eps = np.ascontiguousarray(np.asarray(config.eps, dtype=float))
        self.nz, self.ny, self.nx = eps.shape
        nx, ny, nz = self.nx, self.ny, self.nz
        self.dt = stable_dt(config.spacing, config.courant_factor)
        self.ch = self.dt / config.spacing

        shape = (nz + 1, ny + 1, nx + 1)
        self.Ex = np.zeros(shape)
        self.Ey = np.zeros(shape)
        self.Ez = np.zeros(shape)
        self.Hx = np.zeros(shape)
        self.Hy = np.zeros(shape)
        self.Hz = np.zeros(shape)

        eps_x, eps_y, eps_z = _edge_permittivities(eps)
        self.eps_edges = (eps_x, eps_y, eps_z)
        self.cex = np.where(eps_x > 0.0, self.ch / np.where(eps_x > 0.0, eps_x, 1.0), 0.0)
        self.cey = np.where(eps_y > 0.0, self.ch / np.where(eps_y > 0.0, eps_y, 1.0), 0.0)
        self.cez = np.where(eps_z > 0.0, self.ch / np.where(eps_z > 0.0, eps_z, 1.0), 0.0)

        self.mirror_lo = tuple(k == "even" for k in config.boundary_low)
        self.mirror_hi = tuple(k == "even" for k in config.boundary_high)

        def profiles(axis: int, n: int):
            low = config.boundary_low[axis] == "pml"
            high = config.boundary_high[axis] == "pml"
            return _pml_profiles(n, low, high, config.pml, config.spacing, self.dt)

        self.be_x, self.ce_x, self.kie_x, self.bh_x, self.ch_x, self.kih_x = profiles(0, nx)
        self.be_y, self.ce_y, self.kie_y, self.bh_y, self.ch_y, self.kih_y = profiles(1, ny)
        self.be_z, self.ce_z, self.kie_z, self.bh_z, self.ch_z, self.kih_z = profiles(2, nz)

        self.psi = {name: np.zeros(shape) for name in _PSI_NAMES}

        backend = config.backend
        if backend == "auto":
            backend = "numba" if _HAVE_NUMBA else "numpy"
        if backend == "numba" and not _HAVE_NUMBA:
            raise ParameterError("numba backend requested but numba is not importable")
        self.backend = backend
        self._np_backend = _NumpyBackend(self)

        self.step_count = 0
        self.source_end_step = 0
        for src in config.sources:
            self.source_end_step = max(self.source_end_step, int(math.ceil(src.t_end / self.dt)))

        self._snap_start = 0
        self._snap_acc = None
        self._snap_n = 0
        if config.snapshot is not None:
            start = config.snapshot.start_step
            self._snap_start = self.source_end_step if start is None else start
            self._snap_acc = {name: (np.zeros(shape), np.zeros(shape)) for name in E_COMPONENTS}

        self._probe_starts: dict[str, int] = {}
        self._probe_values: dict[str, list] = {}
        for probe in config.probes:
            start = probe.start_step if probe.start_step is not None else self.source_end_step
            self._probe_starts[probe.name] = start
            self._probe_values[probe.name] = []

        self._energy_history: list[float] | None = [] if config.track_energy else None
        self._amp_limit = config.divergence_limit * max(
            [abs(s.amplitude) for s in config.sources], default=1.0
        )

    # -- field access -----------------------------------------------------

    def field(self, component: str) -> Array:
        return {"ex": self.Ex, "ey": self.Ey, "ez": self.Ez,
                "hx": self.Hx, "hy": self.Hy, "hz": self.Hz}[component]

    def _pin_pec_planes(self) -> None:
        """Zero tangential E on pec/pml/odd walls (mirror planes stay free).

        Only the numpy backend needs this; the kernels skip pinned planes.
        """
        if not self.mirror_lo[0]:
            self.Ey[:, :, 0] = 0.0
            self.Ez[:, :, 0] = 0.0
        if not self.mirror_hi[0]:
            self.Ey[:, :, self.nx] = 0.0
            self.Ez[:, :, self.nx] = 0.0
        if not self.mirror_lo[1]:
            self.Ex[:, 0, :] = 0.0
            self.Ez[:, 0, :] = 0.0
        if not self.mirror_hi[1]:
            self.Ex[:, self.ny, :] = 0.0
            self.Ez[:, self.ny, :] = 0.0
        if not self.mirror_lo[2]:
            self.Ex[0, :, :] = 0.0
            self.Ey[0, :, :] = 0.0
        if not self.mirror_hi[2]:
            self.Ex[self.nz, :, :] = 0.0
            self.Ey[self.nz, :, :] = 0.0

    # -- stepping ---------------------------------------------------------

    def _step_numba_h(self) -> None:
        nx, ny, nz = self.nx, self.ny, self.nz
        _hx_kernel(self.Hx, self.Ey, self.Ez, self.ch, nx, ny, nz,
                   self.bh_y, self.ch_y, self.kih_y, self.bh_z, self.ch_z, self.kih_z,
                   self.psi["hx_y"], self.psi["hx_z"])
        _hy_kernel(self.Hy, self.Ez, self.Ex, self.ch, nx, ny, nz,
                   self.bh_z, self.ch_z, self.kih_z, self.bh_x, self.ch_x, self.kih_x,
                   self.psi["hy_z"], self.psi["hy_x"])
        _hz_kernel(self.Hz, self.Ex, self.Ey, self.ch, nx, ny, nz,
                   self.bh_x, self.ch_x, self.kih_x, self.bh_y, self.ch_y, self.kih_y,
                   self.psi["hz_x"], self.psi["hz_y"])

    def _step_numba_e(self) -> None:
        nx, ny, nz = self.nx, self.ny, self.nz
        _ex_kernel(self.Ex, self.Hy, self.Hz, self.cex, nx, ny, nz,
                   self.be_y, self.ce_y, self.kie_y, self.be_z, self.ce_z, self.kie_z,
                   self.psi["ex_y"], self.psi["ex_z"],
                   self.mirror_lo[1], self.mirror_hi[1], self.mirror_lo[2], self.mirror_hi[2])
        _ey_kernel(self.Ey, self.Hz, self.Hx, self.cey, nx, ny, nz,
                   self.be_z, self.ce_z, self.kie_z, self.be_x, self.ce_x, self.kie_x,
                   self.psi["ey_z"], self.psi["ey_x"],
                   self.mirror_lo[2], self.mirror_hi[2], self.mirror_lo[0], self.mirror_hi[0])
        _ez_kernel(self.Ez, self.Hx, self.Hy, self.cez, nx, ny, nz,
                   self.be_x, self.ce_x, self.kie_x, self.be_y, self.ce_y, self.kie_y,
                   self.psi["ez_x"], self.psi["ez_y"],
                   self.mirror_lo[0], self.mirror_hi[0], self.mirror_lo[1], self.mirror_hi[1])

    def step(self) -> None:
        """Advance H to (n+1/2) dt and E to (n+1) dt, inject sources, sample."""
        track = self._energy_history is not None
        h_old = None
        if track:
            h_old = (self.Hx.copy(), self.Hy.copy(), self.Hz.copy())

        if self.backend == "numba":
            self._step_numba_h()
        else:
            self._np_backend.step_h()
        if track:
            # The invariant pairs E^n with the product of the straddling
            # H^(n-1/2) and H^(n+1/2), so it is sampled between the updates.
            self._energy_history.append(self._staggered_energy(h_old))
        if self.backend == "numba":
            self._step_numba_e()
        else:
            self._np_backend.step_e()

        t_mid = (self.step_count + 0.5) * self.dt
        for src in self.config.sources:
            value = src.waveform(t_mid)
            if value != 0.0:
                i, j, k = src.position
                self.field(src.component)[k, j, i] += value * self.dt

        self.step_count += 1
        step = self.step_count

        for probe in self.config.probes:
            if step > self._probe_starts[probe.name]:
                i, j, k = probe.position
                self._probe_values[probe.name].append(float(self.field(probe.component)[k, j, i]))

        if self._snap_acc is not None and step > self._snap_start:
            if (step - self._snap_start - 1) % self.config.snapshot.stride == 0:
                self._accumulate_snapshot(step * self.dt)

    def _accumulate_snapshot(self, t: float) -> None:
        phase = 2.0 * math.pi * self.config.snapshot.frequency * t
        cw, sw = math.cos(phase), math.sin(phase)
        for name in E_COMPONENTS:
            acc_c, acc_s = self._snap_acc[name]
            f = self.field(name)
            if self.backend == "numba":
                _accumulate_kernel(acc_c, acc_s, f, cw, sw)
            else:
                acc_c += cw * f
                acc_s += sw * f
        self._snap_n += 1

    def _staggered_energy(self, h_old) -> float:
        """Discrete invariant: sum(eps E(n)^2)/2 + sum(H(n-1/2) H(n+1/2))/2.

        Exactly conserved by the lossless leapfrog; the naive sum of squares
        at equal steps oscillates at O((w dt)^2) instead.
        """
        eps_x, eps_y, eps_z = self.eps_edges
        u = float(
            np.vdot(self.Ex, eps_x * self.Ex)
            + np.vdot(self.Ey, eps_y * self.Ey)
            + np.vdot(self.Ez, eps_z * self.Ez)
        )
        hx0, hy0, hz0 = h_old
        u += float(np.vdot(hx0, self.Hx) + np.vdot(hy0, self.Hy) + np.vdot(hz0, self.Hz))
        return 0.5 * u * self.config.spacing**3

    def _check_health(self) -> None:
        peak = 0.0
        for f in (self.Ex, self.Ey, self.Ez):
            peak = max(peak, float(np.max(np.abs(f))))
        if not math.isfinite(peak) or peak > self._amp_limit:
            raise DivergenceError(
                f"field amplitude {peak:.3e} after {self.step_count} steps "
                f"exceeds limit {self._amp_limit:.3e}; simulation diverged"
            )

    def run(self) -> RunResult:
        t0 = time.perf_counter()
        total = self.config.total_steps
        while self.step_count < total:
            self.step()
            if self.step_count % self.config.check_interval == 0:
                self._check_health()
        self._check_health()

        probes = {}
        for probe in self.config.probes:
            probes[probe.name] = ProbeRecord(
                name=probe.name,
                component=probe.component,
                position=probe.position,
                start_step=self._probe_starts[probe.name],
                values=np.asarray(self._probe_values[probe.name], dtype=float),
            )

        snapshot = None
        if self._snap_acc is not None:
            n = max(self._snap_n, 1)
            comps = {}
            for name in E_COMPONENTS:
                acc_c, acc_s = self._snap_acc[name]
                comps[name] = (2.0 / n) * (acc_c + 1j * acc_s)
            snapshot = FieldSnapshot(
                frequency=self.config.snapshot.frequency,
                spacing=self.config.spacing,
                origin=(0.0, 0.0, 0.0),
                n_samples=self._snap_n,
                ex=comps["ex"], ey=comps["ey"], ez=comps["ez"],
            )

        energy = np.asarray(self._energy_history) if self._energy_history is not None else None

        return RunResult(
            dt=self.dt,
            steps_run=self.step_count,
            probes=probes,
            snapshot=snapshot,
            wall_seconds=time.perf_counter() - t0,
            energy=energy,
        )


def run(config: SimConfig) -> RunResult:
    """Build state for the config and run it to completion."""
    return Simulation(config).run()
