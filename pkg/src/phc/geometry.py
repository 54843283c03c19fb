"""Planar photonic-crystal slab geometry and permittivity rasterization.

The structures here are triangular (hexagonal) lattices of air holes in a
high-index slab, with a row defect refilled at 3/4 pitch: removing three
holes along a lattice row and drilling four new ones with spacing 3a/4
creates a short bichromatic potential that confines a single high-Q mode.
Eleven hole-shift parameters (seven x-shifts along the defect row, four
y-shifts on the neighboring rows) fine-tune the confinement; they are
shipped as a versioned design data file rather than hard-coded.

Rasterization produces a cell-centered relative-permittivity grid with
fill-fraction (scalar) subpixel averaging: boundary cells take the volume
average of the two materials, estimated from an 8x8 in-plane subsample per
cell combined with the exact slab-overlap fraction along z (hole walls are
vertical, so the two factorize exactly).

Length unit is nm throughout; the lattice constant `a` sets the scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .constants import SQRT3

Array = np.ndarray

KINDS = ("bulk", "l3", "l4_3")

_POSITION_TOL_NM = 1e-9


class GeometryError(ValueError):
    """Invalid or self-intersecting geometry."""


@dataclass(frozen=True)
class LatticeSpec:
    """Triangular-lattice slab parameters.

    nx_periods / ny_periods set the lateral extent of the generated hole
    pattern: holes are kept for |x| <= nx*a and |y| <= ny*(sqrt(3)/2)*a
    (rows at integer multiples of the row pitch sqrt(3)/2 * a).
    """

    a_nm: float
    r_nm: float
    d_nm: float
    n_slab: float
    n_bg: float = 1.0
    nx_periods: int = 9
    ny_periods: int = 6

    def __post_init__(self) -> None:
        if self.a_nm <= 0.0:
            raise GeometryError(f"lattice constant must be positive, got {self.a_nm!r}")
        if not 0.0 < self.r_nm < 0.5 * self.a_nm:
            raise GeometryError(f"hole radius must be in (0, a/2), got {self.r_nm!r}")
        if self.d_nm <= 0.0:
            raise GeometryError(f"slab thickness must be positive, got {self.d_nm!r}")
        if self.n_slab < 1.0 or self.n_bg < 1.0:
            raise GeometryError("refractive indices must be >= 1")
        if self.nx_periods < 1 or self.ny_periods < 1:
            raise GeometryError("lattice extent must be at least 1 period each way")

    @property
    def row_pitch_nm(self) -> float:
        return 0.5 * SQRT3 * self.a_nm


@dataclass(frozen=True)
class ShiftSet:
    """Outward hole displacements in units of a.

    sx[0:2] act on the two inserted hole pairs (innermost first), sx[2:7] on
    the defect-row lattice holes at |x| = 2a..6a; sy[0:3] act on the
    first-neighbor-row holes at |x| = a/2, 3a/2, 5a/2 and sy[3] on the
    second-row holes straddling x = 0.  Positive values move holes away
    from the cavity center.
    """

    sx: tuple[float, float, float, float, float, float, float] = (0.0,) * 7
    sy: tuple[float, float, float, float] = (0.0,) * 4

    def __post_init__(self) -> None:
        if len(self.sx) != 7 or len(self.sy) != 4:
            raise GeometryError("need exactly 7 sx and 4 sy shift values")
        for s in (*self.sx, *self.sy):
            if not math.isfinite(s) or abs(s) >= 0.5:
                raise GeometryError(f"shift magnitudes must be < 0.5 a, got {s!r}")

    @classmethod
    def zero(cls) -> "ShiftSet":
        return cls()


@dataclass(frozen=True)
class ModulationSpec:
    """Double-period radius modulation around the cavity.

    Hole radii within ``region_rings * a`` of the origin alternate between
    r*(1 + delta) and r*(1 - delta) with period 2a along x (sign depends on
    |x| only, so both mirror symmetries survive).  This folds the cavity
    mode envelope to the light cone and trades Q for vertical outcoupling.
    """

    delta_r_frac: float
    region_rings: float = 5.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta_r_frac) or abs(self.delta_r_frac) >= 0.5:
            raise GeometryError(f"|delta_r_frac| must be < 0.5, got {self.delta_r_frac!r}")
        if self.region_rings <= 0.0:
            raise GeometryError("region_rings must be positive")


@dataclass(frozen=True)
class Hole:
    """Circular air hole through the slab."""

    x_nm: float
    y_nm: float
    r_nm: float


@dataclass(frozen=True)
class CavityDesign:
    """A concrete hole pattern plus the parameters that generated it."""

    lattice: LatticeSpec
    kind: str
    holes: tuple[Hole, ...]
    shifts: ShiftSet = ShiftSet()
    modulation: ModulationSpec | None = None
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise GeometryError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.holes:
            raise GeometryError("design has no holes")
        _check_mirror_symmetry(self.holes)
        _check_overlaps(self.holes)

    def hole_array(self) -> Array:
        """Holes as an (n, 3) array of (x, y, r) in nm."""
        return np.array([(h.x_nm, h.y_nm, h.r_nm) for h in self.holes], dtype=float)

    def bbox_nm(self) -> tuple[float, float, float]:
        """Half-extents (x, y, z) of the solid structure."""
        arr = self.hole_array()
        return (
            float(np.max(np.abs(arr[:, 0]) + arr[:, 2])),
            float(np.max(np.abs(arr[:, 1]) + arr[:, 2])),
            0.5 * self.lattice.d_nm,
        )


def _check_mirror_symmetry(holes: tuple[Hole, ...]) -> None:
    pts = np.array([(h.x_nm, h.y_nm) for h in holes])
    radii = np.array([h.r_nm for h in holes])
    tree = cKDTree(pts)
    for sig_x, sig_y in ((-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)):
        mirrored = pts * (sig_x, sig_y)
        dist, idx = tree.query(mirrored, distance_upper_bound=_POSITION_TOL_NM * 2)
        bad = np.nonzero(~np.isfinite(dist) | (dist > _POSITION_TOL_NM))[0]
        if bad.size:
            h = holes[int(bad[0])]
            raise GeometryError(
                f"hole at ({h.x_nm:.6g}, {h.y_nm:.6g}) nm has no mirror partner "
                f"under (x -> {sig_x:+.0f}x, y -> {sig_y:+.0f}y)"
            )
        if not np.allclose(radii[idx], radii, rtol=1e-12, atol=0.0):
            raise GeometryError("mirror-partner holes have unequal radii")


def _check_overlaps(holes: tuple[Hole, ...]) -> None:
    arr = np.array([(h.x_nm, h.y_nm, h.r_nm) for h in holes])
    tree = cKDTree(arr[:, :2])
    r_max = float(np.max(arr[:, 2]))
    pairs = tree.query_pairs(2.0 * r_max, output_type="ndarray")
    if pairs.size == 0:
        return
    d = np.hypot(
        arr[pairs[:, 0], 0] - arr[pairs[:, 1], 0],
        arr[pairs[:, 0], 1] - arr[pairs[:, 1], 1],
    )
    r_sum = arr[pairs[:, 0], 2] + arr[pairs[:, 1], 2]
    bad = np.nonzero(d <= r_sum - 1e-12)[0]
    if bad.size:
        i, j = (int(v) for v in pairs[bad[0]])
        a, b = holes[i], holes[j]
        raise GeometryError(
            f"holes {i} at ({a.x_nm:.6g}, {a.y_nm:.6g}) and {j} at "
            f"({b.x_nm:.6g}, {b.y_nm:.6g}) nm overlap "
            f"(center distance {d[bad[0]]:.6g} <= radii sum {r_sum[bad[0]]:.6g})"
        )


def _bulk_sites(lattice: LatticeSpec) -> list[tuple[float, float]]:
    """Lattice sites, built +/- symmetric so mirror pairs are bit-exact."""
    a = lattice.a_nm
    h = lattice.row_pitch_nm
    n, m = lattice.nx_periods, lattice.ny_periods
    sites: list[tuple[float, float]] = []
    for k in range(-m, m + 1):
        y = k * h
        if k % 2 == 0:
            xs = [0.0] + [s * j * a for j in range(1, n + 1) for s in (1.0, -1.0)]
        else:
            xs = [s * (j + 0.5) * a for j in range(0, n) for s in (1.0, -1.0)]
        sites.extend((x, y) for x in xs)
    sites.sort(key=lambda p: (p[1], p[0]))
    return sites


def build_bulk_lattice(lattice: LatticeSpec) -> CavityDesign:
    """Defect-free triangular lattice of air holes."""
    holes = tuple(Hole(x, y, lattice.r_nm) for x, y in _bulk_sites(lattice))
    return CavityDesign(lattice=lattice, kind="bulk", holes=holes)


def _row_defect_sites(
    lattice: LatticeSpec,
    shifts: ShiftSet,
    inserted: Iterable[tuple[float, float]],
    removed_row_max: int,
    row_shift_start: int,
) -> list[tuple[float, float, float]]:
    """Shared construction for row-defect cavities.

    ``inserted`` lists (|x| in units of a, x-shift) for new hole pairs on the
    defect row.  Lattice holes at |x| <= removed_row_max * a on that row are
    dropped; remaining row holes take sx values starting at index
    ``row_shift_start``.
    """
    a = lattice.a_nm
    h = lattice.row_pitch_nm
    n, m = lattice.nx_periods, lattice.ny_periods
    r = lattice.r_nm
    out: list[tuple[float, float, float]] = []

    for k in range(-m, m + 1):
        y = k * h
        if k == 0:
            for base, sx in inserted:
                x = (base + sx) * a
                out.append((x, y, r))
                out.append((-x, y, r))
            for j in range(removed_row_max + 1, n + 1):
                shift_idx = row_shift_start + (j - removed_row_max - 1)
                sx = shifts.sx[shift_idx] if shift_idx < 7 else 0.0
                x = (j + sx) * a
                out.append((x, y, r))
                out.append((-x, y, r))
        elif abs(k) == 1:
            for j in range(0, n):
                sy = shifts.sy[j] if j < 3 else 0.0
                yy = math.copysign(h + sy * a, y)
                x = (j + 0.5) * a
                out.append((x, yy, r))
                out.append((-x, yy, r))
        elif abs(k) == 2:
            yy = math.copysign(2 * h + shifts.sy[3] * a, y)
            out.append((0.0, yy, r))
            for j in range(1, n + 1):
                out.append((j * a, y, r))
                out.append((-j * a, y, r))
        else:
            if k % 2 == 0:
                out.append((0.0, y, r))
                xs = [s * j * a for j in range(1, n + 1) for s in (1.0, -1.0)]
            else:
                xs = [s * (j + 0.5) * a for j in range(0, n) for s in (1.0, -1.0)]
            out.extend((x, y, r) for x in xs)
    out.sort(key=lambda p: (p[1], p[0]))
    return out


def make_l4_3(lattice: LatticeSpec, shifts: ShiftSet | None = None) -> CavityDesign:
    """Row defect refilled at 3/4 pitch: remove the three holes at
    x = 0, +/-a and insert four at x = +/-(3/8)a and +/-(9/8)a.

    The four inserted holes keep the bulk radius and sit 3a/4 apart;
    ``shifts`` displaces them and the nearby lattice holes outward.
    """
    shifts = shifts or ShiftSet.zero()
    inserted = ((3.0 / 8.0, shifts.sx[0]), (9.0 / 8.0, shifts.sx[1]))
    sites = _row_defect_sites(lattice, shifts, inserted, removed_row_max=1, row_shift_start=2)
    holes = tuple(Hole(x, y, r) for x, y, r in sites)
    return CavityDesign(lattice=lattice, kind="l4_3", holes=holes, shifts=shifts)


def make_l3(lattice: LatticeSpec, shifts: ShiftSet | None = None) -> CavityDesign:
    """Classic three-missing-hole row defect (for comparisons)."""
    shifts = shifts or ShiftSet.zero()
    sites = _row_defect_sites(lattice, shifts, inserted=(), removed_row_max=1, row_shift_start=0)
    holes = tuple(Hole(x, y, r) for x, y, r in sites)
    return CavityDesign(lattice=lattice, kind="l3", holes=holes, shifts=shifts)


_MAKERS = {"bulk": lambda lat, sh: build_bulk_lattice(lat), "l3": make_l3, "l4_3": make_l4_3}


def make_design(lattice: LatticeSpec, kind: str, shifts: ShiftSet | None = None) -> CavityDesign:
    if kind not in _MAKERS:
        raise GeometryError(f"kind must be one of {KINDS}, got {kind!r}")
    return _MAKERS[kind](lattice, shifts)


def modulation_sign(x_nm: float, a_nm: float) -> int:
    """Which way a hole's radius moves under the double-period modulation.

    Depends on |x| only (keeps mirror symmetry): +1 for the ring containing
    x = 0, alternating every a.
    """
    return 1 if math.floor(abs(x_nm) / a_nm + 0.5) % 2 == 0 else -1


def apply_modulation(design: CavityDesign, modulation: ModulationSpec) -> CavityDesign:
    """Return the design with the radius modulation applied.

    Radii are always recomputed from the nominal lattice radius, and
    applying a second modulation composes additively in delta (so +delta
    followed by -delta restores the original radii exactly).  Both
    modulations must agree on the region.
    """
    delta = modulation.delta_r_frac
    if design.modulation is not None:
        if design.modulation.region_rings != modulation.region_rings:
            raise GeometryError(
                "cannot compose modulations with different region_rings "
                f"({design.modulation.region_rings} vs {modulation.region_rings})"
            )
        delta += design.modulation.delta_r_frac
    a = design.lattice.a_nm
    r_nom = design.lattice.r_nm
    radius_limit = modulation.region_rings * a * (1.0 + 1e-12)
    holes = []
    for h in design.holes:
        if delta != 0.0 and math.hypot(h.x_nm, h.y_nm) <= radius_limit:
            r = r_nom * (1.0 + modulation_sign(h.x_nm, a) * delta)
        else:
            r = r_nom
        holes.append(Hole(h.x_nm, h.y_nm, r))
    new_mod = ModulationSpec(delta, modulation.region_rings) if delta != 0.0 else None
    return replace(design, holes=tuple(holes), modulation=new_mod)


def central_dielectric_width_nm(design: CavityDesign) -> float:
    """Width of the unbroken dielectric strip across the cavity center.

    Distance along the defect row between the inner walls of the two holes
    closest to x = 0 (the narrowest solid region of the refilled defect).
    """
    tol = 0.25 * design.lattice.a_nm
    row = [h for h in design.holes if abs(h.y_nm) < tol]
    right = [h.x_nm - h.r_nm for h in row if h.x_nm > 0]
    left = [h.x_nm + h.r_nm for h in row if h.x_nm < 0]
    if not right or not left:
        raise GeometryError("no defect-row holes found on both sides of the center")
    return min(right) - max(left)


# ---------------------------------------------------------------------------
# Design file I/O
# ---------------------------------------------------------------------------


def design_to_dict(design: CavityDesign) -> dict:
    lat = design.lattice
    return {
        "kind": design.kind,
        "lattice": {
            "a_nm": lat.a_nm,
            "r_nm": lat.r_nm,
            "d_nm": lat.d_nm,
            "n_slab": lat.n_slab,
            "n_bg": lat.n_bg,
            "nx": lat.nx_periods,
            "ny": lat.ny_periods,
        },
        "shifts": {"sx": list(design.shifts.sx), "sy": list(design.shifts.sy)},
        "modulation": (
            None
            if design.modulation is None
            else {
                "delta_r_frac": design.modulation.delta_r_frac,
                "region_rings": design.modulation.region_rings,
            }
        ),
        "meta": dict(design.meta),
    }


def design_from_dict(obj: Mapping) -> CavityDesign:
    lat = obj["lattice"]
    lattice = LatticeSpec(
        a_nm=float(lat["a_nm"]),
        r_nm=float(lat["r_nm"]),
        d_nm=float(lat["d_nm"]),
        n_slab=float(lat["n_slab"]),
        n_bg=float(lat.get("n_bg", 1.0)),
        nx_periods=int(lat["nx"]),
        ny_periods=int(lat["ny"]),
    )
    sh = obj.get("shifts") or {}
    shifts = ShiftSet(
        sx=tuple(float(v) for v in sh.get("sx", (0.0,) * 7)),
        sy=tuple(float(v) for v in sh.get("sy", (0.0,) * 4)),
    )
    design = make_design(lattice, str(obj["kind"]), shifts)
    mod = obj.get("modulation")
    if mod is not None:
        design = apply_modulation(
            design,
            ModulationSpec(
                delta_r_frac=float(mod["delta_r_frac"]),
                region_rings=float(mod.get("region_rings", 5.0)),
            ),
        )
    meta = obj.get("meta") or {}
    return replace(design, meta=dict(meta))


def save_design(design: CavityDesign, path: str | Path) -> None:
    Path(path).write_text(json.dumps(design_to_dict(design), indent=2) + "\n")


def load_design(path: str | Path) -> CavityDesign:
    with Path(path).open() as fh:
        return design_from_dict(json.load(fh))


def default_design_path() -> Path:
    """The packaged reference cavity design."""
    return Path(__file__).parent / "designs" / "l4_3_default.json"


def load_default_design() -> CavityDesign:
    return load_design(default_design_path())


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PermittivityGrid:
    """Cell-centered relative permittivity on a uniform cubic grid.

    ``eps`` is indexed [z, y, x] (C order), which makes the flattened
    buffer x-fastest as the file format requires.  ``origin_nm`` is the
    center of cell (0, 0, 0).
    """

    eps: Array
    spacing_nm: float
    origin_nm: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.eps.ndim != 3:
            raise ValueError("eps must be 3-D, indexed [z, y, x]")
        if self.spacing_nm <= 0.0:
            raise ValueError("spacing must be positive")
        if np.min(self.eps) < 1.0 - 1e-9:
            raise ValueError("relative permittivity below 1 is not supported")

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz) cell counts."""
        nz, ny, nx = self.eps.shape
        return nx, ny, nz


def write_grid_raw(
    path: str | Path,
    array: Array,
    spacing_nm: float,
    origin_nm: tuple[float, float, float],
) -> None:
    """Write a [z, y, x] array as raw little-endian values plus a JSON sidecar.

    float64 data is written as-is; complex128 is interleaved (re, im).  The
    sidecar keeps dims as [nx, ny, nz] to match the x-fastest layout.
    """
    path = Path(path)
    arr = np.ascontiguousarray(array)
    if arr.dtype == np.float64:
        dtype = "float64"
        arr.astype("<f8").tofile(path)
    elif arr.dtype == np.complex128:
        dtype = "complex128"
        arr.astype("<c16").tofile(path)
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    nz, ny, nx = arr.shape
    sidecar = {
        "dims": [int(nx), int(ny), int(nz)],
        "spacing_nm": float(spacing_nm),
        "origin_nm": [float(v) for v in origin_nm],
        "dtype": dtype,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_grid_raw(path: str | Path) -> tuple[Array, float, tuple[float, float, float]]:
    """Read a raw grid file written by write_grid_raw."""
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise FileNotFoundError(f"missing sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text())
    nx, ny, nz = (int(v) for v in meta["dims"])
    n_values = nx * ny * nz
    dtype = meta.get("dtype")
    if dtype is None:
        dtype = "complex128" if path.stat().st_size == 16 * n_values else "float64"
    raw = np.fromfile(path, dtype="<c16" if dtype == "complex128" else "<f8")
    if raw.size != n_values:
        raise ValueError(f"{path}: expected {n_values} values, found {raw.size}")
    arr = raw.reshape(nz, ny, nx)
    origin = tuple(float(v) for v in meta["origin_nm"])
    return arr, float(meta["spacing_nm"]), origin


def save_grid(grid: PermittivityGrid, path: str | Path) -> None:
    write_grid_raw(path, grid.eps, grid.spacing_nm, grid.origin_nm)


def load_grid(path: str | Path) -> PermittivityGrid:
    eps, spacing, origin = read_grid_raw(path)
    return PermittivityGrid(eps=eps.real.astype(float), spacing_nm=spacing, origin_nm=origin)


_SUBSAMPLES = 8


def _centered_axis(n_cells: int, spacing: float) -> Array:
    """Cell centers for a grid centered on 0, exactly +/- symmetric."""
    idx = np.arange(n_cells, dtype=float)
    return (2.0 * idx + 1.0 - n_cells) * (0.5 * spacing)


def _solid_fraction_2d(design: CavityDesign, xc: Array, yc: Array, dx: float) -> Array:
    """In-plane dielectric fraction per cell (1 minus hole coverage)."""
    solid = np.ones((yc.size, xc.size), dtype=float)
    sub = _SUBSAMPLES
    offsets = (2.0 * np.arange(sub) + 1.0 - sub) * (dx / (2.0 * sub))
    for hole in design.holes:
        hx, hy, r = hole.x_nm, hole.y_nm, hole.r_nm
        i0 = int(np.searchsorted(xc, hx - r - dx))
        i1 = int(np.searchsorted(xc, hx + r + dx, side="right"))
        j0 = int(np.searchsorted(yc, hy - r - dx))
        j1 = int(np.searchsorted(yc, hy + r + dx, side="right"))
        if i0 >= i1 or j0 >= j1:
            continue
        px = (xc[i0:i1, None] + offsets[None, :]).ravel() - hx
        py = (yc[j0:j1, None] + offsets[None, :]).ravel() - hy
        inside = (py[:, None] ** 2 + px[None, :] ** 2) <= r * r
        frac = inside.reshape(j1 - j0, sub, i1 - i0, sub).mean(axis=(1, 3))
        solid[j0:j1, i0:i1] -= frac
    return np.clip(solid, 0.0, 1.0)


def _slab_fraction_z(design: CavityDesign, zc: Array, dx: float) -> Array:
    half_d = 0.5 * design.lattice.d_nm
    lo = np.maximum(zc - 0.5 * dx, -half_d)
    hi = np.minimum(zc + 0.5 * dx, half_d)
    return np.clip((hi - lo) / dx, 0.0, 1.0)


def _raster_core(design: CavityDesign, xc: Array, yc: Array, zc: Array, dx: float) -> Array:
    eps_bg = design.lattice.n_bg**2
    eps_slab = design.lattice.n_slab**2
    solid2d = _solid_fraction_2d(design, xc, yc, dx)
    fz = _slab_fraction_z(design, zc, dx)
    return eps_bg + (eps_slab - eps_bg) * fz[:, None, None] * solid2d[None, :, :]


def rasterize(
    design: CavityDesign,
    resolution: int,
    pad_xy_a: float = 0.5,
    pad_z_a: float = 1.5,
) -> PermittivityGrid:
    """Rasterize onto a centered grid covering the structure plus padding.

    ``resolution`` is in cells per lattice constant (>= 8).  The domain is
    symmetric about all three coordinate planes, and cell coordinates are
    computed so mirror-image cells get bit-identical permittivity.
    """
    if int(resolution) != resolution or resolution < 8:
        raise ValueError(f"resolution must be an integer >= 8 cells per a, got {resolution!r}")
    if pad_xy_a < 0.0 or pad_z_a < 0.0:
        raise ValueError("padding must be non-negative: domain cannot be smaller than the structure")
    a = design.lattice.a_nm
    dx = a / resolution
    bx, by, bz = design.bbox_nm()
    half = (bx + pad_xy_a * a, by + pad_xy_a * a, bz + pad_z_a * a)
    counts = [2 * int(math.ceil(h / dx - 1e-9)) for h in half]
    xc = _centered_axis(counts[0], dx)
    yc = _centered_axis(counts[1], dx)
    zc = _centered_axis(counts[2], dx)
    eps = _raster_core(design, xc, yc, zc, dx)
    origin = (float(xc[0]), float(yc[0]), float(zc[0]))
    return PermittivityGrid(eps=eps, spacing_nm=dx, origin_nm=origin)


def rasterize_window(
    design: CavityDesign,
    resolution: int,
    extent_nm: tuple[float, float, float, float, float, float],
) -> PermittivityGrid:
    """Rasterize an explicit (x0, x1, y0, y1, z0, z1) window.

    Used for symmetry-reduced FDTD domains (e.g. the first octant, with the
    window starting exactly on the mirror planes).  Cell centers sit at
    lower edge + (i + 1/2) * spacing; for windows starting at 0 these
    coincide with the centered full-domain grid of `rasterize`.
    """
    if int(resolution) != resolution or resolution < 8:
        raise ValueError(f"resolution must be an integer >= 8 cells per a, got {resolution!r}")
    x0, x1, y0, y1, z0, z1 = extent_nm
    if not (x1 > x0 and y1 > y0 and z1 > z0):
        raise ValueError(f"degenerate raster window {extent_nm!r}")
    dx = design.lattice.a_nm / resolution

    def axis(lo: float, hi: float) -> Array:
        n = max(1, int(math.ceil((hi - lo) / dx - 1e-9)))
        if abs(lo) < 1e-12:
            # Mirror-plane start: use the exact symmetric cell centers.
            return (2.0 * np.arange(n, dtype=float) + 1.0) * (0.5 * dx)
        return lo + (np.arange(n, dtype=float) + 0.5) * dx

    xc, yc, zc = axis(x0, x1), axis(y0, y1), axis(z0, z1)
    eps = _raster_core(design, xc, yc, zc, dx)
    origin = (float(xc[0]), float(yc[0]), float(zc[0]))
    return PermittivityGrid(eps=eps, spacing_nm=dx, origin_nm=origin)
