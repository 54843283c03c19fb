"""Command-line entry point.

Wires the geometry, solver, analysis, coupled-emitter and fitting modules
into reproducible pipelines.  Every command is deterministic for fixed
flags; data outputs (JSON/CSV/SVG) are byte-identical across re-runs.
Each pipeline writes a manifest with input hashes so downstream
comparisons can detect drift.

Exit codes: 0 success, 1 numerical failure (divergence, no resonance,
fit did not converge), 2 usage or data errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import shutil
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, cavity, cqed, fdtd, geometry, modes, specfit, svgplot
from .constants import HC_UEV_NM

SWEEP_HEADER = "delta_uev,e_lower_uev,e_upper_uev,fwhm_lower_uev,fwhm_upper_uev"
MAP_HEADER = "detuning_uev,energy_uev,intensity"


# ---------------------------------------------------------------------------
# manifest and small helpers

@dataclass
class RunManifest:
    """Provenance record written atomically at the end of a pipeline."""

    version: str
    command: str
    seed: int | None
    inputs: dict[str, str] = field(default_factory=dict)
    stages: list[dict] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)

    def add_input(self, path: Path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_stage(self, name: str, wall_s: float) -> None:
        self.stages.append({"name": name, "wall_s": round(wall_s, 3)})

    def write(self, path: Path) -> None:
        write_json_atomic(asdict(self), path)


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json_atomic(obj, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


def finite_or_none(x: float) -> float | None:
    """JSON has no Infinity; unmeasurably high Q serializes as null."""
    return None if not math.isfinite(x) else x


class _Workspace:
    def __init__(self, root: str, seed: int | None):
        self.root = Path(root)
        self.seed = seed

    def resolve(self, name: str | Path) -> Path:
        p = Path(name)
        out = p if p.is_absolute() else self.root / p
        out.parent.mkdir(parents=True, exist_ok=True)
        return out

    def existing(self, name: str | Path) -> Path:
        p = Path(name)
        candidate = p if p.is_absolute() else self.root / p
        if not candidate.exists() and p.exists():
            candidate = p
        if not candidate.exists():
            raise FileNotFoundError(f"no such file: {name}")
        return candidate


def _print_rows(rows: list[dict], columns: list[tuple[str, str]]) -> None:
    widths = {key: len(title) for key, title in columns}
    rendered = []
    for row in rows:
        line = {}
        for key, _ in columns:
            value = row.get(key, "")
            if isinstance(value, float):
                value = f"{value:.4g}"
            line[key] = str(value)
            widths[key] = max(widths[key], len(line[key]))
        rendered.append(line)
    header = "  ".join(title.ljust(widths[key]) for key, title in columns)
    print(header)
    print("-" * len(header))
    for line in rendered:
        print("  ".join(line[key].ljust(widths[key]) for key, _ in columns))


# ---------------------------------------------------------------------------
# generate

def cmd_generate(args, ws: _Workspace) -> int:
    out_path = ws.resolve(args.out)
    geometry_flags = [args.a, args.radius, args.thickness, args.n_slab,
                      args.nx, args.ny, args.sx, args.sy]
    customized = any(v is not None for v in geometry_flags)

    if args.design == "l4-3" and not customized and args.delta_r is None:
        # untouched default: ship the packaged bytes verbatim
        shutil.copyfile(geometry.default_design_path(), out_path)
        design = geometry.load_design(out_path)
    else:
        if args.design == "l4-3" and not customized:
            design = geometry.load_default_design()
        else:
            base = geometry.load_default_design()
            lattice = geometry.LatticeSpec(
                a_nm=args.a if args.a is not None else base.lattice.a_nm,
                r_nm=args.radius if args.radius is not None else base.lattice.r_nm,
                d_nm=args.thickness if args.thickness is not None else base.lattice.d_nm,
                n_slab=args.n_slab if args.n_slab is not None else base.lattice.n_slab,
                nx_periods=args.nx if args.nx is not None else base.lattice.nx_periods,
                ny_periods=args.ny if args.ny is not None else base.lattice.ny_periods,
            )
            kind = {"l4-3": "l4_3", "l3": "l3", "bulk": "bulk"}[args.design]
            shifts = None
            if kind == "l4_3":
                shifts = geometry.ShiftSet(
                    sx=tuple(args.sx) if args.sx is not None else base.shifts.sx,
                    sy=tuple(args.sy) if args.sy is not None else base.shifts.sy,
                )
            elif args.sx is not None or args.sy is not None:
                shifts = geometry.ShiftSet(
                    sx=tuple(args.sx) if args.sx is not None else (0.0,) * 7,
                    sy=tuple(args.sy) if args.sy is not None else (0.0,) * 4,
                )
            design = geometry.make_design(lattice, kind, shifts)
        if args.delta_r is not None:
            design = geometry.apply_modulation(
                design, geometry.ModulationSpec(args.delta_r, args.mod_rings))
        geometry.save_design(design, out_path)

    manifest = RunManifest(version=__version__, command="generate", seed=ws.seed)
    manifest.outputs.append(str(out_path))
    print(f"wrote {out_path} ({len(design.holes)} holes, kind={design.kind})")
    if design.kind == "l4_3":
        width = geometry.central_dielectric_width_nm(design)
        print(f"central dielectric width: {width:.2f} nm")

    if args.resolution is not None:
        t0 = time.time()
        grid = (cavity.octant_grid(design, args.resolution)
                if args.octant else geometry.rasterize(design, args.resolution))
        eps_path = ws.resolve(args.eps_out if args.eps_out else out_path.stem + "_eps.f64")
        geometry.save_grid(grid, eps_path)
        manifest.add_stage("rasterize", time.time() - t0)
        manifest.outputs.append(str(eps_path))
        nx, ny, nz = grid.dims
        print(f"wrote {eps_path} ({nx}x{ny}x{nz} cells, {grid.spacing_nm:.3f} nm spacing)")

    manifest.write(ws.resolve(out_path.stem + "_manifest.json"))
    return 0


# ---------------------------------------------------------------------------
# fdtd run

def cmd_fdtd_run(args, ws: _Workspace) -> int:
    config_path = ws.existing(args.config)
    blob = json.loads(config_path.read_text())
    manifest = RunManifest(version=__version__, command="fdtd run", seed=ws.seed)
    manifest.add_input(config_path)

    a_nm = float(blob.get("a_nm", 260.0))
    resolution = int(blob.get("resolution", 12))
    if "eps" in blob:
        eps_path = ws.existing(blob["eps"])
        manifest.add_input(eps_path)
        grid = geometry.load_grid(eps_path)
        origin = grid.origin_nm
        if any(o < 0.0 for o in origin):
            raise ValueError(
                "the cavity driver expects an octant grid starting on the "
                f"mirror planes; got origin {origin}")
        resolution = round(a_nm / grid.spacing_nm)
    elif "design" in blob:
        design_path = ws.existing(blob["design"])
        manifest.add_input(design_path)
        design = geometry.load_design(design_path)
        a_nm = design.lattice.a_nm
        grid = cavity.octant_grid(design, resolution)
    else:
        raise ValueError("config needs either an 'eps' grid or a 'design' file")

    config = cavity.cavity_config(
        grid, a_nm,
        total_steps=blob.get("total_steps"),
        ring_time=float(blob.get("ring_time", 300.0)),
        center_freq=float(blob.get("center_freq", cavity.DEFAULT_CENTER_FREQ)),
        bandwidth=float(blob.get("bandwidth", cavity.DEFAULT_BANDWIDTH)),
        backend=blob.get("backend", "auto"),
        max_memory_gb=float(blob.get("max_memory_gb", 8.0)),
    )
    t0 = time.time()
    result = fdtd.run(config)
    manifest.add_stage("fdtd", time.time() - t0)

    out_dir = ws.resolve(blob.get("out_dir", config_path.stem + "_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, record in result.probes.items():
        probe_path = out_dir / f"{name}.csv"
        fdtd.write_probe_csv(record, result.dt, probe_path)
        manifest.outputs.append(str(probe_path))
    if result.snapshot is not None:
        for path in result.snapshot.save(out_dir / "mode"):
            manifest.outputs.append(str(path))
    run_meta = {
        "seed": ws.seed,
        "a_nm": a_nm,
        "resolution": resolution,
        "dt": result.dt,
        "steps_run": result.steps_run,
        "wall_seconds": round(result.wall_seconds, 3),
        "grid_cells": list(grid.dims),
    }
    meta_path = write_json_atomic(run_meta, out_dir / "run.json")
    manifest.outputs.append(str(meta_path))
    manifest.write(out_dir / "manifest.json")
    print(f"ran {result.steps_run} steps in {result.wall_seconds:.1f} s; outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# modes

def cmd_modes_analyze(args, ws: _Workspace) -> int:
    probe_path = ws.existing(args.probe)
    steps, times, values = fdtd.read_probe_csv(probe_path)
    if values.size < 8:
        raise ValueError(f"{probe_path}: too few samples to analyze")
    dt = args.dt if args.dt is not None else float(times[1] - times[0])
    band = tuple(args.band) if args.band is not None else None
    found = modes.harmonic_inversion(values, dt, band=band, max_poles=args.max_poles)
    if not found:
        raise modes.AnalysisError(f"no resonances found in {probe_path}")
    payload = {"seed": ws.seed, "dt": dt, "band": band, "modes": []}
    for m in found:
        entry = {
            "frequency": m.frequency,
            "q": finite_or_none(m.q),
            "amplitude": m.amplitude,
            "phase": m.phase,
        }
        if args.a is not None:
            entry["wavelength_nm"] = m.wavelength_nm(args.a)
            entry["kappa_uev"] = m.kappa_uev(args.a) if math.isfinite(m.q) else 0.0
        payload["modes"].append(entry)
    out = write_json_atomic(payload, ws.resolve(args.out))
    head = found[0]
    q_text = f"{head.q:.4g}" if math.isfinite(head.q) else "above measurable cap"
    print(f"dominant mode: f={head.frequency:.5f} c/a, Q={q_text}; wrote {out}")
    return 0


def cmd_modes_volume(args, ws: _Workspace) -> int:
    eps_path = ws.existing(args.eps)
    grid = geometry.load_grid(eps_path)
    snap = fdtd.FieldSnapshot.load(ws.root / args.snapshot
                                   if not Path(args.snapshot).is_absolute()
                                   else args.snapshot)
    if args.wavelength_nm is not None:
        wavelength_nm = args.wavelength_nm
    elif args.frequency is not None and args.a is not None:
        wavelength_nm = args.a / args.frequency
    else:
        raise ValueError("give either --wavelength-nm or both --frequency and --a")
    volume = modes.mode_volume(
        snap.ex, snap.ey, snap.ez, grid.eps,
        spacing=grid.spacing_nm, wavelength=wavelength_nm,
        n_ref=args.n_ref, fold_factor=args.fold,
    )
    payload = {
        "seed": ws.seed,
        "v_norm": volume,
        "wavelength_nm": wavelength_nm,
        "n_ref": args.n_ref,
        "fold_factor": args.fold,
    }
    out = write_json_atomic(payload, ws.resolve(args.out))
    print(f"V = {volume:.4f} (lambda/n)^3; wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# cqed

def _jc_params(args) -> cqed.JCParams:
    return cqed.JCParams(
        g_uev=args.g, kappa_uev=args.kappa, gamma_uev=args.gamma,
        detuning_uev=getattr(args, "detuning", 0.0),
        e_cavity_uev=getattr(args, "e_cavity", 0.0),
    )


def cmd_cqed_eig(args, ws: _Workspace) -> int:
    params = _jc_params(args)
    upper, lower = cqed.polariton_eigenvalues(params)
    strong, ratio = cqed.strong_coupling(args.g, args.kappa)
    payload = {
        "seed": ws.seed,
        "upper": {"e_uev": upper.real, "fwhm_uev": cqed.linewidth_fwhm(upper)},
        "lower": {"e_uev": lower.real, "fwhm_uev": cqed.linewidth_fwhm(lower)},
        "splitting_uev": upper.real - lower.real,
        "strong_coupling": strong,
        "g_over_kappa": ratio,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        write_json_atomic(payload, ws.resolve(args.out))
    return 0


def cmd_cqed_sweep(args, ws: _Workspace) -> int:
    params = _jc_params(args)
    detunings = np.linspace(args.range[0], args.range[1], args.steps)
    sweep = cqed.detuning_sweep(params, detunings)
    out = ws.resolve(args.out)
    with open(out, "w") as fh:
        if ws.seed is not None:
            fh.write(f"# seed={ws.seed}\n")
        fh.write(SWEEP_HEADER + "\n")
        for i in range(detunings.size):
            fh.write(",".join(repr(float(v)) for v in (
                detunings[i],
                sweep.lower[i].real, sweep.upper[i].real,
                cqed.linewidth_fwhm(sweep.lower[i]),
                cqed.linewidth_fwhm(sweep.upper[i]),
            )) + "\n")
    print(f"minimum branch gap {sweep.min_gap_uev:.3f} ueV at detuning "
          f"{sweep.gap_at_detuning_uev:.3f} ueV; wrote {out}")
    if args.map:
        axis = np.linspace(args.range[0] * 1.2, args.range[1] * 1.2, args.map_points)
        map_path = ws.resolve(args.map)
        with open(map_path, "w") as fh:
            if ws.seed is not None:
                fh.write(f"# seed={ws.seed}\n")
            fh.write(MAP_HEADER + "\n")
            for delta in detunings:
                p = cqed.JCParams(args.g, args.kappa, args.gamma,
                                  detuning_uev=float(delta))
                spec = cqed.emission_spectrum(p, axis, resolution_fwhm_uev=args.resolution_uev)
                for e, s in zip(axis, spec.intensity):
                    fh.write(f"{float(delta)!r},{float(e)!r},{float(s)!r}\n")
        print(f"wrote intensity map {map_path}")
    if args.svg:
        svg_path = ws.resolve(args.svg)
        chart = svgplot.line_chart(
            [svgplot.Series("lower branch", detunings, sweep.lower.real),
             svgplot.Series("upper branch", detunings, sweep.upper.real)],
            title="Polariton branches",
            xlabel="detuning (ueV)", ylabel="peak position (ueV)",
        )
        svgplot.save_svg(chart, svg_path)
        print(f"wrote {svg_path}")
    return 0


def cmd_cqed_spectrum(args, ws: _Workspace) -> int:
    params = _jc_params(args)
    axis = np.linspace(args.min, args.max, args.points)
    spectrum = cqed.emission_spectrum(
        params, axis, resolution_fwhm_uev=args.resolution_uev,
        include_bare_cavity=args.include_bare,
    )
    out = ws.resolve(args.out)
    specfit.write_spectrum_csv(out, spectrum)
    print(f"wrote {out}")
    if args.svg:
        chart = svgplot.line_chart(
            [svgplot.Series("emission", axis, spectrum.intensity)],
            title="Emission spectrum",
            xlabel="energy (ueV)", ylabel="intensity",
        )
        svgplot.save_svg(chart, ws.resolve(args.svg))
        print(f"wrote {ws.resolve(args.svg)}")
    return 0


def cmd_cqed_table(args, ws: _Workspace) -> int:
    if args.designs:
        blob = json.loads(ws.existing(args.designs).read_text())
        records = tuple(
            cqed.CavityRecord(
                name=row["name"], v_norm=row["v_norm"], q=row["q"],
                field_fraction=row.get("field_fraction", 1.0),
            )
            for row in blob
        )
    else:
        records = cqed.DEFAULT_CAVITY_TABLE
    rows = cqed.gmax_table(records, reference=args.reference,
                           fraction_convention=args.convention)
    _print_rows(rows, [("name", "cavity"), ("v_norm", "V (l/n)^3"),
                       ("q", "Q"), ("field_fraction", "field frac"),
                       ("g_rel", "g_max (rel)")])
    flagged = [r for r in rows if r["field_fraction"] != 1.0]
    for row in flagged:
        other = cqed.gmax_table(
            records, reference=args.reference,
            fraction_convention="intensity" if args.convention == "field" else "field",
        )
        alt = next(r for r in other if r["name"] == row["name"])
        print(f"note: {row['name']} sits off the field antinode; g_rel is "
              f"{row['g_rel']:.3f} ({args.convention} convention) or "
              f"{alt['g_rel']:.3f} (other convention)")
    if args.out:
        write_json_atomic({"seed": ws.seed, "convention": args.convention,
                           "rows": rows}, ws.resolve(args.out))
    return 0


def cmd_cqed_project(args, ws: _Workspace) -> int:
    g = cqed.project_g(args.g_ref, args.v_ref, args.field_ref,
                       args.v_target, args.field_target, args.pol_factor)
    payload = {"seed": ws.seed, "g_uev": g}
    if args.kappa is not None:
        strong, ratio = cqed.strong_coupling(g, args.kappa)
        payload["g_over_kappa"] = ratio
        payload["strong_coupling"] = strong
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        write_json_atomic(payload, ws.resolve(args.out))
    return 0


# ---------------------------------------------------------------------------
# fit

def cmd_fit(args, ws: _Workspace) -> int:
    spectrum = specfit.read_spectrum_csv(ws.existing(args.infile))
    result = specfit.fit_spectrum(
        spectrum, n_peaks=args.peaks,
        fixed_gauss_fwhm=args.gauss_fwhm, max_iter=args.max_iter,
    )
    payload = {
        "seed": ws.seed,
        "converged": result.converged,
        "residual_rms": result.residual_rms,
        "baseline": result.baseline,
        "peaks": [
            {
                "center_uev": p.center,
                "lorentz_fwhm_uev": p.lorentz_fwhm,
                "gauss_fwhm_uev": p.gauss_fwhm,
                "area": p.area,
                "q": (finite_or_none(specfit.q_from_fit(p.center, p.lorentz_fwhm))
                      if p.center > 0.0 else None),
            }
            for p in result.sorted_by_center()
        ],
    }
    out = write_json_atomic(payload, ws.resolve(args.out))
    if args.svg:
        uev = spectrum.to_uev()
        model = specfit.model_spectrum(uev.axis, result.peaks, result.baseline)
        chart = svgplot.line_chart(
            [svgplot.Series("data", uev.axis, uev.intensity),
             svgplot.Series("fit", uev.axis, model)],
            title="Spectrum fit", xlabel="energy (ueV)", ylabel="intensity",
        )
        svgplot.save_svg(chart, ws.resolve(args.svg))
    if not result.converged:
        print(f"fit did not converge: {result.message}", file=sys.stderr)
        return 1
    centers = ", ".join(f"{p.center:.2f}" for p in result.sorted_by_center())
    print(f"fit converged; centers at {centers} ueV; wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# plot

def _read_csv_columns(path: Path) -> tuple[list[str], np.ndarray]:
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path}: empty or header-only CSV")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged CSV")
    return header, data


def cmd_plot(args, ws: _Workspace) -> int:
    path = ws.existing(args.infile)
    header, data = _read_csv_columns(path)
    kind = args.kind
    if kind == "auto":
        if header == SWEEP_HEADER.split(","):
            kind = "sweep"
        elif header == MAP_HEADER.split(","):
            kind = "map"
        elif (len(header) == 2 and header[1] == "intensity"
              and header[0] in ("energy_uev", "energy_ev", "wavelength_nm")):
            kind = "spectrum"
        else:
            raise ValueError(f"{path}: unrecognized schema {header}")
    if kind == "sweep":
        chart = svgplot.line_chart(
            [svgplot.Series("lower branch", data[:, 0], data[:, 1]),
             svgplot.Series("upper branch", data[:, 0], data[:, 2])],
            title="Polariton branches",
            xlabel="detuning (ueV)", ylabel="peak position (ueV)",
        )
    elif kind == "spectrum":
        chart = svgplot.line_chart(
            [svgplot.Series("intensity", data[:, 0], data[:, 1])],
            title="Spectrum", xlabel=header[0], ylabel="intensity",
        )
    elif kind == "map":
        detunings = np.unique(data[:, 0])
        energies = np.unique(data[:, 1])
        if detunings.size * energies.size != data.shape[0]:
            raise ValueError(f"{path}: map data is not a complete grid")
        z = np.full((energies.size, detunings.size), np.nan)
        di = np.searchsorted(detunings, data[:, 0])
        ei = np.searchsorted(energies, data[:, 1])
        z[ei, di] = data[:, 2]
        chart = svgplot.heatmap(
            detunings, energies, z,
            title="Emission intensity map",
            xlabel="detuning (ueV)", ylabel="energy (ueV)",
        )
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    out = ws.resolve(args.out)
    svgplot.save_svg(chart, out)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# reproduce

def _row(name: str, computed: float, expected: float, tol: float,
         ok: bool | None = None) -> dict:
    if ok is None:
        ok = abs(computed - expected) <= tol
    return {"name": name, "computed": computed, "expected": expected,
            "tolerance": tol, "pass": bool(ok)}


def _report(rows: list[dict], ws: _Workspace, target: str,
            manifest: RunManifest | None = None) -> int:
    display = [dict(r, status="PASS" if r["pass"] else "FAIL") for r in rows]
    _print_rows(display, [("name", "check"), ("computed", "computed"),
                          ("expected", "expected"), ("tolerance", "tol"),
                          ("status", "status")])
    payload = {"seed": ws.seed, "target": target, "rows": rows,
               "all_pass": all(r["pass"] for r in rows)}
    out = write_json_atomic(payload, ws.resolve(f"reproduce_{target}.json"))
    if manifest is not None:
        manifest.outputs.append(str(out))
        manifest.write(ws.resolve(f"reproduce_{target}_manifest.json"))
    print(("all checks passed" if payload["all_pass"] else "SOME CHECKS FAILED")
          + f"; wrote {out}")
    return 0 if payload["all_pass"] else 1


def cmd_reproduce_cqed(args, ws: _Workspace) -> int:
    rows = [
        _row("vacuum Rabi splitting (ueV)", cqed.vrs_from_g(40.26, 40.0), 78.0, 0.1),
        _row("coupling g from 78 ueV splitting (ueV)", cqed.g_from_vrs(78.0, 40.0), 40.3, 0.1),
        _row("g/kappa at threshold pair", cqed.strong_coupling(40.0, 40.0)[1], 1.0, 0.05),
    ]
    sweep = cqed.detuning_sweep(cqed.JCParams(40.26, 40.0),
                                np.linspace(-200.0, 200.0, 801))
    rows.append(_row("anti-crossing minimum gap (ueV)", sweep.min_gap_uev, 78.0, 0.5))
    rows.append(_row("gap located at zero detuning (ueV)",
                     sweep.gap_at_detuning_uev, 0.0, 0.5))
    return _report(rows, ws, "cqed")


def cmd_reproduce_table(args, ws: _Workspace) -> int:
    expected = {"L4/3": 2.2, "H0": 2.4, "L3": 1.3, "heterostructure": 1.0}
    rows = []
    for record in cqed.gmax_table():
        rows.append(_row(f"normalized g_max {record['name']}",
                         record["g_rel"], expected[record["name"]], 0.05))
    offsets = cqed.gmax_table(
        tuple(cqed.CavityRecord(r.name, r.v_norm, r.q,
                                0.9 if r.name == "H0" else 1.0)
              for r in cqed.DEFAULT_CAVITY_TABLE))
    off_field = next(r for r in offsets if r["name"] == "H0")["g_rel"]
    offsets_i = cqed.gmax_table(
        tuple(cqed.CavityRecord(r.name, r.v_norm, r.q,
                                0.9 if r.name == "H0" else 1.0)
              for r in cqed.DEFAULT_CAVITY_TABLE),
        fraction_convention="intensity")
    off_int = next(r for r in offsets_i if r["name"] == "H0")["g_rel"]
    print(f"note: H0 at 90% of the antinode gives {off_field:.3f} (field "
          f"convention) or {off_int:.3f} (intensity convention); neither "
          f"rounds to the quoted 2.1, so both are reported unasserted")
    return _report(rows, ws, "table")


def cmd_reproduce_fit(args, ws: _Workspace) -> int:
    rows = []
    # three-component emission at measured coupling, fit blind
    params = cqed.JCParams(g_uev=40.26, kappa_uev=40.0, gamma_uev=0.0)
    axis = np.linspace(-220.0, 220.0, 1201)
    spectrum = cqed.emission_spectrum(params, axis, resolution_fwhm_uev=21.0,
                                      include_bare_cavity=True,
                                      weights=(1.0, 1.0, 0.6))
    fit = specfit.fit_spectrum(spectrum, n_peaks=3, fixed_gauss_fwhm=21.0)
    peaks = fit.sorted_by_center()
    separation = peaks[-1].center - peaks[0].center
    rows.append(_row("outer polariton separation (ueV)", separation, 78.0, 1.0))
    upper, lower = cqed.polariton_eigenvalues(params)
    expected_fwhm = cqed.linewidth_fwhm(upper)
    for label, peak in (("lower", peaks[0]), ("upper", peaks[-1])):
        rows.append(_row(f"{label} polariton Lorentzian FWHM (ueV)",
                         peak.lorentz_fwhm, expected_fwhm,
                         0.05 * expected_fwhm))
    rows.append(_row("fit converged", float(fit.converged), 1.0, 0.0))

    # single-line device: 16 ueV Lorentzian at 1.2832 eV under 21 ueV optics
    center = 1.2832e6
    line_axis = np.linspace(center - 200.0, center + 200.0, 801)
    single = specfit.model_spectrum(
        line_axis,
        [specfit.VoigtPeak(center=center, lorentz_fwhm=16.0, gauss_fwhm=21.0)])
    fit_single = specfit.fit_spectrum(
        specfit.Spectrum(line_axis, single), n_peaks=1, fixed_gauss_fwhm=21.0)
    best = fit_single.peaks[0]
    q = specfit.q_from_fit(best.center, best.lorentz_fwhm)
    rows.append(_row("Q recovered from linewidth fit", q, 80200.0, 802.0))
    return _report(rows, ws, "fit")


def cmd_reproduce_fdtd(args, ws: _Workspace) -> int:
    design_path = geometry.default_design_path()
    manifest = RunManifest(version=__version__, command="reproduce fdtd", seed=ws.seed)
    manifest.add_input(design_path)

    stale_guard = ws.root / "reproduce_fdtd_manifest.json"
    if stale_guard.exists() and not args.force:
        previous = json.loads(stale_guard.read_text())
        old = previous.get("inputs", {}).get(str(design_path))
        if old is not None and old != manifest.inputs[str(design_path)]:
            print("refusing to compare: packaged design changed since the "
                  "existing report was written (re-run with --force)",
                  file=sys.stderr)
            return 2

    design = geometry.load_default_design()
    t0 = time.time()
    result = cavity.characterize(design, resolution=args.resolution,
                                 ring_time=args.ring_time,
                                 backend=args.backend,
                                 max_memory_gb=args.max_memory_gb)
    manifest.add_stage(f"characterize@res{args.resolution}", time.time() - t0)

    rows = [
        _row("fundamental resonance a/lambda", result.frequency, 0.268, 0.268 * 0.03),
        _row("mode volume (lambda/n)^3", result.mode_volume, 0.32, 0.32 * 0.20),
    ]
    snap = result.run.snapshot
    ey_mag = np.abs(snap.ey)
    peak = np.unravel_index(np.argmax(ey_mag), ey_mag.shape)
    rows.append(_row("|Ey| peak at the center cell", float(peak == (0, 0, 0)), 1.0, 0.0))
    q_text = f"{result.q:.4g}" if math.isfinite(result.q) else "inf"
    print(f"resolution {args.resolution}: f = {result.frequency:.5f} c/a "
          f"(lambda = {result.wavelength_nm:.2f} nm), Q = {q_text}, "
          f"V = {result.mode_volume:.4f}")
    return _report(rows, ws, "fdtd", manifest)


# ---------------------------------------------------------------------------
# parser

def _add_jc_flags(p: argparse.ArgumentParser, detuning: bool = True) -> None:
    p.add_argument("--g", type=float, required=True, help="coupling g (ueV)")
    p.add_argument("--kappa", type=float, required=True, help="cavity linewidth kappa (ueV)")
    p.add_argument("--gamma", type=float, default=0.0, help="emitter linewidth gamma (ueV)")
    if detuning:
        p.add_argument("--detuning", type=float, default=0.0, help="QD-cavity detuning (ueV)")
        p.add_argument("--e-cavity", dest="e_cavity", type=float, default=0.0,
                       help="bare cavity energy offset (ueV)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phc",
        description="Photonic-crystal nanocavity design, FDTD and cavity-QED toolkit",
    )
    parser.add_argument("--version", action="version", version=f"phc {__version__}")
    parser.add_argument("--workspace", default=".", help="directory for outputs")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed recorded in output metadata")
    parser.add_argument("--threads", type=int, default=None,
                        help="solver threads (default: PHC_THREADS or all)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a cavity design file (and optional eps grid)")
    p.add_argument("--design", choices=("l4-3", "l3", "bulk"), default="l4-3")
    p.add_argument("--out", default="design.json")
    p.add_argument("--delta-r", dest="delta_r", type=float, default=None,
                   help="hole radius modulation fraction, e.g. 0.009")
    p.add_argument("--mod-rings", dest="mod_rings", type=float, default=5.0)
    p.add_argument("--a", type=float, default=None, help="lattice constant (nm)")
    p.add_argument("--radius", type=float, default=None, help="hole radius (nm)")
    p.add_argument("--thickness", type=float, default=None, help="slab thickness (nm)")
    p.add_argument("--n-slab", dest="n_slab", type=float, default=None)
    p.add_argument("--nx", type=int, default=None, help="lattice periods along x")
    p.add_argument("--ny", type=int, default=None, help="lattice rows above the axis")
    p.add_argument("--sx", type=float, nargs=7, default=None, metavar="S")
    p.add_argument("--sy", type=float, nargs=4, default=None, metavar="S")
    p.add_argument("--resolution", type=int, default=None,
                   help="also rasterize at this many cells per lattice constant")
    p.add_argument("--octant", action="store_true",
                   help="rasterize the symmetry octant instead of the full domain")
    p.add_argument("--eps-out", dest="eps_out", default=None)
    p.set_defaults(func=cmd_generate)

    p_fdtd = sub.add_parser("fdtd", help="time-domain solver")
    fdtd_sub = p_fdtd.add_subparsers(dest="fdtd_command", required=True)
    p = fdtd_sub.add_parser("run", help="run a simulation described by a JSON config")
    p.add_argument("config")
    p.set_defaults(func=cmd_fdtd_run)

    p_modes = sub.add_parser("modes", help="resonance extraction and mode volume")
    modes_sub = p_modes.add_subparsers(dest="modes_command", required=True)
    p = modes_sub.add_parser("analyze", help="harmonic inversion of a probe record")
    p.add_argument("--probe", required=True, help="probe CSV from fdtd run")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--band", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--max-poles", dest="max_poles", type=int, default=8)
    p.add_argument("--a", type=float, default=None, help="lattice constant (nm)")
    p.add_argument("--out", default="modes.json")
    p.set_defaults(func=cmd_modes_analyze)
    p = modes_sub.add_parser("volume", help="Purcell mode volume from a snapshot")
    p.add_argument("--snapshot", required=True, help="snapshot file prefix")
    p.add_argument("--eps", required=True, help="permittivity grid (.f64)")
    p.add_argument("--wavelength-nm", dest="wavelength_nm", type=float, default=None)
    p.add_argument("--frequency", type=float, default=None, help="mode frequency (c/a)")
    p.add_argument("--a", type=float, default=None, help="lattice constant (nm)")
    p.add_argument("--n-ref", dest="n_ref", type=float, default=3.46)
    p.add_argument("--fold", type=int, default=8,
                   help="domain multiplicity (8 for a mirror octant)")
    p.add_argument("--out", default="volume.json")
    p.set_defaults(func=cmd_modes_volume)

    p_cqed = sub.add_parser("cqed", help="coupled emitter-cavity model")
    cqed_sub = p_cqed.add_subparsers(dest="cqed_command", required=True)
    p = cqed_sub.add_parser("eig", help="polariton energies and linewidths")
    _add_jc_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cqed_eig)
    p = cqed_sub.add_parser("sweep", help="anti-crossing vs detuning")
    _add_jc_flags(p, detuning=False)
    p.add_argument("--range", type=float, nargs=2, default=(-200.0, 200.0),
                   metavar=("LO", "HI"))
    p.add_argument("--steps", type=int, default=201)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--map", default=None,
                   help="also write an emission intensity map CSV")
    p.add_argument("--map-points", dest="map_points", type=int, default=161)
    p.add_argument("--resolution-uev", dest="resolution_uev", type=float, default=21.0)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_cqed_sweep)
    p = cqed_sub.add_parser("spectrum", help="emission spectrum at fixed detuning")
    _add_jc_flags(p)
    p.add_argument("--min", type=float, default=-200.0)
    p.add_argument("--max", type=float, default=200.0)
    p.add_argument("--points", type=int, default=801)
    p.add_argument("--resolution-uev", dest="resolution_uev", type=float, default=21.0)
    p.add_argument("--include-bare", dest="include_bare", action="store_true")
    p.add_argument("--out", default="spectrum.csv")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_cqed_spectrum)
    p = cqed_sub.add_parser("table", help="normalized max coupling across designs")
    p.add_argument("designs", nargs="?", default=None,
                   help="JSON list of {name, v_norm, q[, field_fraction]}")
    p.add_argument("--convention", choices=("field", "intensity"), default="field")
    p.add_argument("--reference", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cqed_table)
    p = cqed_sub.add_parser("project", help="scale a measured g to another cavity")
    p.add_argument("--g-ref", dest="g_ref", type=float, required=True)
    p.add_argument("--v-ref", dest="v_ref", type=float, required=True)
    p.add_argument("--field-ref", dest="field_ref", type=float, default=1.0)
    p.add_argument("--v-target", dest="v_target", type=float, required=True)
    p.add_argument("--field-target", dest="field_target", type=float, default=1.0)
    p.add_argument("--pol-factor", dest="pol_factor", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=None,
                   help="target cavity linewidth for a g/kappa readout")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cqed_project)

    p = sub.add_parser("fit", help="Voigt multi-peak fit of a spectrum CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--peaks", type=int, required=True)
    p.add_argument("--gauss-fwhm", dest="gauss_fwhm", type=float, default=None,
                   help="fix the shared Gaussian FWHM (ueV)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    p.add_argument("--out", default="fit.json")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plot", help="render a CSV artifact as SVG")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kind", choices=("auto", "sweep", "spectrum", "map"), default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p_rep = sub.add_parser("reproduce", help="desk-scale reproduction checks")
    rep_sub = p_rep.add_subparsers(dest="target", required=True)
    p = rep_sub.add_parser("cqed", help="coupling, splitting and anti-crossing numbers")
    p.set_defaults(func=cmd_reproduce_cqed)
    p = rep_sub.add_parser("table", help="normalized g_max comparison table")
    p.set_defaults(func=cmd_reproduce_table)
    p = rep_sub.add_parser("fit", help="spectral fitting round trips")
    p.set_defaults(func=cmd_reproduce_fit)
    p = rep_sub.add_parser("fdtd", help="resonance and mode volume of the default design")
    p.add_argument("--resolution", type=int, default=20)
    p.add_argument("--ring-time", dest="ring_time", type=float, default=300.0)
    p.add_argument("--backend", default="auto")
    p.add_argument("--max-memory-gb", dest="max_memory_gb", type=float, default=8.0)
    p.add_argument("--force", action="store_true",
                   help="overwrite a report whose inputs have drifted")
    p.set_defaults(func=cmd_reproduce_fdtd)

    return parser


def _configure_threads(requested: int | None) -> None:
    value = requested
    if value is None:
        env = os.environ.get("PHC_THREADS", "").strip()
        if env:
            value = int(env)
    if value is None:
        return
    if value < 1:
        raise fdtd.ParameterError(f"thread count must be >= 1, got {value}")
    try:
        import numba
    except ImportError:
        return
    numba.set_num_threads(min(value, numba.config.NUMBA_NUM_THREADS))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ws = _Workspace(args.workspace, args.seed)
    try:
        _configure_threads(args.threads)
        return args.func(args, ws)
    except (fdtd.DivergenceError, modes.AnalysisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (geometry.GeometryError, fdtd.ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
