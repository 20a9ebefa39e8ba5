"""Scenario-driven command line: parse config, run experiments, emit artifacts.

Subcommands: ``optimize`` (full shape+configuration loop), ``baseline``
(phase-profile comparison), ``beampattern``, ``spacing``, ``sweep``.
Config files are flat INI with sections [scenario], [initial_shape],
[feasible_set], [solver]; every key has a desk-scale default, so an empty
file runs the reference setup. Data files are comma-separated, LF, UTF-8,
17 significant digits; the manifest carries the run's only timestamp.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import beampattern, spacing_distribution
from .baseline import baseline_config
from .channel import RisConfig, build_state, snr_db
from .config_optimizer import BoxSet
from .errors import ParseError, Ris3dError, ValidationError
from .geometry import (
    Ball3D,
    CylindricalBand,
    PlanarBox,
    SphericalCap,
    constrained_set,
    initial_shape,
)
from .impedance import DipoleLayout, assemble, self_impedance
from .scenario import Scenario
from .shape_optimizer import SolverSettings, run_t3dris

_SHAPE_KINDS = ("ula", "upa", "cylinder", "sphere")

_KNOWN_KEYS = {
    "scenario": {
        "p_bs", "p_ue", "lambda", "p_dbm", "sigma2_dbm", "y0", "r0",
        "b_min", "b_max",
    },
    "initial_shape": {"kind", "n", "spacing_wavelengths", "radius", "wire_radius"},
    "feasible_set": {
        "kind", "radius", "scale", "fixed_axis", "fixed_value",
        "first_min", "first_max", "second_min", "second_max",
        "azimuth_min", "azimuth_max", "polar_min", "polar_max",
        "z_min", "z_max", "center_x", "center_y", "center_z",
    },
    "solver": {
        "epsilon", "max_iters", "neumann_cap", "alpha_init", "bisection_tol",
        "max_halvings", "config_max_iters", "config_tol",
    },
}

_DEFAULTS = {
    "scenario": {
        "p_bs": "1.3 0 0",
        "p_ue": "0.98 0.56 -0.65",
        "lambda": "0.01",
        "p_dbm": "10",
        "sigma2_dbm": "-80",
        "y0": "1",
        "r0": "0.2",
        "b_min": "-5000",
        "b_max": "188",
    },
    "initial_shape": {
        "kind": "upa",
        "n": "100",
        "spacing_wavelengths": "0.5",
        "radius": "0.1",
    },
    "feasible_set": {"kind": "ball", "radius": "0.05", "scale": "1.5"},
    "solver": {
        "epsilon": "1e-6",
        "max_iters": "2000",
        "neumann_cap": "0.1",
        "max_halvings": "30",
        "config_max_iters": "200",
        "config_tol": "1e-9",
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description: physics, geometry and solver knobs."""

    scenario: Scenario
    box: BoxSet
    shape_kind: str
    n: int
    spacing: float
    shape_radius: float
    wire_radius: float | None
    feasible: object
    settings: SolverSettings
    raw: dict = field(default_factory=dict)

    def make_layout(self) -> DipoleLayout:
        return initial_shape(
            self.shape_kind, self.n, self.scenario.wavelength, self.spacing,
            radius=self.shape_radius, wire_radius=self.wire_radius,
        )


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError as exc:
        raise ParseError(f"key '{key}' in [{section}] is not a number: {raw!r}") from exc


def _parse_vector(section, key, raw):
    parts = raw.replace(",", " ").split()
    if len(parts) != 3:
        raise ParseError(f"key '{key}' in [{section}] must have 3 components")
    return np.array([_parse_float(section, key, p) for p in parts])


def _parse_complex(section, key, raw):
    try:
        return complex(raw.replace(" ", ""))
    except ValueError as exc:
        raise ParseError(f"key '{key}' in [{section}] is not a complex number") from exc


def parse_scenario(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse the INI scenario grammar into a fully resolved RunConfig.

    Missing keys take the reference desk-scale defaults; unknown sections
    or keys are rejected. ``overrides`` maps dotted ``section.key`` names
    to replacement values.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"malformed config: {exc}") from exc

    values = {sec: dict(defaults) for sec, defaults in _DEFAULTS.items()}
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ParseError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _KNOWN_KEYS[section]:
                raise ParseError(f"unknown key '{key}' in [{section}]")
            values[section][key] = raw
    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ParseError(f"override '{dotted}' must look like section.key=value")
        section, key = dotted.split(".", 1)
        if section not in _KNOWN_KEYS or key not in _KNOWN_KEYS[section]:
            raise ParseError(f"unknown override key '{dotted}'")
        values[section][key] = raw

    sc_v = values["scenario"]
    scenario = Scenario(
        p_bs=_parse_vector("scenario", "p_bs", sc_v["p_bs"]),
        p_ue=_parse_vector("scenario", "p_ue", sc_v["p_ue"]),
        wavelength=_parse_float("scenario", "lambda", sc_v["lambda"]),
        power_dbm=_parse_float("scenario", "p_dbm", sc_v["p_dbm"]),
        noise_dbm=_parse_float("scenario", "sigma2_dbm", sc_v["sigma2_dbm"]),
        y0=_parse_complex("scenario", "y0", sc_v["y0"]),
        r0=_parse_float("scenario", "r0", sc_v["r0"]),
    )
    b_min = _parse_float("scenario", "b_min", sc_v["b_min"])
    b_max = _parse_float("scenario", "b_max", sc_v["b_max"])
    if not b_min < b_max:
        raise ValidationError("b_min must be strictly below b_max")
    box = BoxSet(b_min, b_max)

    sh_v = values["initial_shape"]
    kind = sh_v["kind"].strip().lower()
    if kind not in _SHAPE_KINDS:
        raise ValidationError(
            f"initial shape kind must be one of {_SHAPE_KINDS}, got '{kind}'"
        )
    n = int(_parse_float("initial_shape", "n", sh_v["n"]))
    if n < 1:
        raise ValidationError("element count n must be at least 1")
    spacing = (
        _parse_float("initial_shape", "spacing_wavelengths", sh_v["spacing_wavelengths"])
        * scenario.wavelength
    )
    shape_radius = _parse_float("initial_shape", "radius", sh_v["radius"])
    wire_radius = (
        _parse_float("initial_shape", "wire_radius", sh_v["wire_radius"])
        if "wire_radius" in sh_v
        else None
    )

    fs_v = values["feasible_set"]
    fs_kind = fs_v["kind"].strip().lower()
    fnum = lambda key, default=None: (
        _parse_float("feasible_set", key, fs_v[key]) if key in fs_v else default
    )
    if fs_kind == "ball":
        feasible = Ball3D(fnum("radius", 0.05))
    elif fs_kind == "constrained":
        feasible = constrained_set(
            kind, n, scenario.wavelength, spacing, shape_radius,
            scale=fnum("scale", 1.5),
        )
    elif fs_kind == "planar_box":
        feasible = PlanarBox(
            int(fnum("fixed_axis", 0)), fnum("fixed_value", 0.0),
            (fnum("first_min", -1.0), fnum("first_max", 1.0)),
            (fnum("second_min", -1.0), fnum("second_max", 1.0)),
        )
    elif fs_kind == "spherical_cap":
        feasible = SphericalCap(
            fnum("radius", 0.05),
            (fnum("azimuth_min", -np.pi), fnum("azimuth_max", np.pi)),
            (fnum("polar_min", 0.0), fnum("polar_max", np.pi)),
            (fnum("center_x", 0.0), fnum("center_y", 0.0), fnum("center_z", 0.0)),
        )
    elif fs_kind == "cylindrical_band":
        feasible = CylindricalBand(
            fnum("radius", 0.05),
            (fnum("azimuth_min", -np.pi), fnum("azimuth_max", np.pi)),
            (fnum("z_min", -1.0), fnum("z_max", 1.0)),
            (fnum("center_x", 0.0), fnum("center_y", 0.0), fnum("center_z", 0.0)),
        )
    else:
        raise ValidationError(f"unknown feasible set kind '{fs_kind}'")

    so_v = values["solver"]
    snum = lambda key: _parse_float("solver", key, so_v[key])
    settings = SolverSettings(
        epsilon=snum("epsilon"),
        max_outer_iterations=int(snum("max_iters")),
        neumann_cap=snum("neumann_cap"),
        alpha_init=snum("alpha_init") if "alpha_init" in so_v else None,
        bisection_tol=snum("bisection_tol") if "bisection_tol" in so_v else None,
        max_halvings=int(snum("max_halvings")),
        config_max_iters=int(snum("config_max_iters")),
        config_tol=snum("config_tol"),
    )

    return RunConfig(
        scenario=scenario, box=box, shape_kind=kind, n=n, spacing=spacing,
        shape_radius=shape_radius, wire_radius=wire_radius, feasible=feasible,
        settings=settings, raw=values,
    )


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(cell if isinstance(cell, str) else _fmt(cell) for cell in row))
        buf.write("\n")
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _write_layout(path: Path, layout: DipoleLayout) -> None:
    rows = [
        (str(i), layout.positions[0, i], layout.positions[1, i], layout.positions[2, i])
        for i in range(layout.n_elements)
    ]
    _write_csv(path, ["index", "x_m", "y_m", "z_m"], rows)


def _write_reactances(path: Path, cfg: RisConfig) -> None:
    rows = [(str(i), b) for i, b in enumerate(cfg.reactances)]
    _write_csv(path, ["index", "b_ohm"], rows)


def read_layout_csv(path: Path, half_length: float, wire_radius: float) -> DipoleLayout:
    rows = [line.split(",") for line in path.read_text().strip().splitlines()[1:]]
    q = np.array([[float(r[1]), float(r[2]), float(r[3])] for r in rows]).T
    return DipoleLayout(q, half_length, wire_radius)


def read_reactances_csv(path: Path, r0: float) -> RisConfig:
    rows = [line.split(",") for line in path.read_text().strip().splitlines()[1:]]
    return RisConfig(np.array([float(r[1]) for r in rows]), r0)


def _write_manifest(path: Path, cfg: RunConfig, command: str, extra: dict) -> None:
    manifest = {
        "command": command,
        "config": cfg.raw,
        "versions": {
            "ris3d": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "determinism": "runs are seed-free; identical inputs give identical data files",
    }
    manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _ue_direction_deg(scenario: Scenario):
    d = scenario.p_ue
    r = np.linalg.norm(d)
    azimuth = float(np.rad2deg(np.arctan2(d[1], d[0])))
    elevation = float(np.rad2deg(np.arccos(d[2] / r)))
    return azimuth, elevation


def _cmd_optimize(cfg: RunConfig, out: Path) -> dict:
    layout0 = cfg.make_layout()
    layout, ris_cfg, trace = run_t3dris(
        cfg.scenario, layout0, cfg.feasible, cfg.box, cfg.settings
    )
    _write_layout(out / "layout.csv", layout)
    _write_reactances(out / "reactances.csv", ris_cfg)
    rows = [
        (
            str(i), trace.snr_db[i], str(trace.accepted_moves[i]),
            str(trace.rejected_moves[i]), str(trace.neumann_rejections[i]),
            str(trace.colinear_incidents[i]), trace.max_displacement[i],
        )
        for i in range(len(trace.snr_db))
    ]
    _write_csv(
        out / "trace.csv",
        ["iter", "snr_db", "accepted_moves", "rejected_moves",
         "neumann_rejections", "colinear_incidents", "max_displacement_m"],
        rows,
    )
    return {
        "iterations": trace.n_iterations,
        "snr_db_initial": trace.snr_db[0],
        "snr_db_final": trace.snr_db[-1],
    }


def _cmd_baseline(cfg: RunConfig, out: Path) -> dict:
    layout = cfg.make_layout()
    sc = cfg.scenario
    imp = assemble(layout, sc.p_bs, sc.p_ue, sc.wavelength)
    z0 = self_impedance(sc.wavelength, layout.half_length, layout.wire_radius)
    ris_cfg, n_clamped = baseline_config(imp, z0, sc.r0, cfg.box)
    state = build_state(imp, ris_cfg, sc.y0)
    snr = snr_db(state.h, sc.power_w, sc.noise_w)
    _write_layout(out / "layout.csv", layout)
    _write_reactances(out / "reactances.csv", ris_cfg)
    _write_csv(
        out / "trace.csv",
        ["iter", "snr_db", "accepted_moves", "rejected_moves",
         "neumann_rejections", "colinear_incidents", "max_displacement_m"],
        [("0", snr, "0", "0", "0", "0", 0.0)],
    )
    return {"snr_db": snr, "clamped_loads": n_clamped}


def _resolve_layout_config(cfg: RunConfig, args) -> tuple:
    sc = cfg.scenario
    h = sc.wavelength / 4.0
    a = cfg.wire_radius if cfg.wire_radius is not None else sc.wavelength / 500.0
    if args.layout:
        layout = read_layout_csv(Path(args.layout), h, a)
    else:
        layout = cfg.make_layout()
    if args.reactances:
        ris_cfg = read_reactances_csv(Path(args.reactances), sc.r0)
    else:
        ris_cfg = RisConfig(np.zeros(layout.n_elements), sc.r0)
    return layout, ris_cfg


def _cmd_beampattern(cfg: RunConfig, out: Path, args) -> dict:
    sc = cfg.scenario
    layout, ris_cfg = _resolve_layout_config(cfg, args)
    imp = assemble(layout, sc.p_bs, sc.p_ue, sc.wavelength)
    step = float(args.grid_step)
    az = np.arange(0.0, 360.0, step)
    el = np.arange(step, 180.0, step)
    pattern = beampattern(layout, ris_cfg, imp, sc.wavelength, az, el)

    header = ["elevation_deg"] + [_fmt(a) for a in az]
    rows = [(_fmt(el[i]), *[_fmt(v) for v in pattern[i]]) for i in range(el.size)]
    _write_csv(out / "beampattern.csv", header, rows)

    ue_az, ue_el = _ue_direction_deg(sc)
    cut_el = float(args.cut_elevation) if args.cut_elevation is not None else ue_el
    cut_idx = int(np.argmin(np.abs(el - cut_el)))
    _write_csv(
        out / "beampattern_cut.csv",
        ["azimuth_deg", "power_db"],
        [(az[i], pattern[cut_idx, i]) for i in range(az.size)],
    )
    return {
        "cut_elevation_deg": float(el[cut_idx]),
        "ue_azimuth_deg": ue_az,
        "ue_elevation_deg": ue_el,
    }


def _cmd_spacing(cfg: RunConfig, out: Path, args) -> dict:
    sc = cfg.scenario
    layout, _ = _resolve_layout_config(cfg, args)
    counts, edges, retained = spacing_distribution(
        layout, sc.wavelength, float(args.percentile)
    )
    rows = [
        (edges[i], edges[i + 1], str(int(counts[i]))) for i in range(len(counts))
    ]
    _write_csv(out / "spacing.csv", ["bin_lo", "bin_hi", "count"], rows)
    return {"pairs_retained": int(retained.size), "percentile": float(args.percentile)}


def _cmd_sweep(cfg: RunConfig, out: Path, args) -> dict:
    results = []
    for n in [int(v) for v in args.n_values.split(",")]:
        # Rebuild with this element count, everything else inherited.
        raw = {sec: dict(kv) for sec, kv in cfg.raw.items()}
        raw["initial_shape"]["n"] = str(n)
        text = "\n".join(
            f"[{sec}]\n" + "\n".join(f"{k} = {v}" for k, v in kv.items())
            for sec, kv in raw.items()
        )
        run_cfg = parse_scenario(text)
        tic = time.perf_counter()
        layout, ris_cfg, trace = run_t3dris(
            run_cfg.scenario, run_cfg.make_layout(), run_cfg.feasible,
            run_cfg.box, run_cfg.settings,
        )
        results.append(
            (
                str(n), time.perf_counter() - tic, trace.snr_db[0],
                trace.snr_db[-1], str(trace.n_iterations),
            )
        )
    _write_csv(
        out / "sweep.csv",
        ["n", "wall_time_s", "snr_db_initial", "snr_db_final", "iterations"],
        results,
    )
    return {"n_values": args.n_values}


def _error_record(out: Path | None, kind: str, message: str) -> None:
    record = json.dumps({"kind": kind, "message": message}) + "\n"
    sys.stderr.write(record)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "error.jsonl", "a", encoding="utf-8") as fh:
                fh.write(record)
        except OSError:
            pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ris3d",
        description="Joint shape and configuration optimization of a "
        "mutually coupled reconfigurable surface",
    )
    parser.add_argument("command", choices=["optimize", "baseline", "beampattern", "spacing", "sweep"])
    parser.add_argument("--config", help="scenario config file (INI); defaults apply if omitted")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (best effort; results are identical regardless)")
    parser.add_argument("--layout", help="layout.csv from a previous run (beampattern/spacing)")
    parser.add_argument("--reactances", help="reactances.csv from a previous run (beampattern)")
    parser.add_argument("--grid-step", default="1.0", help="beampattern grid step, degrees")
    parser.add_argument("--cut-elevation", default=None,
                        help="beampattern cut elevation, degrees (default: UE elevation)")
    parser.add_argument("--percentile", default="90", help="spacing percentile")
    parser.add_argument("--n-values", default="8,16,32,64", help="sweep element counts")
    args = parser.parse_args(argv)

    out = Path(args.out)
    if args.threads is not None and args.threads > 0:
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(args.threads)
        except ImportError:
            pass

    try:
        if args.config is not None:
            config_path = Path(args.config)
            if not config_path.exists():
                _error_record(out, "config-not-found", f"no such config file: {config_path}")
                return 2
            text = config_path.read_text(encoding="utf-8")
        else:
            text = ""
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ParseError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            dotted, value = item.split("=", 1)
            overrides[dotted.strip()] = value.strip()
        cfg = parse_scenario(text, overrides)
    except ParseError as exc:
        _error_record(out, "parse-error", str(exc))
        return 2
    except ValidationError as exc:
        _error_record(out, "validation-error", str(exc))
        return 2

    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "optimize":
            extra = _cmd_optimize(cfg, out)
        elif args.command == "baseline":
            extra = _cmd_baseline(cfg, out)
        elif args.command == "beampattern":
            extra = _cmd_beampattern(cfg, out, args)
        elif args.command == "spacing":
            extra = _cmd_spacing(cfg, out, args)
        else:
            extra = _cmd_sweep(cfg, out, args)
    except Ris3dError as exc:
        kind = type(exc).__name__.removesuffix("Error").lower() + "-error"
        _error_record(out, kind, str(exc))
        return 1
    _write_manifest(out / "manifest.json", cfg, args.command, extra)
    return 0


if __name__ == "__main__":
    sys.exit(main())
