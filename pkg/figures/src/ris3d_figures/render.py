"""Render publication-style figures from ris3d CSV artifacts.

Usage: ``ris3d-render <kind> <inputs...> -o <file>`` with kind one of
``trace``, ``bars``, ``spacing``, ``beampattern``. Inputs are the files the
optimizer CLI wrote; no numbers are recomputed here. Output is SVG with a
pinned style and no timestamps, so re-rendering the same inputs gives the
same bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "ris3d-figures",
}


class SchemaError(ValueError):
    """Input file does not match the documented artifact schema."""


def read_csv(path: Path, required: list):
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    for column in required:
        if column not in header:
            raise SchemaError(f"{path}: missing required column '{column}'")
    rows = [line.split(",") for line in lines[1:]]
    data = {
        name: np.array([row[i] for row in rows], dtype=float)
        for i, name in enumerate(header)
    }
    return header, data


def run_label(csv_path: Path) -> str:
    """Legend label from the manifest sitting next to an artifact."""
    manifest = csv_path.parent / "manifest.json"
    if manifest.exists():
        try:
            info = json.loads(manifest.read_text(encoding="utf-8"))
            shape = info["config"]["initial_shape"]
            feasible = info["config"]["feasible_set"]["kind"]
            return f"{shape['kind']} N={shape['n']} ({feasible})"
        except (KeyError, json.JSONDecodeError):
            pass
    return csv_path.parent.name or csv_path.stem


def render_trace(inputs: list, output: Path) -> None:
    fig, ax = plt.subplots()
    for path in inputs:
        _, data = read_csv(path, ["iter", "snr_db"])
        ax.plot(data["iter"], data["snr_db"], marker=".", label=run_label(path))
    ax.set_xlabel("algorithm iteration")
    ax.set_ylabel("SNR [dB]")
    if len(inputs) > 1:
        ax.legend()
    _save(fig, output)


def render_bars(inputs: list, output: Path) -> None:
    labels, initial, final = [], [], []
    for path in inputs:
        _, data = read_csv(path, ["iter", "snr_db"])
        labels.append(run_label(path))
        initial.append(data["snr_db"][0])
        final.append(data["snr_db"][-1])
    x = np.arange(len(labels))
    fig, ax = plt.subplots()
    width = 0.38
    ax.bar(x - width / 2, initial, width, label="initial shape")
    ax.bar(x + width / 2, final, width, label="optimized")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("max SNR [dB]")
    lo = min(initial + final)
    hi = max(initial + final)
    pad = 0.1 * max(hi - lo, 0.1)
    ax.set_ylim(lo - pad, hi + pad)
    ax.legend()
    _save(fig, output)


def render_spacing(inputs: list, output: Path) -> None:
    fig, ax = plt.subplots()
    for path in inputs:
        _, data = read_csv(path, ["bin_lo", "bin_hi", "count"])
        centers = 0.5 * (data["bin_lo"] + data["bin_hi"])
        widths = data["bin_hi"] - data["bin_lo"]
        ax.bar(centers, data["count"], width=widths, alpha=0.6 if len(inputs) > 1 else 0.9,
               edgecolor="black", linewidth=0.4, label=run_label(path))
    ax.set_xlabel("normalized inverse spacing lambda/d")
    ax.set_ylabel("pair count")
    if len(inputs) > 1:
        ax.legend()
    _save(fig, output)


def render_beampattern(inputs: list, output: Path, cut_elevation: float) -> None:
    header, data = read_csv(inputs[0], ["elevation_deg"])
    azimuth = np.array([float(c) for c in header[1:]])
    elevation = data["elevation_deg"]
    matrix = np.column_stack([data[c] for c in header[1:]])

    fig = plt.figure(figsize=(9.0, 4.0))
    ax = fig.add_subplot(1, 2, 1)
    # Rasterize the mesh: a 1-degree grid as SVG rectangles is enormous.
    mesh = ax.pcolormesh(
        azimuth, elevation, matrix, shading="nearest", vmin=-40.0, vmax=0.0,
        rasterized=True,
    )
    fig.colorbar(mesh, ax=ax, label="radiated power [dB]")
    ax.set_xlabel("azimuth [deg]")
    ax.set_ylabel("elevation [deg]")

    polar = fig.add_subplot(1, 2, 2, projection="polar")
    if len(inputs) > 1:
        _, cut = read_csv(inputs[1], ["azimuth_deg", "power_db"])
        cut_az, cut_db = cut["azimuth_deg"], cut["power_db"]
        cut_used = cut_elevation
    else:
        row = int(np.argmin(np.abs(elevation - cut_elevation)))
        cut_az, cut_db = azimuth, matrix[row]
        cut_used = float(elevation[row])
    polar.plot(np.deg2rad(cut_az), np.maximum(cut_db, -40.0))
    polar.set_rlim(-40.0, 0.0)
    polar.set_title(f"cut at elevation {cut_used:g} deg [dB]", fontsize=9)
    _save(fig, output)


def _save(fig, output: Path) -> None:
    fig.tight_layout()
    fig.savefig(output, format="svg", metadata={"Date": None})
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ris3d-render",
        description="Render figures from ris3d CSV artifacts",
    )
    parser.add_argument("kind", choices=["trace", "bars", "spacing", "beampattern"])
    parser.add_argument("inputs", nargs="+", help="artifact CSV files")
    parser.add_argument("-o", "--output", required=True, help="output image (SVG)")
    parser.add_argument("--cut-elevation", type=float, default=120.0,
                        help="beampattern polar-cut elevation, degrees")
    args = parser.parse_args(argv)

    plt.rcdefaults()
    matplotlib.rcParams.update(_STYLE)
    inputs = [Path(p) for p in args.inputs]
    for path in inputs:
        if not path.exists():
            sys.stderr.write(f"input not found: {path}\n")
            return 2
    output = Path(args.output)
    try:
        if args.kind == "trace":
            render_trace(inputs, output)
        elif args.kind == "bars":
            render_bars(inputs, output)
        elif args.kind == "spacing":
            render_spacing(inputs, output)
        else:
            render_beampattern(inputs, output, args.cut_elevation)
    except SchemaError as exc:
        sys.stderr.write(f"schema mismatch: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
