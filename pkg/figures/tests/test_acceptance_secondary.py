"""Secondary acceptance: all four figure kinds from a real desk-scale run.

Drives the optimizer through its public CLI (subprocess), then renders
every figure kind from the emitted artifacts and checks re-rendering is
byte-identical. Skips if the optimizer CLI is not installed.
"""

import shutil
import subprocess

import pytest

from ris3d_figures.render import main as render_main

pytestmark = pytest.mark.skipif(
    shutil.which("ris3d") is None, reason="ris3d CLI not installed"
)

INI = """
[initial_shape]
kind = cylinder
n = 9

[solver]
max_iters = 4
"""


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk_run")
    ini = root / "desk.ini"
    ini.write_text(INI)
    run = root / "run"
    subprocess.run(
        ["ris3d", "optimize", "--config", str(ini), "--out", str(run)],
        check=True, capture_output=True,
    )
    subprocess.run(
        [
            "ris3d", "beampattern", "--config", str(ini), "--out", str(run),
            "--layout", str(run / "layout.csv"),
            "--reactances", str(run / "reactances.csv"),
            "--grid-step", "5",
        ],
        check=True, capture_output=True,
    )
    subprocess.run(
        [
            "ris3d", "spacing", "--config", str(ini), "--out", str(run),
            "--layout", str(run / "layout.csv"),
        ],
        check=True, capture_output=True,
    )
    return run


def test_all_four_kinds_render_and_rerender_identically(artifacts, tmp_path):
    jobs = {
        "trace": [str(artifacts / "trace.csv")],
        "bars": [str(artifacts / "trace.csv")],
        "spacing": [str(artifacts / "spacing.csv")],
        "beampattern": [
            str(artifacts / "beampattern.csv"),
            str(artifacts / "beampattern_cut.csv"),
        ],
    }
    for kind, inputs in jobs.items():
        first = tmp_path / f"{kind}_1.svg"
        second = tmp_path / f"{kind}_2.svg"
        assert render_main([kind, *inputs, "-o", str(first)]) == 0
        assert render_main([kind, *inputs, "-o", str(second)]) == 0
        assert first.stat().st_size > 0
        assert first.read_bytes() == second.read_bytes()
        print(f"ACCEPTANCE figures-{kind}: PASS (byte-identical re-render)")
