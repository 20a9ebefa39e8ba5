import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ris3d.channel import RisConfig, build_state
from ris3d.geometry import initial_shape
from ris3d.impedance import DipoleLayout, assemble
from ris3d.scenario import Scenario


@pytest.fixture(scope="session")
def scenario():
    return Scenario()


@pytest.fixture(scope="session")
def random_layout8(scenario):
    """Well-separated random 8-element cloud, no co-linear pairs."""
    rng = np.random.default_rng(42)
    lam = scenario.wavelength
    while True:
        q = rng.uniform(-0.02, 0.02, (3, 8))
        d_xy = np.hypot(
            q[0][:, None] - q[0][None, :], q[1][:, None] - q[1][None, :]
        )
        np.fill_diagonal(d_xy, np.inf)
        if d_xy.min() > lam / 10:
            return DipoleLayout(q, lam / 4, lam / 500)


@pytest.fixture(scope="session")
def state8(scenario, random_layout8):
    imp = assemble(random_layout8, scenario.p_bs, scenario.p_ue, scenario.wavelength)
    rng = np.random.default_rng(7)
    cfg = RisConfig(rng.uniform(-400.0, 150.0, 8), scenario.r0)
    return build_state(imp, cfg, scenario.y0)


@pytest.fixture(scope="session")
def upa16(scenario):
    return initial_shape("upa", 16, scenario.wavelength, scenario.wavelength / 2)


@pytest.fixture(scope="session")
def imp16(scenario, upa16):
    return assemble(upa16, scenario.p_bs, scenario.p_ue, scenario.wavelength)
