import numpy as np
import pytest

from ris3d.channel import RisConfig, build_state, refresh
from ris3d.config_optimizer import BoxSet, config_gradient, optimize_config
from ris3d.errors import DomainError
from ris3d.impedance import DipoleLayout, assemble

BOX = BoxSet(-5000.0, 188.0)


def test_box_validation():
    with pytest.raises(DomainError):
        BoxSet(188.0, -5000.0)


def objective_over_grid(imp, scenario, grid):
    # Scalar closed form for one element.
    denom = imp.z_ss[0, 0] + scenario.r0 + 1j * grid
    return np.abs(scenario.y0 * (imp.z_rt - imp.z_sr[0] * imp.z_st[0] / denom)) ** 2


def test_single_element_matches_grid_search(scenario):
    layout = DipoleLayout(np.zeros((3, 1)), scenario.wavelength / 4, scenario.wavelength / 500)
    imp = assemble(layout, scenario.p_bs, scenario.p_ue, scenario.wavelength)
    state = build_state(imp, RisConfig(np.zeros(1), scenario.r0), scenario.y0)
    cfg, trace = optimize_config(state, BOX, max_iters=500, tol=1e-13)
    grid = np.arange(BOX.b_min, BOX.b_max + 1e-2, 1e-2)
    grid_obj = objective_over_grid(imp, scenario, grid)
    i_best = int(np.argmax(grid_obj))
    local_resolution = np.max(np.abs(np.diff(grid_obj[max(0, i_best - 2): i_best + 3])))
    assert trace[-1] >= grid_obj[i_best] - local_resolution


def test_restart_at_optimum_is_fixed_point(state8):
    cfg, trace = optimize_config(state8, BOX, max_iters=400, tol=1e-12)
    settled = refresh(state8, new_cfg=cfg)
    cfg2, trace2 = optimize_config(settled, BOX, max_iters=400, tol=1e-12)
    assert len(trace2) <= 3
    assert np.max(np.abs(cfg2.reactances - cfg.reactances)) < 1.0


def test_beats_random_search(scenario):
    rng = np.random.default_rng(21)
    q = rng.uniform(-0.015, 0.015, (3, 4))
    layout = DipoleLayout(q, scenario.wavelength / 4, scenario.wavelength / 500)
    imp = assemble(layout, scenario.p_bs, scenario.p_ue, scenario.wavelength)
    state = build_state(imp, RisConfig(np.zeros(4), scenario.r0), scenario.y0)
    cfg, trace = optimize_config(state, BOX, max_iters=500, tol=1e-12)
    best_random = 0.0
    for _ in range(2000):
        b = rng.uniform(BOX.b_min, BOX.b_max, 4)
        h = build_state(imp, RisConfig(b, scenario.r0), scenario.y0).h
        best_random = max(best_random, abs(h) ** 2)
    assert trace[-1] >= best_random


def test_gradient_matches_finite_differences(state8):
    grad = config_gradient(state8)
    b = state8.config.reactances
    fd = np.empty_like(grad)
    for i in range(b.size):
        e = np.zeros_like(b)
        e[i] = 1e-3
        up = refresh(state8, new_cfg=RisConfig(b + e, state8.config.loss_resistance))
        dn = refresh(state8, new_cfg=RisConfig(b - e, state8.config.loss_resistance))
        fd[i] = (abs(up.h) ** 2 - abs(dn.h) ** 2) / 2e-3
    assert np.max(np.abs(grad - fd)) / np.max(np.abs(fd)) < 1e-5


def test_gradient_small_at_interior_optimum(scenario):
    layout = DipoleLayout(np.zeros((3, 1)), scenario.wavelength / 4, scenario.wavelength / 500)
    imp = assemble(layout, scenario.p_bs, scenario.p_ue, scenario.wavelength)
    state = build_state(imp, RisConfig(np.zeros(1), scenario.r0), scenario.y0)
    cfg, trace = optimize_config(state, BOX, max_iters=2000, tol=1e-16)
    settled = refresh(state, new_cfg=cfg)
    g = config_gradient(settled)
    assert BOX.b_min < cfg.reactances[0] < BOX.b_max
    assert np.abs(g[0]) < 1e-9 * max(1.0, abs(settled.h) ** 2 / 1.0)


def test_mirror_symmetric_elements_get_equal_gradients(scenario):
    # BS and UE on the x axis, elements mirrored in y: the landscape cannot
    # tell the pair apart.
    lam = scenario.wavelength
    q = np.zeros((3, 2))
    q[1] = [-lam, lam]
    layout = DipoleLayout(q, lam / 4, lam / 500)
    imp = assemble(layout, np.array([1.3, 0, 0]), np.array([0.9, 0, 0.2]), lam)
    state = build_state(imp, RisConfig(np.array([-25.0, -25.0]), scenario.r0), scenario.y0)
    g = config_gradient(state)
    assert g[0] == pytest.approx(g[1], rel=1e-10)


def test_trace_monotone_and_feasible(state8):
    cfg, trace = optimize_config(state8, BOX, max_iters=300, tol=1e-12)
    assert np.all(np.diff(trace) >= 0)
    assert np.all(cfg.reactances >= BOX.b_min)
    assert np.all(cfg.reactances <= BOX.b_max)
    assert trace[-1] >= abs(state8.h) ** 2
