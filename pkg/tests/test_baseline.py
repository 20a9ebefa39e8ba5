import numpy as np
import pytest

from ris3d.baseline import baseline_config, phase_profile_config, phases_to_loads
from ris3d.channel import build_state, snr_db
from ris3d.config_optimizer import BoxSet
from ris3d.errors import PoleError
from ris3d.geometry import initial_shape
from ris3d.impedance import ImpedanceSet, assemble, self_impedance

BOX = BoxSet(-5000.0, 188.0)


def _imp_with_cascades(z_sr, z_st):
    n = len(z_sr)
    z_ss = np.diag(np.full(n, 73.0 + 42.0j))
    return ImpedanceSet(0.05 + 0j, np.asarray(z_sr), np.asarray(z_st), z_ss)


def test_real_positive_cascades_need_no_phase():
    imp = _imp_with_cascades([0.1, 0.2], [0.3, 0.1])
    assert np.allclose(phase_profile_config(imp), 0.0)


def test_single_element_phase():
    imp = _imp_with_cascades([np.exp(1j * np.pi / 3)], [1.0])
    assert phase_profile_config(imp)[0] == pytest.approx(-np.pi / 3, rel=1e-12)


def test_phases_follow_path_length_steering(scenario):
    # Spherical-wave steering oracle: the cascade phase tracks the summed
    # BS-element and element-UE path lengths.
    lam = scenario.wavelength
    layout = initial_shape("upa", 16, lam, lam / 2)
    imp = assemble(layout, scenario.p_bs, scenario.p_ue, lam)
    theta = phase_profile_config(imp)
    k = 2 * np.pi / lam
    d_bs = np.linalg.norm(layout.positions - scenario.p_bs[:, None], axis=0)
    d_ue = np.linalg.norm(layout.positions - scenario.p_ue[:, None], axis=0)
    oracle = k * (d_bs + d_ue)
    # Compare after removing the common constant, modulo 2 pi.
    diff = np.angle(np.exp(1j * (theta - oracle)))
    diff -= diff[0]
    diff = np.angle(np.exp(1j * diff))
    assert np.max(np.abs(diff)) < 1e-3


def test_load_inversion_round_trip_identity():
    z0 = self_impedance(0.01, 0.0025, 0.01 / 500)
    rng = np.random.default_rng(17)
    theta = rng.uniform(-3.0, 3.0, 64)
    theta = theta[np.abs(theta) > 0.05]
    z = z0 * (1.0 + np.exp(1j * theta)) / (1.0 - np.exp(1j * theta))
    recovered = np.angle((z - z0) / (z + z0))
    assert np.max(np.abs(np.angle(np.exp(1j * (recovered - theta))))) < 1e-9


def test_loads_inverted_and_clamped(scenario):
    z0 = self_impedance(scenario.wavelength, 0.0025, scenario.wavelength / 500)
    theta = np.array([1.0, -2.0, 3.0])
    cfg, n_clamped = phases_to_loads(theta, z0, scenario.r0, BOX)
    assert cfg.loss_resistance == scenario.r0
    assert np.all(cfg.reactances >= BOX.b_min)
    assert np.all(cfg.reactances <= BOX.b_max)
    direct = np.imag(z0 * (1 + np.exp(1j * theta)) / (1 - np.exp(1j * theta)))
    unclamped = (direct >= BOX.b_min) & (direct <= BOX.b_max)
    assert np.allclose(cfg.reactances[unclamped], direct[unclamped])


def test_pole_at_pi_raises():
    z0 = 73.0 + 42.0j
    with pytest.raises(PoleError):
        phases_to_loads(np.array([np.pi]), z0, 0.2, BOX)
    with pytest.raises(PoleError):
        phases_to_loads(np.array([-np.pi + 1e-12]), z0, 0.2, BOX)


def test_zero_phase_parks_at_box_edge():
    z0 = 73.0 + 42.0j
    cfg, n_clamped = phases_to_loads(np.array([0.0]), z0, 0.2, BOX)
    assert cfg.reactances[0] == BOX.b_min  # |b_min| is the larger edge
    assert n_clamped == 1


def test_random_phase_sweep_feasible():
    z0 = 73.0 + 42.0j
    rng = np.random.default_rng(23)
    theta = rng.uniform(-np.pi + 0.02, np.pi - 0.02, 500)
    theta = theta[np.abs(theta) > 0.01]
    cfg, _ = phases_to_loads(theta, z0, 0.2, BOX)
    assert np.all(np.isfinite(cfg.reactances))
    assert np.all((cfg.reactances >= BOX.b_min) & (cfg.reactances <= BOX.b_max))


def test_baseline_config_feasible_snr(scenario):
    lam = scenario.wavelength
    layout = initial_shape("cylinder", 16, lam, lam / 2, radius=0.1)
    imp = assemble(layout, scenario.p_bs, scenario.p_ue, lam)
    z0 = self_impedance(lam, layout.half_length, layout.wire_radius)
    cfg, _ = baseline_config(imp, z0, scenario.r0, BOX)
    state = build_state(imp, cfg, scenario.y0)
    assert np.isfinite(snr_db(state.h, scenario.power_w, scenario.noise_w))
