"""Post-hoc metrics: radiated pattern, spacing statistics, beamwidth.

The pattern model drives the array with the BS-side cascade: induced
currents ``i = (Z_SS + Z_RIS)^{-1} z_ST`` under a unit source, then a far
field from per-element phase factors and the half-wave element factor.
Re-scattering beyond what the induced-current solve captures is out of
model, which is exactly the boundary between this and a full-wave solver.
"""

from __future__ import annotations

import numpy as np

from .channel import RisConfig
from .errors import DomainError, NoCrossingError, PoleError, SingularMatrixError
from .impedance import DipoleLayout, ImpedanceSet

_POLE_DEG = 1e-9


def element_currents(cfg: RisConfig, imp: ImpedanceSet) -> np.ndarray:
    mat = imp.z_ss.copy()
    mat[np.diag_indices_from(mat)] += cfg.load_impedances
    try:
        return np.linalg.solve(mat, imp.z_st)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"cannot solve for element currents: {exc}") from exc


def _field_matrix(layout, currents, wavelength, azimuth_deg, elevation_deg):
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=float))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=float))
    if az.size == 0 or el.size == 0:
        raise DomainError("direction grid must be nonempty")
    sin_el = np.sin(el)
    if np.any(np.abs(sin_el) < np.deg2rad(_POLE_DEG)):
        raise PoleError("elevation grid touches the dipole axis poles")
    # Unit direction vectors, (n_el, n_az, 3).
    dirs = np.empty((el.size, az.size, 3))
    dirs[..., 0] = sin_el[:, None] * np.cos(az)[None, :]
    dirs[..., 1] = sin_el[:, None] * np.sin(az)[None, :]
    dirs[..., 2] = np.cos(el)[:, None]
    k = 2.0 * np.pi / wavelength
    phases = np.exp(1j * k * np.tensordot(dirs, layout.positions, axes=(2, 0)))
    element_factor = np.cos(np.pi / 2.0 * np.cos(el)) / sin_el
    return element_factor[:, None] * (phases @ currents)


def beampattern(
    layout: DipoleLayout,
    cfg: RisConfig,
    imp: ImpedanceSet,
    wavelength: float,
    azimuth_deg: np.ndarray,
    elevation_deg: np.ndarray,
) -> np.ndarray:
    """Normalized radiated power, dB, shape (n_elevation, n_azimuth).

    Elevation is the polar angle from the dipole axis (+z); the grid must
    exclude the poles. The peak over the grid is exactly 0 dB.
    """
    field = _field_matrix(
        layout, element_currents(cfg, imp), wavelength, azimuth_deg, elevation_deg
    )
    power = np.abs(field) ** 2
    peak = power.max()
    if peak == 0:
        raise DomainError("radiated power vanishes on the whole grid")
    return 10.0 * np.log10(power / peak)


def directivity_db(
    layout: DipoleLayout,
    cfg: RisConfig,
    imp: ImpedanceSet,
    wavelength: float,
    azimuth_deg: float,
    elevation_deg: float,
    grid_step_deg: float = 1.0,
) -> float:
    """Directivity toward one direction, dBi, via grid quadrature of the pattern."""
    currents = element_currents(cfg, imp)
    az = np.arange(0.0, 360.0, grid_step_deg)
    el = np.arange(grid_step_deg / 2.0, 180.0, grid_step_deg)
    field = _field_matrix(layout, currents, wavelength, az, el)
    power = np.abs(field) ** 2
    d_omega = np.deg2rad(grid_step_deg) ** 2 * np.sin(np.deg2rad(el))
    total = float(np.sum(power * d_omega[:, None]))
    target = _field_matrix(
        layout, currents, wavelength, np.array([azimuth_deg]), np.array([elevation_deg])
    )
    p_target = float(np.abs(target[0, 0]) ** 2)
    return 10.0 * np.log10(4.0 * np.pi * p_target / total)


def spacing_distribution(layout: DipoleLayout, wavelength: float, percentile: float):
    """Histogram of normalized inverse spacings ``lambda/d`` up to a percentile.

    Returns ``(counts, bin_edges, retained_values)``; the histogram has 20
    fixed-width bins and its mass equals the number of retained pairs.
    """
    if layout.n_elements < 2:
        raise DomainError("spacing distribution needs at least two elements")
    if not 0 <= percentile <= 100:
        raise DomainError("percentile must lie in [0, 100]")
    q = layout.positions
    iu, ju = np.triu_indices(layout.n_elements, k=1)
    dists = np.linalg.norm(q[:, iu] - q[:, ju], axis=0)
    ratios = wavelength / dists
    threshold = np.percentile(ratios, percentile)
    retained = np.sort(ratios[ratios <= threshold])
    counts, edges = np.histogram(retained, bins=20)
    return counts, edges, retained


def hpbw(angles_deg: np.ndarray, pattern_db: np.ndarray) -> float:
    """Half-power beamwidth of a 1D cut, degrees, by linear interpolation.

    The cut must have a unique global peak; raises NoCrossingError when the
    pattern never drops 3 dB below the peak on either side.
    """
    angles = np.asarray(angles_deg, dtype=float)
    pattern = np.asarray(pattern_db, dtype=float)
    if angles.shape != pattern.shape or angles.ndim != 1 or angles.size < 3:
        raise DomainError("need matching 1D angle/pattern arrays")
    peak_idx = int(np.argmax(pattern))
    peak = pattern[peak_idx]
    if np.count_nonzero(pattern == peak) != 1:
        raise DomainError("pattern cut has no unique global peak")
    level = peak - 10.0 * np.log10(2.0)

    def crossing(indices):
        prev = peak_idx
        for i in indices:
            if pattern[i] <= level:
                # Linear interpolation between the bracketing samples.
                frac = (pattern[prev] - level) / (pattern[prev] - pattern[i])
                return angles[prev] + frac * (angles[i] - angles[prev])
            prev = i
        raise NoCrossingError("pattern never reaches the half-power level")

    left = crossing(range(peak_idx - 1, -1, -1))
    right = crossing(range(peak_idx + 1, len(pattern)))
    return float(abs(right - left))
