"""Phase-profile comparison scheme and reflection-phase-to-load conversion.

The comparison design co-phases the per-element BS-element-UE cascades,
the standard steering-vector recipe under ideal unit-magnitude reflection
coefficients. Those phases are then mapped onto the load model through the
reflection-coefficient relation ``e^{j theta} = (Z - Z0)/(Z + Z0)``, fixing
the real part to the loss constant and keeping only the reactance.
"""

from __future__ import annotations

import numpy as np

from .channel import RisConfig
from .config_optimizer import BoxSet
from .errors import PoleError
from .impedance import ImpedanceSet

# Phases within this many radians of the mapping's special points get the
# documented special handling instead of a blind evaluation.
_POLE_ATOL = 1e-9


def phase_profile_config(imp: ImpedanceSet) -> np.ndarray:
    """Per-element phases that co-phase the cascaded paths, radians in (-pi, pi]."""
    return -np.angle(imp.z_sr * imp.z_st)


def phases_to_loads(
    theta: np.ndarray,
    z0: complex,
    r0: float,
    box: BoxSet,
):
    """Invert the reflection relation into feasible loads.

    Solves ``e^{j theta} = (Z - Z0)/(Z + Z0)`` for Z, discards the real
    part in favor of ``r0`` and clamps the reactances into ``box``.
    Returns ``(config, n_clamped)``.

    Raises
    ------
    PoleError
        For phases within 1e-9 rad of pi, the contract's excluded point.
        Phases at 0 (where |Z| diverges) map to the nearest box edge and
        are counted as clamps.
    """
    theta = np.asarray(theta, dtype=float)
    wrapped = np.angle(np.exp(1j * theta))
    if np.any(np.abs(np.abs(wrapped) - np.pi) < _POLE_ATOL):
        raise PoleError("phase of pi is a pole of the load inversion")

    b = np.empty(theta.shape)
    at_zero = np.abs(wrapped) < _POLE_ATOL
    regular = ~at_zero
    if np.any(regular):
        ej = np.exp(1j * wrapped[regular])
        z = z0 * (1.0 + ej) / (1.0 - ej)
        b[regular] = np.imag(z)
    if np.any(at_zero):
        # theta -> 0 drives |Z| to infinity; park it at the larger box edge.
        b[at_zero] = box.b_max if abs(box.b_max) >= abs(box.b_min) else box.b_min
    clamped = np.clip(b, box.b_min, box.b_max)
    n_clamped = int(np.count_nonzero(clamped != b)) + int(np.count_nonzero(at_zero))
    return RisConfig(clamped, r0), n_clamped


def baseline_config(imp: ImpedanceSet, z0: complex, r0: float, box: BoxSet):
    """Full comparison pipeline: co-phase, invert, clamp."""
    return phases_to_loads(phase_profile_config(imp), z0, r0, box)
