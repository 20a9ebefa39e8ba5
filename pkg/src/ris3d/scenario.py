"""Immutable experiment description with the desk-scale defaults.

Powers are taken in dBm at the boundary and converted to watts once, here;
everything downstream works in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Scenario:
    """Fixed physical description of one experiment."""

    p_bs: np.ndarray = field(default_factory=lambda: np.array([1.3, 0.0, 0.0]))
    p_ue: np.ndarray = field(default_factory=lambda: np.array([0.98, 0.56, -0.65]))
    wavelength: float = 0.01
    power_dbm: float = 10.0
    noise_dbm: float = -80.0
    y0: complex = 1.0 + 0.0j
    r0: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "p_bs", np.asarray(self.p_bs, dtype=float))
        object.__setattr__(self, "p_ue", np.asarray(self.p_ue, dtype=float))
        for name in ("p_bs", "p_ue"):
            v = getattr(self, name)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValidationError(f"{name} must be a finite 3-vector")
        if not self.wavelength > 0:
            raise ValidationError("wavelength must be positive")
        if self.r0 < 0:
            raise ValidationError("loss resistance r0 must be nonnegative")
        if self.y0 == 0:
            raise ValidationError("y0 must be nonzero")

    @property
    def power_w(self) -> float:
        return dbm_to_watts(self.power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)
