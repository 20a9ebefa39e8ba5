"""Reactance optimization for a fixed layout: projected gradient ascent.

The objective is the squared magnitude of the end-to-end channel over the
box of feasible reactances. The gradient is analytic: perturbing one load
reactance is a rank-one update of the coupling matrix, so the derivative
of the cached inverse collapses to a product of cached vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState, RisConfig, refresh
from .errors import DomainError

# Armijo line-search constants: shrink factor, sufficient-increase slope,
# and the size (ohms) of the first trial displacement.
BACKTRACK_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
INITIAL_STEP_OHM = 10.0
MAX_BACKTRACKS = 40


@dataclass(frozen=True)
class BoxSet:
    """Interval of feasible reactances, ohms."""

    b_min: float
    b_max: float

    def __post_init__(self):
        if not self.b_min < self.b_max:
            raise DomainError(
                f"reactance box is empty: [{self.b_min}, {self.b_max}]"
            )

    def clamp(self, b: np.ndarray) -> np.ndarray:
        return np.clip(b, self.b_min, self.b_max)


def config_gradient(state: ChannelState) -> np.ndarray:
    """d|H|^2/db_n for every element, as a real vector.

    dH/db_n = j Y0 (G z_SR)_n (G z_ST)_n, hence the objective gradient is
    2 Re(conj(H) j Y0 g_SR g_ST) elementwise.
    """
    dh = 1j * state.y0 * state.g_sr * state.g_st
    return 2.0 * np.real(np.conj(state.h) * dh)


def optimize_config(
    state: ChannelState,
    box: BoxSet,
    max_iters: int = 200,
    tol: float = 1e-9,
):
    """Ascend |H|^2 over the reactance box from the state's current config.

    Returns ``(config, trace)`` where ``trace`` is the nondecreasing
    sequence of objective values of the accepted iterates. Always returns
    the best iterate found; all entries stay inside the box exactly.
    """
    if max_iters < 1:
        raise DomainError("max_iters must be at least 1")
    if not tol > 0:
        raise DomainError("tol must be positive")

    r0 = state.config.loss_resistance
    b = box.clamp(state.config.reactances)
    if not np.array_equal(b, state.config.reactances):
        state = refresh(state, new_cfg=RisConfig(b, r0))
    objective = abs(state.h) ** 2
    trace = [objective]

    for _ in range(max_iters):
        grad = config_gradient(state)
        g_inf = np.max(np.abs(grad))
        if g_inf == 0.0:
            break
        alpha = INITIAL_STEP_OHM / g_inf
        accepted = None
        for _ in range(MAX_BACKTRACKS):
            b_new = box.clamp(b + alpha * grad)
            step = b_new - b
            if not np.any(step):
                break
            cand = refresh(state, new_cfg=RisConfig(b_new, r0))
            cand_objective = abs(cand.h) ** 2
            if cand_objective >= objective + ARMIJO_SLOPE * float(grad @ step):
                accepted = (b_new, cand, cand_objective)
                break
            alpha *= BACKTRACK_SHRINK
        if accepted is None:
            break
        b, state, new_objective = accepted
        trace.append(new_objective)
        improvement = new_objective - objective
        objective = new_objective
        if improvement <= tol * max(objective, 1e-300):
            break

    return state.config, np.asarray(trace)
