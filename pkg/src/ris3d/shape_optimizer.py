"""The alternating shape/configuration loop with per-element position updates.

Each outer iteration first re-optimizes the reactances, then sweeps the
elements in index order. For each element the ascent direction comes from
the series-linearized channel (exact at zero displacement), and the step
size is found by halving from ``alpha_init`` until three conditions hold:
the rank-2 perturbation stays inside the series validity cap, the
candidate is feasible, and the exactly re-inverted channel does not lose
magnitude. Acceptance is always judged on exact re-inversion, so the SNR
trace is monotone by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import impedance as imp_mod
from .channel import (
    ChannelState,
    RisConfig,
    build_state,
    perturbation_norm,
    refresh,
    snr_db,
    snr_linear,
)
from .config_optimizer import BoxSet, optimize_config
from .errors import (
    ColinearError,
    DomainError,
    OverlapError,
    PoleError,
    SingularMatrixError,
)
from .geometry import apply_step, ascent_direction, project
from .impedance import DipoleLayout, assemble, assemble_element_row, impedance_gradient
from .scenario import Scenario


@dataclass(frozen=True)
class SolverSettings:
    """Loop controls; ``alpha_init`` defaults to a tenth of a wavelength."""

    epsilon: float = 1e-6
    max_outer_iterations: int = 2000
    neumann_cap: float = 0.1
    alpha_init: float | None = None
    bisection_tol: float | None = None
    max_halvings: int = 30
    config_max_iters: int = 200
    config_tol: float = 1e-9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.max_outer_iterations < 1:
            raise DomainError("max_outer_iterations must be at least 1")
        if not 0 < self.neumann_cap:
            raise DomainError("neumann_cap must be positive")
        if self.alpha_init is not None and not self.alpha_init > 0:
            raise DomainError("alpha_init must be positive")
        if self.bisection_tol is not None and not self.bisection_tol > 0:
            raise DomainError("bisection_tol must be positive")
        if self.max_halvings < 0:
            raise DomainError("max_halvings must be nonnegative")

    def resolve(self, wavelength: float) -> "SolverSettings":
        alpha = self.alpha_init if self.alpha_init is not None else wavelength / 10.0
        bis = self.bisection_tol if self.bisection_tol is not None else alpha / 2.0**30
        return SolverSettings(
            epsilon=self.epsilon,
            max_outer_iterations=self.max_outer_iterations,
            neumann_cap=self.neumann_cap,
            alpha_init=alpha,
            bisection_tol=bis,
            max_halvings=self.max_halvings,
            config_max_iters=self.config_max_iters,
            config_tol=self.config_tol,
        )


@dataclass
class OptimizerTrace:
    """Per-outer-iteration history; row 0 is the initial state."""

    snr_db: list = field(default_factory=list)
    accepted_moves: list = field(default_factory=list)
    rejected_moves: list = field(default_factory=list)
    neumann_rejections: list = field(default_factory=list)
    colinear_incidents: list = field(default_factory=list)
    accepted_step_sizes: list = field(default_factory=list)
    max_displacement: list = field(default_factory=list)
    wall_time_s: list = field(default_factory=list)

    def append(self, snr, accepted=0, rejected=0, neumann=0, colinear=0,
               steps=(), max_disp=0.0, wall=0.0):
        self.snr_db.append(float(snr))
        self.accepted_moves.append(int(accepted))
        self.rejected_moves.append(int(rejected))
        self.neumann_rejections.append(int(neumann))
        self.colinear_incidents.append(int(colinear))
        self.accepted_step_sizes.append(list(steps))
        self.max_displacement.append(float(max_disp))
        self.wall_time_s.append(float(wall))

    @property
    def n_iterations(self) -> int:
        return len(self.snr_db) - 1


@dataclass(frozen=True)
class UpdateOutcome:
    accepted: bool
    alpha: float = 0.0
    displacement: float = 0.0
    neumann_rejections: int = 0
    trials: int = 0


def position_gradient(
    state: ChannelState,
    layout: DipoleLayout,
    scenario: Scenario,
    k: int,
) -> np.ndarray:
    """Gradient of the squared cascade magnitude |H/Y0|^2 w.r.t. q_k.

    Assembled from the closed-form pair-impedance gradients against the
    BS, the UE and every other element through the cached inverse; the
    linearization is exact at zero displacement.
    """
    q = layout.positions
    lam = scenario.wavelength
    h = layout.half_length
    a = layout.wire_radius
    n = layout.n_elements
    q_k = q[:, k]

    others = np.delete(np.arange(n), k)
    if others.size:
        deltas = (q_k[:, None] - q[:, others]).T
        bad = imp_mod._transverse_norm(deltas) < imp_mod.COLINEAR_RTOL * lam
        if bad.any():
            j = int(others[np.nonzero(bad)[0][0]])
            raise ColinearError(f"elements {k} and {j} are co-linear")

    grad_kr = impedance_gradient(q_k, scenario.p_ue, lam, h, a)
    grad_kt = impedance_gradient(q_k, scenario.p_bs, lam, h, a)

    g_st = state.g_st
    g_sr = state.g_sr
    dh = -grad_kr * g_st[k] - grad_kt * g_sr[k]
    if others.size:
        pair_grads = imp_mod._pair_gradients(deltas, lam, h)
        g_rst_others = g_st[k] * g_sr[others] + g_sr[k] * g_st[others]
        dh = dh + pair_grads.T @ g_rst_others
    return 2.0 * np.real(np.conj(state.z_rst) * dh)


def _gradient_with_decolinearize(state, layout, scenario, k):
    """Position gradient, evaluated at a wire-radius offset if the element
    sits exactly on another dipole's axis.

    The offset is a gradient-evaluation device only: the returned state and
    layout are untouched, so feasibility of constrained planar sets is
    never violated. Returns ``(gradient, incidents)``.
    """
    try:
        return position_gradient(state, layout, scenario, k), 0
    except ColinearError:
        pass
    a = layout.wire_radius
    q_k = layout.positions[:, k]
    for axis in (0, 1):
        shift = np.zeros(3)
        shift[axis] = a
        q_probe = q_k + shift
        probe_layout = layout.with_position(k, q_probe)
        try:
            column, z_sr_k, z_st_k = assemble_element_row(
                probe_layout, k, q_probe, scenario.p_bs, scenario.p_ue,
                scenario.wavelength,
            )
            probe_imp = state.impedances.with_element_update(k, column, z_sr_k, z_st_k)
            probe_state = refresh(state, new_imp=probe_imp)
            return position_gradient(probe_state, probe_layout, scenario, k), 1
        except (ColinearError, OverlapError, SingularMatrixError):
            continue
    return None, 1


def update_element(
    state: ChannelState,
    layout: DipoleLayout,
    scenario: Scenario,
    k: int,
    feasible_set,
    settings: SolverSettings,
    gradient: np.ndarray | None = None,
):
    """One projected line-searched move of element ``k``.

    Halves the step from ``alpha_init`` until the perturbation-norm cap,
    feasibility and the exact-SNR nondecrease all hold; if no step
    qualifies, the element stays put. Returns
    ``(state, layout, UpdateOutcome)`` with the state exactly refreshed
    whenever the move was accepted.
    """
    if gradient is None:
        gradient = position_gradient(state, layout, scenario, k)
    q_k = layout.positions[:, k]
    direction = ascent_direction(feasible_set, q_k, gradient)
    if not np.any(direction):
        return state, layout, UpdateOutcome(accepted=False)

    imp = state.impedances
    current_objective = abs(state.z_rst) ** 2
    alpha = settings.alpha_init
    neumann_rejections = 0
    trials = 0
    for _ in range(settings.max_halvings + 1):
        if alpha < settings.bisection_tol:
            break
        trials += 1
        q_cand = apply_step(feasible_set, q_k, direction, alpha)
        displacement = float(np.linalg.norm(q_cand - q_k))
        if displacement == 0.0:
            alpha *= 0.5
            continue
        try:
            column, z_sr_k, z_st_k = assemble_element_row(
                layout, k, q_cand, scenario.p_bs, scenario.p_ue, scenario.wavelength
            )
        except OverlapError:
            alpha *= 0.5
            continue
        delta_col = column - imp.z_ss[:, k]
        if perturbation_norm(state, k, delta_col) > settings.neumann_cap:
            neumann_rejections += 1
            alpha *= 0.5
            continue
        try:
            new_state = refresh(
                state, new_imp=imp.with_element_update(k, column, z_sr_k, z_st_k)
            )
        except SingularMatrixError:
            alpha *= 0.5
            continue
        if abs(new_state.z_rst) ** 2 >= current_objective:
            return (
                new_state,
                layout.with_position(k, q_cand),
                UpdateOutcome(
                    accepted=True,
                    alpha=alpha,
                    displacement=displacement,
                    neumann_rejections=neumann_rejections,
                    trials=trials,
                ),
            )
        alpha *= 0.5
    return state, layout, UpdateOutcome(
        accepted=False, neumann_rejections=neumann_rejections, trials=trials
    )


def run_t3dris(
    scenario: Scenario,
    layout0: DipoleLayout,
    feasible_set,
    box: BoxSet,
    settings: SolverSettings,
):
    """Alternate configuration and per-element shape updates until the
    relative SNR improvement falls below ``epsilon`` or the iteration cap.

    Deterministic for fixed inputs. Returns ``(layout, config, trace)``;
    the trace's SNR column is nondecreasing and its first row is the
    starting point (initial shape, all-zero reactances).
    """
    settings = settings.resolve(scenario.wavelength)
    n = layout0.n_elements

    positions = np.stack(
        [project(feasible_set, layout0.positions[:, k]) for k in range(n)], axis=1
    )
    layout = DipoleLayout(positions, layout0.half_length, layout0.wire_radius)

    cfg = RisConfig(np.clip(np.zeros(n), box.b_min, box.b_max), scenario.r0)
    imp = assemble(layout, scenario.p_bs, scenario.p_ue, scenario.wavelength)
    state = build_state(imp, cfg, scenario.y0)

    trace = OptimizerTrace()
    trace.append(snr_db(state.h, scenario.power_w, scenario.noise_w))
    snr_prev = snr_linear(state.h, scenario.power_w, scenario.noise_w)

    for _ in range(settings.max_outer_iterations):
        tic = time.perf_counter()
        cfg, _ = optimize_config(
            state, box, settings.config_max_iters, settings.config_tol
        )
        state = refresh(state, new_cfg=cfg)

        accepted = rejected = neumann = colinear = 0
        steps = []
        max_disp = 0.0
        for k in range(n):
            gradient, incidents = _gradient_with_decolinearize(
                state, layout, scenario, k
            )
            colinear += incidents
            if gradient is None:
                rejected += 1
                continue
            try:
                state, layout, outcome = update_element(
                    state, layout, scenario, k, feasible_set, settings, gradient
                )
            except PoleError:
                # Element sits on a coordinate singularity of its surface
                # set; leave it where it is for this sweep.
                rejected += 1
                continue
            neumann += outcome.neumann_rejections
            if outcome.accepted:
                accepted += 1
                steps.append(outcome.alpha)
                max_disp = max(max_disp, outcome.displacement)
            else:
                rejected += 1

        snr_now = snr_linear(state.h, scenario.power_w, scenario.noise_w)
        trace.append(
            snr_db(state.h, scenario.power_w, scenario.noise_w),
            accepted=accepted, rejected=rejected, neumann=neumann,
            colinear=colinear, steps=steps, max_disp=max_disp,
            wall=time.perf_counter() - tic,
        )
        if (snr_now - snr_prev) <= settings.epsilon * abs(snr_prev):
            break
        snr_prev = snr_now

    return layout, state.config, trace
