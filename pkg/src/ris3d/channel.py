"""End-to-end channel, SNR, cached inverse and Neumann perturbation algebra.

The coupling matrix ``Z_SS + Z_RIS`` is small at desk scale, so its dense
inverse ``G`` is kept explicitly; every quantity the per-element update
needs (``g_ST = G z_ST``, ``g_SR = G z_SR``, the cascade scalar) is cached
on an immutable state object. Moving one element changes only one
row/column of ``Z_SS``, a rank-2 perturbation, which is what the
first-order series expansion below exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ApproximationDomainError, DomainError, SingularMatrixError
from .impedance import ImpedanceSet

# Condition-number estimate above which the coupling matrix is rejected.
CONDITION_LIMIT = 1e12

# Default bound on ||G Delta|| for the first-order expansion to be trusted.
NEUMANN_CAP = 0.1


@dataclass(frozen=True)
class RisConfig:
    """Tunable reactances (ohms) plus the series loss resistance R0."""

    reactances: np.ndarray
    loss_resistance: float

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.reactances, dtype=float))
        if not np.all(np.isfinite(b)):
            raise DomainError("reactances must be finite")
        if self.loss_resistance < 0:
            raise DomainError("loss resistance must be nonnegative")
        object.__setattr__(self, "reactances", b)

    @property
    def load_impedances(self) -> np.ndarray:
        return self.loss_resistance + 1j * self.reactances


@dataclass(frozen=True)
class ChannelState:
    """Impedances, configuration and all cached channel quantities."""

    impedances: ImpedanceSet
    config: RisConfig
    y0: complex
    gram: np.ndarray       # G = (Z_SS + Z_RIS)^{-1}
    h: complex             # end-to-end channel
    g_st: np.ndarray       # G z_ST
    g_sr: np.ndarray       # G z_SR
    z_rst: complex         # Z_RT - z_SR^T G z_ST  (= h / Y0)

    @property
    def n_elements(self) -> int:
        return self.impedances.n_elements


def _coupling_matrix(imp: ImpedanceSet, cfg: RisConfig) -> np.ndarray:
    if cfg.reactances.shape[0] != imp.n_elements:
        raise DomainError(
            f"config has {cfg.reactances.shape[0]} entries for "
            f"{imp.n_elements} elements"
        )
    mat = imp.z_ss.copy()
    mat[np.diag_indices_from(mat)] += cfg.load_impedances
    return mat


def _invert_checked(mat: np.ndarray) -> np.ndarray:
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"coupling matrix is singular: {exc}") from exc
    cond = np.linalg.norm(mat, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularMatrixError(
            f"coupling matrix condition estimate {cond:.3e} exceeds "
            f"{CONDITION_LIMIT:.1e}"
        )
    n = mat.shape[0]
    residual = np.linalg.norm(mat @ inv - np.eye(n))
    if residual > 1e-8 * n:
        raise SingularMatrixError(
            f"inverse residual {residual:.3e} above tolerance {1e-8 * n:.1e}"
        )
    return inv


def end_to_end_channel(imp: ImpedanceSet, cfg: RisConfig, y0: complex) -> complex:
    """H = Y0 (Z_RT - z_SR^T (Z_SS + Z_RIS)^{-1} z_ST)."""
    gram = _invert_checked(_coupling_matrix(imp, cfg))
    return complex(y0 * (imp.z_rt - imp.z_sr @ gram @ imp.z_st))


def build_state(imp: ImpedanceSet, cfg: RisConfig, y0: complex) -> ChannelState:
    """Construct a fully cached state via an exact dense inverse."""
    gram = _invert_checked(_coupling_matrix(imp, cfg))
    g_st = gram @ imp.z_st
    g_sr = gram @ imp.z_sr
    z_rst = complex(imp.z_rt - imp.z_sr @ g_st)
    return ChannelState(
        impedances=imp, config=cfg, y0=complex(y0), gram=gram,
        h=complex(y0 * z_rst), g_st=g_st, g_sr=g_sr, z_rst=z_rst,
    )


def refresh(
    state: ChannelState,
    new_imp: ImpedanceSet | None = None,
    new_cfg: RisConfig | None = None,
) -> ChannelState:
    """New state with replaced impedances and/or configuration, exactly recomputed."""
    return build_state(
        state.impedances if new_imp is None else new_imp,
        state.config if new_cfg is None else new_cfg,
        state.y0,
    )


def snr_db(h: complex, power_w: float, noise_w: float) -> float:
    """Received SNR in dB for transmit power and noise power in watts."""
    if not power_w > 0 or not noise_w > 0:
        raise DomainError("powers must be positive")
    return 10.0 * np.log10(power_w * abs(h) ** 2 / noise_w)


def snr_linear(h: complex, power_w: float, noise_w: float) -> float:
    return power_w * abs(h) ** 2 / noise_w


def perturbation_norm(state: ChannelState, k: int, delta_col: np.ndarray) -> float:
    """Spectral norm of G Delta^(k), exact through the rank-2 structure.

    ``Delta^(k) = d e_k^T + e_k d^T - d_k e_k e_k^T`` factors as U V^T with
    two columns, so ||G Delta|| is the largest singular value of a 2x2
    problem regardless of N.
    """
    n = state.n_elements
    e_k = np.zeros(n)
    e_k[k] = 1.0
    u = np.stack([delta_col - delta_col[k] * e_k, e_k], axis=1)
    v = np.stack([e_k, delta_col], axis=1)
    x = state.gram @ u
    m = (x.conj().T @ x) @ (v.T @ v.conj())
    eigs = np.linalg.eigvals(m)
    return float(np.sqrt(np.max(np.abs(eigs))))


def neumann_perturbed_channel(
    state: ChannelState,
    k: int,
    delta_col: np.ndarray,
    delta_sr_k: complex,
    delta_st_k: complex,
    cap: float = NEUMANN_CAP,
) -> complex:
    """Perturbed cascade ``h = H/Y0`` after moving element ``k``, no inversion.

    ``delta_col`` holds the change of the k-th column of Z_SS (entry k is
    the self-impedance change, zero for a pure position move);
    ``delta_sr_k``/``delta_st_k`` are the changes of the k-th entries of
    z_SR/z_ST. First-order inverse expansion, valid for
    ``||G Delta|| <= cap``.
    """
    delta_col = np.asarray(delta_col, dtype=complex)
    norm = perturbation_norm(state, k, delta_col)
    if norm > cap:
        raise ApproximationDomainError(
            f"perturbation norm {norm:.3g} exceeds series validity cap {cap}"
        )
    g = state.gram
    g_st = state.g_st
    g_sr = state.g_sr
    g_k = g[:, k]
    g_kk = g[k, k]
    e_k = np.zeros(state.n_elements)
    e_k[k] = 1.0

    g_rst = g_st[k] * g_sr + g_sr[k] * g_st - g_st[k] * g_sr[k] * e_k
    g_tilde_st = g_st[k] * g_k + g_kk * g_st - g_st[k] * g_kk * e_k
    g_tilde_sr = g_sr[k] * g_k + g_kk * g_sr - g_sr[k] * g_kk * e_k
    g_bar = 2.0 * g_kk * g_k - g_kk**2 * e_k

    return complex(
        state.z_rst
        - delta_sr_k * g_st[k]
        + g_rst @ delta_col
        + delta_sr_k * (g_tilde_st @ delta_col)
        - g_sr[k] * delta_st_k
        - g_kk * delta_sr_k * delta_st_k
        + (delta_col @ g_tilde_sr) * delta_st_k
        + delta_sr_k * (g_bar @ delta_col) * delta_st_k
    )
