"""Self/mutual impedance of thin-wire half-wave dipoles and batch assembly.

All dipoles are z-oriented (the e3 axis). The closed-form pair kernel is a
sum of exponential-integral terms; it breaks down for co-linear pairs,
which are routed to an induced-EMF quadrature over the axial field of a
sinusoidal current. Position gradients of the pair kernel are closed form
as well, which is what makes gradient-based shape optimization tractable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ColinearError, DomainError, OverlapError
from .specfun import e1_values, quad_adaptive

# Free-space wave impedance, ohms.
ETA = 377.0

# Transverse offsets below this many wavelengths count as co-linear.
COLINEAR_RTOL = 1e-6

# Default wire radius as a fraction of wavelength (surface-evaluation
# convention for the self impedance).
WIRE_RADIUS_FRACTION = 1.0 / 500.0

_E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class DipoleLayout:
    """Element positions (3 x N, meters) plus dipole half-length and wire radius."""

    positions: np.ndarray
    half_length: float
    wire_radius: float

    def __post_init__(self):
        q = np.asarray(self.positions, dtype=float)
        if q.ndim != 2 or q.shape[0] != 3 or q.shape[1] < 1:
            raise DomainError(f"positions must be 3 x N with N >= 1, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise DomainError("positions must be finite")
        if not self.half_length > 0:
            raise DomainError("half_length must be positive")
        if not self.wire_radius > 0:
            raise DomainError("wire_radius must be positive")
        object.__setattr__(self, "positions", q)

    @property
    def n_elements(self) -> int:
        return self.positions.shape[1]

    def with_position(self, k: int, q_k: np.ndarray) -> "DipoleLayout":
        q = self.positions.copy()
        q[:, k] = q_k
        return replace(self, positions=q)


@dataclass(frozen=True)
class ImpedanceSet:
    """Direct, cascade and inter-element impedances for one layout (ohms)."""

    z_rt: complex
    z_sr: np.ndarray
    z_st: np.ndarray
    z_ss: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.z_ss.shape[0]

    def with_element_update(self, k, ss_column, z_sr_k, z_st_k) -> "ImpedanceSet":
        """New set with row/column ``k`` of Z_SS and the k-th cascade entries replaced."""
        z_ss = self.z_ss.copy()
        z_ss[:, k] = ss_column
        z_ss[k, :] = ss_column
        z_sr = self.z_sr.copy()
        z_st = self.z_st.copy()
        z_sr[k] = z_sr_k
        z_st[k] = z_st_k
        return ImpedanceSet(self.z_rt, z_sr, z_st, z_ss)


def _check_thin_wire(wavelength, half_length, wire_radius):
    if not wavelength > 0:
        raise DomainError("wavelength must be positive")
    if wire_radius > wavelength / 100.0:
        raise DomainError(
            f"wire radius {wire_radius} exceeds thin-wire bound lambda/100"
        )
    if abs(half_length - wavelength / 4.0) > 1e-9 * wavelength:
        raise DomainError(
            "pair kernel is specialized to half-wave dipoles (h = lambda/4), "
            f"got h = {half_length} for lambda = {wavelength}"
        )


def _transverse_norm(deltas: np.ndarray) -> np.ndarray:
    return np.hypot(deltas[..., 0], deltas[..., 1])


def _pair_impedances(deltas: np.ndarray, wavelength: float, half_length: float) -> np.ndarray:
    """Closed-form Z for displacement vectors ``deltas`` of shape (M, 3).

    Caller guarantees no co-linear rows.
    """
    k = 2.0 * np.pi / wavelength
    shift = 2.0 * half_length * _E3
    # zeta variants stacked: (3, M, 3)
    zetas = np.stack([deltas - shift, deltas + shift, deltas])
    z_total = np.zeros(deltas.shape[0], dtype=complex)
    for s0 in (-1.0, 1.0):
        u = np.linalg.norm(zetas, axis=-1) + s0 * zetas[..., 2]
        t0 = e1_values(1j * k * u)
        phase = np.exp(1j * k * s0 * deltas[:, 2])
        z_total += phase * (t0[0] + t0[1] - 2.0 * t0[2])
    return ETA / (8.0 * np.pi) * z_total


def _pair_gradients(deltas: np.ndarray, wavelength: float, half_length: float) -> np.ndarray:
    """Gradient of the pair kernel w.r.t. the first dipole position, (M, 3)."""
    k = 2.0 * np.pi / wavelength
    shift = 2.0 * half_length * _E3
    zetas = np.stack([deltas - shift, deltas + shift, deltas])
    signs = np.array([1.0, 1.0, -2.0])
    grad = np.zeros_like(deltas, dtype=complex)
    for s0 in (-1.0, 1.0):
        norms = np.linalg.norm(zetas, axis=-1)
        u = norms + s0 * zetas[..., 2]
        t0 = e1_values(1j * k * u)
        g = signs @ t0.reshape(3, -1)
        # grad T0(zeta) = -(zeta/|zeta| + s0 e3) e^{-jku}/u
        dirs = zetas / norms[..., None]
        dirs[..., 2] += s0
        grad_t0 = -dirs * (np.exp(-1j * k * u) / u)[..., None]
        grad_g = np.tensordot(signs, grad_t0, axes=(0, 0))
        phase = np.exp(1j * k * s0 * deltas[:, 2])
        grad += phase[:, None] * grad_g
        grad[:, 2] += 1j * k * s0 * phase * g
    return ETA / (8.0 * np.pi) * grad


def mutual_impedance(q_q, q_p, wavelength, half_length, wire_radius) -> complex:
    """Closed-form mutual impedance between two z-oriented half-wave dipoles.

    Symmetric under argument exchange. Raises ColinearError when the
    transverse offset is below ``COLINEAR_RTOL * wavelength``; use
    :func:`mutual_impedance_colinear` there.
    """
    _check_thin_wire(wavelength, half_length, wire_radius)
    delta = np.asarray(q_q, dtype=float) - np.asarray(q_p, dtype=float)
    if _transverse_norm(delta) < COLINEAR_RTOL * wavelength:
        raise ColinearError(
            "dipoles are co-linear; the closed-form kernel does not apply"
        )
    return complex(_pair_impedances(delta[None, :], wavelength, half_length)[0])


def _axial_field(z, k, half_length):
    # E_z of a unit sinusoidal current on the axis (rho = 0), up to -j*eta/(4 pi).
    r1 = np.abs(z - half_length)
    r2 = np.abs(z + half_length)
    r = np.abs(z)
    return (
        np.exp(-1j * k * r1) / r1
        + np.exp(-1j * k * r2) / r2
        - 2.0 * np.cos(k * half_length) * np.exp(-1j * k * r) / r
    )


def mutual_impedance_colinear(
    q_q, q_p, wavelength, half_length, wire_radius, tol: float = 1e-10
) -> complex:
    """Induced-EMF mutual impedance for co-linear (stacked) dipoles.

    Valid for non-interpenetrating segments; touching tips (axial gap zero,
    as in a lambda/2-spaced vertical grid of half-wave elements) are fine
    because the current nulls at the tips keep the integrand bounded.
    Identical positions fall back to the self-impedance convention.
    """
    _check_thin_wire(wavelength, half_length, wire_radius)
    delta = np.asarray(q_q, dtype=float) - np.asarray(q_p, dtype=float)
    if _transverse_norm(delta) >= COLINEAR_RTOL * wavelength:
        raise ColinearError("dipoles are not co-linear; use mutual_impedance")
    d = abs(delta[2])
    if d < COLINEAR_RTOL * wavelength:
        return self_impedance(wavelength, half_length, wire_radius)
    gap = d - 2.0 * half_length
    if gap < -1e-12 * wavelength:
        raise OverlapError(
            f"co-linear segments interpenetrate (axial gap {gap:.3e} m)"
        )
    k = 2.0 * np.pi / wavelength
    sin_kh = np.sin(k * half_length)

    def integrand(t):
        return _axial_field(d + t, k, half_length) * np.sin(
            k * (half_length - np.abs(t))
        )

    prefactor = 1j * ETA / (4.0 * np.pi * sin_kh**2)
    # Split at the current kink; integrand endpoints are removable 0/0 forms
    # and never evaluated (interior quadrature nodes only).
    quad_tol = tol / abs(prefactor) / 2.0
    total = quad_adaptive(integrand, -half_length, 0.0, quad_tol) + quad_adaptive(
        integrand, 0.0, half_length, quad_tol
    )
    return complex(prefactor * total)


def self_impedance(wavelength, half_length, wire_radius) -> complex:
    """Input impedance of one element: the pair kernel evaluated at the wire surface.

    The transverse offset equals the wire radius, the standard induced-EMF
    surface evaluation; the real part lands on the classical half-wave
    radiation resistance (~73 ohms) independently of the radius.
    """
    _check_thin_wire(wavelength, half_length, wire_radius)
    delta = np.array([[wire_radius, 0.0, 0.0]])
    return complex(_pair_impedances(delta, wavelength, half_length)[0])


def impedance_gradient(q_k, q_l, wavelength, half_length, wire_radius) -> np.ndarray:
    """Gradient of the pair impedance w.r.t. the first dipole position.

    Exactly antisymmetric under argument exchange. Same co-linearity
    domain as :func:`mutual_impedance`.
    """
    _check_thin_wire(wavelength, half_length, wire_radius)
    delta = np.asarray(q_k, dtype=float) - np.asarray(q_l, dtype=float)
    if _transverse_norm(delta) < COLINEAR_RTOL * wavelength:
        raise ColinearError(
            "dipoles are co-linear; the closed-form gradient does not apply"
        )
    return _pair_gradients(delta[None, :], wavelength, half_length)[0]


def _impedances_with_fallback(deltas, wavelength, half_length, wire_radius, label):
    """Pair impedances for (M, 3) displacements, co-linear rows via quadrature."""
    out = np.empty(deltas.shape[0], dtype=complex)
    colinear = _transverse_norm(deltas) < COLINEAR_RTOL * wavelength
    regular = ~colinear
    if regular.any():
        out[regular] = _pair_impedances(deltas[regular], wavelength, half_length)
    for idx in np.nonzero(colinear)[0]:
        try:
            out[idx] = mutual_impedance_colinear(
                deltas[idx], np.zeros(3), wavelength, half_length, wire_radius
            )
        except OverlapError as exc:
            raise OverlapError(f"{label[idx]}: {exc}") from exc
    return out


def assemble(layout: DipoleLayout, p_bs, p_ue, wavelength) -> ImpedanceSet:
    """Full impedance set for a layout and fixed BS/UE positions.

    BS and UE are modeled as single dipoles of the same geometry. The
    co-linear quadrature fallback is applied wherever the closed form does
    not hold, so regular vertically stacked grids assemble cleanly.
    """
    q = layout.positions
    h = layout.half_length
    a = layout.wire_radius
    n = layout.n_elements
    _check_thin_wire(wavelength, h, a)
    p_bs = np.asarray(p_bs, dtype=float)
    p_ue = np.asarray(p_ue, dtype=float)

    endpoints = np.concatenate([q.T, [p_bs, p_ue]])
    dists = np.linalg.norm(endpoints[:, None, :] - endpoints[None, :, :], axis=-1)
    np.fill_diagonal(dists, np.inf)
    if dists[n:, :].min() <= 0:
        raise DomainError("BS/UE must be distinct from each other and every element")

    z_ss = np.empty((n, n), dtype=complex)
    np.fill_diagonal(z_ss, self_impedance(wavelength, h, a))
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        deltas = (q[:, iu] - q[:, ju]).T
        labels = [f"elements {i} and {j}" for i, j in zip(iu, ju)]
        vals = _impedances_with_fallback(deltas, wavelength, h, a, labels)
        z_ss[iu, ju] = vals
        z_ss[ju, iu] = vals

    z_sr = _impedances_with_fallback(
        (q - p_ue[:, None]).T, wavelength, h, a,
        [f"element {i} against UE" for i in range(n)],
    )
    z_st = _impedances_with_fallback(
        (q - p_bs[:, None]).T, wavelength, h, a,
        [f"element {i} against BS" for i in range(n)],
    )
    z_rt = _impedances_with_fallback(
        (p_ue - p_bs)[None, :], wavelength, h, a, ["UE against BS"]
    )[0]
    return ImpedanceSet(z_rt=z_rt, z_sr=z_sr, z_st=z_st, z_ss=z_ss)


def assemble_element_row(
    layout: DipoleLayout, k: int, q_k, p_bs, p_ue, wavelength
):
    """Couplings of a (candidate) position ``q_k`` of element ``k``.

    Returns ``(column, z_sr_k, z_st_k)`` where ``column`` is the k-th
    column of Z_SS with the self entry left unchanged-equivalent (the self
    impedance does not depend on position).
    """
    q = layout.positions
    h = layout.half_length
    a = layout.wire_radius
    n = layout.n_elements
    q_k = np.asarray(q_k, dtype=float)

    others = np.delete(np.arange(n), k)
    column = np.empty(n, dtype=complex)
    column[k] = self_impedance(wavelength, h, a)
    if others.size:
        deltas = (q_k[:, None] - q[:, others]).T
        labels = [f"elements {k} and {j}" for j in others]
        column[others] = _impedances_with_fallback(deltas, wavelength, h, a, labels)
    tail = _impedances_with_fallback(
        np.stack([q_k - p_ue, q_k - p_bs]), wavelength, h, a,
        [f"element {k} against UE", f"element {k} against BS"],
    )
    return column, complex(tail[0]), complex(tail[1])
