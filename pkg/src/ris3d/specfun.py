"""Complex exponential integral E1 and adaptive complex-valued quadrature.

Every impedance kernel in this package reduces to evaluations of
``E1(j*k*(||zeta|| + s0*zeta_z))``, so this module is deliberately small,
dependency-free and heavily cross-checked by the test suite.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError

# Euler-Mascheroni constant, 20 digits.
EULER_GAMMA = 0.57721566490153286061

# |z| threshold between the power series and the continued fraction.
_SERIES_RADIUS = 4.0

_SERIES_MAX_TERMS = 96
_LENTZ_MAX_ITERS = 512
_LENTZ_TINY = 1e-300


def _e1_series(z: np.ndarray) -> np.ndarray:
    # E1(z) = -gamma - ln z - sum_{k>=1} (-z)^k / (k * k!)
    acc = -EULER_GAMMA - np.log(z)
    u = np.ones_like(z)
    converged = np.zeros(z.shape, dtype=bool)
    for k in range(1, _SERIES_MAX_TERMS + 1):
        u = u * (-z) / k
        term = u / k
        acc = acc - term
        converged |= np.abs(term) <= 1e-18 * np.abs(acc)
        if converged.all():
            return acc
    raise ConvergenceError("E1 power series did not converge within budget")


def _e1_continued_fraction(z: np.ndarray) -> np.ndarray:
    # Modified Lentz on E1(z) = e^{-z} / (z+1 - 1/(z+3 - 4/(z+5 - 9/(...))))
    f = np.full(z.shape, _LENTZ_TINY, dtype=complex)
    c = f.copy()
    d = np.zeros_like(f)
    converged = np.zeros(z.shape, dtype=bool)
    for n in range(1, _LENTZ_MAX_ITERS + 1):
        a = 1.0 if n == 1 else -float((n - 1) ** 2)
        b = z + (2 * n - 1)
        d = b + a * d
        d[d == 0] = _LENTZ_TINY
        c = b + a / c
        c[c == 0] = _LENTZ_TINY
        d = 1.0 / d
        delta = c * d
        f = f * delta
        converged |= np.abs(delta - 1.0) <= 1e-16
        if converged.all():
            return np.exp(-z) * f
    raise ConvergenceError("E1 continued fraction did not converge within budget")


def e1_values(z: np.ndarray) -> np.ndarray:
    """Vectorized E1 over an array of complex arguments.

    Arguments must be nonzero and away from the negative real axis
    (principal branch). This package only ever produces arguments with
    ``Re(z) >= 0``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise DomainError("E1 diverges logarithmically at z = 0")
    if not np.all(np.isfinite(z)):
        raise DomainError("E1 argument must be finite")
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) <= _SERIES_RADIUS
    if small.any():
        out[small] = _e1_series(z[small])
    large = ~small
    if large.any():
        out[large] = _e1_continued_fraction(z[large])
    return out


def exp_integral_e1(z: complex) -> complex:
    """Principal-branch exponential integral E1 of a complex scalar.

    Relative accuracy is ~1e-15 for arguments with ``Re(z) >= 0``, well
    inside the 1e-12 contract used by the impedance kernels.

    Raises
    ------
    DomainError
        If ``z == 0``; upstream this signals a co-linear dipole pair.
    """
    return complex(e1_values(np.asarray([z]))[0])


# Gauss-Kronrod 7-15 nodes and weights on [-1, 1], 20-digit constants.
_GK_HALF_NODES = np.array([
    0.99145537112081263921, 0.94910791234275852453, 0.86486442335976907279,
    0.74153118559939443986, 0.58608723546769113029, 0.40584515137739716691,
    0.20778495500789846760, 0.0,
])
_GK_NODES = np.concatenate([-_GK_HALF_NODES[:-1], _GK_HALF_NODES[::-1]])
_K15_HALF_WEIGHTS = np.array([
    0.02293532201052922496, 0.06309209262997855329, 0.10479001032225018384,
    0.14065325971552591875, 0.16900472663926790283, 0.19035057806478540991,
    0.20443294007529889241, 0.20948214108472782801,
])
_K15_WEIGHTS = np.concatenate([_K15_HALF_WEIGHTS[:-1], _K15_HALF_WEIGHTS[::-1]])
_G7_HALF_WEIGHTS = np.array([
    0.12948496616886969327, 0.27970539148927666790, 0.38183005050511894495,
    0.41795918367346938776,
])
_G7_WEIGHTS = np.concatenate([_G7_HALF_WEIGHTS[:-1], _G7_HALF_WEIGHTS[::-1]])
_G7_INDEX = np.arange(1, 15, 2)


def _gk15(f: Callable[[np.ndarray], np.ndarray], a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _GK_NODES
    y = np.asarray(f(x), dtype=complex)
    k15 = half * np.sum(_K15_WEIGHTS * y)
    g7 = half * np.sum(_G7_WEIGHTS * y[_G7_INDEX])
    return k15, abs(k15 - g7)


def quad_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float,
    max_subdivisions: int = 4096,
) -> complex:
    """Adaptive Gauss-Kronrod integral of a complex integrand over [a, b].

    ``f`` must accept an ndarray of abscissae and return an ndarray of
    values; endpoints are never evaluated (all Kronrod nodes are interior),
    so integrable endpoint behavior is tolerated. Globally adaptive: the
    worst interval is bisected until the summed error estimate drops below
    ``tol``. Deterministic: fixed refinement order, no randomness.

    Raises
    ------
    ConvergenceError
        If the error estimate stays above ``tol`` after the subdivision
        budget is exhausted.
    """
    import heapq

    if not (a < b):
        raise DomainError(f"empty or inverted interval [{a}, {b}]")
    if not tol > 0:
        raise DomainError("tolerance must be positive")

    value, err = _gk15(f, float(a), float(b))
    # Heap entries: (-err, insertion counter, lo, hi, value). The counter
    # breaks float ties deterministically.
    heap = [(-err, 0, float(a), float(b), value)]
    total_err = err
    counter = 0
    for _ in range(max_subdivisions):
        if total_err <= tol:
            break
        neg_err, _, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise ConvergenceError(
                f"quadrature interval [{lo}, {hi}] cannot be split further "
                f"with error estimate {-neg_err:.3e}"
            )
        vl, el = _gk15(f, lo, mid)
        vr, er = _gk15(f, mid, hi)
        total_err += el + er + neg_err
        counter += 1
        heapq.heappush(heap, (-el, 2 * counter, lo, mid, vl))
        heapq.heappush(heap, (-er, 2 * counter + 1, mid, hi, vr))
    if total_err > tol:
        raise ConvergenceError(
            f"quadrature error estimate {total_err:.3e} stalled above "
            f"tolerance {tol:.3e} after {max_subdivisions} subdivisions"
        )
    return complex(sum(entry[4] for entry in heap))
