"""Feasible sets, projections, curvilinear gradient rescaling, initial layouts.

Two families of feasible sets: genuinely convex ones (solid ball,
axis-aligned plane box) where the projection is Euclidean-nearest, and
surface sets (spherical cap, cylindrical band) where the radius is an
equality constraint, handled by a radial snap followed by an angular/height
clamp. On the surface sets the gradient ascent runs in the surface's own
coordinates, with the Cartesian gradient re-expressed in the local
orthonormal frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError, PoleError
from .impedance import DipoleLayout, WIRE_RADIUS_FRACTION

# Relative width of the feasibility band that makes projections exactly
# idempotent despite roundoff (orders of magnitude below any physical scale).
_BAND = 1e-12


@dataclass(frozen=True)
class Ball3D:
    """Solid ball of given radius centered at the origin."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")


@dataclass(frozen=True)
class PlanarBox:
    """Plane with one Cartesian coordinate fixed and the others box-bounded.

    ``fixed_axis`` 0 pins x (array in the y-z plane), 1 pins y (x-z plane).
    ``first_range`` bounds the remaining transverse coordinate (y or x),
    ``second_range`` bounds z.
    """

    fixed_axis: int
    fixed_value: float
    first_range: tuple
    second_range: tuple

    def __post_init__(self):
        if self.fixed_axis not in (0, 1):
            raise DomainError("fixed_axis must be 0 (x) or 1 (y)")
        for lo, hi in (self.first_range, self.second_range):
            if not lo <= hi:
                raise DomainError("box range bounds must be ordered")

    @property
    def bounds(self):
        lo = np.empty(3)
        hi = np.empty(3)
        free = 1 - self.fixed_axis
        lo[self.fixed_axis] = hi[self.fixed_axis] = self.fixed_value
        lo[free], hi[free] = self.first_range
        lo[2], hi[2] = self.second_range
        return lo, hi


@dataclass(frozen=True)
class SphericalCap:
    """Sphere surface of radius R restricted to azimuth/polar angle windows.

    ``center`` is the curvature center; layouts tangent to the origin use
    a center displaced along -x so the patch itself sits at the origin.
    """

    radius: float
    azimuth_range: tuple
    polar_range: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("sphere radius must be positive")
        lo, hi = self.azimuth_range
        if not (-np.pi <= lo <= hi <= np.pi):
            raise DomainError("azimuth range must be ordered within [-pi, pi]")
        lo, hi = self.polar_range
        if not (0.0 <= lo <= hi <= np.pi):
            raise DomainError("polar range must be ordered within [0, pi]")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def center_point(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


@dataclass(frozen=True)
class CylindricalBand:
    """Cylinder surface of radius R restricted in azimuth and height.

    ``center`` fixes the cylinder axis (a vertical line through it).
    """

    radius: float
    azimuth_range: tuple
    height_range: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("cylinder radius must be positive")
        lo, hi = self.azimuth_range
        if not (-np.pi <= lo <= hi <= np.pi):
            raise DomainError("azimuth range must be ordered within [-pi, pi]")
        lo, hi = self.height_range
        if not lo <= hi:
            raise DomainError("height range bounds must be ordered")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def center_point(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def spherical_coords(q):
    """(radius, azimuth, polar angle) of a Cartesian point; radius must be > 0."""
    rho = float(np.linalg.norm(q))
    if rho == 0:
        raise PoleError("spherical coordinates undefined at the origin")
    return rho, float(np.arctan2(q[1], q[0])), float(np.arccos(np.clip(q[2] / rho, -1, 1)))


def spherical_point(rho, azimuth, polar):
    s = np.sin(polar)
    return np.array([rho * s * np.cos(azimuth), rho * s * np.sin(azimuth), rho * np.cos(polar)])


def cylindrical_coords(q):
    """(axial radius, azimuth, height); the point must be off the z-axis."""
    rho = float(np.hypot(q[0], q[1]))
    if rho == 0:
        raise PoleError("cylindrical azimuth undefined on the axis")
    return rho, float(np.arctan2(q[1], q[0])), float(q[2])


def cylindrical_point(rho, azimuth, z):
    return np.array([rho * np.cos(azimuth), rho * np.sin(azimuth), z])


def project(feasible_set, q) -> np.ndarray:
    """Nearest feasible point (convex sets) or radial snap + clamp (surface sets).

    Exactly idempotent: feasible points, including just-projected ones, are
    returned unchanged.
    """
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise DomainError("cannot project a non-finite point")

    if isinstance(feasible_set, Ball3D):
        r = feasible_set.radius
        norm = float(np.linalg.norm(q))
        if norm <= r * (1.0 + _BAND):
            return q
        return q * (r / norm)

    if isinstance(feasible_set, PlanarBox):
        lo, hi = feasible_set.bounds
        return np.clip(q, lo, hi)

    if isinstance(feasible_set, SphericalCap):
        r = feasible_set.radius
        c = feasible_set.center_point
        az_lo, az_hi = feasible_set.azimuth_range
        po_lo, po_hi = feasible_set.polar_range
        rel = q - c
        if np.linalg.norm(rel) < r * 1e-9:
            return c + spherical_point(r, 0.5 * (az_lo + az_hi), 0.5 * (po_lo + po_hi))
        rho, az, po = spherical_coords(rel)
        band = _BAND * max(1.0, r)
        if (
            abs(rho - r) <= band
            and az_lo - band <= az <= az_hi + band
            and po_lo - band <= po <= po_hi + band
        ):
            return q
        return c + spherical_point(
            r, float(np.clip(az, az_lo, az_hi)), float(np.clip(po, po_lo, po_hi))
        )

    if isinstance(feasible_set, CylindricalBand):
        r = feasible_set.radius
        c = feasible_set.center_point
        az_lo, az_hi = feasible_set.azimuth_range
        z_lo, z_hi = feasible_set.height_range
        rel = q - c
        if np.hypot(rel[0], rel[1]) < r * 1e-9:
            return c + cylindrical_point(
                r, 0.5 * (az_lo + az_hi), float(np.clip(rel[2], z_lo, z_hi))
            )
        rho, az, z = cylindrical_coords(rel)
        band = _BAND * max(1.0, r)
        if (
            abs(rho - r) <= band
            and az_lo - band <= az <= az_hi + band
            and z_lo <= z <= z_hi
        ):
            return q
        return c + cylindrical_point(
            r, float(np.clip(az, az_lo, az_hi)), float(np.clip(z, z_lo, z_hi))
        )

    raise DomainError(f"unknown feasible set {type(feasible_set).__name__}")


def rescale_gradient(feasible_set, q, grad_cartesian) -> np.ndarray:
    """Cartesian gradient re-expressed for the surface set's own coordinates.

    Spherical: ``[df/drho, (1/(rho sin(polar))) df/daz, (1/rho) df/dpolar]``,
    cylindrical: ``[df/drho, (1/rho) df/daz, df/dz]`` -- equivalently the
    gradient components in the local orthonormal frame.
    """
    q = np.asarray(q, dtype=float)
    g = np.asarray(grad_cartesian, dtype=float)

    if isinstance(feasible_set, SphericalCap):
        rel = q - feasible_set.center_point
        rho = float(np.linalg.norm(rel))
        if rho == 0:
            raise PoleError("spherical frame undefined at the curvature center")
        _, az, po = spherical_coords(rel)
        sin_po = np.sin(po)
        if abs(sin_po) < 1e-12:
            raise PoleError("azimuth scaling is singular at the poles")
        rho_hat = spherical_point(1.0, az, po)
        az_hat = np.array([-np.sin(az), np.cos(az), 0.0])
        po_hat = np.array([np.cos(po) * np.cos(az), np.cos(po) * np.sin(az), -sin_po])
        return np.array([g @ rho_hat, g @ az_hat, g @ po_hat])

    if isinstance(feasible_set, CylindricalBand):
        rel = q - feasible_set.center_point
        rho = float(np.hypot(rel[0], rel[1]))
        if rho == 0:
            raise PoleError("cylindrical frame undefined on the axis")
        az = float(np.arctan2(rel[1], rel[0]))
        rho_hat = np.array([np.cos(az), np.sin(az), 0.0])
        az_hat = np.array([-np.sin(az), np.cos(az), 0.0])
        return np.array([g @ rho_hat, g @ az_hat, g[2]])

    raise DomainError("gradient rescaling applies to surface sets only")


def ascent_direction(feasible_set, q, grad_cartesian) -> np.ndarray:
    """Unit ascent direction in the set's update frame.

    Cartesian unit gradient for the ball and plane box; unit vector in the
    local orthonormal (radial, azimuthal, polar/height) frame for the
    surface sets, via :func:`rescale_gradient`. Zero gradient maps to the
    zero vector.
    """
    if isinstance(feasible_set, (SphericalCap, CylindricalBand)):
        d = rescale_gradient(feasible_set, q, grad_cartesian)
    else:
        d = np.asarray(grad_cartesian, dtype=float)
    norm = np.linalg.norm(d)
    return d / norm if norm > 0 else np.zeros(3)


def apply_step(feasible_set, q, direction, alpha) -> np.ndarray:
    """Feasible point after moving an arc length ``alpha`` along ``direction``.

    ``direction`` is a unit vector in the frame produced by
    :func:`ascent_direction`; on the surface sets the angular coordinates
    advance by ``alpha`` divided by their metric factors, so ``alpha`` is a
    physical displacement (meters) everywhere.
    """
    q = np.asarray(q, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if isinstance(feasible_set, SphericalCap):
        c = feasible_set.center_point
        rho, az, po = spherical_coords(q - c)
        sin_po = np.sin(po)
        if abs(sin_po) < 1e-12:
            raise PoleError("cannot step in azimuth at the poles")
        stepped = c + spherical_point(
            rho + alpha * direction[0],
            az + alpha * direction[1] / (rho * sin_po),
            po + alpha * direction[2] / rho,
        )
    elif isinstance(feasible_set, CylindricalBand):
        c = feasible_set.center_point
        rho, az, z = cylindrical_coords(q - c)
        stepped = c + cylindrical_point(
            rho + alpha * direction[0],
            az + alpha * direction[1] / rho,
            z + alpha * direction[2],
        )
    else:
        stepped = q + alpha * direction
    return project(feasible_set, stepped)


def _grid_dims(n: int):
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    return cols, rows


def _centered_steps(count: int, step: float) -> np.ndarray:
    return (np.arange(count) - (count - 1) / 2.0) * step


def initial_shape(
    kind: str,
    n: int,
    wavelength: float,
    spacing: float,
    radius: float | None = None,
    half_length: float | None = None,
    wire_radius: float | None = None,
) -> DipoleLayout:
    """Deterministic centered starting layout.

    ``ula``: line along y (transverse to the dipole axis, so tightly packed
    lines stay physically realizable); ``upa``: near-square grid in the y-z
    plane; ``cylinder``/``sphere``: near-square patch wrapped on a radius-R
    surface whose curvature center sits at (-R, 0, 0), so the patch itself
    is centered at the origin and faces +x.
    """
    if n < 1:
        raise GeometryError("need at least one element")
    if not spacing > 0:
        raise GeometryError("spacing must be positive")
    h = wavelength / 4.0 if half_length is None else half_length
    a = wavelength * WIRE_RADIUS_FRACTION if wire_radius is None else wire_radius
    if spacing < 2.0 * a:
        raise GeometryError(
            f"spacing {spacing} smaller than a wire diameter {2 * a}; elements overlap"
        )
    kind = kind.lower()

    if kind == "ula":
        q = np.zeros((3, n))
        q[1] = _centered_steps(n, spacing)
        return DipoleLayout(q, h, a)

    if kind == "upa":
        cols, rows = _grid_dims(n)
        ys = _centered_steps(cols, spacing)
        zs = _centered_steps(rows, spacing)
        idx = np.arange(n)
        q = np.zeros((3, n))
        q[1] = ys[idx % cols]
        q[2] = zs[idx // cols]
        q -= q.mean(axis=1, keepdims=True)
        return DipoleLayout(q, h, a)

    if kind in ("cylinder", "sphere") and radius is None:
        raise GeometryError(f"{kind} layout requires a radius")

    if kind == "cylinder":
        cols, rows = _grid_dims(n)
        dtheta = spacing / radius
        if cols * dtheta > 2.0 * np.pi:
            raise GeometryError("elements do not fit around the cylinder")
        thetas = _centered_steps(cols, dtheta)
        zs = _centered_steps(rows, spacing)
        idx = np.arange(n)
        theta = thetas[idx % cols]
        z = zs[idx // cols]
        q = np.stack([radius * np.cos(theta) - radius, radius * np.sin(theta), z])
        q[2] -= q[2].mean()
        return DipoleLayout(q, h, a)

    if kind == "sphere":
        cols, rows = _grid_dims(n)
        dpolar = spacing / radius
        # Quarter-step polar offset: no two rings mirror about the equator,
        # so ring radii are all distinct and straight z-oriented dipoles on
        # adjacent rings can neither align nor interpenetrate.
        polars = np.pi / 2.0 + _centered_steps(rows, dpolar) + dpolar / 4.0
        if polars.min() <= 0 or polars.max() >= np.pi:
            raise GeometryError("latitude rings leave the sphere's polar range")
        idx = np.arange(n)
        ring = idx // cols
        col = idx % cols
        polar = polars[ring]
        ring_radius = radius * np.sin(polar)
        dtheta = spacing / ring_radius
        if np.any(cols * dtheta > 2.0 * np.pi):
            raise GeometryError("elements do not fit around a latitude ring")
        theta = (col - (cols - 1) / 2.0) * dtheta
        q = np.stack(
            [
                ring_radius * np.cos(theta) - radius,
                ring_radius * np.sin(theta),
                radius * np.cos(polar),
            ]
        )
        return DipoleLayout(q, h, a)

    raise GeometryError(f"unknown initial shape kind '{kind}'")


def constrained_set(
    kind: str,
    n: int,
    wavelength: float,
    spacing: float,
    radius: float | None = None,
    scale: float = 1.5,
):
    """Feasible set preserving the initial geometry, half-ranges scaled by ``scale``.

    Mirrors the grids built by :func:`initial_shape`: planar shapes become a
    PlanarBox in the y-z plane, cylinder/sphere keep their radius as an
    equality constraint with widened angular/height windows.
    """
    kind = kind.lower()
    if kind == "ula":
        half = scale * (n - 1) / 2.0 * spacing
        return PlanarBox(0, 0.0, (-half, half), (0.0, 0.0))
    if kind == "upa":
        cols, rows = _grid_dims(n)
        half_y = scale * (cols - 1) / 2.0 * spacing
        half_z = scale * (rows - 1) / 2.0 * spacing
        return PlanarBox(0, 0.0, (-half_y, half_y), (-half_z, half_z))
    if kind in ("cylinder", "sphere") and radius is None:
        raise GeometryError(f"{kind} constraint requires a radius")
    center = (-radius, 0.0, 0.0) if radius is not None else (0.0, 0.0, 0.0)
    if kind == "cylinder":
        cols, rows = _grid_dims(n)
        half_az = scale * (cols - 1) / 2.0 * spacing / radius
        half_z = scale * (rows - 1) / 2.0 * spacing
        return CylindricalBand(radius, (-half_az, half_az), (-half_z, half_z), center)
    if kind == "sphere":
        cols, rows = _grid_dims(n)
        half_po = scale * (rows - 1) / 2.0 * spacing / radius
        # The ring farthest from the equator is the widest in azimuth.
        min_sin = np.sin(np.pi / 2.0 - half_po / scale) if half_po > 0 else 1.0
        half_az = scale * (cols - 1) / 2.0 * spacing / (radius * max(min_sin, 1e-9))
        return SphericalCap(
            radius,
            (-half_az, half_az),
            (np.pi / 2.0 - half_po, np.pi / 2.0 + half_po),
            center,
        )
    raise GeometryError(f"unknown initial shape kind '{kind}'")
