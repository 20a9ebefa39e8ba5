import numpy as np
import pytest

from ris3d.errors import GeometryError, PoleError
from ris3d.geometry import (
    Ball3D,
    CylindricalBand,
    PlanarBox,
    SphericalCap,
    apply_step,
    ascent_direction,
    constrained_set,
    initial_shape,
    project,
    rescale_gradient,
    spherical_coords,
    spherical_point,
)

BALL = Ball3D(0.05)
BOX = PlanarBox(0, 0.0, (-1.0, 1.0), (-1.0, 1.0))
CAP = SphericalCap(0.1, (-0.6, 0.6), (1.0, 2.1))
BAND = CylindricalBand(0.1, (-0.6, 0.6), (-0.03, 0.03))
ALL_SETS = (BALL, BOX, CAP, BAND)


def test_ball_projection_examples():
    inside = np.array([0.0, 0.03, 0.0])
    assert np.array_equal(project(BALL, inside), inside)
    outside = np.array([0.06, 0.08, 0.0])
    projected = project(BALL, outside)
    assert np.allclose(projected, outside * (0.05 / 0.1))
    assert np.linalg.norm(projected) <= 0.05 * (1 + 1e-12)


def test_planar_box_projection_clamps():
    assert np.array_equal(project(BOX, np.array([0.3, 2.0, 0.0])), np.array([0.0, 1.0, 0.0]))


def test_projection_idempotent_bitwise():
    rng = np.random.default_rng(5)
    for fset in ALL_SETS:
        for _ in range(100):
            q = rng.uniform(-0.2, 0.2, 3)
            p1 = project(fset, q)
            p2 = project(fset, p1)
            assert np.array_equal(p1, p2)


def _random_member(fset, rng):
    if isinstance(fset, Ball3D):
        v = rng.normal(0, 1, 3)
        return v / np.linalg.norm(v) * fset.radius * rng.uniform(0, 1) ** (1 / 3)
    if isinstance(fset, PlanarBox):
        lo, hi = fset.bounds
        return rng.uniform(lo, hi)
    raise AssertionError


def test_projection_optimality_on_convex_sets():
    rng = np.random.default_rng(6)
    for fset in (BALL, BOX):
        for _ in range(100):
            q = rng.uniform(-0.3, 0.3, 3)
            p = project(fset, q)
            for _ in range(100):
                s = _random_member(fset, rng)
                assert np.linalg.norm(p - q) <= np.linalg.norm(s - q) + 1e-12


def test_surface_projection_lands_on_surface():
    rng = np.random.default_rng(7)
    for _ in range(50):
        q = rng.uniform(-0.3, 0.3, 3)
        p_cap = project(CAP, q)
        assert np.linalg.norm(p_cap - CAP.center_point) == pytest.approx(0.1, rel=1e-12)
        p_band = project(BAND, q)
        rel = p_band - BAND.center_point
        assert np.hypot(rel[0], rel[1]) == pytest.approx(0.1, rel=1e-12)
        assert BAND.height_range[0] - 1e-15 <= rel[2] <= BAND.height_range[1] + 1e-15


def test_rescale_radial_field_is_pure_radial():
    q = project(CAP, np.array([0.08, 0.01, 0.02]))
    grad = 2.0 * q  # gradient of |q|^2 is radial
    scaled = rescale_gradient(CAP, q, grad)
    assert scaled[0] == pytest.approx(2 * np.linalg.norm(q), rel=1e-12)
    assert abs(scaled[1]) < 1e-12
    assert abs(scaled[2]) < 1e-12


def test_rescale_matches_curvilinear_finite_differences():
    def field(q):
        return np.sin(3 * q[0]) * np.cos(2 * q[1]) + q[2] ** 2

    def grad_cart(q):
        return np.array(
            [
                3 * np.cos(3 * q[0]) * np.cos(2 * q[1]),
                -2 * np.sin(3 * q[0]) * np.sin(2 * q[1]),
                2 * q[2],
            ]
        )

    cap = SphericalCap(0.1, (-0.6, 0.6), (1.0, 2.1))
    q = project(cap, np.array([0.07, 0.02, 0.05]))
    scaled = rescale_gradient(cap, q, grad_cart(q))
    rho, az, po = spherical_coords(q)
    eps = 1e-7
    fd = np.array(
        [
            (field(spherical_point(rho + eps, az, po)) - field(spherical_point(rho - eps, az, po))) / (2 * eps),
            (field(spherical_point(rho, az + eps, po)) - field(spherical_point(rho, az - eps, po)))
            / (2 * eps)
            / (rho * np.sin(po)),
            (field(spherical_point(rho, az, po + eps)) - field(spherical_point(rho, az, po - eps)))
            / (2 * eps)
            / rho,
        ]
    )
    assert np.max(np.abs(scaled - fd) / np.abs(fd)) < 1e-6


def test_rescale_cylindrical_matches_finite_differences():
    def field(q):
        return q[0] * q[1] + np.cos(4 * q[2])

    def grad_cart(q):
        return np.array([q[1], q[0], -4 * np.sin(4 * q[2])])

    band = CylindricalBand(0.1, (-0.6, 0.6), (-0.03, 0.03))
    q = project(band, np.array([0.09, 0.03, 0.01]))
    scaled = rescale_gradient(band, q, grad_cart(q))
    rho = np.hypot(q[0], q[1])
    az = np.arctan2(q[1], q[0])
    eps = 1e-7
    point = lambda r, t, z: np.array([r * np.cos(t), r * np.sin(t), z])
    fd = np.array(
        [
            (field(point(rho + eps, az, q[2])) - field(point(rho - eps, az, q[2]))) / (2 * eps),
            (field(point(rho, az + eps, q[2])) - field(point(rho, az - eps, q[2]))) / (2 * eps) / rho,
            (field(point(rho, az, q[2] + eps)) - field(point(rho, az, q[2] - eps))) / (2 * eps),
        ]
    )
    assert np.max(np.abs(scaled - fd) / np.abs(fd)) < 1e-6


def test_rescale_pole_error():
    cap = SphericalCap(0.1, (-np.pi, np.pi), (0.0, np.pi))
    with pytest.raises(PoleError):
        rescale_gradient(cap, np.array([0.0, 0.0, 0.1]), np.array([1.0, 0.0, 0.0]))


def test_apply_step_moves_arc_length():
    q = project(CAP, np.array([0.095, 0.01, 0.01]))
    direction = ascent_direction(CAP, q, np.array([0.0, 1.0, 0.0]))
    direction[0] = 0.0  # keep the step tangential so no radial snap-back
    direction /= np.linalg.norm(direction)
    alpha = 1e-4
    moved = apply_step(CAP, q, direction, alpha)
    assert np.linalg.norm(moved - q) == pytest.approx(alpha, rel=1e-3)
    assert np.linalg.norm(moved - CAP.center_point) == pytest.approx(0.1, rel=1e-12)


def test_ula_layout_spans_transverse_axis():
    lam = 0.01
    layout = initial_shape("ula", 100, lam, lam / 16)
    q = layout.positions
    assert np.ptp(q[1]) == pytest.approx(99 * lam / 16, rel=1e-14)
    assert np.allclose(q[0], 0) and np.allclose(q[2], 0)
    assert np.max(np.abs(q.mean(axis=1))) < 1e-12


def test_upa_layout_near_square():
    lam = 0.01
    layout = initial_shape("upa", 4, lam, lam / 2)
    q = layout.positions
    d01 = np.linalg.norm(q[:, 0] - q[:, 1])
    assert d01 == pytest.approx(lam / 2, rel=1e-14)
    assert np.max(np.abs(q.mean(axis=1))) < 1e-12
    dists = [
        np.linalg.norm(q[:, i] - q[:, j]) for i in range(4) for j in range(i + 1, 4)
    ]
    assert min(dists) == pytest.approx(lam / 2, rel=1e-14)


def test_cylinder_layout_on_radius():
    lam = 0.01
    layout = initial_shape("cylinder", 100, lam, lam / 2, radius=0.1)
    rel = layout.positions - np.array([-0.1, 0.0, 0.0])[:, None]
    radii = np.hypot(rel[0], rel[1])
    assert np.allclose(radii, 0.1, rtol=1e-14)
    assert abs(layout.positions[2].mean()) < 1e-12


def test_sphere_layout_on_radius_and_center_facing():
    lam = 0.01
    layout = initial_shape("sphere", 100, lam, lam / 2, radius=0.1)
    rel = layout.positions - np.array([-0.1, 0.0, 0.0])[:, None]
    assert np.allclose(np.linalg.norm(rel, axis=0), 0.1, rtol=1e-13)
    # patch hugs the origin
    assert np.linalg.norm(layout.positions, axis=0).max() < 0.05


def test_initial_shapes_deterministic():
    lam = 0.01
    for kind, kwargs in (
        ("ula", {}), ("upa", {}), ("cylinder", {"radius": 0.1}), ("sphere", {"radius": 0.1}),
    ):
        a = initial_shape(kind, 25, lam, lam / 2, **kwargs)
        b = initial_shape(kind, 25, lam, lam / 2, **kwargs)
        assert np.array_equal(a.positions, b.positions)


def test_geometry_errors():
    lam = 0.01
    with pytest.raises(GeometryError):
        initial_shape("ula", 10, lam, lam / 2000)  # below wire diameter
    with pytest.raises(GeometryError):
        initial_shape("cylinder", 400, lam, lam / 2, radius=lam / 4)  # ring overfull
    with pytest.raises(GeometryError):
        initial_shape("cylinder", 10, lam, lam / 2)  # radius missing
    with pytest.raises(GeometryError):
        initial_shape("helix", 10, lam, lam / 2)


def test_constrained_sets_contain_initial_layouts():
    lam = 0.01
    for kind, sp, rad in (
        ("ula", lam / 16, None), ("upa", lam / 2, None),
        ("cylinder", lam / 2, 0.1), ("sphere", lam / 2, 0.1),
    ):
        layout = initial_shape(kind, 16, lam, sp, radius=rad)
        fset = constrained_set(kind, 16, lam, sp, rad)
        for i in range(16):
            q = layout.positions[:, i]
            assert np.array_equal(project(fset, q), q)
