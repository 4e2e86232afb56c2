import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import plane_depth_map
from polarcue.depthloss.geometry import (
    CameraIntrinsics,
    DegenerateGeometry,
    Pose,
    angular_error,
    backproject,
    efield_real,
    normal_map,
    project,
    project_angle,
    project_angle_map,
    relative_pose,
    rotation_about,
    surface_normal,
    wrap_half_pi,
)
from polarcue.synthscene import aop_closed_form, interior_mask

K = CameraIntrinsics(50.0, 60.0, 15.5, 11.5)


def test_backproject_examples():
    np.testing.assert_allclose(backproject((K.cx, K.cy), 2.0, K), (0, 0, 2))
    np.testing.assert_allclose(backproject((K.cx + K.fx, K.cy), 1.0, K), (1, 0, 1))


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 80), st.floats(-50, 80), st.floats(0.1, 100))
def test_project_inverts_backproject(u, v, d):
    pu, pv = project(backproject((u, v), d, K), K)
    assert abs(pu - u) < 1e-9 and abs(pv - v) < 1e-9


def test_normals_of_fronto_parallel_plane():
    depth = np.full((8, 10), 3.0)
    n, valid = normal_map(depth, K)
    np.testing.assert_allclose(n[valid], np.tile([0, 0, -1.0], (valid.sum(), 1)), atol=1e-12)
    assert valid[:-1, :-1].all() and not valid[-1].any() and not valid[:, -1].any()
    np.testing.assert_allclose(surface_normal(depth, K, (3, 3)), (0, 0, -1), atol=1e-12)


def test_normals_of_tilted_plane():
    t = np.deg2rad(10)
    normal = np.array([0, np.sin(t), -np.cos(t)])
    depth = plane_depth_map(normal, (0, 0, 5.0), K, (24, 32))
    n, valid = normal_map(depth, K)
    assert np.abs(n[valid] - normal).max() < 1e-6
    np.testing.assert_allclose(surface_normal(depth, K, (10, 7)), normal, atol=1e-6)


def test_border_pixels_have_no_normal():
    depth = np.full((6, 6), 2.0)
    with pytest.raises(DegenerateGeometry):
        surface_normal(depth, K, (5, 2))
    with pytest.raises(DegenerateGeometry):
        surface_normal(depth, K, (2, 5))


def test_normal_stencil_is_local():
    rng = np.random.default_rng(0)
    depth = 3 + 0.1 * rng.random((10, 10))
    n0, _ = normal_map(depth, K)
    bumped = depth.copy()
    bumped[5, 5] += 0.05
    n1, _ = normal_map(bumped, K)
    changed = np.argwhere(np.any(n0 != n1, axis=-1))
    assert {tuple(p) for p in changed} <= {(5, 5), (5, 4), (4, 5)}
    assert len(changed) == 3


def test_efield_examples():
    with pytest.raises(DegenerateGeometry):
        efield_real((0, 0, -1), (K.cx, K.cy), K)
    e = efield_real(np.array([0, 1, -1]) / np.sqrt(2), (K.cx, K.cy), K)
    np.testing.assert_allclose(e / np.linalg.norm(e), (1, 0, 0), atol=1e-15)


def test_project_angle_examples():
    assert project_angle((1, 0, 0), (K.cx, K.cy), 2.0, K) == pytest.approx(0.0, abs=1e-12)
    assert project_angle((0, 1, 0), (K.cx, K.cy), 2.0, K) == pytest.approx(np.pi / 2, abs=1e-12)
    with pytest.raises(DegenerateGeometry):
        project_angle((0, 0, 0), (3, 3), 2.0, K)
    with pytest.raises(DegenerateGeometry):
        project_angle((0, 0, 1), (K.cx, K.cy), 2.0, K)


def jacobian_angle(vec, pixel, k):
    """Image direction of a 3D direction from the analytic pinhole Jacobian."""
    x, y = (pixel[0] - k.cx) / k.fx, (pixel[1] - k.cy) / k.fy
    du = k.fx * (vec[0] - x * vec[2])
    dv = k.fy * (vec[1] - y * vec[2])
    return np.mod(np.arctan2(dv, du), np.pi)


def angle_diff(a, b):
    d = np.mod(a - b, np.pi)
    return np.minimum(d, np.pi - d)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3), st.floats(0, 31), st.floats(0, 23), st.floats(0.5, 50))
def test_project_angle_matches_jacobian(vec, u, v, depth):
    vec = np.array(vec)
    x, y = (u - K.cx) / K.fx, (v - K.cy) / K.fy
    image = np.hypot(K.fx * (vec[0] - x * vec[2]), K.fy * (vec[1] - y * vec[2]))
    if np.linalg.norm(vec) < 1e-3 or image < 1e-2 * np.linalg.norm(vec) * K.fx:
        return
    got = project_angle(vec, (u, v), depth, K)
    assert angle_diff(got, jacobian_angle(vec, (u, v), K)) < 1e-6


def test_efield_angle_matches_rendered_aop(specular_plane):
    spec, r = specular_plane
    k = spec.intrinsics
    n, valid = normal_map(r.depth, k)
    xs, ys = np.meshgrid((np.arange(spec.width) - k.cx) / k.fx, (np.arange(spec.height) - k.cy) / k.fy)
    rays = np.stack([xs, ys, np.ones(spec.shape)], axis=-1)
    unit = rays / np.linalg.norm(rays, axis=-1, keepdims=True)
    angle, ok = project_angle_map(np.cross(n, unit), r.depth, k)
    sel = valid & ok & r.specular_mask
    assert sel.sum() > 400
    assert angle_diff(angle, r.params.aop)[sel].max() < 1e-6
    # scalar path on a few pixels
    for u, v in [(3, 4), (12, 12), (20, 7)]:
        e = efield_real(surface_normal(r.depth, k, (u, v)), (u, v), k)
        assert angle_diff(project_angle(e, (u, v), r.depth[v, u], k), r.params.aop[v, u]) < 1e-6


def test_closed_form_hand_derivation():
    # principal pixel, ray (0,0,1), n = (0, sin t, -cos t): n x r = (sin t, 0, 0) -> horizontal
    k = CameraIntrinsics.centered(4, 4, 4)
    t = 0.3
    n = np.array([[[0, np.sin(t), -np.cos(t)]]])
    r = np.array([[[0.0, 0.0, 1.0]]])
    assert aop_closed_form(n, r, k)[0, 0] == pytest.approx(0.0, abs=1e-15)
    # n = (sin t, 0, -cos t): n x r = (0, -sin t, 0) -> vertical
    n = np.array([[[np.sin(t), 0, -np.cos(t)]]])
    assert aop_closed_form(n, r, k)[0, 0] == pytest.approx(np.pi / 2, abs=1e-15)


def test_angular_error_examples():
    assert angular_error(0.7, 0.7) == 0
    assert angular_error(np.pi / 4, 0) == pytest.approx(1.0)
    assert angular_error(np.pi / 2, 0) == 1e3
    assert angular_error(0.1, np.pi - 0.1) == pytest.approx(np.tan(0.2))
    assert wrap_half_pi(np.pi / 2) == pytest.approx(np.pi / 2)
    assert wrap_half_pi(-np.pi / 2) == pytest.approx(np.pi / 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, np.pi, exclude_max=True), st.floats(0, np.pi, exclude_max=True))
def test_angular_error_properties(e, a):
    v = angular_error(e, a)
    assert 0 <= v <= 1e3
    # wrapping may differ by one ulp between argument orders
    assert v == pytest.approx(angular_error(a, e), rel=1e-12, abs=1e-15)
    assert angular_error(e, e) == 0


def test_angular_error_monotone():
    d = np.linspace(0, np.pi / 2, 500, endpoint=False)
    assert np.all(np.diff(angular_error(d, 0.0)) > 0)


def test_pose_helpers():
    r = rotation_about((0, 0, 1), 0.4)
    p = Pose(r, (1, 2, 3))
    x = np.array([0.3, -0.2, 5.0])
    np.testing.assert_allclose(p.inverse().apply(p.apply(x)), x, atol=1e-12)
    rel = relative_pose(p, p)
    np.testing.assert_allclose(rel.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(rel.translation, 0, atol=1e-12)
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    assert Pose.from_dict(p.to_dict()).to_dict() == p.to_dict()
