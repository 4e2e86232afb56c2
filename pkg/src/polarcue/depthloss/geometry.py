"""
Pinhole geometry for the polarimetric depth losses.

Camera frame: x right, y down, z forward. Pixel coordinates (u, v) are
(column, row) with pixel centers on integers. Depth is the z coordinate.

Scalar helpers (``backproject``, ``surface_normal``, ``efield_real``,
``project_angle``) follow the per-pixel definitions and raise
``DegenerateGeometry`` when a quantity is undefined. The ``*_map`` variants
work on whole images and return a validity mask instead.
"""
from dataclasses import dataclass

import numpy as np

from ..polarimage import fold_angle

# relative step used to attach a direction to a 3D point before projecting
ATTACH_STEP = 1e-4
DEGENERATE_EFIELD = 1e-12


class DegenerateGeometry(ValueError):
    """A normal, field or projected direction is undefined at this pixel."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self):
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    @classmethod
    def centered(cls, width, height, focal):
        """Square pixels with the principal point at the image center."""
        return cls(float(focal), float(focal), (width - 1) / 2.0, (height - 1) / 2.0)

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``x' = R x + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(r) - 1) > 1e-9:
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        r, t = self.rotation, self.translation
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        # explicit expansion keeps results independent of BLAS threading
        return np.stack([
            r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + t[0],
            r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + t[1],
            r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + t[2],
        ], axis=-1)

    def inverse(self):
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other):
        """``self o other``: apply ``other`` first."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def to_dict(self):
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["rotation"], dtype=float), np.array(d["translation"], dtype=float))


def rotation_about(axis, angle):
    """Rodrigues rotation matrix."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def relative_pose(target_pose, source_pose):
    """Pose mapping target-camera coordinates to source-camera coordinates.

    Both arguments are world -> camera poses.
    """
    return source_pose.compose(target_pose.inverse())


def pixel_grid(shape):
    h, w = shape
    v, u = np.mgrid[0:h, 0:w].astype(float)
    return u, v


def backproject(pixel, depth, k):
    """3D point ``depth * ((u - cx) / fx, (v - cy) / fy, 1)``."""
    u, v = pixel
    return np.array([depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth])


def backproject_map(depth, k):
    """(H, W, 3) point cloud for a depth map."""
    u, v = pixel_grid(np.shape(depth))
    return np.stack([depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth], axis=-1)


def project(points, k):
    """Pinhole projection; returns (u, v) arrays."""
    points = np.asarray(points, dtype=float)
    z = points[..., 2]
    return k.fx * points[..., 0] / z + k.cx, k.fy * points[..., 1] / z + k.cy


def view_rays(shape, k):
    """Unit rays from the optical center through each pixel, (H, W, 3)."""
    u, v = pixel_grid(shape)
    r = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    return r / np.linalg.norm(r, axis=-1, keepdims=True)


def view_ray(pixel, k):
    u, v = pixel
    r = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
    return r / np.linalg.norm(r)


def cross(a, b):
    """Cross product along the last axis (faster than np.cross on small images)."""
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


def _normalize(vec):
    n = np.linalg.norm(vec, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return vec / n, n[..., 0]


def _orient_towards_camera(n, rays):
    flip = np.sum(n * rays, axis=-1) > 0
    return np.where(flip[..., None], -n, n)


def normal_map(depth, k, points=None, rays=None):
    """
    Surface normals from each pixel and its right and down neighbors.

    With P, Q, R the backprojections of (u, v), (u + 1, v) and (u, v + 1),
    ``n = normalize(PQ x RQ)``, flipped to face the camera. The last row and
    column have no stencil and are marked invalid.

    ``points`` and ``rays`` may be passed to reuse the backprojection and the
    unit viewing rays.

    Returns
    -------
    normals : (H, W, 3) array
    valid : (H, W) bool array
    """
    pts = backproject_map(depth, k) if points is None else points
    h, w = np.shape(depth)
    n = np.zeros((h, w, 3))
    p = pts[:-1, :-1]
    q = pts[:-1, 1:]
    r = pts[1:, :-1]
    n[:-1, :-1] = cross(q - p, q - r)
    n, length = _normalize(n)
    valid = np.zeros((h, w), dtype=bool)
    valid[:-1, :-1] = True
    valid &= np.isfinite(length) & (length > 0)
    n = np.where(valid[..., None], n, 0.0)
    return _orient_towards_camera(n, view_rays((h, w), k) if rays is None else rays), valid


def surface_normal(depth, k, pixel):
    """Normal at one pixel (u, v); raises DegenerateGeometry at the right/bottom border."""
    u, v = pixel
    h, w = np.shape(depth)
    if not (0 <= u < w - 1 and 0 <= v < h - 1):
        raise DegenerateGeometry(f"pixel {pixel} has no right/down neighbors")
    p = backproject((u, v), depth[v, u], k)
    q = backproject((u + 1, v), depth[v, u + 1], k)
    r = backproject((u, v + 1), depth[v + 1, u], k)
    n = np.cross(q - p, q - r)
    norm = np.linalg.norm(n)
    if not norm > 0:
        raise DegenerateGeometry(f"collinear stencil at {pixel}")
    n = n / norm
    if n @ view_ray(pixel, k) > 0:
        n = -n
    return n


def efield_real(n, pixel, k):
    """Electric field direction ``n x ray`` for a specular reflection at ``pixel``."""
    e = np.cross(np.asarray(n, dtype=float), view_ray(pixel, k))
    if np.linalg.norm(e) < DEGENERATE_EFIELD:
        raise DegenerateGeometry("normal is parallel to the viewing ray")
    return e


def efield_map(normals, rays):
    e = cross(normals, rays)
    valid = np.linalg.norm(e, axis=-1) >= DEGENERATE_EFIELD
    return e, valid


def project_angle(vec, pixel, depth, k):
    """
    Image-plane orientation of a 3D direction attached at a pixel.

    The point X = backproject(pixel, depth) and ``X + eps * vec`` (with
    ``eps = 1e-4 * depth`` and ``vec`` normalized) are projected through the
    pinhole model; the angle of the 2D displacement is folded into [0, pi).
    """
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    if not norm > 0:
        raise DegenerateGeometry("zero-length direction")
    x = backproject(pixel, depth, k)
    angle, valid = _attached_angle(x, vec / norm, depth, k)
    if not valid:
        raise DegenerateGeometry(f"direction projects to a point at {pixel}")
    return float(angle)


def _attached_angle(points, directions, depth, k):
    eps = ATTACH_STEP * np.asarray(depth, dtype=float)
    moved = points + eps[..., None] * directions
    u0, v0 = project(points, k)
    u1, v1 = project(moved, k)
    du, dv = u1 - u0, v1 - v0
    # displacement expected for a direction orthogonal to the ray
    scale = k.fx * ATTACH_STEP
    valid = (np.hypot(du, dv) > 1e-9 * scale) & (moved[..., 2] > 0)
    return fold_angle(np.arctan2(dv, du)), valid


def project_angle_map(vectors, depth, k, points=None):
    """Vectorized ``project_angle`` for (H, W, 3) directions."""
    vec, norm = _normalize(np.asarray(vectors, dtype=float))
    ok = np.isfinite(norm) & (norm > 0)
    vec = np.where(ok[..., None], vec, 0.0)
    pts = backproject_map(depth, k) if points is None else points
    angle, valid = _attached_angle(pts, vec, depth, k)
    return np.where(ok & valid, angle, 0.0), ok & valid


def wrap_half_pi(delta):
    """Wrap an angle difference into (-pi/2, pi/2]."""
    d = np.mod(np.asarray(delta, dtype=float) + np.pi / 2, np.pi) - np.pi / 2
    return np.where(d <= -np.pi / 2, d + np.pi, d)


def angular_error(e_angle, aop, max_error=1e3):
    """``min(|tan(e_angle - aop)|, max_error)`` with the difference wrapped into (-pi/2, pi/2]."""
    delta = wrap_half_pi(np.asarray(e_angle) - np.asarray(aop))
    with np.errstate(over="ignore"):
        a = np.abs(np.tan(delta))
    a = np.where(np.abs(delta) >= np.pi / 2, max_error, a)
    out = np.minimum(a, max_error)
    return float(out) if np.ndim(out) == 0 else out
