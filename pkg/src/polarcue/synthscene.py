"""
Analytic renderer for piecewise-planar polarimetric scenes.

Every pixel is ray-cast against a list of bounded planes. Depth, normals,
angle and degree of polarization, shaded intensity, the dense orientation
channels and the DoFP mosaic are produced in closed form, so they can serve
as ground truth for the decoding, augmentation and loss code.

The angle of polarization of a plane is the image orientation of the
electric field ``n x r`` (n the surface normal, r the viewing ray). It is
computed here from the analytic Jacobian of the pinhole projection and does
not use any of the loss code.
"""
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .depthloss.geometry import CameraIntrinsics, Pose, relative_pose, rotation_about
from .polarimage import DEFAULT_LAYOUT, PolarParams, check_layout, fold_angle, mosaic, synthesize

SPECULAR_THRESHOLD = 0.4
PERTURB_MODES = ("uniform-scale", "tilt", "noise")


@dataclass(frozen=True)
class Texture:
    """Procedural albedo: ``base + contrast * pattern`` with pattern in [-1, 1].

    ``kind`` is "checker" (smoothed checkerboard of period ``scale``),
    "noise" (sum of seeded random sinusoids) or "uniform".
    """

    kind: str = "noise"
    scale: float = 0.5
    base: float = 0.5
    contrast: float = 0.3
    seed: int = 0

    def evaluate(self, s, t):
        if self.kind == "uniform":
            pattern = np.zeros_like(s)
        elif self.kind == "checker":
            k = 2 * np.pi / self.scale
            pattern = np.tanh(3 * np.sin(k * s)) * np.tanh(3 * np.sin(k * t))
        elif self.kind == "noise":
            rng = np.random.default_rng(self.seed)
            n = 8
            theta = rng.uniform(0, 2 * np.pi, n)
            freq = 2 * np.pi / self.scale * rng.uniform(0.5, 1.5, n)
            phase = rng.uniform(0, 2 * np.pi, n)
            amp = rng.uniform(0.5, 1.0, n)
            pattern = sum(a * np.sin(f * (np.cos(th) * s + np.sin(th) * t) + ph)
                          for a, f, th, ph in zip(amp, freq, theta, phase))
            pattern = pattern / amp.sum()
        else:
            raise ValueError(f"unknown texture kind {self.kind!r}")
        return self.base + self.contrast * pattern


@dataclass(frozen=True)
class Plane:
    """Plane ``normal . X = distance`` (world frame), optionally clipped to an axis-aligned box."""

    normal: tuple
    distance: float
    extent: tuple = None
    texture: Texture = field(default_factory=Texture)
    specular: bool = False
    dop: float = 0.1

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple((n / np.linalg.norm(n)).tolist()))
        if self.extent is not None:
            lo, hi = self.extent
            object.__setattr__(self, "extent", (tuple(map(float, lo)), tuple(map(float, hi))))
        if not 0 <= self.dop <= 1:
            raise ValueError("plane dop must lie in [0, 1]")
        if (self.dop > SPECULAR_THRESHOLD) != bool(self.specular):
            raise ValueError("dop must exceed 0.4 exactly for specular planes")

    def basis(self):
        """Two in-plane unit vectors used for texture coordinates."""
        n = np.asarray(self.normal)
        helper = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        t1 = np.cross(n, helper)
        t1 /= np.linalg.norm(t1)
        return t1, np.cross(n, t1)

    @classmethod
    def through(cls, normal, point, **kw):
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(tuple(n), float(n @ np.asarray(point, dtype=float)), **kw)


@dataclass(frozen=True)
class SceneSpec:
    name: str
    width: int
    height: int
    intrinsics: CameraIntrinsics
    planes: tuple
    frames: tuple = (Pose.identity(),)
    light: tuple = (-0.3, -0.8, -0.5)
    ambient: float = 0.35
    background_depth: float = 100.0
    background_intensity: float = 0.2
    layout: tuple = DEFAULT_LAYOUT

    def __post_init__(self):
        if self.width % 2 or self.height % 2:
            raise ValueError("image dimensions must be even (DoFP mosaic)")
        object.__setattr__(self, "planes", tuple(self.planes))
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "layout", check_layout(self.layout))

    @property
    def shape(self):
        return (self.height, self.width)

    def to_dict(self):
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "intrinsics": self.intrinsics.to_dict(),
            "planes": [{
                "normal": list(p.normal),
                "distance": p.distance,
                "extent": None if p.extent is None else [list(p.extent[0]), list(p.extent[1])],
                "texture": vars(p.texture).copy(),
                "specular": p.specular,
                "dop": p.dop,
            } for p in self.planes],
            "frames": [f.to_dict() for f in self.frames],
            "light": list(self.light),
            "ambient": self.ambient,
            "background_depth": self.background_depth,
            "background_intensity": self.background_intensity,
            "layout": [list(r) for r in self.layout],
        }

    @classmethod
    def from_dict(cls, d):
        planes = [Plane(tuple(p["normal"]), float(p["distance"]),
                        None if p.get("extent") is None else (tuple(p["extent"][0]), tuple(p["extent"][1])),
                        Texture(**p.get("texture", {})), bool(p.get("specular", False)),
                        float(p.get("dop", 0.1)))
                  for p in d["planes"]]
        frames = [Pose.from_dict(f) for f in d.get("frames", [Pose.identity().to_dict()])]
        return cls(
            name=d.get("name", "scene"),
            width=int(d["width"]),
            height=int(d["height"]),
            intrinsics=CameraIntrinsics(**d["intrinsics"]),
            planes=tuple(planes),
            frames=tuple(frames),
            light=tuple(d.get("light", (-0.3, -0.8, -0.5))),
            ambient=float(d.get("ambient", 0.35)),
            background_depth=float(d.get("background_depth", 100.0)),
            background_intensity=float(d.get("background_intensity", 0.2)),
            layout=tuple(tuple(r) for r in d.get("layout", DEFAULT_LAYOUT)),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class Render:
    """Co-registered ground truth for one frame."""

    depth: np.ndarray
    params: PolarParams
    stack: object
    mosaic: object
    intensity: np.ndarray
    specular_mask: np.ndarray
    normals: np.ndarray
    plane_index: np.ndarray
    pose: Pose


def _camera_rays(spec):
    v, u = np.mgrid[0:spec.height, 0:spec.width].astype(float)
    k = spec.intrinsics
    return np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)


def _intersect(plane, origin, dirs):
    """Depth along camera rays (z = 1 scaled) to a plane in world coordinates."""
    n = np.asarray(plane.normal)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (plane.distance - origin @ n) / denom
    z = np.where(np.abs(denom) > 1e-12, z, np.inf)
    return z


def _inside(plane, points):
    if plane.extent is None:
        return np.ones(points.shape[:-1], dtype=bool)
    lo, hi = np.asarray(plane.extent[0]), np.asarray(plane.extent[1])
    tol = 1e-9
    return np.all((points >= lo - tol) & (points <= hi + tol), axis=-1)


def plane_depth(spec, plane, pose=None):
    """Depth of an unbounded plane along every pixel ray (inf where parallel/behind)."""
    pose = pose or spec.frames[0]
    origin = -pose.rotation.T @ pose.translation
    dirs = _camera_rays(spec) @ pose.rotation  # R^T r for every pixel
    z = _intersect(plane, origin, dirs)
    return np.where(z > 0, z, np.inf)


def aop_closed_form(normals_cam, rays, k):
    """
    Image angle of ``n x r`` at each pixel from the pinhole Jacobian.

    For a direction E attached at X = Z * (x, y, 1) the image displacement is
    proportional to ``(fx * (E_x - x E_z), fy * (E_y - y E_z))``.
    """
    unit = rays / np.linalg.norm(rays, axis=-1, keepdims=True)
    e = np.cross(normals_cam, unit)
    x, y = rays[..., 0], rays[..., 1]
    du = k.fx * (e[..., 0] - x * e[..., 2])
    dv = k.fy * (e[..., 1] - y * e[..., 2])
    degenerate = np.hypot(du, dv) < 1e-12
    return np.where(degenerate, 0.0, fold_angle(np.arctan2(dv, du)))


def render(spec, frame=0, pose=None):
    """
    Render one frame of a scene.

    Parameters
    ----------
    spec : SceneSpec
    frame : int
        Index into ``spec.frames``; ignored when ``pose`` is given.
    pose : Pose, optional
        World -> camera pose overriding the frame list.

    Returns
    -------
    Render
    """
    pose = pose or spec.frames[frame]
    k = spec.intrinsics
    rays = _camera_rays(spec)
    rot = pose.rotation
    origin = -rot.T @ pose.translation
    dirs = rays @ rot

    h, w = spec.shape
    depth = np.full((h, w), np.inf)
    index = np.full((h, w), -1, dtype=int)
    for i, plane in enumerate(spec.planes):
        z = _intersect(plane, origin, dirs)
        pts = origin + z[..., None] * dirs
        hit = (z > 0) & np.isfinite(z) & _inside(plane, pts) & (z < depth)
        depth = np.where(hit, z, depth)
        index = np.where(hit, i, index)

    miss = index < 0
    depth = np.where(miss, spec.background_depth, depth)
    world = origin + depth[..., None] * dirs

    light = -np.asarray(spec.light, dtype=float)
    light /= np.linalg.norm(light)
    normals = np.zeros((h, w, 3))
    intensity = np.full((h, w), spec.background_intensity)
    dop = np.zeros((h, w))
    specular = np.zeros((h, w), dtype=bool)
    for i, plane in enumerate(spec.planes):
        sel = index == i
        if not sel.any():
            continue
        n_world = np.asarray(plane.normal)
        n_cam = rot @ n_world
        facing = rays[sel] @ n_cam
        n_cam = np.where(facing[:, None] > 0, -n_cam, n_cam)
        normals[sel] = n_cam
        t1, t2 = plane.basis()
        albedo = plane.texture.evaluate(world[sel] @ t1, world[sel] @ t2)
        shade = spec.ambient + (1 - spec.ambient) * abs(n_world @ light)
        intensity[sel] = albedo * shade
        dop[sel] = plane.dop
        specular[sel] = plane.specular
    intensity = np.clip(intensity, 0.0, 1.0)

    aop = aop_closed_form(normals, rays, k)
    aop = np.where(miss, 0.0, aop)
    params = PolarParams(intensity, aop, dop)
    stack = synthesize(params)
    return Render(depth, params, stack, mosaic(stack, spec.layout), intensity, specular,
                  normals, index, pose)


def frame_set(spec, target=0):
    """
    Render every frame and pair the target with its sources.

    Returns
    -------
    Render, list of (image, Pose)
        Target render and source intensity images with target -> source poses.
    """
    tgt = render(spec, target)
    sources = []
    for i, pose in enumerate(spec.frames):
        if i == target:
            continue
        sources.append((render(spec, i).intensity, relative_pose(spec.frames[target], pose)))
    return tgt, sources


def interior_mask(rendered, margin=1):
    """Pixels whose (2 * margin + 1)^2 neighborhood lies on a single plane."""
    idx = rendered.plane_index
    h, w = idx.shape
    ok = np.zeros((h, w), dtype=bool)
    ok[margin:h - margin, margin:w - margin] = True
    for dr in range(-margin, margin + 1):
        for dc in range(-margin, margin + 1):
            shifted = np.full((h, w), -2)
            shifted[max(0, -dr):h - max(0, dr), max(0, -dc):w - max(0, dc)] = \
                idx[max(0, dr):h - max(0, -dr), max(0, dc):w - max(0, -dc)]
            ok &= shifted == idx
    return ok & (idx >= 0)


def tilt_plane(spec, index, degrees, axis=(0.0, 1.0, 0.0), pivot=None):
    """
    Copy of ``spec`` with plane ``index`` rotated by ``degrees`` about ``axis``.

    The rotation pivots on ``pivot`` (default: the plane point hit by the
    principal ray of frame 0, or the center of the plane's extent).
    """
    plane = spec.planes[index]
    n = np.asarray(plane.normal)
    if pivot is None:
        if plane.extent is not None:
            lo, hi = map(np.asarray, plane.extent)
            center = (lo + hi) / 2
            pivot = center - (n @ center - plane.distance) * n
        else:
            z = _intersect(plane, np.zeros(3), np.array([0.0, 0.0, 1.0]))
            pivot = np.array([0.0, 0.0, float(z)])
    rot = rotation_about(axis, np.deg2rad(degrees))
    tilted = replace(plane, normal=tuple(rot @ n), distance=float((rot @ n) @ np.asarray(pivot)))
    planes = list(spec.planes)
    planes[index] = tilted
    return replace(spec, planes=tuple(planes))


def perturb_depth(depth, mode, magnitude, seed=0, intrinsics=None, axis="x"):
    """
    Deterministic depth perturbation used to initialize optimizations.

    Parameters
    ----------
    mode : {"uniform-scale", "tilt", "noise"}
        "uniform-scale" multiplies by ``magnitude``; "tilt" adds a disparity
        ramp that rotates a fronto-parallel plane at the median depth by
        ``magnitude`` degrees about the camera ``axis`` (needs
        ``intrinsics``); "noise" adds Gaussian noise of standard deviation
        ``magnitude * mean(depth)``.
    magnitude : float
        Zero means no perturbation in every mode.
    axis : {"x", "y"}
        Tilt axis. About x the ramp runs down the image rows (pitch), about
        y across the columns (yaw).
    """
    depth = np.asarray(depth, dtype=float)
    if mode not in PERTURB_MODES:
        raise ValueError(f"mode must be one of {PERTURB_MODES}, got {mode!r}")
    if magnitude == 0:
        return depth.copy()
    if mode == "uniform-scale":
        if magnitude <= 0:
            raise ValueError("scale factor must be positive")
        return depth * magnitude
    if mode == "tilt":
        if intrinsics is None:
            raise ValueError("tilt perturbation needs camera intrinsics")
        h, w = depth.shape
        if axis == "x":
            coord = ((np.arange(h, dtype=float) - intrinsics.cy) / intrinsics.fy)[:, None]
        elif axis == "y":
            coord = ((np.arange(w, dtype=float) - intrinsics.cx) / intrinsics.fx)[None, :]
        else:
            raise ValueError(f"tilt axis must be 'x' or 'y', got {axis!r}")
        disp = 1.0 / depth - np.tan(np.deg2rad(magnitude)) * coord / np.median(depth)
        floor = 0.05 / depth.max()
        return 1.0 / np.maximum(disp, floor)
    rng = np.random.default_rng(seed)
    noisy = depth + magnitude * depth.mean() * rng.standard_normal(depth.shape)
    return np.maximum(noisy, 0.05 * depth.min())


def _translation(position, rotation=None):
    """World -> camera pose of a camera at ``position`` with world -> camera rotation ``rotation``."""
    rot = np.eye(3) if rotation is None else rotation
    return Pose(rot, -rot @ np.asarray(position, dtype=float))


def _camera(width, height, focal):
    return CameraIntrinsics.centered(width, height, focal)


def flat_lambertian(seed=0, size=64):
    k = _camera(size, size, size)
    plane = Plane.through((0.15, -0.1, -1.0), (0.0, 0.0, 4.0),
                          texture=Texture("noise", scale=0.6, base=0.5, contrast=0.35, seed=seed))
    frames = (Pose.identity(), _translation((0.12, 0.0, 0.0)), _translation((-0.1, 0.03, 0.05)))
    return SceneSpec("flat-lambertian", size, size, k, (plane,), frames)


def specular_window(seed=0, size=64):
    """Textured ground and back wall with a weakly textured specular window."""
    k = _camera(size, size, size)
    ground = Plane.through((0, -1, 0), (0, 1.2, 0),
                           texture=Texture("checker", scale=0.7, base=0.5, contrast=0.3, seed=seed))
    wall = Plane.through((0, 0, -1), (0, 0, 10.0),
                         texture=Texture("noise", scale=1.2, base=0.5, contrast=0.35, seed=seed + 1))
    tilt = np.deg2rad(25.0)
    window = Plane.through((np.sin(tilt), -0.1, -np.cos(tilt)), (0.3, -0.3, 5.0),
                           extent=((-1.6, -1.8, 2.0), (2.0, 0.9, 9.0)),
                           texture=Texture("uniform", base=0.45, contrast=0.0, seed=seed + 2),
                           specular=True, dop=0.8)
    frames = (Pose.identity(), _translation((0.15, 0.0, 0.0)), _translation((-0.12, -0.04, 0.1)))
    return SceneSpec("specular-window", size, size, k, (window, ground, wall), frames)


def two_plane_roll(seed=0, size=64, roll_deg=15.0):
    """Slanted diffuse floor and a specular wall filling the view; second frame is a pure camera roll."""
    k = _camera(size, size, size)
    floor = Plane.through((0.05, -1.0, -0.35), (0, 1.5, 4.0),
                          texture=Texture("noise", scale=0.8, base=0.5, contrast=0.3, seed=seed))
    wall = Plane.through((0.45, -0.15, -1.0), (0.0, 0.0, 6.0),
                         texture=Texture("checker", scale=0.9, base=0.45, contrast=0.2, seed=seed + 1),
                         specular=True, dop=0.7)
    roll = Pose(rotation_about((0, 0, 1), np.deg2rad(roll_deg)), np.zeros(3))
    return SceneSpec("two-plane-roll", size, size, k, (floor, wall), (Pose.identity(), roll))


def benchmark_suite(seed=0, size=64):
    """Named benchmark scenes with fixed seeds."""
    return [flat_lambertian(seed, size), specular_window(seed, size), two_plane_roll(seed, size)]


def benchmark_scene(name, seed=0, size=64):
    for spec in benchmark_suite(seed, size):
        if spec.name == name:
            return spec
    raise KeyError(f"unknown benchmark scene {name!r}")
