"""
Polarimetric, smoothness and reprojection terms and their weighted total.

Every term is represented internally by a per-pixel numerator map and a
per-pixel count map (1 where the pixel contributes). The scalar value of a
term is ``sum(num) / sum(cnt)``; the smoothness term additionally divides by
the mean disparity. Keeping the two maps separate lets the gradient code
update each term from local changes only.
"""
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..polarimage import fold_angle
from .geometry import (angular_error, backproject_map, efield_map, normal_map, project_angle_map,
                       view_rays)
from .photometric import (SSIM_C1, SSIM_C2, SsimReference, identity_photometric_error,
                          reprojection_maps)

VARIANTS = ("real", "approx")
TERMS = ("reprojection", "smoothness", "polar")


@dataclass(frozen=True)
class LossWeights:
    """Scalar knobs of the composite loss.

    ``ssim_weight`` mixes SSIM and L1 inside the photometric error, while
    ``reprojection_weight`` scales the masked reprojection term in the total.
    """

    ssim_weight: float = 0.85
    reprojection_weight: float = 1.0
    smoothness_weight: float = 1e-3
    polar_weight: float = 0.1
    dop_threshold: float = 0.4
    max_angular_error: float = 1e3
    ssim_c1: float = SSIM_C1
    ssim_c2: float = SSIM_C2

    def __post_init__(self):
        if not 0 <= self.ssim_weight <= 1:
            raise ValueError("ssim_weight must lie in [0, 1]")
        if not 0 <= self.dop_threshold <= 1:
            raise ValueError("dop_threshold must lie in [0, 1]")
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def replace(self, **changes):
        return LossWeights(**{**asdict(self), **changes})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown loss weight(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def term_weight(self, term):
        return {"reprojection": self.reprojection_weight,
                "smoothness": self.smoothness_weight,
                "polar": self.polar_weight}[term]


@dataclass
class LossBreakdown:
    """Term scalars, the weighted total and the per-pixel maps behind them.

    ``total == reprojection_weight * reprojection + smoothness_weight * smoothness
    + polar_weight * polar`` where each term is the mean of its map over its
    valid mask (the reprojection map already carries the auto-mask).
    """

    reprojection: float
    smoothness: float
    polar: float
    total: float
    reprojection_map: np.ndarray = field(repr=False)
    automask: np.ndarray = field(repr=False)
    reprojection_valid: np.ndarray = field(repr=False)
    smoothness_map: np.ndarray = field(repr=False)
    smoothness_valid: np.ndarray = field(repr=False)
    polar_map: np.ndarray = field(repr=False)
    polar_valid: np.ndarray = field(repr=False)
    specular_mask: np.ndarray = field(repr=False)

    def scalars(self):
        return {"reprojection": self.reprojection, "smoothness": self.smoothness,
                "polar": self.polar, "total": self.total}

    def nonfinite_terms(self):
        return [name for name, value in self.scalars().items() if not np.isfinite(value)]


@dataclass
class TermMaps:
    num: dict
    cnt: dict
    disparity_sum: float
    extras: dict = field(default_factory=dict)


def _ratio(num, cnt):
    if np.ndim(num) == 0 and np.ndim(cnt) == 0:
        return float(num / cnt) if cnt > 0 else 0.0
    cnt = np.asarray(cnt, dtype=float)
    return np.where(cnt > 0, num / np.where(cnt > 0, cnt, 1.0), 0.0)


def second_difference(x, axis):
    """Centered [1, -2, 1] second difference; zero on the first/last index along ``axis``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if axis == 1:
        out[:, 1:-1] = x[:, :-2] - 2 * x[:, 1:-1] + x[:, 2:]
    else:
        out[1:-1, :] = x[:-2, :] - 2 * x[1:-1, :] + x[2:, :]
    return out


def _interior(shape):
    m = np.zeros(shape, dtype=bool)
    m[1:-1, 1:-1] = True
    return m


def smoothness_loss(depth, guide):
    """
    Second-order edge-aware smoothness of mean-normalized disparity.

    Returns
    -------
    value : float
    smap : (H, W) per-pixel map (0 on the one-pixel border)
    """
    num, cnt, disp = _smoothness_raw(depth, _guide_weights(guide))
    mean_disp = disp.mean()
    smap = num / mean_disp
    return _ratio(smap.sum(), cnt.sum()), smap


def _guide_weights(guide):
    return (np.exp(-np.abs(second_difference(guide, 1))),
            np.exp(-np.abs(second_difference(guide, 0))))


def _smoothness_raw(depth, guide_weights):
    disp = 1.0 / np.asarray(depth, dtype=float)
    wx, wy = guide_weights
    interior = _interior(disp.shape)
    num = np.abs(second_difference(disp, 1)) * wx + np.abs(second_difference(disp, 0)) * wy
    return np.where(interior, num, 0.0), interior.astype(float), disp


def polar_maps(depth, params, k, weights=LossWeights(), variant="real", points=None, rays=None):
    """
    Per-pixel polarimetric penalty.

    Real variant: dop * A(angle of projected n x ray, aop). Approximated
    variant: dop * min over the +-pi/2 shifted projected-normal angles. Only
    pixels with dop above the threshold and a defined geometry contribute.

    Returns
    -------
    pmap : (H, W) array, 0 on non-contributing pixels
    contributing : (H, W) bool array
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    depth = np.asarray(depth, dtype=float)
    aop = np.asarray(params.aop, dtype=float)
    dop = np.asarray(params.dop, dtype=float)
    if rays is None:
        rays = view_rays(depth.shape, k)
    if points is None:
        points = backproject_map(depth, k)
    normals, valid = normal_map(depth, k, points, rays)
    if variant == "real":
        e, e_ok = efield_map(normals, rays)
        angle, a_ok = project_angle_map(e, depth, k, points)
        err = angular_error(angle, aop, weights.max_angular_error)
        valid = valid & e_ok & a_ok
    else:
        angle, a_ok = project_angle_map(normals, depth, k, points)
        plus = angular_error(fold_angle(angle + np.pi / 2), aop, weights.max_angular_error)
        minus = angular_error(fold_angle(angle - np.pi / 2), aop, weights.max_angular_error)
        err = np.minimum(np.abs(plus), np.abs(minus))
        valid = valid & a_ok
    contributing = valid & (dop > weights.dop_threshold)
    return np.where(contributing, dop * err, 0.0), contributing


def polar_loss(depth, params, k, weights=LossWeights(), variant="real"):
    """Mean polarimetric penalty over contributing pixels (0 if none) and its map."""
    pmap, contributing = polar_maps(depth, params, k, weights, variant)
    return _ratio(pmap.sum(), np.count_nonzero(contributing)), pmap


def reprojection_loss(target, sources, depth, k, weights=LossWeights()):
    """
    Auto-masked minimum reprojection error.

    Returns
    -------
    value : float
        mean of ``automask * error`` over pixels with a valid source sample
    error : (H, W) array
    automask : (H, W) bool array
    """
    err, automask, valid = reprojection_maps(target, sources, depth, k, weights.ssim_weight,
                                             weights.ssim_c1, weights.ssim_c2)
    return _ratio(np.where(automask, err, 0.0).sum(), np.count_nonzero(valid)), err, automask


class LossProblem:
    """
    Fixed inputs of the composite loss, evaluated for varying depth maps.

    Parameters
    ----------
    params : PolarParams
        Target-frame polarization parameters.
    target : (H, W) array
        Target intensity image, [0, 1] scale; also the smoothness guide.
    sources : list of (image, Pose)
        Source frames with target -> source poses.
    intrinsics : CameraIntrinsics
    weights : LossWeights
    variant : {"real", "approx"}
    """

    def __init__(self, params, target, sources, intrinsics, weights=None, variant="real"):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        self.params = params
        self.target = np.asarray(target, dtype=float)
        self.sources = list(sources)
        self.k = intrinsics
        self.weights = weights or LossWeights()
        self.variant = variant
        self.shape = self.target.shape
        self._guide = _guide_weights(self.target)
        self._rays = view_rays(self.shape, intrinsics)
        self._ray_grid = backproject_map(np.ones(self.shape), intrinsics)
        self._ref = SsimReference(self.target, self.weights.ssim_c1, self.weights.ssim_c2)
        self._identity = None
        if self.sources:
            w = self.weights
            self._identity = identity_photometric_error(self.target, self.sources, w.ssim_weight,
                                                        w.ssim_c1, w.ssim_c2)

    def active_terms(self):
        return tuple(t for t in TERMS if self.weights.term_weight(t) > 0)

    def maps(self, depth, terms=TERMS):
        """Numerator and count maps of the requested terms."""
        depth = np.asarray(depth, dtype=float)
        w = self.weights
        num, cnt, extras = {}, {}, {}
        points = depth[..., None] * self._ray_grid
        if "reprojection" in terms:
            if self.sources:
                err, automask, valid = reprojection_maps(self._ref, self.sources, depth, self.k,
                                                         w.ssim_weight, w.ssim_c1, w.ssim_c2,
                                                         identity_error=self._identity, points=points)
                num["reprojection"] = np.where(automask, err, 0.0)
                cnt["reprojection"] = valid.astype(float)
                extras.update(reprojection_error=err, automask=automask)
            else:
                num["reprojection"] = np.zeros(self.shape)
                cnt["reprojection"] = np.zeros(self.shape)
                extras.update(reprojection_error=np.zeros(self.shape),
                              automask=np.zeros(self.shape, dtype=bool))
        disp_sum = float(np.sum(1.0 / depth))
        if "smoothness" in terms:
            num["smoothness"], cnt["smoothness"], _ = _smoothness_raw(depth, self._guide)
        if "polar" in terms:
            pmap, contributing = polar_maps(depth, self.params, self.k, w, self.variant,
                                            points=points, rays=self._rays)
            num["polar"] = pmap
            cnt["polar"] = contributing.astype(float)
        return TermMaps(num, cnt, disp_sum, extras)

    def term_value(self, term, num_sum, cnt_sum, disparity_sum):
        """Scalar value of a term from its aggregates (scalars or equal-shape arrays)."""
        if term == "smoothness":
            mean_disp = disparity_sum / (self.shape[0] * self.shape[1])
            return _ratio(num_sum, cnt_sum) / mean_disp
        return _ratio(num_sum, cnt_sum)

    def values(self, maps):
        return {t: self.term_value(t, maps.num[t].sum(), maps.cnt[t].sum(), maps.disparity_sum)
                for t in maps.num}

    def total(self, depth):
        """Weighted total only, computing just the terms with non-zero weight."""
        vals = self.values(self.maps(depth, self.active_terms()))
        return float(sum(self.weights.term_weight(t) * v for t, v in vals.items()))

    def evaluate(self, depth):
        """Full LossBreakdown at ``depth``."""
        m = self.maps(depth)
        vals = self.values(m)
        w = self.weights
        total = (w.reprojection_weight * vals["reprojection"] + w.smoothness_weight * vals["smoothness"]
                 + w.polar_weight * vals["polar"])
        mean_disp = m.disparity_sum / (self.shape[0] * self.shape[1])
        return LossBreakdown(
            reprojection=float(vals["reprojection"]),
            smoothness=float(vals["smoothness"]),
            polar=float(vals["polar"]),
            total=float(total),
            reprojection_map=m.extras["reprojection_error"],
            automask=m.extras["automask"],
            reprojection_valid=m.cnt["reprojection"] > 0,
            smoothness_map=m.num["smoothness"] / mean_disp,
            smoothness_valid=m.cnt["smoothness"] > 0,
            polar_map=m.num["polar"],
            polar_valid=m.cnt["polar"] > 0,
            specular_mask=np.asarray(self.params.dop) > w.dop_threshold,
        )


def total_loss(depth, params, target, sources, k, weights=None, variant="real"):
    """Composite loss breakdown for one depth map (see LossProblem)."""
    return LossProblem(params, target, sources, k, weights, variant).evaluate(depth)
