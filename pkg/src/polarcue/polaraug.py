"""
Geometric augmentation of polarimetric images.

The angle of polarization is the orientation of the electric field in the
image plane, so it is not invariant under image rotation or mirroring.
``augment_regularized`` corrects the angle values after the spatial warp,
which is what a physical camera roll would produce. ``augment_naive`` warps
all fields identically and leaves the angle values untouched; it exists as
an ablation baseline and is physically wrong on purpose.

Rotation convention: a positive angle rotates image content by +theta in
(u, v) pixel coordinates (u right, v down), i.e. directions measured as
``atan2(dv, du)`` increase by theta. This is the image a camera rolled by
``Rz(theta)`` (world -> camera) would see.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .hslmap import HslImage
from .polarimage import PolarParams, fold_angle

KINDS = ("rotation", "horizontal-flip")
INTERPOLATIONS = ("nearest", "bilinear")


class UnsupportedAugmentation(ValueError):
    pass


@dataclass(frozen=True)
class AugmentSpec:
    """One geometric transform. ``angle`` is in radians, in (-pi, pi]."""

    kind: str = "rotation"
    angle: float = 0.0
    interpolation: str = "bilinear"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedAugmentation(f"unsupported augmentation kind {self.kind!r}")
        if self.interpolation not in INTERPOLATIONS:
            raise UnsupportedAugmentation(f"unsupported interpolation {self.interpolation!r}")
        if not (-np.pi < self.angle <= np.pi):
            raise ValueError(f"rotation angle must lie in (-pi, pi], got {self.angle}")

    @classmethod
    def from_dict(cls, d):
        angle = d.get("angle", 0.0)
        if "angle_deg" in d:
            angle = np.deg2rad(d["angle_deg"])
        return cls(d.get("kind", "rotation"), float(angle), d.get("interpolation", "bilinear"))


def _source_coords(shape, spec):
    """Source (row, col) sampled by each output pixel, plus the validity mask."""
    h, w = shape
    rows, cols = np.mgrid[0:h, 0:w].astype(float)
    if spec.kind == "horizontal-flip":
        return rows, (w - 1) - cols, np.ones(shape, dtype=bool)
    cu, cv = (w - 1) / 2.0, (h - 1) / 2.0
    c, s = np.cos(spec.angle), np.sin(spec.angle)
    du, dv = cols - cu, rows - cv
    # inverse rotation R(-theta) applied to the output offset
    su = cu + c * du + s * dv
    sv = cv - s * du + c * dv
    tol = 1e-9
    valid = (su >= -tol) & (su <= w - 1 + tol) & (sv >= -tol) & (sv <= h - 1 + tol)
    if spec.interpolation == "nearest":
        su, sv = np.round(su), np.round(sv)
    return np.clip(sv, 0, h - 1), np.clip(su, 0, w - 1), valid


def _sample(field, coords, valid, order):
    out = ndimage.map_coordinates(np.asarray(field, dtype=float), coords, order=order, mode="nearest")
    return np.where(valid, out, 0.0)


def _sample_angle(angle, coords, valid, order, period):
    """Interpolate a periodic field through its unit vector on the doubled circle."""
    if order == 0:
        return _sample(angle, coords, valid, 0)
    phase = 2 * np.pi * np.asarray(angle, dtype=float) / period
    c = _sample(np.cos(phase), coords, valid, order)
    s = _sample(np.sin(phase), coords, valid, order)
    out = np.mod(np.arctan2(s, c), 2 * np.pi) * period / (2 * np.pi)
    return np.where(valid & (out < period), out, 0.0)


def _warp(spec, shape):
    rows, cols, valid = _source_coords(shape, spec)
    order = 0 if spec.interpolation == "nearest" else 1
    return np.array([rows, cols]), valid, order


def augment_regularized(params, spec):
    """
    Warp (intensity, aop, dop) and correct the angle values.

    Returns
    -------
    PolarParams, np.ndarray
        The augmented parameters and a boolean validity mask (False where the
        output pixel samples outside the input frame; values there are 0).
    """
    coords, valid, order = _warp(spec, params.shape)
    intensity = _sample(params.intensity, coords, valid, order)
    dop = _sample(params.dop, coords, valid, order)
    aop = _sample_angle(params.aop, coords, valid, order, np.pi)
    if spec.kind == "rotation":
        aop = fold_angle(aop + spec.angle)
    else:
        aop = fold_angle(np.pi - aop)
    aop = np.where(valid, aop, 0.0)
    return PolarParams(intensity, aop, dop), valid


def augment_naive(params, spec):
    """Warp all three fields identically without touching the angle values."""
    coords, valid, order = _warp(spec, params.shape)
    fields = [_sample(f, coords, valid, order) for f in (params.intensity, params.aop, params.dop)]
    fields[1] = np.clip(fields[1], 0.0, np.nextafter(np.pi, 0))
    return PolarParams(*fields), valid


def augment(params, spec, regularized=True):
    fn = augment_regularized if regularized else augment_naive
    return fn(params, spec)


def augment_hsl(img, spec, regularized=True):
    """
    Same transforms applied directly to an HSL image.

    The hue is the doubled angle in degrees, so the regularized rotation
    becomes ``H' = H + 2 theta`` (degrees, mod 360) and the flip ``H' = -H``.
    """
    coords, valid, order = _warp(spec, np.shape(img.hue))
    sat = _sample(img.saturation, coords, valid, order)
    lum = _sample(img.luminance, coords, valid, order)
    if not regularized:
        hue = np.clip(_sample(img.hue, coords, valid, order), 0.0, np.nextafter(360.0, 0))
        return HslImage(hue, sat, lum), valid
    hue = _sample_angle(img.hue, coords, valid, order, 360.0)
    if spec.kind == "rotation":
        hue = hue + 2 * np.degrees(spec.angle)
    else:
        hue = -hue
    hue = np.mod(hue, 360.0)
    hue = np.where(valid & (hue < 360.0), hue, 0.0)
    return HslImage(hue, sat, lum), valid
