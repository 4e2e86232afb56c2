"""Photometric reprojection: SSIM, photometric error, warping and auto-masking."""
import numpy as np
from scipy import ndimage

from .geometry import backproject_map, project

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
# tolerance for samples landing exactly on the frame border
_FRAME_TOL = 1e-6


def box3(*images):
    """3x3 means with mirror padding (edge sample not repeated), one per input image."""
    stack = np.stack([np.asarray(x, dtype=float) for x in images])
    out = ndimage.uniform_filter(stack, size=(1, 3, 3), mode="mirror")
    return out[0] if len(images) == 1 else tuple(out)


class SsimReference:
    """Cached local statistics of a fixed image for repeated SSIM evaluations."""

    def __init__(self, image, c1=SSIM_C1, c2=SSIM_C2):
        self.image = np.asarray(image, dtype=float)
        self.mu, self.sq = box3(self.image, self.image * self.image)
        self.var = self.sq - self.mu ** 2
        self.c1, self.c2 = c1, c2

    def ssim(self, other):
        b = np.asarray(other, dtype=float)
        mu_b, sq_b, ab = box3(b, b * b, self.image * b)
        var_b = sq_b - mu_b ** 2
        cov = ab - self.mu * mu_b
        num = (2 * self.mu * mu_b + self.c1) * (2 * cov + self.c2)
        den = (self.mu ** 2 + mu_b ** 2 + self.c1) * (self.var + var_b + self.c2)
        return np.clip(num / den, -1.0, 1.0)

    def photometric_error(self, other, ssim_weight=0.85):
        out = (1 - ssim_weight) * np.abs(self.image - other)
        if ssim_weight:
            out = out + 0.5 * ssim_weight * (1 - self.ssim(other))
        return out


def ssim(a, b, c1=SSIM_C1, c2=SSIM_C2):
    """
    Per-pixel SSIM with 3x3 uniform statistics.

    Images are expected on a [0, 1] scale. Output is clipped into [-1, 1].
    """
    return SsimReference(a, c1, c2).ssim(b)


def photometric_error(a, b, ssim_weight=0.85, c1=SSIM_C1, c2=SSIM_C2):
    """``w/2 * (1 - SSIM(a, b)) + (1 - w) * |a - b|`` per pixel."""
    return SsimReference(a, c1, c2).photometric_error(np.asarray(b, dtype=float), ssim_weight)


def bilinear_sample(image, u, v):
    """Sample ``image`` at float (u, v); coordinates are clamped into the frame."""
    image = np.asarray(image, dtype=float)
    h, w = image.shape
    u = np.clip(u, 0, w - 1)
    v = np.clip(v, 0, h - 1)
    u0 = np.minimum(np.floor(u).astype(int), w - 2) if w > 1 else np.zeros(np.shape(u), int)
    v0 = np.minimum(np.floor(v).astype(int), h - 2) if h > 1 else np.zeros(np.shape(v), int)
    fu, fv = u - u0, v - v0
    u1, v1 = np.minimum(u0 + 1, w - 1), np.minimum(v0 + 1, h - 1)
    top = image[v0, u0] * (1 - fu) + image[v0, u1] * fu
    bottom = image[v1, u0] * (1 - fu) + image[v1, u1] * fu
    return top * (1 - fv) + bottom * fv


def warp(source, depth, pose, k, points=None):
    """
    Resample a source frame into the target view.

    Each target pixel is backprojected with its depth, moved into the source
    camera with ``pose`` (target -> source) and projected; the source is
    sampled bilinearly there.

    Returns
    -------
    warped : (H, W) array
    valid : (H, W) bool array, False where the sample falls outside the source
        frame or behind the source camera.
    """
    pts = pose.apply(backproject_map(depth, k) if points is None else points)
    z = pts[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u, v = project(pts, k)
    h, w = np.shape(source)
    valid = (z > 0) & np.isfinite(u) & np.isfinite(v)
    valid &= (u >= -_FRAME_TOL) & (u <= w - 1 + _FRAME_TOL) & (v >= -_FRAME_TOL) & (v <= h - 1 + _FRAME_TOL)
    u = np.where(valid, u, 0.0)
    v = np.where(valid, v, 0.0)
    return bilinear_sample(source, u, v), valid


def reprojection_maps(target, sources, depth, k, ssim_weight=0.85, c1=SSIM_C1, c2=SSIM_C2,
                      identity_error=None, points=None):
    """
    Minimum photometric error over source frames and the auto-mask.

    Parameters
    ----------
    target : (H, W) array or SsimReference
    sources : list of (image, Pose)
        Poses map target-camera coordinates to each source camera.
    identity_error : (H, W) array, optional
        Precomputed minimum error against the unwarped sources.

    Returns
    -------
    error : (H, W) array, min over sources of pe(target, warped); 0 where invalid
    automask : (H, W) bool array, warped error strictly below identity error
    valid : (H, W) bool array, some source has in-frame samples over the
        whole 3x3 SSIM window of the pixel
    """
    if not sources:
        raise ValueError("reprojection needs at least one source frame")
    ref = target if isinstance(target, SsimReference) else SsimReference(target, c1, c2)
    best = np.full(ref.image.shape, np.inf)
    for image, pose in sources:
        warped, ok = warp(image, depth, pose, k, points)
        # SSIM at a pixel reads its 3x3 window, so one out-of-frame neighbor spoils it
        ok = ndimage.binary_erosion(ok, np.ones((3, 3), dtype=bool), border_value=1)
        pe = ref.photometric_error(warped, ssim_weight)
        best = np.minimum(best, np.where(ok, pe, np.inf))
    if identity_error is None:
        identity_error = identity_photometric_error(ref.image, sources, ssim_weight, c1, c2)
    valid = np.isfinite(best)
    automask = valid & (best < identity_error)
    return np.where(valid, best, 0.0), automask, valid


def identity_photometric_error(target, sources, ssim_weight=0.85, c1=SSIM_C1, c2=SSIM_C2):
    """Minimum error of the target against the unwarped sources."""
    return np.min([photometric_error(target, img, ssim_weight, c1, c2) for img, _ in sources], axis=0)
