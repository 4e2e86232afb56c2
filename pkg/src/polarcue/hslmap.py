"""
HSL encoding of polarization parameters and conversion to 8-bit RGB.

The angle of polarization drives the hue, the degree of polarization the
saturation and the intensity the luminance, so strongly polarized regions
come out colored and unpolarized ones gray.
"""
from dataclasses import dataclass

import numpy as np

# full-scale intensity (maximum of S0 for [0, 1] channels)
INTENSITY_FULL_SCALE = 2.0


@dataclass(frozen=True)
class HslImage:
    """Hue in degrees [0, 360), saturation and luminance in [0, 100]."""

    hue: np.ndarray
    saturation: np.ndarray
    luminance: np.ndarray


def to_hsl(params, intensity_full_scale=INTENSITY_FULL_SCALE):
    """
    Map (intensity, aop, dop) to HSL.

    Hue is the doubled angle in degrees so the pi-periodic angle covers the
    whole color wheel. Luminance uses a fixed full-scale intensity rather than
    a per-image maximum, so the encoding is frame independent.
    """
    hue = np.mod(np.degrees(2 * np.asarray(params.aop, dtype=float)), 360.0)
    hue = np.where(hue >= 360.0, 0.0, hue)
    sat = 100.0 * np.clip(params.dop, 0.0, 1.0)
    lum = 100.0 * np.minimum(np.asarray(params.intensity, dtype=float) / intensity_full_scale, 1.0)
    return HslImage(hue, sat, np.maximum(lum, 0.0))


def hsl_to_rgb(img):
    """
    Hexcone HSL -> RGB, quantized round-half-up to uint8.

    Returns
    -------
    np.ndarray
        (H, W, 3) uint8 array.
    """
    h = np.mod(np.asarray(img.hue, dtype=float), 360.0) / 60.0
    s = np.clip(np.asarray(img.saturation, dtype=float) / 100.0, 0, 1)
    l = np.clip(np.asarray(img.luminance, dtype=float) / 100.0, 0, 1)

    chroma = (1 - np.abs(2 * l - 1)) * s
    x = chroma * (1 - np.abs(np.mod(h, 2) - 1))
    sector = np.floor(h).astype(int) % 6
    zero = np.zeros_like(chroma)
    table = [
        (chroma, x, zero),
        (x, chroma, zero),
        (zero, chroma, x),
        (zero, x, chroma),
        (x, zero, chroma),
        (chroma, zero, x),
    ]
    rgb = np.zeros(chroma.shape + (3,))
    for k, channels in enumerate(table):
        sel = sector == k
        for c in range(3):
            rgb[..., c] = np.where(sel, channels[c], rgb[..., c])
    rgb += (l - chroma / 2)[..., None]
    return np.floor(np.clip(rgb, 0, 1) * 255 + 0.5).astype(np.uint8)


def polar_to_rgb(params, intensity_full_scale=INTENSITY_FULL_SCALE):
    """Shortcut for ``hsl_to_rgb(to_hsl(params))``."""
    return hsl_to_rgb(to_hsl(params, intensity_full_scale))
