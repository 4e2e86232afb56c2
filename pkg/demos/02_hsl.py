"""Encode polar parameters as a color image: hue from AoP, saturation from DoP, lightness from intensity."""
import numpy as np

from polarcue.hslmap import polar_to_rgb, to_hsl
from polarcue.polarimage import PolarParams

# one row per AoP, one column per DoP
aop = np.linspace(0, np.pi, 8, endpoint=False)[:, None] * np.ones((1, 4))
dop = np.array([[0.0, 0.33, 0.66, 1.0]]) * np.ones((8, 1))
params = PolarParams(np.ones_like(aop), aop, dop)

hsl = to_hsl(params)
rgb = polar_to_rgb(params)
print("hue (deg) down the AoP axis:", np.round(hsl.hue[:, 0]).astype(int))
print("saturation across the DoP axis:", hsl.saturation[0])
print("unpolarized column is gray:", rgb[:, 0].tolist()[:3], "...")
print("fully polarized, AoP 0 is pure red:", rgb[0, 3].tolist())
