"""Minimal deterministic line plots rasterized with Pillow."""
import numpy as np
from PIL import Image, ImageDraw

COLORS = ((31, 119, 180), (214, 39, 40), (44, 160, 44), (148, 103, 189), (255, 127, 14), (23, 190, 207))


def _fmt(v):
    return f"{v:.3g}"


def line_plot(path, series, title="", xlabel="", ylabel="", size=(480, 320), log_y=False, markers=False):
    """
    Draw ``series`` ({label: (x, y)}) into a PNG.

    Non-finite points are skipped. With ``log_y`` the y axis is log10 and
    non-positive values are skipped.
    """
    w, h = size
    left, right, top, bottom = 60, 12, 24, 36
    img = Image.new("RGB", size, "white")
    draw = ImageDraw.Draw(img)

    cleaned = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if log_y:
            ok &= y > 0
            y = np.where(ok, np.log10(np.where(ok, y, 1.0)), np.nan)
        cleaned[label] = (x[ok], y[ok])
    xs = np.concatenate([c[0] for c in cleaned.values()] or [np.zeros(0)])
    ys = np.concatenate([c[1] for c in cleaned.values()] or [np.zeros(0)])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) * 0.05 or 0.5
        y0, y1 = y0 - pad, y1 + pad

    def to_px(x, y):
        px = left + (x - x0) / (x1 - x0) * (w - left - right)
        py = h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom)
        return px, py

    draw.rectangle([left, top, w - right, h - bottom], outline="black")
    for frac in (0.0, 0.5, 1.0):
        yv = y0 + frac * (y1 - y0)
        _, py = to_px(x0, yv)
        draw.text((4, py - 5), _fmt(10 ** yv if log_y else yv), fill="black")
        xv = x0 + frac * (x1 - x0)
        px, _ = to_px(xv, y0)
        draw.text((px - 10, h - bottom + 4), _fmt(xv), fill="black")
    draw.text((left, 6), title, fill="black")
    draw.text((w // 2 - 20, h - 14), xlabel, fill="black")
    draw.text((4, top - 14), ylabel, fill="black")

    for i, (label, (x, y)) in enumerate(cleaned.items()):
        color = COLORS[i % len(COLORS)]
        pts = [to_px(a, b) for a, b in zip(x, y)]
        if len(pts) > 1:
            draw.line(pts, fill=color, width=2)
        if markers or len(pts) == 1:
            for px, py in pts:
                draw.ellipse([px - 3, py - 3, px + 3, py + 3], outline=color, fill=color)
        draw.text((w - right - 110, top + 4 + 12 * i), label, fill=color)
    img.save(path)
    return path
