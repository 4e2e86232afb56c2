"""
Division-of-focal-plane (DoFP) decoding.

A DoFP sensor carries a 2x2 micro-grid of linear polarizers at 0, 45, 90 and
135 degrees. This module turns the raw mosaic into four dense orientation
channels, the linear Stokes parameters and the (intensity, angle, degree)
polarization triplet, and goes back again through the Malus model.

Conventions
-----------
* Intensities are linear and normalized to [0, 1].
* S3 (circular polarization) is identically zero for a linear DoFP sensor and
  is never stored.
* The angle of polarization is measured in image coordinates (u to the right,
  v downwards) as ``atan2(dv, du)`` and folded into [0, pi).
* ``0.5 * atan2(S2, S1)`` is used instead of ``0.5 * arctan(S2 / S1)`` so the
  quadrant of S1 is kept.
"""
from dataclasses import dataclass, field

import numpy as np

ORIENTATIONS = (0, 45, 90, 135)
DEFAULT_LAYOUT = ((90, 45), (135, 0))

# degenerate-pixel thresholds
EPS_INTENSITY = 1e-9
EPS_POL = 1e-12


class InvalidInputError(ValueError):
    """Raised for malformed raw frames (odd size, out-of-range values)."""


class InvalidLayoutError(ValueError):
    """Raised when a mosaic layout is not a permutation of the four orientations."""


def check_layout(layout):
    """Validate a 2x2 layout and return it as a tuple of tuples of ints."""
    try:
        arr = np.asarray(layout, dtype=int)
    except (TypeError, ValueError) as exc:
        raise InvalidLayoutError(f"cannot interpret layout {layout!r}") from exc
    if arr.shape != (2, 2) or sorted(arr.ravel().tolist()) != list(ORIENTATIONS):
        raise InvalidLayoutError(
            f"layout must be a 2x2 permutation of {ORIENTATIONS}, got {layout!r}")
    return tuple(tuple(int(v) for v in row) for row in arr)


def parse_layout(text):
    """Parse ``"90,45,135,0"`` (row-major) into a 2x2 layout."""
    parts = [p for p in text.replace(";", ",").replace(" ", ",").split(",") if p]
    try:
        values = [int(p) for p in parts]
    except ValueError as exc:
        raise InvalidLayoutError(f"cannot parse layout string {text!r}") from exc
    if len(values) != 4:
        raise InvalidLayoutError(f"layout needs four orientations, got {text!r}")
    return check_layout([values[:2], values[2:]])


@dataclass(frozen=True)
class DofpRaw:
    """Raw mosaic frame with its 2x2 orientation layout."""

    values: np.ndarray
    layout: tuple = DEFAULT_LAYOUT

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidInputError("raw frame must be a 2D array")
        h, w = values.shape
        if h % 2 or w % 2 or h == 0 or w == 0:
            raise InvalidInputError(f"raw frame dimensions must be even, got {w}x{h}")
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise InvalidInputError("raw values must be finite and within [0, 1]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "layout", check_layout(self.layout))

    @property
    def shape(self):
        return self.values.shape

    def offset(self, orientation):
        """(row, col) of the given orientation inside the 2x2 cell."""
        for r, row in enumerate(self.layout):
            for c, o in enumerate(row):
                if o == orientation:
                    return r, c
        raise InvalidLayoutError(f"orientation {orientation} not in layout")


@dataclass(frozen=True)
class OrientationStack:
    """Dense intensities behind the 0/45/90/135 degree polarizers."""

    p0: np.ndarray
    p45: np.ndarray
    p90: np.ndarray
    p135: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(c) for c in self.channels()}
        if len(shapes) != 1:
            raise InvalidInputError(f"orientation channels differ in shape: {shapes}")

    def channels(self):
        return (self.p0, self.p45, self.p90, self.p135)

    def channel(self, orientation):
        return dict(zip(ORIENTATIONS, self.channels()))[orientation]

    @property
    def shape(self):
        return np.shape(self.p0)


@dataclass(frozen=True)
class StokesImage:
    """Linear Stokes parameters; S3 = 0 for linear DoFP sensors."""

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray


@dataclass(frozen=True)
class PolarParams:
    """Per-pixel intensity, angle of polarization (radians, [0, pi)) and degree of polarization ([0, 1]).

    ``clamped`` counts pixels whose degree of polarization had to be clipped
    to 1 (noise pushing sqrt(S1^2 + S2^2) above S0).
    """

    intensity: np.ndarray
    aop: np.ndarray
    dop: np.ndarray
    clamped: int = field(default=0, compare=False)

    @property
    def shape(self):
        return np.shape(self.intensity)


def demosaick(raw):
    """
    Densify each orientation channel by bilinear interpolation.

    Every orientation is sampled on a quarter-resolution grid offset by its
    position in the 2x2 cell. Output pixels are interpolated from that grid
    with clamped (replicated) sample coordinates at the borders, so carried
    samples are reproduced exactly.

    Parameters
    ----------
    raw : DofpRaw

    Returns
    -------
    OrientationStack
    """
    h, w = raw.shape
    channels = {}
    for orientation in ORIENTATIONS:
        r0, c0 = raw.offset(orientation)
        grid = raw.values[r0::2, c0::2]
        rows = _interp_axis(np.arange(h), r0, grid.shape[0])
        cols = _interp_axis(np.arange(w), c0, grid.shape[1])
        channels[orientation] = _bilinear_separable(grid, rows, cols)
    return OrientationStack(channels[0], channels[45], channels[90], channels[135])


def _interp_axis(coords, offset, n):
    g = np.clip((coords - offset) / 2.0, 0, n - 1)
    i0 = np.floor(g).astype(int)
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, g - i0


def _bilinear_separable(grid, rows, cols):
    r0, r1, wr = rows
    c0, c1, wc = cols
    top = grid[r0][:, c0] * (1 - wc) + grid[r0][:, c1] * wc
    bottom = grid[r1][:, c0] * (1 - wc) + grid[r1][:, c1] * wc
    return top * (1 - wr)[:, None] + bottom * wr[:, None]


def stokes(stack):
    """Linear Stokes parameters ``S0 = P0 + P90``, ``S1 = P0 - P90``, ``S2 = P45 - P135``."""
    p0, p45, p90, p135 = (np.asarray(c, dtype=float) for c in stack.channels())
    return StokesImage(p0 + p90, p0 - p90, p45 - p135)


def polar_params(s):
    """
    Intensity, angle and degree of polarization from Stokes parameters.

    Degenerate pixels are resolved deterministically: the angle is 0 where
    the polarized component vanishes (S1^2 + S2^2 < EPS_POL^2) and the degree
    is 0 where the intensity is below EPS_INTENSITY. The degree is clipped
    into [0, 1]; the number of clipped pixels is reported in ``clamped``.
    """
    s0 = np.asarray(s.s0, dtype=float)
    s1 = np.asarray(s.s1, dtype=float)
    s2 = np.asarray(s.s2, dtype=float)
    pol2 = s1 * s1 + s2 * s2
    aop = fold_angle(0.5 * np.arctan2(s2, s1))
    aop = np.where(pol2 < EPS_POL ** 2, 0.0, aop)

    dark = s0 < EPS_INTENSITY
    with np.errstate(divide="ignore", invalid="ignore"):
        dop = np.sqrt(pol2) / np.where(dark, 1.0, s0)
    dop = np.where(dark, 0.0, dop)
    clamped = int(np.count_nonzero(dop > 1.0))
    dop = np.clip(dop, 0.0, 1.0)
    return PolarParams(np.maximum(s0, 0.0), aop, dop, clamped=clamped)


def fold_angle(angle):
    """Fold angles into [0, pi)."""
    a = np.mod(angle, np.pi)
    # np.mod can return pi itself for tiny negative inputs
    return np.where(a >= np.pi, 0.0, a)


def synthesize(params, orientations=ORIENTATIONS):
    """
    Orientation channels from polarization parameters via the Malus model
    ``P_phi = intensity / 2 * (1 + dop * cos(2 * (phi - aop)))``.

    Returns an OrientationStack when ``orientations`` is the default set,
    otherwise a dict keyed by orientation in degrees.
    """
    intensity = np.asarray(params.intensity, dtype=float)
    aop = np.asarray(params.aop, dtype=float)
    dop = np.asarray(params.dop, dtype=float)
    half = 0.5 * intensity
    out = {}
    # complementary pairs: the larger channel is computed, the smaller is the
    # exact remainder, so P0 + P90 == P45 + P135 == intensity bit for bit
    for a, b, x in ((0, 90, dop * np.cos(2 * aop)), (45, 135, dop * np.sin(2 * aop))):
        big = half * (1 + np.abs(x))
        small = np.maximum(intensity - big, 0.0)
        out[a] = np.where(x >= 0, big, small)
        out[b] = np.where(x >= 0, small, big)
    for phi in orientations:
        if phi not in out:
            out[phi] = np.maximum(half * (1 + dop * np.cos(2 * (np.deg2rad(phi) - aop))), 0.0)
    if tuple(orientations) == ORIENTATIONS:
        return OrientationStack(out[0], out[45], out[90], out[135])
    return {phi: out[phi] for phi in orientations}


def mosaic(stack, layout=DEFAULT_LAYOUT):
    """Sample a dense orientation stack back onto a DoFP mosaic."""
    layout = check_layout(layout)
    h, w = stack.shape
    values = np.empty((h, w), dtype=float)
    for r, row in enumerate(layout):
        for c, orientation in enumerate(row):
            values[r::2, c::2] = np.asarray(stack.channel(orientation))[r::2, c::2]
    return DofpRaw(np.clip(values, 0.0, 1.0), layout)


def decode(raw):
    """demosaick -> stokes -> polar_params in one call."""
    stack = demosaick(raw)
    s = stokes(stack)
    return stack, s, polar_params(s)
