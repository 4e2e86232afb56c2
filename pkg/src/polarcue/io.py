"""
File formats.

Grayscale inputs are 8- or 16-bit PGM/PNG, normalized to [0, 1] by the full
scale of the container (or of a declared bit depth, e.g. 12). A DoFP mosaic
comes with a JSON sidecar ``<image>.json`` holding ``layout`` and optionally
``bit_depth``.

Decoded quantities are written as 16-bit PNG with fixed affine encodings so
files from different frames are directly comparable:

=============  ===============  ==========================
quantity       range            code
=============  ===============  ==========================
P0..P135       [0, 1]           x * 65535
S0, intensity  [0, 2]           x / 2 * 65535
S1, S2         [-1, 1]          (x + 1) / 2 * 65535
AoP            [0, pi)          x * 65535 / pi
DoP            [0, 1]           x * 65535
depth          [0, 256) m       x * 256  (KITTI convention)
=============  ===============  ==========================
"""
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .polarimage import DEFAULT_LAYOUT, DofpRaw, InvalidInputError, PolarParams, check_layout

CODE_MAX = 65535
DEPTH_SCALE = 256.0

# name -> (lower, upper) of the encoded interval
ENCODINGS = {
    "p0": (0.0, 1.0), "p45": (0.0, 1.0), "p90": (0.0, 1.0), "p135": (0.0, 1.0),
    "s0": (0.0, 2.0), "intensity": (0.0, 2.0),
    "s1": (-1.0, 1.0), "s2": (-1.0, 1.0),
    "aop": (0.0, np.pi), "dop": (0.0, 1.0),
    "mask": (0.0, 1.0),
}


def read_gray(path, bit_depth=None):
    """Read a single-channel 8/16-bit image and scale it to [0, 1]."""
    with Image.open(path) as img:
        arr = np.array(img)
    if arr.ndim != 2:
        raise InvalidInputError(f"{path}: expected a single-channel image, got shape {arr.shape}")
    if bit_depth is None:
        bit_depth = 8 if arr.dtype == np.uint8 else 16
    full = float(2 ** int(bit_depth) - 1)
    out = arr.astype(float) / full
    if out.max(initial=0.0) > 1.0:
        raise InvalidInputError(f"{path}: values exceed the declared {bit_depth}-bit full scale")
    return out


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def read_mosaic(path, meta=None):
    """
    Read a raw DoFP frame and its layout.

    Parameters
    ----------
    path : str or Path
    meta : dict or path, optional
        Metadata with ``layout`` and ``bit_depth``; defaults to the sidecar
        ``<path>.json`` when present, else the default layout.
    """
    if meta is None:
        side = sidecar_path(path)
        meta = json.loads(side.read_text()) if side.exists() else {}
    elif not isinstance(meta, dict):
        meta = json.loads(Path(meta).read_text())
    layout = check_layout(tuple(tuple(r) for r in meta.get("layout", DEFAULT_LAYOUT)))
    return DofpRaw(read_gray(path, meta.get("bit_depth")), layout)


def write_mosaic(path, raw, bit_depth=16):
    """Write a DoFP frame as 16-bit PNG/PGM plus its JSON sidecar."""
    full = 2 ** bit_depth - 1
    codes = np.floor(np.asarray(raw.values) * full + 0.5).astype(np.uint16)
    Image.fromarray(codes).save(path)
    meta = {"layout": [list(r) for r in raw.layout], "bit_depth": bit_depth}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def encode(values, name):
    lo, hi = ENCODINGS[name]
    x = (np.asarray(values, dtype=float) - lo) / (hi - lo)
    return np.floor(np.clip(x, 0.0, 1.0) * CODE_MAX + 0.5).astype(np.uint16)


def decode_codes(codes, name):
    lo, hi = ENCODINGS[name]
    return lo + np.asarray(codes, dtype=float) / CODE_MAX * (hi - lo)


def write_u16(path, values, name):
    Image.fromarray(encode(values, name)).save(path)


def read_u16(path, name):
    with Image.open(path) as img:
        return decode_codes(np.array(img), name)


def write_decoded(outdir, stack=None, stokes=None, params=None):
    """Write orientation channels, Stokes images and polar parameters; returns {name: path}."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    fields = {}
    if stack is not None:
        fields.update(p0=stack.p0, p45=stack.p45, p90=stack.p90, p135=stack.p135)
    if stokes is not None:
        fields.update(s0=stokes.s0, s1=stokes.s1, s2=stokes.s2)
    if params is not None:
        fields.update(intensity=params.intensity, aop=params.aop, dop=params.dop)
    paths = {}
    for name, values in fields.items():
        paths[name] = str(out / f"{name}.png")
        write_u16(paths[name], values, name)
    return paths


def read_params(directory):
    """Read ``intensity.png``, ``aop.png`` and ``dop.png`` from a directory."""
    d = Path(directory)
    try:
        vals = [read_u16(d / f"{n}.png", n) for n in ("intensity", "aop", "dop")]
    except FileNotFoundError as exc:
        raise InvalidInputError(f"missing polar parameter image: {exc.filename}") from None
    # the top code maps to pi exactly, which lies outside [0, pi)
    vals[1] = np.where(vals[1] >= np.pi, 0.0, vals[1])
    return PolarParams(*vals)


def write_params(directory, params, mask=None):
    paths = write_decoded(directory, params=params)
    if mask is not None:
        paths["mask"] = str(Path(directory) / "mask.png")
        write_u16(paths["mask"], np.asarray(mask, dtype=float), "mask")
    return paths


def write_depth(path, depth):
    """16-bit depth, ``round(depth * 256)``; values beyond the range saturate."""
    codes = np.floor(np.clip(np.asarray(depth, dtype=float) * DEPTH_SCALE, 0, CODE_MAX) + 0.5)
    Image.fromarray(codes.astype(np.uint16)).save(path)


def read_depth(path):
    with Image.open(path) as img:
        codes = np.array(img).astype(float)
    if np.any(codes <= 0):
        raise InvalidInputError(f"{path}: depth map has zero (invalid) entries")
    return codes / DEPTH_SCALE


def write_rgb(path, rgb):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def read_labels(path, legend_path=None):
    """
    Read an 8-bit label map and its legend.

    The legend is JSON ``{"0": "sky", ...}`` (default ``<path>.json``).
    Returns the label array and the ``{index: name}`` legend.
    """
    with Image.open(path) as img:
        if img.mode not in ("L", "P"):
            raise InvalidInputError(f"{path}: label maps must be 8-bit indexed or grayscale")
        labels = np.array(img)
    legend_path = sidecar_path(path) if legend_path is None else Path(legend_path)
    legend = {int(k): v for k, v in json.loads(legend_path.read_text()).items()}
    return labels, legend


def write_labels(path, labels, legend, legend_path=None):
    Image.fromarray(np.asarray(labels, dtype=np.uint8), mode="L").save(path)
    legend_path = sidecar_path(path) if legend_path is None else Path(legend_path)
    legend_path.write_text(json.dumps({str(k): v for k, v in sorted(legend.items())}, indent=2) + "\n")


def write_breakdown(outdir, breakdown, name="loss"):
    """
    Write a LossBreakdown as ``<name>.json`` (term scalars plus map paths)
    and one ``.npy`` file per map. Returns the report dict.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"terms": breakdown.scalars(), "maps": {}}
    for field in ("reprojection_map", "automask", "reprojection_valid", "smoothness_map",
                  "smoothness_valid", "polar_map", "polar_valid", "specular_mask"):
        path = out / f"{name}_{field}.npy"
        np.save(path, np.asarray(getattr(breakdown, field)))
        report["maps"][field] = path.name
    (out / f"{name}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read JSON config {path}: {exc}") from None
