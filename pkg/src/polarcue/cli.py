"""
Command-line entry point.

Every subcommand writes its outputs plus a ``manifest.json`` (subcommand,
resolved configuration, inputs, outputs, version, duration) into ``--out``.

Exit codes: 0 success, 2 invalid input, 3 non-finite loss.
"""
import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .depthloss import LossProblem, LossWeights
from .hslmap import hsl_to_rgb, polar_to_rgb, to_hsl
from .metrics import REGIONS, MetricError, depth_metrics, region_masks, seg_metrics, write_depth_csv, write_seg_csv
from .optimize import NonFiniteLossError, OptimizeConfig, optimize_depth
from .plots import line_plot
from .polaraug import AugmentSpec, UnsupportedAugmentation, augment
from .polarimage import InvalidInputError, InvalidLayoutError, decode, parse_layout
from .synthscene import SceneSpec, benchmark_scene, frame_set, perturb_depth, render

EXIT_OK, EXIT_INVALID, EXIT_NONFINITE = 0, 2, 3


class RunManifest:
    def __init__(self, subcommand, config):
        self.subcommand = subcommand
        self.config = config
        self.inputs = {}
        self.outputs = {}
        self._start = time.perf_counter()

    def to_dict(self):
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": __version__,
            "duration_s": time.perf_counter() - self._start,
        }

    def write(self, outdir):
        pio.write_json(Path(outdir) / "manifest.json", self.to_dict())


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scene(args):
    if args.scene:
        try:
            return SceneSpec.from_dict(pio.read_json(args.scene))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed scene file {args.scene}: {exc}") from None
    return benchmark_scene(args.benchmark, seed=args.seed)


def _scene_config(args, spec):
    return {"scene": args.scene, "benchmark": None if args.scene else args.benchmark, "spec": spec.to_dict()}


def cmd_decode(args, manifest):
    out = _outdir(args)
    meta = None
    if args.layout or args.bit_depth:
        side = pio.sidecar_path(args.raw)
        meta = pio.read_json(side) if side.exists() else {}
        if args.layout:
            meta["layout"] = [list(r) for r in parse_layout(args.layout)]
        if args.bit_depth:
            meta["bit_depth"] = args.bit_depth
    raw = pio.read_mosaic(args.raw, meta)
    stack, s, params = decode(raw)
    manifest.inputs["raw"] = str(args.raw)
    manifest.config["layout"] = [list(r) for r in raw.layout]
    manifest.config["clamped_dop"] = params.clamped
    manifest.outputs.update(pio.write_decoded(out, stack, s, params))


def cmd_hsl(args, manifest):
    out = _outdir(args)
    params = pio.read_params(args.params)
    manifest.inputs["params"] = str(args.params)
    if args.export == "hsl":
        path = out / "hsl.png"
        pio.write_rgb(path, polar_to_rgb(params, args.full_scale))
        manifest.outputs["hsl"] = str(path)
    else:
        img = to_hsl(params, args.full_scale)
        channels = np.stack([img.hue / 360 * 255, img.saturation / 100 * 255, img.luminance / 100 * 255], -1)
        path = out / "hsl_channels.png"
        pio.write_rgb(path, np.floor(channels + 0.5).astype(np.uint8))
        manifest.outputs["channels"] = str(path)


def cmd_augment(args, manifest):
    out = _outdir(args)
    params = pio.read_params(args.params)
    cfg = pio.read_json(args.spec)
    items = cfg if isinstance(cfg, list) else cfg.get("augmentations", [cfg])
    specs = [AugmentSpec.from_dict(d) for d in items]
    manifest.inputs.update(params=str(args.params), spec=str(args.spec))
    manifest.config["augmentations"] = [{"kind": s.kind, "angle": s.angle, "interpolation": s.interpolation}
                                        for s in specs]
    manifest.config["regularized"] = not args.naive
    for i, spec in enumerate(specs):
        aug, valid = augment(params, spec, regularized=not args.naive)
        paths = pio.write_params(out / f"aug_{i:03d}", aug, valid)
        manifest.outputs[f"aug_{i:03d}"] = paths


def cmd_render(args, manifest):
    out = _outdir(args)
    spec = _load_scene(args)
    manifest.config.update(_scene_config(args, spec))
    (out / "scene.json").write_text(spec.dumps() + "\n")
    outputs = {"scene": str(out / "scene.json")}
    frames = range(len(spec.frames)) if args.frame is None else [args.frame]
    for i in frames:
        if not 0 <= i < len(spec.frames):
            raise InvalidInputError(f"frame {i} out of range (scene has {len(spec.frames)})")
        r = render(spec, i)
        fdir = out / f"frame_{i:02d}"
        fdir.mkdir(exist_ok=True)
        files = pio.write_decoded(fdir, r.stack, None, r.params)
        pio.write_mosaic(fdir / "mosaic.png", r.mosaic)
        pio.write_depth(fdir / "depth.png", r.depth)
        np.save(fdir / "depth.npy", r.depth)
        np.save(fdir / "specular_mask.npy", r.specular_mask)
        pio.write_rgb(fdir / "hsl.png", polar_to_rgb(r.params))
        files.update(mosaic=str(fdir / "mosaic.png"), depth=str(fdir / "depth.png"),
                     depth_npy=str(fdir / "depth.npy"), hsl=str(fdir / "hsl.png"))
        outputs[f"frame_{i:02d}"] = files
    manifest.outputs.update(outputs)


def parse_init(text):
    """``gt``, ``tilt:<deg>``, ``noise:<sigma>`` or ``scale:<c>`` -> (mode, magnitude)."""
    if text == "gt":
        return "gt", 0.0
    name, _, value = text.partition(":")
    modes = {"tilt": "tilt", "noise": "noise", "scale": "uniform-scale"}
    try:
        return modes[name], float(value)
    except (KeyError, ValueError):
        raise InvalidInputError(f"invalid --init {text!r}; expected gt, tilt:<deg>, noise:<sigma> or scale:<c>") from None


def cmd_optimize(args, manifest):
    out = _outdir(args)
    spec = _load_scene(args)
    try:
        weights = LossWeights.from_dict(pio.read_json(args.weights)) if args.weights else LossWeights()
        cfg_dict = pio.read_json(args.config) if args.config else {}
        if args.max_iters is not None:
            cfg_dict["max_iters"] = args.max_iters
        cfg_dict["threads"] = args.threads
        cfg = OptimizeConfig.from_dict(cfg_dict)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(str(exc)) from None
    mode, magnitude = parse_init(args.init)

    tgt, sources = frame_set(spec)
    if not sources:
        raise InvalidInputError("optimization needs a scene with at least two frames")
    if mode == "gt":
        init = tgt.depth.copy()
    else:
        init = perturb_depth(tgt.depth, mode, magnitude, seed=args.seed, intrinsics=spec.intrinsics)
    problem = LossProblem(tgt.params, tgt.intensity, sources, spec.intrinsics, weights, args.variant)
    depth, trace = optimize_depth(problem, init, cfg, gt=tgt.depth)

    manifest.config.update(_scene_config(args, spec))
    manifest.config.update(weights=weights.to_dict(), optimizer=cfg.to_dict(), variant=args.variant,
                           init=args.init, seed=args.seed)
    pio.write_depth(out / "depth.png", depth)
    np.save(out / "depth.npy", depth)
    np.save(out / "init_depth.npy", init)
    np.save(out / "gt_depth.npy", tgt.depth)
    np.save(out / "dop.npy", tgt.params.dop)
    trace.write_csv(out / "trace.csv")
    pio.write_breakdown(out, problem.evaluate(depth), "loss")
    manifest.outputs.update({
        "depth": str(out / "depth.png"), "depth_npy": str(out / "depth.npy"),
        "init_depth": str(out / "init_depth.npy"), "gt_depth": str(out / "gt_depth.npy"),
        "dop": str(out / "dop.npy"), "trace": str(out / "trace.csv"), "loss": str(out / "loss.json"),
    })
    manifest.config["final"] = trace.final


def _read_depth_any(path):
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    return pio.read_depth(path)


def _read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]} if rows else {}


def cmd_eval(args, manifest):
    out = _outdir(args)
    rows = []
    regions = [r.strip() for r in args.regions.split(",")]
    for r in regions:
        if r not in REGIONS:
            raise InvalidInputError(f"unknown region {r!r}; expected one of {REGIONS}")

    def evaluate(name, pred, gt, dop):
        for region in regions:
            if region == "specular" and dop is None:
                continue
            mask = region_masks(region, gt.shape, dop=dop, dop_threshold=args.dop_threshold, crop=args.crop)
            rows.append((name, region, depth_metrics(pred, gt, mask)))

    if args.pred is not None:
        if args.gt is None:
            raise InvalidInputError("--pred needs --gt")
        dop = np.load(args.dop) if args.dop else None
        evaluate(Path(args.pred).stem, _read_depth_any(args.pred), _read_depth_any(args.gt), dop)
        manifest.inputs.update(pred=str(args.pred), gt=str(args.gt), dop=args.dop)

    sweep = []
    traces = {}
    for run in args.runs or []:
        run = Path(run)
        m = pio.read_json(run / "manifest.json")
        gt = np.load(run / "gt_depth.npy")
        dop = np.load(run / "dop.npy")
        pred = np.load(run / "depth.npy")
        label = run.name
        evaluate(label, pred, gt, dop)
        traces[label] = _read_trace(run / "trace.csv")
        mask = region_masks("specular", gt.shape, dop=dop, dop_threshold=args.dop_threshold)
        spec_rmse = depth_metrics(pred, gt, mask).rmse if mask.any() else float("nan")
        sweep.append((m["config"]["variant"], m["config"]["weights"]["polar_weight"], spec_rmse, label))
        manifest.inputs[label] = str(run)

    if args.pred_labels is not None:
        pred_l, _ = pio.read_labels(args.pred_labels)
        gt_l, _ = pio.read_labels(args.gt_labels)
        seg = seg_metrics(pred_l, gt_l)
        write_seg_csv(out / "segmentation.csv", seg)
        manifest.outputs["segmentation"] = str(out / "segmentation.csv")

    if rows:
        write_depth_csv(out / "metrics.csv", rows)
        manifest.outputs["metrics"] = str(out / "metrics.csv")
    if traces:
        series = {k: (t["iteration"], t["total"]) for k, t in traces.items() if t}
        line_plot(out / "loss_trace.png", series, title="loss per iteration", xlabel="iteration",
                  ylabel="loss", log_y=True)
        manifest.outputs["loss_plot"] = str(out / "loss_trace.png")
    if sweep:
        sweep.sort()
        with open(out / "rmse_vs_polar_weight.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("variant", "polar_weight", "specular_rmse", "run"))
            for variant, weight, rmse, label in sweep:
                writer.writerow((variant, repr(weight), repr(rmse), label))
        series = {}
        for variant in sorted({s[0] for s in sweep}):
            pts = [(g, r) for v, g, r, _ in sweep if v == variant]
            series[variant] = ([p[0] for p in pts], [p[1] for p in pts])
        line_plot(out / "rmse_vs_polar_weight.png", series, title="specular RMSE vs polar weight",
                  xlabel="polar weight", ylabel="RMSE", markers=True)
        manifest.outputs.update(sweep=str(out / "rmse_vs_polar_weight.csv"), sweep_plot=str(out / "rmse_vs_polar_weight.png"))
    if not (rows or traces or "segmentation" in manifest.outputs):
        raise InvalidInputError("nothing to evaluate: pass --pred/--gt, --runs or --pred-labels/--gt-labels")


def build_parser():
    parser = argparse.ArgumentParser(prog="polarcue", description="Polarimetric imaging and depth toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for gradient evaluation")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", parents=[common], help="demosaick a DoFP frame into channels, Stokes and polar parameters")
    p.add_argument("raw", help="8/16-bit PGM or PNG mosaic (layout from <raw>.json if present)")
    p.add_argument("--layout", help="mosaic layout 'tl,tr,bl,br', e.g. 90,45,135,0")
    p.add_argument("--bit-depth", type=int, help="container full scale in bits, e.g. 12")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("hsl", parents=[common], help="encode intensity/AoP/DoP as an RGB image")
    p.add_argument("params", help="directory with intensity.png, aop.png, dop.png")
    p.add_argument("--export", choices=("hsl", "channels"), default="hsl",
                   help="HSL rendered to RGB, or the raw H/S/L channels scaled to 8 bits")
    p.add_argument("--full-scale", type=float, default=2.0, help="intensity mapped to full luminance")
    p.set_defaults(func=cmd_hsl)

    p = sub.add_parser("augment", parents=[common], help="rotate or flip polar parameter images")
    p.add_argument("params", help="directory with intensity.png, aop.png, dop.png")
    p.add_argument("--spec", required=True, help="JSON augmentation spec (object, list, or {'augmentations': [...]})")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--regularized", action="store_true", default=True, help="correct AoP (default)")
    mode.add_argument("--naive", action="store_true", help="plain image transform without AoP correction")
    p.set_defaults(func=cmd_augment)

    def scene_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--scene", help="scene JSON file")
        g.add_argument("--benchmark", default="specular-window",
                       help="built-in scene: flat-lambertian, specular-window, two-plane-roll")

    p = sub.add_parser("render", parents=[common], help="render a synthetic scene")
    scene_args(p)
    p.add_argument("--frame", type=int, help="render only this frame")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("optimize", parents=[common], help="minimize the composite loss over a depth map")
    scene_args(p)
    p.add_argument("--weights", help="JSON loss weights")
    p.add_argument("--config", help="JSON optimizer configuration")
    p.add_argument("--variant", choices=("real", "approx"), default="real")
    p.add_argument("--init", default="tilt:10", help="gt | tilt:<deg> | noise:<sigma> | scale:<c>")
    p.add_argument("--max-iters", type=int, help="override the configured iteration count")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", parents=[common], help="depth/segmentation metrics, loss and sweep plots")
    p.add_argument("--pred", help="predicted depth (.npy or 16-bit PNG)")
    p.add_argument("--gt", help="ground-truth depth (.npy or 16-bit PNG)")
    p.add_argument("--dop", help="DoP map (.npy) defining the specular region")
    p.add_argument("--runs", nargs="*", help="optimize output directories")
    p.add_argument("--regions", default="raw,cropped,specular")
    p.add_argument("--crop", type=float, default=0.15)
    p.add_argument("--dop-threshold", type=float, default=0.4)
    p.add_argument("--pred-labels", help="8-bit predicted label map (legend in <file>.json)")
    p.add_argument("--gt-labels", help="8-bit ground-truth label map")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(args.command, config)
    try:
        args.func(args, manifest)
    except NonFiniteLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (InvalidInputError, InvalidLayoutError, UnsupportedAugmentation, MetricError, KeyError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest.write(args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
