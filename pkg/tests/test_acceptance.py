"""
Acceptance checks. Each test records one pass/fail line that is printed in
the pytest terminal summary.
"""
import hashlib
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from polarcue.cli import EXIT_OK, main
from polarcue.depthloss import (
    TERMS,
    LossProblem,
    LossWeights,
    Pose,
    angular_error,
    dense_gradient,
    loss_gradient,
    photometric_error,
    polar_maps,
    reprojection_loss,
    smoothness_loss,
    ssim,
)
from polarcue.depthloss.geometry import CameraIntrinsics, efield_map, normal_map, project_angle_map, view_rays
from polarcue.metrics import depth_metrics
from polarcue.optimize import OptimizeConfig, optimize_depth
from polarcue.polaraug import AugmentSpec, augment_naive, augment_regularized
from polarcue.polarimage import DofpRaw, PolarParams, demosaick, polar_params, stokes, synthesize
from polarcue.synthscene import (
    benchmark_scene,
    benchmark_suite,
    frame_set,
    interior_mask,
    perturb_depth,
    render,
    tilt_plane,
)

from test_polarimage import oracle_demosaick

SEEDS = range(5)
TILT_DEG = 10.0
EXPERIMENT_CFG = OptimizeConfig()
WINDOW = 0  # plane index of the specular window in "specular-window"


def angle_diff(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), np.pi)
    return np.minimum(d, np.pi - d)


def test_c01_stokes_round_trip(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 10_000
    i = rng.uniform(1e-3, 2.0, n)
    a = rng.uniform(0, np.pi, n)
    r = rng.uniform(0.01, 1.0, n)
    p = polar_params(stokes(synthesize(PolarParams(i, a, r))))
    exact_i = bool(np.array_equal(p.intensity, i))
    err_r = float(np.abs(p.dop - r).max())
    err_a = float(angle_diff(p.aop, a).max())
    dt = time.perf_counter() - t
    ok = exact_i and err_r <= 1e-12 and err_a <= 1e-12 and dt < 5
    criterion(1, "Stokes round trip", ok,
              f"intensity exact={exact_i}, max dop err={err_r:.2e}, max aop err={err_a:.2e}", dt)
    assert ok


def test_c02_demosaick_oracle(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, carried_exact = 0.0, True
    for _ in range(10):
        values = rng.uniform(0, 1, (32, 32))
        raw = DofpRaw(values)
        stack = demosaick(raw)
        ref = oracle_demosaick(values, raw.layout)
        for o in (0, 45, 90, 135):
            chan = stack.channel(o)
            rr, cc = raw.offset(o)
            carried_exact &= bool(np.array_equal(chan[rr::2, cc::2], values[rr::2, cc::2]))
            worst = max(worst, float(np.abs(chan - ref[o]).max()))
    dt = time.perf_counter() - t
    ok = carried_exact and worst <= 1e-12 and dt < 5
    criterion(2, "demosaick oracle", ok, f"carried samples exact={carried_exact}, max err={worst:.2e}", dt)
    assert ok


def test_c03_augmentation_physics(criterion):
    t = time.perf_counter()
    theta = np.deg2rad(15.0)
    spec = benchmark_scene("two-plane-roll", 0)
    base = render(spec, 0)
    # frame 1 of this scene is the camera rolled so that image content turns by +theta
    rolled = render(spec, 1)
    aug = AugmentSpec("rotation", float(theta), "bilinear")
    reg, valid = augment_regularized(base.params, aug)
    naive, _ = augment_naive(base.params, aug)
    inside = valid & interior_mask(rolled, 2)
    reg_err = float(np.median(angle_diff(reg.aop, rolled.params.aop)[inside]))
    naive_err = float(np.median(angle_diff(naive.aop, rolled.params.aop)[inside]))
    dt = time.perf_counter() - t
    ok = reg_err < 0.02 and abs(naive_err - theta) < 0.02 and dt < 30
    criterion(3, "augmentation physics", ok,
              f"median |d aop| regularized={reg_err:.4f} rad, naive={naive_err:.4f} rad "
              f"(15 deg = {theta:.4f}), {inside.sum()} px", dt)
    assert ok


def test_c04_efield_consistency(criterion):
    t = time.perf_counter()
    spec = benchmark_scene("specular-window", 0)
    r = render(spec)
    k = spec.intrinsics
    # pixels whose normal stencil and neighborhood stay on the window plane
    mask = interior_mask(r, 1) & r.specular_mask
    normals, n_ok = normal_map(r.depth, k)
    e, e_ok = efield_map(normals, view_rays(r.depth.shape, k))
    angle, a_ok = project_angle_map(e, r.depth, k)
    ok_px = n_ok & e_ok & a_ok & mask
    frac = float(np.mean((angle_diff(angle, r.params.aop) < 1e-6)[mask] & ok_px[mask]))
    pmap, contributing = polar_maps(r.depth, r.params, k)
    sel = contributing & mask
    gt_lp = float(pmap[sel].mean())
    tilted = render(tilt_plane(spec, WINDOW, TILT_DEG, axis=(1.0, 0.0, 0.0)))
    tmap, tcontrib = polar_maps(tilted.depth, r.params, k)
    tsel = tcontrib & mask
    tilt_lp = float(tmap[tsel].mean())
    dt = time.perf_counter() - t
    ok = frac >= 0.99 and gt_lp < 1e-6 and tilt_lp >= 10 * gt_lp and dt < 30
    criterion(4, "E-field consistency", ok,
              f"{frac:.4f} of {mask.sum()} interior specular px within 1e-6 rad, "
              f"mean L_p gt={gt_lp:.2e}, tilted={tilt_lp:.3f}", dt)
    assert ok


def test_c05_gradient_correctness(criterion):
    t = time.perf_counter()
    spec = benchmark_scene("specular-window", 0, size=8)
    tgt, sources = frame_set(spec)
    depth = tgt.depth * (1 + 0.03 * np.random.default_rng(0).standard_normal(tgt.depth.shape))
    fractions = {}
    for variant in ("real", "approx"):
        problem = LossProblem(tgt.params, tgt.intensity, sources, spec.intrinsics, LossWeights(), variant)
        fast = loss_gradient(problem, depth, terms=TERMS)
        slow = dense_gradient(problem, depth)
        pairs = [(f"{variant}:{term}", fast.terms[term], slow.terms[term]) for term in TERMS]
        pairs.append((f"{variant}:total", fast.total, slow.total))
        for name, a, b in pairs:
            rel = np.abs(a - b) / np.maximum(np.abs(b), 1e-8)
            fractions[name] = float(np.mean(rel < 1e-4))
    dt = time.perf_counter() - t
    ok = min(fractions.values()) >= 0.95 and dt < 60
    criterion(5, "gradient correctness", ok,
              "fraction within 1e-4: " + ", ".join(f"{k}={v:.3f}" for k, v in fractions.items()), dt)
    assert ok


@lru_cache(maxsize=None)
def paired_run(scene, seed, variant, polar_weight):
    """Final specular RMSE and the loss trace for one optimization from the tilted start."""
    t = time.perf_counter()
    spec = benchmark_scene(scene, seed)
    tgt, sources = frame_set(spec)
    init = perturb_depth(tgt.depth, "tilt", TILT_DEG, seed=seed, intrinsics=spec.intrinsics)
    problem = LossProblem(tgt.params, tgt.intensity, sources, spec.intrinsics,
                          LossWeights(polar_weight=polar_weight), variant)
    depth, trace = optimize_depth(problem, init, EXPERIMENT_CFG, gt=tgt.depth, region=tgt.specular_mask)
    rmse = depth_metrics(depth, tgt.depth, tgt.specular_mask).rmse
    return rmse, tuple(trace.column("total")), int(trace.final["iteration"]), time.perf_counter() - t


def test_c06_polar_term_benefit(criterion):
    off, trace_off, n_off, t_off = paired_run("specular-window", 0, "real", 0.0)
    on, trace_on, n_on, t_on = paired_run("specular-window", 0, "real", 0.1)
    monotone = all(np.all(np.diff(tr) <= 0) for tr in (trace_off, trace_on))
    dt = t_off + t_on
    ok = on < off and monotone and dt < 300
    criterion(6, "polar term benefit", ok,
              f"specular RMSE polar weight 0.1: {on:.4f} ({n_on} it) vs 0: {off:.4f} ({n_off} it), "
              f"margin {off - on:.4f}, monotone traces={monotone}", dt)
    assert ok


SPECULAR_SCENES = [s.name for s in benchmark_suite() if render(s).specular_mask.any()]


def test_c07_real_vs_approx(criterion):
    diffs, lines, dt = [], [], 0.0
    for scene in SPECULAR_SCENES:
        for seed in SEEDS:
            real, *_, t_r = paired_run(scene, seed, "real", 0.1)
            approx, *_, t_a = paired_run(scene, seed, "approx", 0.1)
            dt += t_r + t_a
            diffs.append(real - approx)
            flag = "" if real < approx else "  <- violation"
            lines.append(f"    {scene} seed {seed}: real {real:.4f} approx {approx:.4f}{flag}")
    print("\n".join(lines))
    per_scene = {s: float(np.median(diffs[i * len(SEEDS):(i + 1) * len(SEEDS)]))
                 for i, s in enumerate(SPECULAR_SCENES)}
    median = float(np.median(diffs))
    violations = sum(d >= 0 for d in diffs)
    ok = median <= 0 and dt < 900
    criterion(7, "real vs approx ordering", ok,
              f"median paired (real - approx) specular RMSE over {len(diffs)} runs = {median:+.4f}; "
              f"per scene {', '.join(f'{k} {v:+.4f}' for k, v in per_scene.items())}; "
              f"{violations} per-seed violations", dt)
    assert ok


def test_c08_metric_identities(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    gt = rng.uniform(1, 50, (64, 64))
    pred = gt * rng.uniform(0.6, 1.6, gt.shape)
    same = depth_metrics(gt, gt)
    checks = [same.abs_rel == same.sq_rel == same.rmse == same.rmse_log == 0,
              same.delta1 == same.delta2 == same.delta3 == 1.0]
    scaled = depth_metrics(1.2 * gt, gt)
    checks += [abs(scaled.abs_rel - 0.2) <= 1e-12, abs(scaled.rmse_log - math.log(1.2)) <= 1e-12,
               scaled.delta1 == 1.0]
    base = depth_metrics(pred, gt)
    for c in (0.5, 3.0, 10.0):
        m = depth_metrics(c * pred, c * gt)
        checks += [abs(getattr(m, f) - getattr(base, f)) <= 1e-12
                   for f in ("abs_rel", "rmse_log", "delta1", "delta2", "delta3")]
        # sq_rel carries one power of depth, so its relative value is invariant
        checks.append(abs(m.sq_rel / c - base.sq_rel) <= 1e-12 * base.sq_rel)
        checks.append(abs(m.rmse - c * base.rmse) <= 1e-12 * c * base.rmse)
    dt = time.perf_counter() - t
    ok = all(checks) and dt < 1
    criterion(8, "metric identities", ok, f"{sum(checks)}/{len(checks)} identities hold", dt)
    assert ok


def test_c09_loss_analytic_cases(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(9)
    img = rng.uniform(0.1, 0.9, (24, 24))
    k = CameraIntrinsics.centered(24, 24, 24)
    ramp = 0.2 + 0.01 * np.arange(24)[None, :] + 0.005 * np.arange(24)[:, None]
    rep, _, _ = reprojection_loss(img, [(img, Pose.identity())], np.full((24, 24), 2.0), k)
    checks = {
        "ssim(I,I)=1": float(np.abs(ssim(img, img) - 1).max()) <= 1e-12,
        "pe(I,I)=0": float(np.abs(photometric_error(img, img)).max()) <= 1e-12,
        "L_s const=0": smoothness_loss(np.full((24, 24), 4.0), img)[0] == 0,
        "L_s ramp=0": smoothness_loss(1 / ramp, img)[0] <= 1e-12,
        "L_r identity=0": rep == 0,
        "A(e,e)=0": angular_error(1.1, 1.1) == 0,
        "A(pi/4)=1": abs(angular_error(np.pi / 4, 0.0) - 1) <= 1e-12,
        "A(pi/2)=clamp": angular_error(np.pi / 2, 0.0) == LossWeights().max_angular_error,
    }
    dt = time.perf_counter() - t
    ok = all(checks.values()) and dt < 5
    criterion(9, "loss analytic cases", ok, ", ".join(f"{k}:{'ok' if v else 'NO'}" for k, v in checks.items()), dt)
    assert ok


def _digest(root):
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file() and p.name != "manifest.json"):
        h.update(str(path.relative_to(root)).encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def test_c10_determinism(criterion, tmp_path):
    t = time.perf_counter()
    mismatches = []
    for spec in benchmark_suite():
        for cmd, extra in (("render", []), ("optimize", ["--max-iters", "40"])):
            digests = []
            for run, threads in (("a", 1), ("b", 1), ("c", 4)):
                out = tmp_path / f"{spec.name}-{cmd}-{run}"
                code = main([cmd, "--benchmark", spec.name, "--threads", str(threads), "--out", str(out), *extra])
                assert code == EXIT_OK
                digests.append(_digest(out))
            if len(set(digests)) != 1:
                mismatches.append(f"{spec.name}/{cmd}")
    dt = time.perf_counter() - t
    ok = not mismatches and dt < 600
    criterion(10, "determinism", ok,
              "render and optimize outputs identical across reruns and 1/4 threads"
              if not mismatches else f"mismatch in {mismatches}", dt)
    assert ok
