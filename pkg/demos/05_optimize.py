"""Recover depth from a tilted start, with and without the polarimetric term."""
import sys

from polarcue.depthloss import LossProblem, LossWeights
from polarcue.metrics import depth_metrics
from polarcue.optimize import OptimizeConfig, optimize_depth
from polarcue.synthscene import benchmark_scene, frame_set, perturb_depth

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 150
scene = benchmark_scene("specular-window")
target, sources = frame_set(scene)
init = perturb_depth(target.depth, "tilt", 10, intrinsics=scene.intrinsics)
spec = target.specular_mask
print(f"start: specular RMSE {depth_metrics(init, target.depth, spec).rmse:.4f}")
for weight in (0.0, 0.1):
    problem = LossProblem(target.params, target.intensity, sources, scene.intrinsics,
                          LossWeights(polar_weight=weight), "real")
    depth, trace = optimize_depth(problem, init, OptimizeConfig(max_iters=iters), gt=target.depth, region=spec)
    print(f"polar weight {weight}: {trace.final['iteration']} steps, loss {trace.rows[0]['total']:.4f}"
          f" -> {trace.final['total']:.4f}, specular RMSE {depth_metrics(depth, target.depth, spec).rmse:.4f}")
