"""Depth and segmentation metrics with the raw, cropped and specular regions."""
import numpy as np

from polarcue.metrics import CLASSES, depth_metrics, region_masks, seg_metrics

rng = np.random.default_rng(0)
gt = rng.uniform(2, 20, (40, 40))
pred = gt * rng.uniform(0.85, 1.2, gt.shape)
dop = np.zeros_like(gt)
dop[10:25, 10:25] = 0.7
for kind in ("raw", "cropped", "specular"):
    m = depth_metrics(pred, gt, region_masks(kind, gt.shape, dop))
    print(f"{kind:9s} abs_rel {m.abs_rel:.4f} rmse {m.rmse:.4f} delta1 {m.delta1:.3f}")

labels = rng.integers(0, len(CLASSES), (40, 40))
noisy = np.where(rng.uniform(size=labels.shape) < 0.2, rng.integers(0, len(CLASSES), labels.shape), labels)
s = seg_metrics(noisy, labels)
print("mean IoU", round(s.mean_iou, 3), "| mean IoU without building", round(s.mean_iou_no_building, 3))
