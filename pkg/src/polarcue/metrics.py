"""
Depth and segmentation metrics.

Depth metrics use the usual monocular-depth definitions. The delta accuracies
count pixels whose ratio ``max(pred/gt, gt/pred)`` is strictly below
``1.25 ** k``.

Segmentation "accuracy" is per-class: correct pixels of a class divided by
the ground-truth pixels of that class, which makes it numerically equal to
recall. Both are reported.
"""
import csv
from dataclasses import asdict, dataclass

import numpy as np

DELTA_BASE = 1.25
CLASSES = ("sky", "water", "windows", "road", "cars", "building", "none")
REGIONS = ("raw", "cropped", "specular")
DEFAULT_CROP = 0.15


class MetricError(ValueError):
    """Metric undefined for the given inputs (empty mask, non-positive depth)."""


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float

    def to_dict(self):
        return asdict(self)


DEPTH_COLUMNS = tuple(DepthMetrics.__dataclass_fields__)


def depth_metrics(pred, gt, mask=None):
    """
    Depth errors and accuracies over ``mask``.

    Parameters
    ----------
    pred, gt : (H, W) arrays
    mask : (H, W) bool array, optional
        Defaults to every pixel.

    Raises
    ------
    MetricError
        If the mask is empty, or pred/gt is not strictly positive on it.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise MetricError(f"shape mismatch {pred.shape} vs {gt.shape}")
    mask = np.ones(gt.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MetricError("empty evaluation mask")
    p, g = pred[mask], gt[mask]
    if not np.all(g > 0):
        raise MetricError("ground truth must be positive on the mask")
    if not np.all(p > 0):
        raise MetricError("prediction must be positive on the mask")
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff ** 2 / g)),
        rmse=float(np.sqrt(np.mean(diff ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < DELTA_BASE)),
        delta2=float(np.mean(ratio < DELTA_BASE ** 2)),
        delta3=float(np.mean(ratio < DELTA_BASE ** 3)),
    )


def region_masks(kind, shape, dop=None, dop_threshold=0.4, crop=DEFAULT_CROP, valid=None):
    """
    Evaluation region.

    ``raw`` is every valid pixel, ``cropped`` drops a border band of
    ``floor(crop * size)`` pixels on each side, ``specular`` keeps pixels
    with DoP above the threshold.

    ``crop`` is a fraction or a (vertical, horizontal) pair of fractions.
    """
    h, w = shape
    raw = np.ones((h, w), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if kind == "raw":
        return raw
    if kind == "cropped":
        cv, ch = (crop, crop) if np.isscalar(crop) else crop
        if not (0 <= cv < 0.5 and 0 <= ch < 0.5):
            raise ValueError("crop fractions must lie in [0, 0.5)")
        bv, bh = int(np.floor(cv * h)), int(np.floor(ch * w))
        out = np.zeros((h, w), dtype=bool)
        out[bv:h - bv, bh:w - bh] = True
        return out & raw
    if kind == "specular":
        if dop is None:
            raise ValueError("specular region needs a DoP map")
        return raw & (np.asarray(dop) > dop_threshold)
    raise ValueError(f"unknown region kind {kind!r}; expected one of {REGIONS}")


@dataclass(frozen=True)
class SegMetrics:
    """Per-class values are NaN for classes absent from both maps."""

    accuracy: dict
    iou: dict
    recall: dict
    mean_accuracy: float
    mean_iou: float
    mean_recall: float
    mean_accuracy_no_building: float
    mean_iou_no_building: float
    mean_recall_no_building: float


def _nanmean(values):
    vals = [v for v in values if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def seg_metrics(pred, gt, classes=CLASSES, exclude="building"):
    """
    Per-class accuracy, IoU and recall for integer label maps.

    Labels index into ``classes``. A class present in the prediction but not
    in the ground truth has IoU 0 and undefined (NaN) recall/accuracy.
    """
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    if pred.shape != gt.shape:
        raise MetricError("label maps must have the same shape")
    acc, iou, rec = {}, {}, {}
    for c, name in enumerate(classes):
        p, g = pred == c, gt == c
        tp = int(np.sum(p & g))
        fp = int(np.sum(p & ~g))
        fn = int(np.sum(~p & g))
        union = tp + fp + fn
        iou[name] = tp / union if union else float("nan")
        rec[name] = tp / (tp + fn) if tp + fn else float("nan")
        acc[name] = rec[name]
    keep = [n for n in classes if n != exclude]
    return SegMetrics(
        accuracy=acc, iou=iou, recall=rec,
        mean_accuracy=_nanmean(acc.values()),
        mean_iou=_nanmean(iou.values()),
        mean_recall=_nanmean(rec.values()),
        mean_accuracy_no_building=_nanmean(acc[n] for n in keep),
        mean_iou_no_building=_nanmean(iou[n] for n in keep),
        mean_recall_no_building=_nanmean(rec[n] for n in keep),
    )


def write_depth_csv(path, rows):
    """``rows``: iterable of (prediction name, region, DepthMetrics)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("prediction", "region") + DEPTH_COLUMNS)
        for name, region, m in rows:
            writer.writerow([name, region] + [repr(getattr(m, c)) for c in DEPTH_COLUMNS])


def write_seg_csv(path, metrics, classes=CLASSES):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("class", "accuracy", "iou", "recall"))
        for name in classes:
            writer.writerow([name, repr(metrics.accuracy[name]), repr(metrics.iou[name]),
                             repr(metrics.recall[name])])
        writer.writerow(["mean", repr(metrics.mean_accuracy), repr(metrics.mean_iou),
                         repr(metrics.mean_recall)])
        writer.writerow(["mean_no_building", repr(metrics.mean_accuracy_no_building),
                         repr(metrics.mean_iou_no_building), repr(metrics.mean_recall_no_building)])
