"""
Direct minimization of the composite loss over a depth map.

Descent runs on log-depth, so depth stays positive without projection.

The raw gradient is concentrated on a few pixels near region boundaries (a
uniform error on a plane only shows up where the plane ends), so each step
first smooths it with the inverse of ``I - smoothing * Laplacian`` under
Neumann boundaries, applied in the DCT domain. The direction is then scaled
to unit max-norm, which makes ``step_size`` the largest per-pixel change of
log-depth in one step and keeps single stiff pixels from spiking.

A momentum step that would increase the loss is rejected, the step is
halved and the momentum reset. When backtracking runs out on the smoothed
direction the raw gradient is tried once with a fresh step. If that fails
and some pixels sit on a kink of the loss (both small perturbations raise
it, as happens at the corners of the absolute-value terms), the smoothed
gradient with those pixels zeroed is tried last. Descent stops only when
all of these fail. The accepted loss sequence never increases.
"""
import csv
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.fft import dctn, idctn

from .depthloss.gradient import loss_gradient


class NonFiniteLossError(FloatingPointError):
    """The loss is not finite at the initial depth map."""

    def __init__(self, terms):
        self.terms = list(terms)
        super().__init__(f"non-finite loss term(s) at initialization: {', '.join(self.terms)}")


@dataclass(frozen=True)
class OptimizeConfig:
    max_iters: int = 500
    step_size: float = 0.01
    momentum: float = 0.8
    backtrack: float = 0.5
    growth: float = 1.1
    tolerance: float = 1e-6
    log_every: int = 1
    max_backtracks: int = 20
    smoothing: float = 100.0
    clip_quantile: float = 0.0
    kink_fallback: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.step_size <= 0 or self.tolerance <= 0 or self.log_every < 1:
            raise ValueError("step_size, tolerance and log_every must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.smoothing < 0:
            raise ValueError("smoothing must be >= 0")
        if not 0 <= self.clip_quantile < 1:
            raise ValueError("clip_quantile must lie in [0, 1)")
        if self.growth < 1:
            raise ValueError("growth factor must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


TRACE_FIELDS = ("iteration", "total", "reprojection", "smoothness", "polar", "step_size",
                "rmse", "specular_rmse")


@dataclass
class OptimizeTrace:
    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    @property
    def final(self):
        return self.rows[-1]


def _rmse(a, b, mask=None):
    diff = (a - b) if mask is None else (a - b)[mask]
    return float(np.sqrt(np.mean(diff ** 2))) if diff.size else float("nan")


def smooth_gradient(grad, strength):
    """Solve ``(I - strength * Laplacian) x = grad`` with Neumann boundaries."""
    if strength == 0:
        return grad
    h, w = grad.shape
    ky = 2 - 2 * np.cos(np.pi * np.arange(h) / h)
    kx = 2 - 2 * np.cos(np.pi * np.arange(w) / w)
    coef = dctn(grad, norm="ortho") / (1 + strength * (ky[:, None] + kx[None, :]))
    return idctn(coef, norm="ortho")


def _smoothed(grad, cfg):
    if cfg.clip_quantile:
        q = np.quantile(np.abs(grad), cfg.clip_quantile)
        grad = np.clip(grad, -q, q)
    return smooth_gradient(grad, cfg.smoothing)


def _unit(d):
    m = np.abs(d).max()
    return d / m if m > 0 else None


def optimize_depth(problem, init, cfg=None, gt=None, region=None):
    """
    Minimize ``problem``'s loss starting from ``init``.

    Parameters
    ----------
    problem : LossProblem
    init : (H, W) array of positive depths
    cfg : OptimizeConfig
    gt : (H, W) array, optional
        Ground-truth depth, only used to log RMSE.
    region : (H, W) bool array, optional
        Region for the additional ``specular_rmse`` column (defaults to the
        problem's specular mask).

    Returns
    -------
    depth : (H, W) array
    trace : OptimizeTrace
    """
    cfg = cfg or OptimizeConfig()
    depth = np.asarray(init, dtype=float).copy()
    if depth.shape != problem.shape or not np.all(np.isfinite(depth)) or depth.min() <= 0:
        raise ValueError("initial depth must be finite, positive and match the problem shape")
    if region is None:
        region = np.asarray(problem.params.dop) > problem.weights.dop_threshold

    breakdown = problem.evaluate(depth)
    if breakdown.nonfinite_terms():
        raise NonFiniteLossError(breakdown.nonfinite_terms())
    loss = problem.total(depth)
    trace = OptimizeTrace()

    def log(it, step, bd=None):
        bd = bd or problem.evaluate(depth)
        trace.rows.append({
            "iteration": it,
            "total": loss,
            "reprojection": bd.reprojection,
            "smoothness": bd.smoothness,
            "polar": bd.polar,
            "step_size": step,
            "rmse": _rmse(depth, gt) if gt is not None else float("nan"),
            "specular_rmse": _rmse(depth, gt, region) if gt is not None else float("nan"),
        })

    step = cfg.step_size
    log(0, step, breakdown)
    logx = np.log(depth)
    velocity = np.zeros_like(depth)
    history = [loss]
    done = 0
    for it in range(1, cfg.max_iters + 1):
        g = loss_gradient(problem, depth, threads=cfg.threads)
        grad = g.total * depth
        if not np.any(grad):
            break
        fresh = np.zeros_like(depth)
        candidates = [(grad, step, velocity), (grad, cfg.step_size, fresh)]
        if cfg.kink_fallback and g.kink.any():
            flat = np.where(g.kink, 0.0, grad)
            candidates += [(flat, cfg.step_size, fresh)]
        accepted = False
        for k, (gk, trial_step, trial_mom) in enumerate(candidates):
            direction = _unit(gk if k == 1 else _smoothed(gk, cfg))
            if direction is None:
                continue
            for _ in range(cfg.max_backtracks):
                trial_velocity = cfg.momentum * trial_mom - trial_step * direction
                trial = np.exp(logx + trial_velocity)
                trial_loss = problem.total(trial)
                if np.isfinite(trial_loss) and trial_loss <= loss:
                    accepted = True
                    break
                trial_step *= cfg.backtrack
                trial_mom = np.zeros_like(depth)
            if accepted:
                break
        if not accepted:
            break
        logx = logx + trial_velocity
        velocity = trial_velocity
        depth, loss = trial, trial_loss
        done = it
        step = min(trial_step * cfg.growth, cfg.step_size)
        if it % cfg.log_every == 0:
            log(it, step)
            history.append(loss)
            if len(history) > 10:
                past = history[-11]
                if past - loss <= cfg.tolerance * max(abs(past), 1e-300):
                    break
    if trace.rows[-1]["iteration"] != done:
        log(done, step)
    return depth, trace
