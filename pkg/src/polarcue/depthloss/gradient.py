"""
Locality-aware central finite differences of the composite loss.

Each per-pixel term map at pixel q depends on depth only within the 3x3
neighborhood of q (normal stencil, 3x3 SSIM window, second differences). A
perturbation of pixel p therefore changes the maps only inside the 3x3 block
around p, and pixels on a stride-3 lattice have disjoint blocks. All pixels
of one lattice offset are perturbed together, the map change inside each
block is attributed to its center, and each term is re-aggregated exactly as
if that pixel had been perturbed alone. Nine lattice offsets times two signs
give the full gradient field in 18 map evaluations.

The only non-local dependency, the mean disparity of the smoothness term, is
updated analytically per pixel.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .losses import TERMS

REL_STEP = 1e-4
STRIDE = 3


@dataclass
class LossGradient:
    """dLoss/dDepth for the weighted total and for each unweighted term.

    ``kink`` marks pixels where perturbing the depth either way raises the
    weighted total: the pixel sits at a coordinate-wise minimum (typically a
    kink of an absolute value), so the central difference there is not a
    descent slope.
    """

    total: np.ndarray
    terms: dict
    kink: np.ndarray = None


def block_sum(x):
    """Sum over the 3x3 block centered at every pixel (zero outside the frame)."""
    h, w = x.shape
    p = np.pad(x, 1)
    acc = np.zeros((h, w))
    for dr in range(3):
        for dc in range(3):
            acc += p[dr:dr + h, dc:dc + w]
    return acc


def loss_gradient(problem, depth, rel_step=REL_STEP, threads=1, terms=None):
    """
    Gradient of ``problem``'s loss with respect to every depth pixel.

    Parameters
    ----------
    problem : LossProblem
    depth : (H, W) array
    rel_step : float
        Central-difference step relative to the pixel depth.
    threads : int
        Lattice offsets are evaluated concurrently; the result does not depend
        on the thread count.
    terms : tuple of str, optional
        Terms to differentiate. Defaults to the terms with non-zero weight;
        pass ``TERMS`` to get every per-term gradient.

    Returns
    -------
    LossGradient
    """
    depth = np.asarray(depth, dtype=float)
    terms = tuple(problem.active_terms() if terms is None else terms)
    step = rel_step * depth
    base = problem.maps(depth, terms)
    sums0 = {t: (base.num[t].sum(), base.cnt[t].sum()) for t in terms}
    inv0 = 1.0 / depth
    h, w = depth.shape

    def run(offset):
        a, b = offset
        sel = np.zeros((h, w), dtype=bool)
        sel[a::STRIDE, b::STRIDE] = True
        values = {}
        for sign in (1.0, -1.0):
            d = np.where(sel, depth + sign * step, depth)
            m = problem.maps(d, terms)
            disp_sum = base.disparity_sum + (1.0 / d - inv0)[sel]
            for t in terms:
                dnum = block_sum(m.num[t] - base.num[t])[sel]
                dcnt = block_sum(m.cnt[t] - base.cnt[t])[sel]
                s0, c0 = sums0[t]
                values[t, sign] = problem.term_value(t, s0 + dnum, c0 + dcnt, disp_sum)
        return sel, values

    offsets = [(a, b) for a in range(STRIDE) for b in range(STRIDE)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, offsets))
    else:
        results = [run(o) for o in offsets]

    grads = {t: np.zeros((h, w)) for t in terms}
    total = np.zeros((h, w))
    kink = np.zeros((h, w), dtype=bool)
    weights = problem.weights
    base_total = sum(weights.term_weight(t) * problem.term_value(t, *sums0[t], base.disparity_sum)
                     for t in terms)
    for sel, values in results:
        denom = 2 * step[sel]
        plus = sum(weights.term_weight(t) * values[t, 1.0] for t in terms)
        minus = sum(weights.term_weight(t) * values[t, -1.0] for t in terms)
        if terms:
            total[sel] = (plus - minus) / denom
            kink[sel] = (plus > base_total) & (minus > base_total)
        for t in terms:
            grads[t][sel] = (values[t, 1.0] - values[t, -1.0]) / denom
    return LossGradient(total, grads, kink)


def dense_gradient(problem, depth, rel_step=REL_STEP, terms=TERMS):
    """
    Reference gradient: perturb one pixel at a time and re-evaluate the whole loss.

    O(H * W) full evaluations; meant for small maps and for checking
    ``loss_gradient``.
    """
    depth = np.asarray(depth, dtype=float)
    h, w = depth.shape
    grads = {t: np.zeros((h, w)) for t in terms}
    total = np.zeros((h, w))
    weights = problem.weights
    for r in range(h):
        for c in range(w):
            step = rel_step * depth[r, c]
            out = []
            for sign in (1.0, -1.0):
                d = depth.copy()
                d[r, c] += sign * step
                out.append(problem.values(problem.maps(d, terms)))
            for t in terms:
                grads[t][r, c] = (out[0][t] - out[1][t]) / (2 * step)
            total[r, c] = sum(weights.term_weight(t) * (out[0][t] - out[1][t]) for t in terms) / (2 * step)
    return LossGradient(total, grads)
