import numpy as np
import pytest

from polarcue.depthloss import TERMS, LossProblem, LossWeights, dense_gradient, loss_gradient
from polarcue.depthloss.gradient import block_sum
from polarcue.synthscene import benchmark_scene, frame_set


def small_problem(variant="real", size=8, scale=1.07):
    spec = benchmark_scene("specular-window", 0, size=size)
    tgt, sources = frame_set(spec)
    problem = LossProblem(tgt.params, tgt.intensity, sources, spec.intrinsics, LossWeights(), variant)
    rng = np.random.default_rng(2)
    depth = tgt.depth * scale * (1 + 0.02 * rng.standard_normal(tgt.depth.shape))
    return problem, depth


def agreement(a, b):
    rel = np.abs(a - b) / np.maximum(np.abs(b), 1e-8)
    return np.mean(rel < 1e-4)


@pytest.mark.parametrize("variant", ["real", "approx"])
def test_matches_dense_oracle(variant):
    problem, depth = small_problem(variant)
    fast = loss_gradient(problem, depth, terms=TERMS)
    slow = dense_gradient(problem, depth)
    for t in TERMS:
        assert agreement(fast.terms[t], slow.terms[t]) >= 0.95, t
    assert agreement(fast.total, slow.total) >= 0.95


def test_total_combines_term_gradients():
    problem, depth = small_problem()
    g = loss_gradient(problem, depth, terms=TERMS)
    w = problem.weights
    combo = sum(w.term_weight(t) * g.terms[t] for t in TERMS)
    np.testing.assert_allclose(g.total, combo, rtol=1e-9, atol=1e-12)


def test_smoothness_gradient_zero_on_constant_depth():
    problem, _ = small_problem()
    depth = np.full(problem.shape, 3.0)
    g = loss_gradient(problem, depth, terms=("smoothness",)).terms["smoothness"]
    # every stencil sits on the |.| kink; central differences cancel the two
    # one-sided slopes up to O(step), far below the slopes themselves
    bumped = depth.copy()
    bumped[3, 3] *= 1.001
    one_sided = (problem.values(problem.maps(bumped, ("smoothness",)))["smoothness"]) / (0.001 * 3.0)
    assert np.abs(g).max() < 1e-3 * one_sided


def test_polar_gradient_zero_away_from_specular_pixels():
    problem, depth = small_problem(size=16)
    g = loss_gradient(problem, depth, terms=("polar",)).terms["polar"]
    touched = block_sum(problem.evaluate(depth).polar_valid.astype(float)) > 0
    assert not g[~touched].any()
    assert g[touched].any()


def test_thread_count_does_not_change_result():
    problem, depth = small_problem(size=16)
    a = loss_gradient(problem, depth, threads=1).total
    b = loss_gradient(problem, depth, threads=4).total
    assert np.array_equal(a, b)


def test_block_sum():
    x = np.zeros((5, 5))
    x[0, 0] = 1
    out = block_sum(x)
    assert out[0, 0] == out[1, 1] == 1 and out[2, 2] == 0 and out.sum() == 4
