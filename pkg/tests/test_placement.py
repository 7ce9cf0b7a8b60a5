import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freemask.placement import (
    GridSpec,
    LossWeights,
    PlacementParams,
    balance_from_norms,
    balance_weights,
    box_iou,
    features,
    finite_diff_grad,
    heatmap_loss,
    optimize_placement,
    plausibility,
    render_heatmap,
    semantic_loss,
    spatial_loss,
    total_loss,
)

P = PlacementParams
coord = st.floats(0.05, 0.95)
size = st.floats(0.05, 0.9)
placements = st.builds(PlacementParams, coord, coord, size, size)


class TestBoxIoU:
    def test_identity(self):
        p = P(0.4, 0.6, 0.2, 0.3)
        assert box_iou(p, p) == pytest.approx(1.0)

    def test_disjoint(self):
        assert box_iou(P(0.25, 0.5, 0.5, 0.5), P(0.75, 0.5, 0.5, 0.5)) == 0.0

    def test_half_shift(self):
        # overlap 0.5 * 1, union 1 + 1 - 0.5
        assert box_iou(P(0.5, 0.5, 1, 1), P(1.0, 0.5, 1, 1)) == pytest.approx(1 / 3)

    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            P(0.5, 0.5, 0.0, 0.2)


class TestSpatialLoss:
    W = LossWeights(lambda_iou=0.5, lambda_center=0.7, lambda_ar=0.3)

    def test_zero_at_truth(self):
        p = P(0.3, 0.6, 0.2, 0.4)
        assert spatial_loss(p, p, self.W) == 0.0

    def test_literal_at_truth(self):
        p = P(0.3, 0.6, 0.2, 0.4)
        assert spatial_loss(p, p, self.W, "paper-literal") == self.W.lambda_center

    def test_aspect_only(self):
        w = LossWeights(lambda_iou=0.0, lambda_center=0.0, lambda_ar=1.0)
        val = spatial_loss(P(0.5, 0.5, 0.4, 0.2), P(0.5, 0.5, 0.2, 0.2), w)
        assert val == pytest.approx(math.atan(2) - math.atan(1))
        assert val == pytest.approx(0.3217, abs=1e-4)

    def test_zero_true_centre(self):
        with pytest.raises(ValueError):
            spatial_loss(P(0.5, 0.5, 0.1, 0.1), P(0.0, 0.5, 0.1, 0.1), self.W)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            spatial_loss(P(0.5, 0.5, 0.1, 0.1), P(0.5, 0.5, 0.1, 0.1), self.W, "other")

    @given(placements, placements)
    def test_nonnegative_and_zero_only_at_truth(self, p, q):
        v = spatial_loss(p, q, self.W)
        assert v >= 0
        if p != q:
            assert v > 0

    @settings(max_examples=100)
    @given(placements, coord, coord, coord, coord, st.floats(0, 1))
    def test_midpoint_convex_in_centre(self, truth, x1, y1, x2, y2, _):
        w = LossWeights(lambda_iou=0.0, lambda_center=1.0, lambda_ar=1.0)

        def f(cx, cy):
            return spatial_loss(P(cx, cy, truth.w, truth.h), truth, w)

        mid = f((x1 + x2) / 2, (y1 + y2) / 2)
        assert mid <= (f(x1, y1) + f(x2, y2)) / 2 + 1e-12


class TestFeatureLosses:
    def test_semantic(self):
        a = np.random.default_rng(0).random((3, 3, 5))
        assert semantic_loss(a, a) == 0.0
        assert semantic_loss(np.zeros((2, 2, 1)), np.ones((2, 2, 1))) == 4.0
        assert semantic_loss(np.array([[[1.0, 2.0]]]), np.zeros((1, 1, 2))) == 5.0

    def test_heatmap(self):
        h = np.random.default_rng(1).random((4, 4))
        assert heatmap_loss(h, h) == 0.0
        assert heatmap_loss(np.zeros((2, 2)), np.ones((2, 2))) == 4.0
        r = np.random.default_rng(2).random((3, 3))
        assert heatmap_loss(h[:3, :3] + 3 * r, h[:3, :3]) == pytest.approx(9 * heatmap_loss(h[:3, :3] + r, h[:3, :3]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            semantic_loss(np.zeros((2, 2, 3)), np.zeros((2, 2, 2)))
        with pytest.raises(ValueError):
            heatmap_loss(np.zeros((2, 2)), np.zeros((3, 2)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric_and_relaxed_triangle(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = rng.normal(size=(3, 4, 4, 3))
        for loss in (semantic_loss, heatmap_loss):
            assert loss(a, b) == pytest.approx(loss(b, a))
            assert loss(a, c) <= 2 * loss(a, b) + 2 * loss(b, c) + 1e-9

    def test_features_shape(self):
        img = np.random.default_rng(3).random((5, 6, 3))
        f = features(img)
        assert f.shape == (5, 6, 5)
        np.testing.assert_array_equal(f[..., :3], img)


class TestTotalLoss:
    def test_values(self):
        assert total_loss((0, 0, 0), LossWeights()) == 0
        assert total_loss((2.5, 9, 9), LossWeights(lambda1=1, lambda2=0, lambda3=0)) == 2.5
        assert total_loss((1, 2, 3), LossWeights(lambda1=0.5, lambda2=0.3, lambda3=0.2)) == pytest.approx(1.7)

    def test_weight_sum(self):
        with pytest.raises(ValueError):
            LossWeights(lambda1=0.5, lambda2=0.5, lambda3=0.5)

    @given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.floats(-3, 3))
    def test_linear(self, v, k):
        w = LossWeights(lambda1=0.2, lambda2=0.3, lambda3=0.5)
        a, b = v[:3], v[3:]
        lhs = total_loss([x + k * y for x, y in zip(a, b)], w)
        assert lhs == pytest.approx(total_loss(a, w) + k * total_loss(b, w), abs=1e-9)


def dense_brute_force(fns, lower, upper, resolution=1e-4):
    """Minimizer of a separable objective: scan each coordinate on a dense grid."""
    out = []
    for f, lo, hi in zip(fns, lower, upper):
        xs = np.arange(lo, hi + resolution / 2, resolution)
        out.append(xs[np.argmin(f(xs))])
    return np.array(out)


def smooth_separable(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec()
    centres = [rng.uniform(lo + 0.02, hi - 0.02) for lo, hi in zip(g.lower, g.upper)]
    scales = rng.uniform(0.5, 5.0, 4)
    quart = rng.uniform(0.0, 20.0, 4)
    fns = [
        (lambda x, c=c, s=s, q=q: s * (x - c) ** 2 + q * (x - c) ** 4 + 0.1 * np.log(np.cosh(8 * (x - c))))
        for c, s, q in zip(centres, scales, quart)
    ]

    def objective(p):
        return sum(float(f(v)) for f, v in zip(fns, p.as_array()))

    return objective, fns


class TestOptimizer:
    def test_recovers_grid_point_exactly(self):
        g = GridSpec(counts=(6, 6, 4, 4))
        axes = g.axes()
        truth = P(axes[0][2], axes[1][4], axes[2][1], axes[3][3])
        w = LossWeights()
        assert optimize_placement(lambda p: spatial_loss(p, truth, w), g) == truth

    def test_off_grid_quadratic(self):
        target = np.array([0.3141, 0.7182, 0.4142, 0.2718])
        best = optimize_placement(lambda p: float(np.sum((p.as_array() - target) ** 2)), GridSpec(counts=(8, 8, 6, 6)))
        assert np.max(np.abs(best.as_array() - target)) < 1e-3

    def test_constant_returns_first_grid_point(self):
        g = GridSpec()
        best = optimize_placement(lambda p: 1.0, g)
        assert best.as_array().tolist() == [a[0] for a in g.axes()]

    def test_nonfinite_everywhere(self):
        with pytest.raises(ValueError):
            optimize_placement(lambda p: float("nan"), GridSpec(counts=(2, 2, 2, 2)))

    @pytest.mark.parametrize("seed", range(3))
    def test_never_worse_than_grid(self, seed):
        obj, _ = smooth_separable(seed)
        g = GridSpec(counts=(5, 5, 3, 3))
        import itertools

        grid_best = min(obj(P(*pt)) for pt in itertools.product(*g.axes()))
        assert obj(optimize_placement(obj, g)) <= grid_best

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_dense_scan(self, seed):
        obj, fns = smooth_separable(seed)
        g = GridSpec(counts=(8, 8, 4, 4))
        ref = dense_brute_force(fns, g.lower, g.upper)
        got = optimize_placement(obj, g).as_array()
        assert np.max(np.abs(got - ref)) <= 1e-3


class TestGradients:
    def test_constant(self):
        np.testing.assert_array_equal(finite_diff_grad(lambda p: 3.0, P(0.5, 0.5, 0.2, 0.2)), 0.0)

    def test_quadratic(self):
        g = finite_diff_grad(lambda p: float(np.sum(p.as_array() ** 2)), P(1, 1, 1, 1), h=1e-4)
        np.testing.assert_allclose(g, 2.0, atol=1e-8)

    def test_nonfinite(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda p: float("inf"), P(0.5, 0.5, 0.2, 0.2))
        with pytest.raises(ValueError):
            finite_diff_grad(lambda p: 1.0, P(0.5, 0.5, 0.2, 0.2), h=0)

    def test_heatmap_of_translated_box_matches_dense_sampling(self):
        target = render_heatmap(P(0.45, 0.55, 0.3, 0.25), 24, 24)

        def obj(p):
            return heatmap_loss(render_heatmap(p, 24, 24), target)

        p0 = P(0.5, 0.5, 0.3, 0.25)
        got = finite_diff_grad(obj, p0, h=1e-5)
        # oracle: least-squares slope of a cubic through 201 dense samples per coordinate
        ref = []
        for k in range(4):
            ts = np.linspace(-1e-2, 1e-2, 201)
            vals = []
            for t in ts:
                v = p0.as_array()
                v[k] += t
                vals.append(obj(P.from_array(v)))
            ref.append(np.polyfit(ts, vals, 3)[-2])
        np.testing.assert_allclose(got, ref, atol=1e-3)


class TestBalance:
    def test_symmetric(self):
        np.testing.assert_allclose(balance_from_norms([1, 1, 1]), [1 / 3] * 3)

    def test_one_two_four(self):
        lam = balance_from_norms([1, 2, 4])
        np.testing.assert_allclose(lam, [4 / 7, 2 / 7, 1 / 7], atol=1e-12)
        assert lam[0] / lam[1] == pytest.approx(2.0)
        assert lam[1] / lam[2] == pytest.approx(2.0)

    def test_from_linear_losses(self):
        dirs = [np.array([1.0, 0, 0, 0]), np.array([0, 2.0, 0, 0]), np.array([0, 0, 0, 4.0])]
        fns = [(lambda p, d=d: float(d @ p.as_array())) for d in dirs]
        lam = balance_weights(fns, P(0.5, 0.5, 0.3, 0.3))
        np.testing.assert_allclose(lam, [4 / 7, 2 / 7, 1 / 7], atol=1e-6)

    def test_vanishing_gradient(self):
        fns = [lambda p: p.cx, lambda p: 1.0, lambda p: p.cy]
        with pytest.raises(ValueError):
            balance_weights(fns, P(0.5, 0.5, 0.3, 0.3))

    def test_wrong_arity(self):
        with pytest.raises(ValueError):
            balance_weights([lambda p: p.cx], P(0.5, 0.5, 0.3, 0.3))


class TestPlausibility:
    def test_values(self):
        assert plausibility(0.0, 0.3, 0.2) == 0.0
        assert plausibility(0.9, 0.2, 0.1) == pytest.approx(3.0)
        assert plausibility(1.0, 0.0, 0.0) == pytest.approx(100.0)
