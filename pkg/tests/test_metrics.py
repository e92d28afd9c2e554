"""Similarity metrics against closed forms and a naive reference."""

from __future__ import annotations

import numpy as np
import pytest

from latentprobe.backends.base import Image
from latentprobe.errors import InvalidArgument
from latentprobe.metrics import (
    LUMA_WEIGHTS,
    SSIM_DYNAMIC_RANGE,
    SSIM_K1,
    SSIM_K2,
    SSIM_WINDOW,
    DiversityResult,
    PyramidEmbedder,
    l2,
    mean_pairwise_diversity,
    measure_similarity,
    perceptual_distance,
    ssim,
)


def reference_ssim(x, y):
    """Naive SSIM re-implementation: plain loops, no shared code.

    Same definition as the production metric: luminance conversion,
    non-overlapping windows, population moments, uniform weighting.
    """
    def lum(px):
        h, w, c = px.shape
        out = [[0.0] * w for _ in range(h)]
        for i in range(h):
            for j in range(w):
                if c == 1:
                    out[i][j] = float(px[i][j][0])
                else:
                    out[i][j] = (LUMA_WEIGHTS[0] * float(px[i][j][0])
                                 + LUMA_WEIGHTS[1] * float(px[i][j][1])
                                 + LUMA_WEIGHTS[2] * float(px[i][j][2]))
        return out

    lx, ly = lum(x), lum(y)
    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2
    h, w = len(lx), len(lx[0])
    scores = []
    for i0 in range(0, h, SSIM_WINDOW):
        for j0 in range(0, w, SSIM_WINDOW):
            xs, ys = [], []
            for i in range(i0, min(i0 + SSIM_WINDOW, h)):
                for j in range(j0, min(j0 + SSIM_WINDOW, w)):
                    xs.append(lx[i][j])
                    ys.append(ly[i][j])
            n = len(xs)
            mx = sum(xs) / n
            my = sum(ys) / n
            vx = sum(v * v for v in xs) / n - mx * mx
            vy = sum(v * v for v in ys) / n - my * my
            cov = sum(a * b for a, b in zip(xs, ys)) / n - mx * my
            scores.append(((2 * mx * my + c1) * (2 * cov + c2))
                          / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(scores) / len(scores)


def test_ssim_self_similarity_is_exactly_one():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.uniform(0, 1, size=(28, 28, 1))
        assert ssim(x, x) == 1.0


def test_ssim_constant_images_closed_form():
    a, b = 0.3, 0.7
    x = np.full((16, 16, 1), a)
    y = np.full((16, 16, 1), b)
    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    expected = (2 * a * b + c1) / (a * a + b * b + c1)
    assert abs(ssim(x, y) - expected) < 1e-12


def test_ssim_matches_naive_reference():
    rng = np.random.default_rng(7)
    for k in range(10):
        shape = (28, 28, 1) if k % 2 == 0 else (16, 24, 3)
        x = rng.uniform(0, 1, size=shape)
        y = np.clip(x + rng.normal(0, 0.1, size=shape), 0, 1)
        assert abs(ssim(x, y) - reference_ssim(x, y)) < 1e-3


def test_ssim_decreases_with_noise():
    rng = np.random.default_rng(11)
    x = rng.uniform(0.2, 0.8, size=(28, 28, 1))
    small = np.clip(x + rng.normal(0, 0.02, size=x.shape), 0, 1)
    large = np.clip(x + rng.normal(0, 0.3, size=x.shape), 0, 1)
    assert ssim(x, large) < ssim(x, small) < 1.0


def test_ssim_rejects_shape_mismatch():
    with pytest.raises(InvalidArgument):
        ssim(np.zeros((8, 8, 1)), np.zeros((8, 9, 1)))
    with pytest.raises(InvalidArgument):
        ssim(np.zeros((8, 8, 2)), np.zeros((8, 8, 2)))


def test_l2_is_rms_and_resolution_independent():
    x = np.zeros((8, 8, 1))
    y = np.full((8, 8, 1), 0.5)
    assert abs(l2(x, y) - 0.5) < 1e-12
    xl = np.zeros((32, 32, 1))
    yl = np.full((32, 32, 1), 0.5)
    assert abs(l2(xl, yl) - l2(x, y)) < 1e-12


def test_l2_metric_axioms():
    rng = np.random.default_rng(13)
    for _ in range(200):
        x, y, z = (rng.uniform(0, 1, size=(8, 8, 1)) for _ in range(3))
        assert l2(x, x) == 0.0
        assert l2(x, y) >= 0.0
        assert abs(l2(x, y) - l2(y, x)) < 1e-12
        assert l2(x, z) <= l2(x, y) + l2(y, z) + 1e-9


def test_measure_similarity_bundles_both_readings():
    x = np.zeros((8, 8, 1))
    y = np.full((8, 8, 1), 0.1)
    reading = measure_similarity(x, y)
    assert reading.ssim == ssim(x, y)
    assert reading.l2 == l2(x, y)


def test_metrics_accept_image_objects_and_2d_arrays():
    px = np.random.default_rng(17).uniform(0, 1, size=(28, 28, 1))
    img = Image(pixels=px)
    assert ssim(img, px) == 1.0
    assert l2(px[:, :, 0], px) == 0.0


def test_pyramid_embedder_is_deterministic_and_shape_stable():
    rng = np.random.default_rng(19)
    x = rng.uniform(0, 1, size=(28, 28, 1))
    e1 = PyramidEmbedder().embed(x)
    e2 = PyramidEmbedder().embed(x)
    assert e1.shape == (64,)
    assert np.array_equal(e1, e2)
    rgb = rng.uniform(0, 1, size=(32, 32, 3))
    assert PyramidEmbedder().embed(rgb).shape == (64,)


def test_perceptual_distance_zero_for_identical_inputs():
    x = np.random.default_rng(23).uniform(0, 1, size=(28, 28, 1))
    embedder = PyramidEmbedder()
    assert perceptual_distance(x, x, embedder) == 0.0
    y = np.roll(x, 7, axis=0)
    assert perceptual_distance(x, y, embedder) > 0.0


def test_mean_pairwise_diversity_conventions():
    embedder = PyramidEmbedder()
    rng = np.random.default_rng(29)
    images = [rng.uniform(0, 1, size=(16, 16, 1)) for _ in range(4)]
    result = mean_pairwise_diversity(images, embedder)
    assert result.defined and result.pair_count == 6
    hand = np.mean([perceptual_distance(images[i], images[j], embedder)
                    for i in range(4) for j in range(i + 1, 4)])
    assert abs(result.value - hand) < 1e-12
    empty = mean_pairwise_diversity([], embedder)
    single = mean_pairwise_diversity(images[:1], embedder)
    for r in (empty, single):
        assert r == DiversityResult(value=0.0, pair_count=0)
        assert not r.defined
