"""Image similarity and set diversity measurements.

SSIM here is the structural-similarity index computed over 8x8
non-overlapping windows with uniform weighting and stabilization
constants ``C1 = (0.01 * R)**2`` and ``C2 = (0.03 * R)**2`` for dynamic
range ``R = 1``.  Non-overlapping tiles (edge tiles may be smaller) keep
the result bit-reproducible and friendly to 28x28 inputs; the choice is
exposed as named constants below.  The l2 measure is the root-mean-square
pixel difference, so its value is resolution independent and lies in
``[0, 1]`` for ``[0, 1]`` pixels.

Perceptual distance is pluggable: any embedder mapping an image to a
fixed-length feature vector works.  The built-in default is a
deterministic multi-scale pixel pyramid followed by a seeded random
projection; it stands in for learned perceptual features while remaining
fully reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from latentprobe.backends.base import Image
from latentprobe.errors import BackendError, InvalidArgument

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DYNAMIC_RANGE = 1.0
#: ITU-R BT.601 luminance weights applied before SSIM windowing.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class SimilarityReading:
    """One SSIM + l2 measurement of a candidate against a reference."""

    ssim: float
    l2: float


def _pixels(x: Image | np.ndarray) -> np.ndarray:
    px = x.pixels if isinstance(x, Image) else np.asarray(x, dtype=np.float64)
    if px.ndim == 2:
        px = px[:, :, None]
    if px.ndim != 3:
        raise InvalidArgument(f"expected HxWxC pixels, got shape {px.shape}")
    return px


def _luminance(px: np.ndarray) -> np.ndarray:
    if px.shape[2] == 1:
        return px[:, :, 0]
    if px.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * px[:, :, 0] + g * px[:, :, 1] + b * px[:, :, 2]
    raise InvalidArgument(f"unsupported channel count {px.shape[2]}")


def ssim(x: Image | np.ndarray, y: Image | np.ndarray) -> float:
    """Mean local SSIM over non-overlapping windows.

    Multi-channel inputs are converted to luminance first.  Window
    statistics are population moments (uniform weights).  Identical
    inputs give exactly 1.0.
    """
    px, py = _pixels(x), _pixels(y)
    if px.shape != py.shape:
        raise InvalidArgument(f"shape mismatch: {px.shape} vs {py.shape}")
    lx, ly = _luminance(px), _luminance(py)
    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2
    h, w = lx.shape
    values = []
    for i in range(0, h, SSIM_WINDOW):
        for j in range(0, w, SSIM_WINDOW):
            tx = lx[i : i + SSIM_WINDOW, j : j + SSIM_WINDOW]
            ty = ly[i : i + SSIM_WINDOW, j : j + SSIM_WINDOW]
            mx, my = tx.mean(), ty.mean()
            vx = (tx * tx).mean() - mx * mx
            vy = (ty * ty).mean() - my * my
            cov = (tx * ty).mean() - mx * my
            num = (2.0 * mx * my + c1) * (2.0 * cov + c2)
            den = (mx * mx + my * my + c1) * (vx + vy + c2)
            values.append(num / den)
    return float(np.mean(values))


def l2(x: Image | np.ndarray, y: Image | np.ndarray) -> float:
    """Root-mean-square pixel difference over all pixels and channels."""
    px, py = _pixels(x), _pixels(y)
    if px.shape != py.shape:
        raise InvalidArgument(f"shape mismatch: {px.shape} vs {py.shape}")
    diff = px - py
    return float(np.sqrt(np.mean(diff * diff)))


def measure_similarity(reference: Image | np.ndarray, candidate: Image | np.ndarray) -> SimilarityReading:
    return SimilarityReading(ssim=ssim(reference, candidate), l2=l2(reference, candidate))


class PerceptualEmbedder(Protocol):
    """Maps an image to a fixed-length, deterministic feature vector."""

    def embed(self, x: Image | np.ndarray) -> np.ndarray: ...


class PyramidEmbedder:
    """Deterministic multi-scale downsampling pyramid + seeded random projection.

    Each image is average-pooled at the given factors, the levels are
    flattened and concatenated, and a fixed Gaussian projection (seeded
    per input shape) reduces the result to ``out_dim`` features.
    """

    def __init__(self, out_dim: int = 64, seed: int = 1301, factors: Sequence[int] = (1, 2, 4)):
        self.out_dim = out_dim
        self.seed = seed
        self.factors = tuple(factors)
        self._projections: dict[tuple[int, ...], np.ndarray] = {}

    def _pool(self, lum: np.ndarray, factor: int) -> np.ndarray:
        if factor == 1:
            return lum
        h, w = lum.shape
        oh, ow = (h + factor - 1) // factor, (w + factor - 1) // factor
        out = np.empty((oh, ow))
        for i in range(oh):
            for j in range(ow):
                out[i, j] = lum[i * factor : (i + 1) * factor, j * factor : (j + 1) * factor].mean()
        return out

    def _projection(self, shape: tuple[int, ...], length: int) -> np.ndarray:
        key = shape
        if key not in self._projections:
            seq = np.random.SeedSequence([self.seed, *shape])
            rng = np.random.default_rng(seq)
            self._projections[key] = rng.standard_normal((self.out_dim, length)) / np.sqrt(length)
        return self._projections[key]

    def embed(self, x: Image | np.ndarray) -> np.ndarray:
        px = _pixels(x)
        levels = [self._pool(px[:, :, ch], f).ravel() for f in self.factors for ch in range(px.shape[2])]
        v = np.concatenate(levels)
        proj = self._projection(px.shape, v.shape[0])
        return proj @ v


def perceptual_distance(
    x: Image | np.ndarray, y: Image | np.ndarray, embedder: PerceptualEmbedder
) -> float:
    """Euclidean distance between unit-normalized embeddings (0 for identical inputs)."""
    try:
        ex = np.asarray(embedder.embed(x), dtype=np.float64)
        ey = np.asarray(embedder.embed(y), dtype=np.float64)
    except Exception as exc:
        raise BackendError(f"perceptual embedder failed: {exc}") from exc
    nx, ny = np.linalg.norm(ex), np.linalg.norm(ey)
    if nx > 0:
        ex = ex / nx
    if ny > 0:
        ey = ey / ny
    return float(np.linalg.norm(ex - ey))


@dataclass(frozen=True)
class DiversityResult:
    """Mean pairwise perceptual distance over a set of images.

    ``defined`` is False for empty or singleton sets, where the value is
    fixed at 0 by convention.
    """

    value: float
    pair_count: int

    @property
    def defined(self) -> bool:
        return self.pair_count > 0


def mean_pairwise_diversity(
    images: Sequence[Image | np.ndarray], embedder: PerceptualEmbedder
) -> DiversityResult:
    """Mean perceptual distance over all unordered pairs (sorted index order)."""
    n = len(images)
    if n < 2:
        return DiversityResult(value=0.0, pair_count=0)
    embeddings = []
    for img in images:
        e = np.asarray(embedder.embed(img), dtype=np.float64)
        norm = np.linalg.norm(e)
        embeddings.append(e / norm if norm > 0 else e)
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += float(np.linalg.norm(embeddings[i] - embeddings[j]))
            count += 1
    return DiversityResult(value=total / count, pair_count=count)
