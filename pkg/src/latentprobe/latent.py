"""Pure latent-space algebra: truncation, style mixing, mean-style estimation.

Style codes live in the generator's per-layer intermediate space: a
``num_layers x style_dim`` matrix.  Truncation contracts rows toward a
population mean style ``w_bar``; a layer cutoff restricts the contraction
to the coarse (low-index) rows.  Style mixing interpolates selected rows
between a source and a rival code.  All functions are pure and safe to
call from any number of workers.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from latentprobe.errors import BackendError, InvalidArgument

TruncationMode = str  # "none" | "fixed" | "adaptive"

#: Fixed truncation budgets used for per-level sweeps.
FIXED_SCHEDULE: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5)
#: Descending schedule used by adaptive salvage and first-flip descent.
ADAPTIVE_SCHEDULE: tuple[float, ...] = (1.0, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.60, 0.50)


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LatentSeed:
    """A deterministic draw from the generator's input latent space.

    ``(seed_id, class_label)`` uniquely identifies a seed within a campaign.
    """

    seed_id: int
    z: np.ndarray
    class_label: int

    def __post_init__(self) -> None:
        if self.seed_id < 0:
            raise InvalidArgument(f"seed_id must be >= 0, got {self.seed_id}")
        if self.class_label < 0:
            raise InvalidArgument(f"class_label must be >= 0, got {self.class_label}")
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1:
            raise InvalidArgument(f"z must be a vector, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise InvalidArgument("z contains non-finite values")
        object.__setattr__(self, "z", _readonly(z))

    def with_class(self, class_label: int) -> "LatentSeed":
        """Same latent draw conditioned on a different class."""
        return LatentSeed(self.seed_id, self.z, class_label)


@dataclass(frozen=True)
class StyleCode:
    """Per-layer style matrix, shape ``(num_layers, style_dim)``."""

    layers: np.ndarray

    def __post_init__(self) -> None:
        layers = np.asarray(self.layers, dtype=np.float64)
        if layers.ndim != 2 or layers.shape[0] < 1 or layers.shape[1] < 1:
            raise InvalidArgument(f"layers must be a 2-D matrix, got shape {layers.shape}")
        if not np.all(np.isfinite(layers)):
            raise InvalidArgument("style code contains non-finite values")
        object.__setattr__(self, "layers", _readonly(layers))

    @property
    def num_layers(self) -> int:
        return self.layers.shape[0]

    @property
    def style_dim(self) -> int:
        return self.layers.shape[1]

    @classmethod
    def broadcast(cls, w: np.ndarray, num_layers: int) -> "StyleCode":
        """Tile a single style vector across all synthesis layers."""
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 1:
            raise InvalidArgument(f"style vector must be 1-D, got shape {w.shape}")
        return cls(np.tile(w, (num_layers, 1)))


@dataclass(frozen=True)
class MeanStyle:
    """Population mean style ``w_bar`` plus the sample count that produced it."""

    w_bar: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise InvalidArgument(f"sample_count must be > 0, got {self.sample_count}")
        w = np.asarray(self.w_bar, dtype=np.float64)
        if w.ndim != 1:
            raise InvalidArgument(f"w_bar must be a vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidArgument("w_bar contains non-finite values")
        object.__setattr__(self, "w_bar", _readonly(w))


@dataclass(frozen=True)
class TruncationPolicy:
    """Truncation mode, strength, and layer cutoff for a campaign.

    ``cutoff`` is exclusive: truncation applies to layers with index
    strictly below it, so ``cutoff == num_layers`` means uniform
    truncation and lower cutoffs leave fine layers untouched.
    """

    mode: TruncationMode
    psi: float = 1.0
    schedule: tuple[float, ...] = field(default=ADAPTIVE_SCHEDULE)
    cutoff: int | None = None  # None means "all layers" (resolved by the backend)

    def __post_init__(self) -> None:
        if self.mode not in ("none", "fixed", "adaptive"):
            raise InvalidArgument(f"unknown truncation mode {self.mode!r}")
        if self.mode == "none" and self.psi != 1.0:
            raise InvalidArgument("mode 'none' implies psi=1.0")
        if not 0.0 < self.psi <= 1.0:
            raise InvalidArgument(f"psi must lie in (0, 1], got {self.psi}")
        schedule = tuple(float(p) for p in self.schedule)
        if schedule:
            if schedule[0] != 1.0:
                raise InvalidArgument("schedule must start at 1.0")
            if any(schedule[i + 1] >= schedule[i] for i in range(len(schedule) - 1)):
                raise InvalidArgument("schedule must be strictly descending")
            if any(not 0.0 < p <= 1.0 for p in schedule):
                raise InvalidArgument("schedule values must lie in (0, 1]")
        object.__setattr__(self, "schedule", schedule)
        if self.cutoff is not None and self.cutoff < 1:
            raise InvalidArgument(f"cutoff must be >= 1, got {self.cutoff}")


def truncate(w: StyleCode, w_bar: MeanStyle, psi: float, cutoff: int) -> StyleCode:
    """Contract the first ``cutoff`` rows of ``w`` toward the mean style.

    Row ``i < cutoff`` becomes ``w_bar + psi * (w_i - w_bar)``; rows at or
    above the cutoff are copied bitwise.  ``psi == 1.0`` returns the input
    rows unchanged (exact identity, no float round-trip).
    """
    if not 0.0 < psi <= 1.0:
        raise InvalidArgument(f"psi must lie in (0, 1], got {psi}")
    if not 1 <= cutoff <= w.num_layers:
        raise InvalidArgument(f"cutoff must lie in [1, {w.num_layers}], got {cutoff}")
    if w_bar.w_bar.shape[0] != w.style_dim:
        raise InvalidArgument(
            f"mean style dim {w_bar.w_bar.shape[0]} != style dim {w.style_dim}"
        )
    if psi == 1.0:
        return StyleCode(w.layers)
    out = np.array(w.layers, copy=True)
    out[:cutoff] = w_bar.w_bar + psi * (out[:cutoff] - w_bar.w_bar)
    return StyleCode(out)


def style_mix(
    w_src: StyleCode,
    w_rival: StyleCode,
    layers: Iterable[int],
    lam: float,
) -> StyleCode:
    """Blend selected rows of the source code toward the rival code.

    Selected rows become ``(1 - lam) * src + lam * rival``; all other rows
    are copied from the source.  The endpoints are exact: ``lam == 0``
    returns the source rows bitwise and ``lam == 1`` substitutes the rival
    rows bitwise on the mixed layers.
    """
    if not 0.0 <= lam <= 1.0:
        raise InvalidArgument(f"lambda must lie in [0, 1], got {lam}")
    if w_src.layers.shape != w_rival.layers.shape:
        raise InvalidArgument(
            f"shape mismatch: {w_src.layers.shape} vs {w_rival.layers.shape}"
        )
    idx = sorted(set(int(i) for i in layers))
    if idx and (idx[0] < 0 or idx[-1] >= w_src.num_layers):
        raise InvalidArgument(f"layer indices {idx} outside [0, {w_src.num_layers})")
    out = np.array(w_src.layers, copy=True)
    if lam == 0.0 or not idx:
        return StyleCode(out)
    if lam == 1.0:
        out[idx] = w_rival.layers[idx]
    else:
        out[idx] = (1.0 - lam) * out[idx] + lam * w_rival.layers[idx]
    return StyleCode(out)


def estimate_mean_style(
    mapper: Callable[[np.ndarray], np.ndarray],
    latent_dim: int,
    num_samples: int = 10_000,
    rng_seed: int = 0,
) -> MeanStyle:
    """Monte-Carlo estimate of the population mean style.

    Draws ``num_samples`` standard-normal latents from
    ``numpy.random.default_rng(rng_seed)`` (one ``standard_normal(latent_dim)``
    call per sample, in order) and averages the mapper outputs.
    Deterministic given ``(latent_dim, num_samples, rng_seed)``.
    """
    if num_samples < 1:
        raise InvalidArgument(f"num_samples must be >= 1, got {num_samples}")
    if latent_dim < 1:
        raise InvalidArgument(f"latent_dim must be >= 1, got {latent_dim}")
    rng = np.random.default_rng(rng_seed)
    total: np.ndarray | None = None
    for _ in range(num_samples):
        z = rng.standard_normal(latent_dim)
        try:
            w = np.asarray(mapper(z), dtype=np.float64)
        except Exception as exc:  # mapper failures surface as backend errors
            raise BackendError(f"mapper failed during mean-style estimation: {exc}") from exc
        if total is None:
            total = np.zeros_like(w)
        total += w
    assert total is not None
    return MeanStyle(w_bar=total / num_samples, sample_count=num_samples)
