"""Backend interfaces, image/prediction types, and the render session.

A generator backend maps input latents to per-layer style codes and
synthesizes images from them; a classifier backend scores images.  Both
must be deterministic: any stochastic synthesis noise is frozen at load
time so truncation stays the only varying factor.  Backends are shared
read-only across workers; the render cache serializes writes through a
lock with last-write-wins on identical values.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from latentprobe.errors import BackendContractError, InvalidArgument
from latentprobe.latent import LatentSeed, MeanStyle, StyleCode, estimate_mean_style, truncate

PROVENANCES = ("baseline", "truncated", "mixed")


@dataclass(frozen=True)
class Image:
    """An HxWxC pixel tensor in [0, 1] plus its generation provenance."""

    pixels: np.ndarray
    provenance: str = "baseline"

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3:
            raise InvalidArgument(f"pixels must be HxWxC, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InvalidArgument("pixels contain non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise InvalidArgument("pixels must lie in [0, 1]; clamp at synthesis")
        if self.provenance not in PROVENANCES:
            raise InvalidArgument(f"unknown provenance {self.provenance!r}")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class Prediction:
    """Classifier probability vector with derived top-class statistics.

    Argmax ties break toward the lowest class index, which keeps
    predictions reproducible across platforms.
    """

    probs: np.ndarray
    top_class: int
    top_conf: float
    margin: float

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "Prediction":
        p = np.asarray(probs, dtype=np.float64).ravel()
        if p.size < 2:
            raise InvalidArgument("prediction needs at least two classes")
        if not np.all(np.isfinite(p)) or p.min() < -1e-9:
            raise InvalidArgument("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-5:
            raise InvalidArgument(f"probabilities sum to {p.sum():.6f}, expected 1")
        top = int(np.argmax(p))  # np.argmax returns the first (lowest) max index
        order = np.sort(p)[::-1]
        p = p.copy()
        p.flags.writeable = False
        return cls(probs=p, top_class=top, top_conf=float(order[0]), margin=float(order[0] - order[1]))


class GeneratorBackend(ABC):
    """Style-based generator: latent mapping plus image synthesis."""

    latent_dim: int
    style_dim: int
    num_layers: int
    num_classes: int
    image_shape: tuple[int, int, int]

    @abstractmethod
    def style_vector(self, z: np.ndarray, class_label: int) -> np.ndarray:
        """Map one input latent to a single style vector (shape ``(style_dim,)``)."""

    def map(self, seed: LatentSeed) -> StyleCode:
        """Map a seed to a per-layer style code (the style vector tiled per layer)."""
        z = np.asarray(seed.z, dtype=np.float64)
        if z.shape != (self.latent_dim,):
            raise BackendContractError(
                f"latent shape {z.shape} != declared ({self.latent_dim},)"
            )
        if not 0 <= seed.class_label < self.num_classes:
            raise BackendContractError(
                f"class_label {seed.class_label} outside [0, {self.num_classes})"
            )
        w = np.asarray(self.style_vector(z, seed.class_label), dtype=np.float64)
        if w.shape != (self.style_dim,):
            raise BackendContractError(f"style vector shape {w.shape} != ({self.style_dim},)")
        return StyleCode.broadcast(w, self.num_layers)

    @abstractmethod
    def synthesize(self, w: StyleCode, provenance: str = "baseline") -> Image:
        """Render a style code to an image; deterministic, pixels clamped to [0, 1]."""


class ClassifierBackend(ABC):
    """The system under test: image in, probability simplex out."""

    num_classes: int
    input_shape: tuple[int, int, int]

    @abstractmethod
    def classify(self, x: Image) -> Prediction: ...


def build_mean_styles(
    backend: GeneratorBackend,
    num_samples: int = 10_000,
    rng_seed: int = 0,
) -> dict[int, MeanStyle]:
    """Estimate one mean style per class label.

    The generators are class-conditional, so each class gets its own
    Monte-Carlo mean (sub-seeded from ``rng_seed``); truncating toward a
    global mean would drag samples across class modes.
    """
    means: dict[int, MeanStyle] = {}
    for c in range(backend.num_classes):
        sub_seed = np.random.SeedSequence([rng_seed, c]).generate_state(1)[0]
        means[c] = estimate_mean_style(
            lambda z, _c=c: backend.style_vector(z, _c),
            latent_dim=backend.latent_dim,
            num_samples=num_samples,
            rng_seed=int(sub_seed),
        )
    return means


@dataclass
class SessionStats:
    """Call counters; render_log records every synthesized (seed, class, psi)."""

    synth_calls: int = 0
    classify_calls: int = 0
    cache_hits: int = 0
    render_log: list[tuple[int, int, float]] = field(default_factory=list)


class RenderSession:
    """Couples a generator, classifier, per-class mean styles, and a cutoff.

    ``render`` composes map -> truncate -> synthesize and caches results
    by ``(seed_id, class_label, psi, cutoff)`` so repeated budgets and
    rival iterations reuse images.  Safe for concurrent use.
    """

    def __init__(
        self,
        generator: GeneratorBackend,
        classifier: ClassifierBackend,
        mean_styles: dict[int, MeanStyle],
        cutoff: int | None = None,
    ):
        if classifier.num_classes != generator.num_classes:
            raise BackendContractError(
                f"classifier classes {classifier.num_classes} != generator {generator.num_classes}"
            )
        self.generator = generator
        self.classifier = classifier
        self.mean_styles = mean_styles
        self.cutoff = generator.num_layers if cutoff is None else int(cutoff)
        if not 1 <= self.cutoff <= generator.num_layers:
            raise InvalidArgument(
                f"cutoff must lie in [1, {generator.num_layers}], got {cutoff}"
            )
        self.stats = SessionStats()
        self._cache: dict[tuple[int, int, float, int], tuple[Image, StyleCode]] = {}
        self._lock = threading.Lock()

    def style_code(self, seed: LatentSeed, psi: float, cutoff: int | None = None) -> StyleCode:
        """Truncated style code for a seed at the given budget."""
        cut = self.cutoff if cutoff is None else cutoff
        w = self.generator.map(seed)
        return truncate(w, self.mean_styles[seed.class_label], psi, cut)

    def render(
        self, seed: LatentSeed, psi: float, cutoff: int | None = None
    ) -> tuple[Image, StyleCode]:
        """Render a seed at a truncation budget; cached per (seed, class, psi, cutoff)."""
        cut = self.cutoff if cutoff is None else cutoff
        key = (seed.seed_id, seed.class_label, float(psi), cut)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self.stats.cache_hits += 1
                return hit
        w = self.style_code(seed, psi, cut)
        provenance = "baseline" if psi == 1.0 else "truncated"
        image = self.generator.synthesize(w, provenance=provenance)
        with self._lock:
            self.stats.synth_calls += 1
            self.stats.render_log.append((seed.seed_id, seed.class_label, float(psi)))
            self._cache[key] = (image, w)
        return image, w

    def synthesize_mix(self, w: StyleCode) -> Image:
        """Render a mixed style code (no caching; lambda varies continuously)."""
        image = self.generator.synthesize(w, provenance="mixed")
        with self._lock:
            self.stats.synth_calls += 1
        return image

    def classify(self, x: Image) -> Prediction:
        pred = self.classifier.classify(x)
        with self._lock:
            self.stats.classify_calls += 1
        return pred
