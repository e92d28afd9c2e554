"""Deterministic blob-world backend with analytically known boundaries.

The generator renders a single Gaussian blob whose parameters (center,
radius, amplitude) are affine reads of the style code's per-band row
means, so every latent operation has a closed-form effect on the image:
truncation drags blob parameters straight toward the class canonical,
and style mixing on a band interpolates exactly one parameter group.

The classifier is a linear softmax over 2x2-pooled pixels.  Its weight
planes are built so that each boundary-search technique has a designed
failure mode to find:

* class 0 owns a wide template at its canonical center plus a narrow
  spurious bump sitting on class 1's canonical center, so class 0 is an
  easy class (high pass rate, reliable salvage);
* class 1's template is offset from its canonical center, which leaves
  the bump zone inside nominal class-1 territory: truncating a passing
  class-1 seed walks it into the bump and produces first-flips;
* class 2 races a wide low "halo" component of class 1's plane that
  covers class 2's home region.  The race is linear in blob amplitude
  with a constant bias handicap, so the boundary is an amplitude
  threshold: fine-band style mixing toward class 1 (whose canonical
  amplitude is lower) crosses it while barely changing the image.

All constants are frozen at import from a fixed RNG seed; the solved
classifier gains are pure functions of those constants.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from latentprobe.backends.base import ClassifierBackend, GeneratorBackend, Image, Prediction
from latentprobe.errors import BackendContractError, InvalidArgument
from latentprobe.latent import LatentSeed, StyleCode

IMAGE_SIZE = 28
POOL = 2
POOLED_SIZE = IMAGE_SIZE // POOL
LATENT_DIM = 4
STYLE_DIM = 6
NUM_LAYERS = 8
NUM_CLASSES = 3

#: Layer bands; blob parameters are read from per-band row means.
COARSE_LAYERS: tuple[int, ...] = (0, 1, 2)
MIDDLE_LAYERS: tuple[int, ...] = (3, 4, 5)
FINE_LAYERS: tuple[int, ...] = (6, 7)

#: Style-coordinate semantics.  Coarse band rows carry the blob center in
#: coordinates 0-1, the middle band carries the radius in coordinate 2,
#: the fine band carries the amplitude in coordinate 3.  Coordinates 4-5
#: are spare and never read.
CENTER_SCALE = 0.12
RADIUS_SCALE = 0.012
AMP_SCALE = 0.05
RADIUS_BASE = 0.085
AMP_BASE = 0.85
CENTER_CLIP = (0.02, 0.98)
RADIUS_CLIP = (0.03, 0.45)
AMP_CLIP = (0.05, 1.0)

#: Class canonical blob parameters.
CLASS_CENTERS = np.array([[0.32, 0.42], [0.64, 0.46], [0.46, 0.74]])
CLASS_RADII = np.array([0.085, 0.10, 0.075])
CLASS_AMPS = np.array([0.85, 0.70, 1.00])

#: Unit vector from class 0's center to class 1's center; class 1's
#: template is displaced along it, and the bump zone edge sits on it.
_D01 = CLASS_CENTERS[1] - CLASS_CENTERS[0]
AXIS_01 = _D01 / np.linalg.norm(_D01)
TEMPLATE_1_OFFSET = 0.13
TEMPLATE_1_CENTER = CLASS_CENTERS[1] + TEMPLATE_1_OFFSET * AXIS_01

#: Classifier plane widths and solver targets.
SIGMA_0 = 0.16
SIGMA_1 = 0.17
SIGMA_2 = 0.22
SIGMA_BUMP = 0.07
SIGMA_HALO = 0.22
BUMP_ZONE_RADIUS = 0.065
BUMP_MARGIN = 2.0
LOGIT_SCALE = 14.0
CLASS2_BIAS = -5.0
CLASS2_GAP = 3.0

CONSTANTS_SEED = 20260418

_PIXEL_COORDS = (np.arange(IMAGE_SIZE) + 0.5) / IMAGE_SIZE
_GX, _GY = np.meshgrid(_PIXEL_COORDS, _PIXEL_COORDS, indexing="xy")
_POOLED_COORDS = (np.arange(POOLED_SIZE) * POOL + POOL / 2.0) / IMAGE_SIZE
_PGX, _PGY = np.meshgrid(_POOLED_COORDS, _POOLED_COORDS, indexing="xy")


def _render_blob(cx: float, cy: float, radius: float, amp: float) -> np.ndarray:
    d2 = (_GX - cx) ** 2 + (_GY - cy) ** 2
    return np.clip(amp * np.exp(-d2 / (2.0 * radius * radius)), 0.0, 1.0)


def _pool(img: np.ndarray) -> np.ndarray:
    return img.reshape(POOLED_SIZE, POOL, POOLED_SIZE, POOL).mean(axis=(1, 3))


def _gauss_plane(center: np.ndarray, sigma: float) -> np.ndarray:
    d2 = (_PGX - center[0]) ** 2 + (_PGY - center[1]) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def _build_constants() -> dict[str, np.ndarray]:
    """Freeze the latent mapping and solve the classifier gains.

    Deterministic: everything derives from CONSTANTS_SEED and the module
    constants above.
    """
    rng = np.random.default_rng(CONSTANTS_SEED)
    mix = rng.standard_normal((STYLE_DIM, LATENT_DIM))
    mix /= np.linalg.norm(mix, axis=1, keepdims=True)

    offsets = np.zeros((NUM_CLASSES, STYLE_DIM))
    for c in range(NUM_CLASSES):
        offsets[c, 0] = (CLASS_CENTERS[c, 0] - 0.5) / CENTER_SCALE
        offsets[c, 1] = (CLASS_CENTERS[c, 1] - 0.5) / CENTER_SCALE
        offsets[c, 2] = (CLASS_RADII[c] - RADIUS_BASE) / RADIUS_SCALE
        offsets[c, 3] = (CLASS_AMPS[c] - AMP_BASE) / AMP_SCALE

    plane0 = _gauss_plane(CLASS_CENTERS[0], SIGMA_0)
    plane1 = _gauss_plane(TEMPLATE_1_CENTER, SIGMA_1)
    plane2 = _gauss_plane(CLASS_CENTERS[2], SIGMA_2)
    bump = _gauss_plane(CLASS_CENTERS[1], SIGMA_BUMP)
    halo = _gauss_plane(CLASS_CENTERS[2], SIGMA_HALO)

    def resp(plane: np.ndarray, center: np.ndarray, r: float, a: float) -> float:
        return float((plane * _pool(_render_blob(center[0], center[1], r, a))).sum())

    g0 = LOGIT_SCALE / resp(plane0, CLASS_CENTERS[0], CLASS_RADII[0], CLASS_AMPS[0])
    g2 = LOGIT_SCALE / resp(plane2, CLASS_CENTERS[2], CLASS_RADII[2], CLASS_AMPS[2])

    # Joint solve for the class-1 gains: its full plane must score
    # LOGIT_SCALE on its own displaced blob and trail class 2's canonical
    # score by CLASS2_GAP on class 2's canonical blob.
    m = np.array([
        [resp(plane1, TEMPLATE_1_CENTER, CLASS_RADII[1], CLASS_AMPS[1]),
         resp(halo, TEMPLATE_1_CENTER, CLASS_RADII[1], CLASS_AMPS[1])],
        [resp(plane1, CLASS_CENTERS[2], CLASS_RADII[2], CLASS_AMPS[2]),
         resp(halo, CLASS_CENTERS[2], CLASS_RADII[2], CLASS_AMPS[2])],
    ])
    rhs = np.array([LOGIT_SCALE, LOGIT_SCALE + CLASS2_BIAS - CLASS2_GAP])
    g1, g_h = (float(v) for v in np.linalg.solve(m, rhs))

    def resp1(center: np.ndarray, r: float, a: float) -> float:
        return g1 * resp(plane1, center, r, a) + g_h * resp(halo, center, r, a)

    # Bump gain: beat the full class-1 field at class 1's canonical center
    # by BUMP_MARGIN, but never reach past the designed zone edge.
    gb_at_center = (resp1(CLASS_CENTERS[1], CLASS_RADII[1], CLASS_AMPS[1]) + BUMP_MARGIN) / \
        resp(bump, CLASS_CENTERS[1], CLASS_RADII[1], CLASS_AMPS[1])
    edge = CLASS_CENTERS[1] + BUMP_ZONE_RADIUS * AXIS_01
    gb_at_edge = resp1(edge, CLASS_RADII[1], CLASS_AMPS[1]) / \
        resp(bump, edge, CLASS_RADII[1], CLASS_AMPS[1])
    g_b = min(gb_at_center, gb_at_edge)

    weights = np.stack([
        g0 * plane0 + g_b * bump,
        g1 * plane1 + g_h * halo,
        g2 * plane2,
    ])
    biases = np.array([0.0, 0.0, CLASS2_BIAS])
    gains = np.array([g0, g1, g2, g_h, g_b])
    return {"mix": mix, "offsets": offsets, "weights": weights, "biases": biases,
            "gains": gains}


_CONSTANTS = _build_constants()


def blob_params(w: StyleCode) -> tuple[float, float, float, float]:
    """Read (cx, cy, radius, amp) from a style code's band means."""
    layers = w.layers
    if layers.shape != (NUM_LAYERS, STYLE_DIM):
        raise BackendContractError(
            f"style code shape {layers.shape} != ({NUM_LAYERS}, {STYLE_DIM})"
        )
    coarse = layers[list(COARSE_LAYERS)].mean(axis=0)
    middle = layers[list(MIDDLE_LAYERS)].mean(axis=0)
    fine = layers[list(FINE_LAYERS)].mean(axis=0)
    cx = float(np.clip(0.5 + CENTER_SCALE * coarse[0], *CENTER_CLIP))
    cy = float(np.clip(0.5 + CENTER_SCALE * coarse[1], *CENTER_CLIP))
    radius = float(np.clip(RADIUS_BASE + RADIUS_SCALE * middle[2], *RADIUS_CLIP))
    amp = float(np.clip(AMP_BASE + AMP_SCALE * fine[3], *AMP_CLIP))
    return cx, cy, radius, amp


class ToyGenerator(GeneratorBackend):
    """Latent-to-blob generator: affine style mapping, Gaussian rendering."""

    latent_dim = LATENT_DIM
    style_dim = STYLE_DIM
    num_layers = NUM_LAYERS
    num_classes = NUM_CLASSES
    image_shape = (IMAGE_SIZE, IMAGE_SIZE, 1)

    def __init__(self) -> None:
        self._mix = _CONSTANTS["mix"]
        self._offsets = _CONSTANTS["offsets"]

    def style_vector(self, z: np.ndarray, class_label: int) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.latent_dim,):
            raise BackendContractError(f"latent shape {z.shape} != ({self.latent_dim},)")
        if not 0 <= class_label < self.num_classes:
            raise BackendContractError(
                f"class_label {class_label} outside [0, {self.num_classes})"
            )
        return self._mix @ z + self._offsets[class_label]

    def synthesize(self, w: StyleCode, provenance: str = "baseline") -> Image:
        cx, cy, radius, amp = blob_params(w)
        pixels = _render_blob(cx, cy, radius, amp)
        return Image(pixels=pixels[:, :, None], provenance=provenance)


class ToyClassifier(ClassifierBackend):
    """Linear softmax over 2x2-pooled pixels with frozen weight planes."""

    num_classes = NUM_CLASSES
    input_shape = (IMAGE_SIZE, IMAGE_SIZE, 1)

    def __init__(self, weights: np.ndarray | None = None, biases: np.ndarray | None = None):
        w = _CONSTANTS["weights"] if weights is None else np.asarray(weights, dtype=np.float64)
        b = _CONSTANTS["biases"] if biases is None else np.asarray(biases, dtype=np.float64)
        if w.shape != (NUM_CLASSES, POOLED_SIZE, POOLED_SIZE):
            raise InvalidArgument(
                f"weights shape {w.shape} != ({NUM_CLASSES}, {POOLED_SIZE}, {POOLED_SIZE})"
            )
        if b.shape != (NUM_CLASSES,):
            raise InvalidArgument(f"biases shape {b.shape} != ({NUM_CLASSES},)")
        self.weights = w
        self.biases = b

    def logits(self, pixels: np.ndarray) -> np.ndarray:
        pooled = _pool(pixels[:, :, 0])
        return np.tensordot(self.weights, pooled, axes=([1, 2], [0, 1])) + self.biases

    def classify(self, x: Image) -> Prediction:
        if x.shape != self.input_shape:
            raise BackendContractError(f"image shape {x.shape} != {self.input_shape}")
        logit = self.logits(x.pixels)
        e = np.exp(logit - logit.max())
        return Prediction.from_probs(e / e.sum())


class ToyWorld:
    """Bundled toy generator + classifier with fixture helpers.

    The helpers exist so tests can place blobs exactly: the first four
    rows of the latent mixing matrix are invertible, so any target
    (center, radius, amplitude) has a unique preimage latent.
    """

    def __init__(self, generator: ToyGenerator, classifier: ToyClassifier):
        self.generator = generator
        self.classifier = classifier
        self._mix4_inv = np.linalg.inv(_CONSTANTS["mix"][:4, :])

    @classmethod
    def default(cls) -> "ToyWorld":
        return cls(ToyGenerator(), ToyClassifier())

    def seed_for_params(
        self,
        seed_id: int,
        class_label: int,
        center: tuple[float, float],
        radius: float | None = None,
        amp: float | None = None,
    ) -> LatentSeed:
        """Latent seed whose baseline blob has exactly these parameters."""
        if radius is None:
            radius = float(CLASS_RADII[class_label])
        if amp is None:
            amp = float(CLASS_AMPS[class_label])
        target = np.array([
            (center[0] - 0.5) / CENTER_SCALE,
            (center[1] - 0.5) / CENTER_SCALE,
            (radius - RADIUS_BASE) / RADIUS_SCALE,
            (amp - AMP_BASE) / AMP_SCALE,
        ])
        z = self._mix4_inv @ (target - _CONSTANTS["offsets"][class_label][:4])
        return LatentSeed(seed_id=seed_id, z=z, class_label=class_label)

    def amp_flip_threshold(self, center: tuple[float, float], radius: float) -> float:
        """Closed-form class-2-to-class-1 flip amplitude for a blob.

        Both logits are linear in amplitude while the blob peak stays at
        or below 1, so the boundary amplitude solves
        ``a * (resp2 - resp1) + bias2 - bias1 = 0`` with per-unit-amplitude
        responses; returns inf when class 2 can never win at this spot.
        """
        unit = _pool(_render_blob(center[0], center[1], radius, 1.0))
        w = self.classifier.weights
        b = self.classifier.biases
        slope = float(((w[2] - w[1]) * unit).sum())
        if slope <= 0.0:
            return float("inf")
        return (b[1] - b[2]) / slope

    def amp_family(
        self, seed_id: int = 0, center: tuple[float, float] | None = None,
        radius: float | None = None,
    ) -> tuple["AmpFamily", float]:
        """One-parameter latent family sweeping blob amplitude.

        Returns the family and the analytic parameter value where the
        classifier decision flips from class 2 to class 1.  The family
        direction is the latent preimage of the pure-amplitude style
        axis, so position and radius stay fixed along it.
        """
        if center is None:
            center = (float(CLASS_CENTERS[2][0]), float(CLASS_CENTERS[2][1]))
        if radius is None:
            radius = float(CLASS_RADII[2])
        base = self.seed_for_params(seed_id, 2, center, radius, float(CLASS_AMPS[2]))
        direction = self._mix4_inv @ np.array([0.0, 0.0, 0.0, 1.0])
        a_star = self.amp_flip_threshold(center, radius)
        base_amp_coord = (float(CLASS_AMPS[2]) - AMP_BASE) / AMP_SCALE
        t_star = (a_star - AMP_BASE) / AMP_SCALE - base_amp_coord
        return AmpFamily(base=base, direction=direction), float(t_star)

    def constants(self) -> dict:
        """JSON-safe snapshot of every frozen constant."""
        return {
            "constants_seed": CONSTANTS_SEED,
            "image_size": IMAGE_SIZE,
            "pool": POOL,
            "latent_dim": LATENT_DIM,
            "style_dim": STYLE_DIM,
            "num_layers": NUM_LAYERS,
            "num_classes": NUM_CLASSES,
            "bands": {"coarse": list(COARSE_LAYERS), "middle": list(MIDDLE_LAYERS),
                      "fine": list(FINE_LAYERS)},
            "center_scale": CENTER_SCALE,
            "radius_scale": RADIUS_SCALE,
            "amp_scale": AMP_SCALE,
            "radius_base": RADIUS_BASE,
            "amp_base": AMP_BASE,
            "class_centers": CLASS_CENTERS.tolist(),
            "class_radii": CLASS_RADII.tolist(),
            "class_amps": CLASS_AMPS.tolist(),
            "template_1_center": TEMPLATE_1_CENTER.tolist(),
            "gains": _CONSTANTS["gains"].tolist(),
            "biases": _CONSTANTS["biases"].tolist(),
            "mix": _CONSTANTS["mix"].tolist(),
            "offsets": _CONSTANTS["offsets"].tolist(),
            "weights_sha256_input": None,
        }

    def dump_constants(self, path: str | Path) -> None:
        payload = self.constants()
        import hashlib

        digest = hashlib.sha256(
            np.ascontiguousarray(_CONSTANTS["weights"]).tobytes()
        ).hexdigest()
        payload["weights_sha256_input"] = digest
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


class AmpFamily:
    """Latent line ``z(t) = base + t * direction`` sweeping amplitude only."""

    def __init__(self, base: LatentSeed, direction: np.ndarray):
        self.base = base
        self.direction = np.asarray(direction, dtype=np.float64)

    def seed(self, t: float, seed_id: int | None = None) -> LatentSeed:
        """Seed at parameter ``t``.

        Pass a distinct ``seed_id`` per ``t`` when rendering through a
        session: the render cache keys on the id, not the latent.
        """
        return LatentSeed(
            seed_id=self.base.seed_id if seed_id is None else seed_id,
            z=self.base.z + t * self.direction,
            class_label=self.base.class_label,
        )
