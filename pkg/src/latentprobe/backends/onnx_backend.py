"""Backends loaded from exchange-format (ONNX) model files.

A manifest JSON names the model files and declares the tensor contract:
latent dimension, style dimension, layer count, class count, and image
shape.  The runtime is imported lazily so the rest of the package works
on machines without it; a missing runtime or model file raises a
BackendLoadError whose message says exactly what to install or fix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from latentprobe.backends.base import ClassifierBackend, GeneratorBackend, Image, Prediction
from latentprobe.errors import BackendContractError, BackendLoadError
from latentprobe.latent import StyleCode

MANIFEST_SCHEMA_VERSION = 1

_REQUIRED_FIELDS = (
    "schema_version", "mapping_model", "synthesis_model", "classifier_model",
    "latent_dim", "style_dim", "num_layers", "num_classes", "image_shape",
)


@dataclass(frozen=True)
class OnnxManifest:
    """Declared contract for a set of exchange-format model files."""

    mapping_model: Path
    synthesis_model: Path
    classifier_model: Path
    latent_dim: int
    style_dim: int
    num_layers: int
    num_classes: int
    image_shape: tuple[int, int, int]
    classifier_outputs_logits: bool = True


def load_manifest(path: str | Path) -> OnnxManifest:
    """Parse and validate a backend manifest; check model files exist."""
    path = Path(path)
    if not path.exists():
        raise BackendLoadError(f"backend manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise BackendLoadError(f"backend manifest {path} is not valid JSON: {exc}") from exc
    missing = [f for f in _REQUIRED_FIELDS if f not in raw]
    if missing:
        raise BackendLoadError(f"backend manifest {path} missing fields: {missing}")
    if raw["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise BackendLoadError(
            f"backend manifest schema version {raw['schema_version']} unsupported "
            f"(expected {MANIFEST_SCHEMA_VERSION})"
        )
    base = path.parent
    models = {}
    for key in ("mapping_model", "synthesis_model", "classifier_model"):
        model_path = base / raw[key]
        if not model_path.exists():
            raise BackendLoadError(
                f"model file {model_path} (manifest field {key!r}) does not exist"
            )
        models[key] = model_path
    shape = tuple(int(v) for v in raw["image_shape"])
    if len(shape) != 3:
        raise BackendLoadError(f"image_shape must have 3 entries, got {raw['image_shape']}")
    return OnnxManifest(
        mapping_model=models["mapping_model"],
        synthesis_model=models["synthesis_model"],
        classifier_model=models["classifier_model"],
        latent_dim=int(raw["latent_dim"]),
        style_dim=int(raw["style_dim"]),
        num_layers=int(raw["num_layers"]),
        num_classes=int(raw["num_classes"]),
        image_shape=shape,  # type: ignore[arg-type]
        classifier_outputs_logits=bool(raw.get("classifier_outputs_logits", True)),
    )


def _require_runtime():
    try:
        import onnxruntime  # noqa: PLC0415 deliberate lazy import
    except ImportError as exc:
        raise BackendLoadError(
            "the exchange-format runtime is not installed; install the "
            "'onnxruntime' package to load model-file backends, or use the "
            "built-in toy backend"
        ) from exc
    return onnxruntime


def _session(model_path: Path):
    rt = _require_runtime()
    try:
        return rt.InferenceSession(str(model_path), providers=["CPUExecutionProvider"])
    except Exception as exc:
        raise BackendLoadError(f"failed to load model file {model_path}: {exc}") from exc


class OnnxGenerator(GeneratorBackend):
    """Two-stage generator: a mapping model and a synthesis model.

    The mapping model takes (z, class index) and returns either a single
    style vector or a per-layer style matrix; the synthesis model takes
    the per-layer style matrix and returns an image in [0, 1] or [-1, 1]
    (rescaled and clamped here).
    """

    def __init__(self, manifest: OnnxManifest):
        self.manifest = manifest
        self.latent_dim = manifest.latent_dim
        self.style_dim = manifest.style_dim
        self.num_layers = manifest.num_layers
        self.num_classes = manifest.num_classes
        self.image_shape = manifest.image_shape
        self._mapping = _session(manifest.mapping_model)
        self._synthesis = _session(manifest.synthesis_model)

    def style_vector(self, z: np.ndarray, class_label: int) -> np.ndarray:
        feed = {
            self._mapping.get_inputs()[0].name: z[None].astype(np.float32),
            self._mapping.get_inputs()[1].name: np.array([class_label], dtype=np.int64),
        }
        out = self._mapping.run(None, feed)[0][0]
        w = np.asarray(out, dtype=np.float64)
        if w.ndim == 2:
            if not np.allclose(w, w[0]):
                raise BackendContractError(
                    "mapping model returned a non-uniform style matrix; "
                    "per-layer mapping outputs are not supported through style_vector"
                )
            w = w[0]
        return w

    def synthesize(self, w: StyleCode, provenance: str = "baseline") -> Image:
        feed = {self._synthesis.get_inputs()[0].name: w.layers[None].astype(np.float32)}
        out = np.asarray(self._synthesis.run(None, feed)[0][0], dtype=np.float64)
        if out.ndim == 3 and out.shape[0] in (1, 3):  # CHW -> HWC
            out = np.transpose(out, (1, 2, 0))
        if out.min() < 0.0:  # [-1, 1] convention
            out = (out + 1.0) / 2.0
        out = np.clip(out, 0.0, 1.0)
        if out.shape != self.image_shape:
            raise BackendContractError(
                f"synthesis output shape {out.shape} != declared {self.image_shape}"
            )
        return Image(pixels=out, provenance=provenance)


class OnnxClassifier(ClassifierBackend):
    """Single-model classifier over NCHW float input."""

    def __init__(self, manifest: OnnxManifest):
        self.manifest = manifest
        self.num_classes = manifest.num_classes
        self.input_shape = manifest.image_shape
        self._model = _session(manifest.classifier_model)

    def classify(self, x: Image) -> Prediction:
        if x.shape != self.input_shape:
            raise BackendContractError(f"image shape {x.shape} != {self.input_shape}")
        nchw = np.transpose(x.pixels, (2, 0, 1))[None].astype(np.float32)
        out = np.asarray(
            self._model.run(None, {self._model.get_inputs()[0].name: nchw})[0][0],
            dtype=np.float64,
        )
        if self.manifest.classifier_outputs_logits:
            e = np.exp(out - out.max())
            out = e / e.sum()
        return Prediction.from_probs(out)


def load_backends(manifest_path: str | Path) -> tuple[OnnxGenerator, OnnxClassifier]:
    manifest = load_manifest(manifest_path)
    return OnnxGenerator(manifest), OnnxClassifier(manifest)
