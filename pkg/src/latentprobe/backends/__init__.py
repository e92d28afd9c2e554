"""Generator and classifier backends.

``base`` defines the pluggable interfaces plus the render session with
its (seed, psi, cutoff) image cache.  ``toy`` is a deterministic
blob-world backend with an analytically known decision boundary, used by
the verification suites.  ``onnx_backend`` loads real networks from
exchange-format model files.
"""

from latentprobe.backends.base import (
    ClassifierBackend,
    GeneratorBackend,
    Image,
    Prediction,
    RenderSession,
    build_mean_styles,
)
from latentprobe.backends.toy import ToyClassifier, ToyGenerator, ToyWorld

__all__ = [
    "ClassifierBackend",
    "GeneratorBackend",
    "Image",
    "Prediction",
    "RenderSession",
    "ToyClassifier",
    "ToyGenerator",
    "ToyWorld",
    "build_mean_styles",
]
