"""Boundary test-input generation for image classifiers.

Explores a style-based generator's intermediate latent space under
truncation regularization, locates classifier decision-boundary inputs
via style-mix binary search or truncation-only first-flip descent,
screens candidates automatically, and aggregates validity / diversity /
fault-detection reports from human verdicts.
"""

from latentprobe.errors import (
    BackendContractError,
    BackendError,
    BackendLoadError,
    InvalidArgument,
    LatentProbeError,
)

__version__ = "0.1.0"

__all__ = [
    "BackendContractError",
    "BackendError",
    "BackendLoadError",
    "InvalidArgument",
    "LatentProbeError",
    "__version__",
]
