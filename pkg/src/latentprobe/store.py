"""Deterministic image persistence with opaque content-hash ids.

Images are persisted as lossless 8-bit PNG rasters.  Every image gets an
opaque id: the SHA-256 of its quantized pixel bytes plus a shape header.
Ids therefore depend only on image content, never on encoder details or
filenames, and the annotation service can serve images by id without
leaking any generation metadata.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from latentprobe.backends.base import Image
from latentprobe.errors import InvalidArgument

INDEX_NAME = "index.json"


def quantize(pixels: np.ndarray) -> np.ndarray:
    """Round [0,1] float pixels to 8-bit integers."""
    px = np.asarray(pixels, dtype=np.float64)
    return np.clip(np.rint(px * 255.0), 0, 255).astype(np.uint8)


def image_id(image: Image | np.ndarray) -> str:
    """Opaque content id: SHA-256 over shape header + quantized pixels."""
    px = image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    if px.ndim == 2:
        px = px[:, :, None]
    q = quantize(px)
    header = f"{q.shape[0]}x{q.shape[1]}x{q.shape[2]}:".encode()
    return hashlib.sha256(header + q.tobytes()).hexdigest()


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode quantized pixels as PNG bytes (grayscale or RGB)."""
    q = quantize(pixels if pixels.ndim == 3 else pixels[:, :, None])
    if q.shape[2] == 1:
        img = PILImage.fromarray(q[:, :, 0], mode="L")
    elif q.shape[2] == 3:
        img = PILImage.fromarray(q, mode="RGB")
    else:
        raise InvalidArgument(f"unsupported channel count {q.shape[2]}")
    from io import BytesIO

    buf = BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes back to float pixels in [0,1], shape HxWxC."""
    from io import BytesIO

    img = PILImage.open(BytesIO(data))
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


class ImageStore:
    """Directory of PNG files plus an id -> filename index.

    ``save`` is idempotent per id; the first filename wins.  Safe for
    concurrent writers within one process.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index: dict[str, str] = {}
        self._lock = threading.Lock()
        index_path = self.root / INDEX_NAME
        if index_path.exists():
            self._index = json.loads(index_path.read_text())

    def save(self, image: Image | np.ndarray, filename: str | None = None) -> str:
        px = image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        iid = image_id(px)
        name = filename if filename is not None else f"{iid}.png"
        with self._lock:
            if iid in self._index:
                return iid
            (self.root / name).write_bytes(encode_png(px))
            self._index[iid] = name
            self._write_index()
        return iid

    def _write_index(self) -> None:
        payload = json.dumps(dict(sorted(self._index.items())), indent=0, sort_keys=True)
        (self.root / INDEX_NAME).write_text(payload + "\n")

    def __contains__(self, iid: str) -> bool:
        return iid in self._index

    def ids(self) -> list[str]:
        return sorted(self._index)

    def path(self, iid: str) -> Path:
        if iid not in self._index:
            raise KeyError(f"unknown image id {iid!r}")
        return self.root / self._index[iid]

    def load_bytes(self, iid: str) -> bytes:
        return self.path(iid).read_bytes()

    def load_pixels(self, iid: str) -> np.ndarray:
        return decode_png(self.load_bytes(iid))
