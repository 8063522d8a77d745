"""Reader for the big-endian IDX files MNIST ships in."""

from __future__ import annotations

import struct

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    """Malformed IDX input; ``code`` is BAD_MAGIC, DIM_MISMATCH or TRUNCATED_FILE."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def _read(path, magic: int, n_dims: int) -> tuple[tuple[int, ...], bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 + 4 * n_dims:
        raise IdxError("TRUNCATED_FILE", f"{path}: header too short")
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise IdxError("BAD_MAGIC", f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{n_dims}I", data[4:4 + 4 * n_dims])
    body = data[4 + 4 * n_dims:]
    need = int(np.prod(dims, dtype=np.int64))
    if len(body) < need:
        raise IdxError("TRUNCATED_FILE", f"{path}: {len(body)} payload bytes, expected {need}")
    return dims, body[:need]


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(features, labels)``: ``(n, rows*cols)`` floats in [0, 1] and ``n`` ints."""
    (n_img, rows, cols), pix = _read(images_path, IMAGES_MAGIC, 3)
    (n_lab,), lab = _read(labels_path, LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise IdxError("DIM_MISMATCH", f"{n_img} images but {n_lab} labels")
    x = np.frombuffer(pix, dtype=np.uint8).reshape(n_img, rows * cols) / 255.0
    y = np.frombuffer(lab, dtype=np.uint8).astype(np.int64)
    return x, y


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write ``uint8`` images ``(n, rows, cols)`` and labels ``(n,)`` as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())
