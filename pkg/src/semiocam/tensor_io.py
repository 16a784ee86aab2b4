"""Binary codecs: NPY v1.0 tensors, CIFAR-10 batches and PGM/PPM images.

Tensors are plain float32 ``numpy`` arrays (row-major, 1 to 4 dims, NCHW for
images). Gray maps are 2-D ``uint8`` arrays indexed ``[row, col]``.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NPY_MAGIC = b"\x93NUMPY"
CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_CLASSES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)


class FormatError(ValueError):
    """Raised when a byte stream does not follow the expected file format."""


@dataclass(frozen=True)
class Dataset:
    """Images of shape (N, C, H, W) scaled into [0, 1] plus integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, C, H, W), got shape {self.images.shape}")
        if len(self.labels) != self.images.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {self.images.shape[0]} images"
            )

    def __len__(self):
        return int(self.images.shape[0])

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.intp)
        return Dataset(self.images[index], self.labels[index])


def as_tensor(values) -> np.ndarray:
    """Validate and convert to a C-ordered float32 tensor."""
    t = np.ascontiguousarray(values, dtype=np.float32)
    if not 1 <= t.ndim <= 4:
        raise ValueError(f"tensors have 1 to 4 dims, got {t.ndim}")
    if 0 in t.shape:
        raise ValueError(f"every dim must be >= 1, got shape {t.shape}")
    return t


# -- NPY ---------------------------------------------------------------------

_NPY_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def read_npy(data: bytes) -> np.ndarray:
    """Decode an NPY v1.0 little-endian C-order float32/float64 payload.

    float64 payloads are narrowed to float32.
    """
    if len(data) < 10 or data[:6] != NPY_MAGIC:
        raise FormatError("magic: not an NPY file")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"version: only 1.0 is supported, got {major}.{minor}")
    (hlen,) = struct.unpack("<H", data[8:10])
    if len(data) < 10 + hlen:
        raise FormatError("header: truncated")
    try:
        header = ast.literal_eval(data[10:10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"header: unparsable dictionary ({exc})") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError("header: expected keys descr, fortran_order, shape")
    if header["fortran_order"] is not False:
        raise FormatError("fortran_order: only C-order arrays are supported")
    descr = header["descr"]
    if descr not in _NPY_DTYPES:
        raise FormatError(f"descr: unsupported dtype {descr!r} (need '<f4' or '<f8')")
    shape = header["shape"]
    if (not isinstance(shape, tuple) or not 1 <= len(shape) <= 4
            or not all(isinstance(d, int) and d >= 1 for d in shape)):
        raise FormatError(f"shape: need 1-4 positive dims, got {shape!r}")
    dtype = _NPY_DTYPES[descr]
    count = int(np.prod(shape))
    payload = data[10 + hlen:]
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"payload: expected {count * dtype.itemsize} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return arr.astype(np.float32)


def write_npy(tensor) -> bytes:
    """Encode as NPY v1.0 float32 C-order; header padded to 64-byte alignment."""
    t = as_tensor(tensor)
    shape = "(" + "".join(f"{d}, " for d in t.shape)
    shape = shape[:-2] + ",)" if t.ndim == 1 else shape[:-2] + ")"
    text = f"{{'descr': '<f4', 'fortran_order': False, 'shape': {shape}, }}"
    pad = -(10 + len(text) + 1) % 64
    header = (text + " " * pad + "\n").encode("latin1")
    return NPY_MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header + t.astype("<f4").tobytes()


def load_npy(path) -> np.ndarray:
    return read_npy(Path(path).read_bytes())


def save_npy(path, tensor) -> None:
    Path(path).write_bytes(write_npy(tensor))


# -- CIFAR-10 ------------------------------------------------------------------

def read_cifar10_batch(data: bytes) -> Dataset:
    """Decode a CIFAR-10 binary batch: per record 1 label byte + 3072 pixel bytes."""
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise FormatError(
            f"CIFAR-10 batch length {len(data)} is not a positive multiple of {CIFAR_RECORD}"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = raw[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise FormatError(f"record {bad[0]}: label byte {labels[bad[0]]} > 9")
    images = raw[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32) / np.float32(255)
    return Dataset(images, labels)


def write_cifar10_batch(dataset: Dataset) -> bytes:
    """Inverse of :func:`read_cifar10_batch` (pixels rounded to the nearest byte)."""
    if dataset.images.shape[1:] != (3, 32, 32):
        raise ValueError(f"CIFAR-10 images are (3, 32, 32), got {dataset.images.shape[1:]}")
    px = np.floor(np.clip(dataset.images, 0, 1) * 255.0 + 0.5).astype(np.uint8)
    out = np.empty((len(dataset), CIFAR_RECORD), dtype=np.uint8)
    out[:, 0] = dataset.labels
    out[:, 1:] = px.reshape(len(dataset), -1)
    return out.tobytes()


def load_cifar10_dir(directory, split: str = "train") -> Dataset:
    """Load ``data_batch_*.bin`` (train) or ``test_batch.bin`` (test) from a directory."""
    directory = Path(directory)
    if split == "train":
        files = sorted(directory.glob("data_batch_*.bin"))
    elif split == "test":
        files = [directory / "test_batch.bin"]
    else:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    files = [f for f in files if f.is_file()]
    if not files:
        raise FileNotFoundError(f"no CIFAR-10 {split} batches in {directory}")
    parts = [read_cifar10_batch(f.read_bytes()) for f in files]
    return Dataset(
        np.concatenate([p.images for p in parts]),
        np.concatenate([p.labels for p in parts]),
    )


def class_subset(dataset: Dataset, classes, per_class: int | None = None) -> Dataset:
    """Keep the first ``per_class`` images of each listed class, in file order."""
    keep = []
    for c in classes:
        idx = np.flatnonzero(dataset.labels == c)
        keep.append(idx if per_class is None else idx[:per_class])
    return dataset.subset(np.sort(np.concatenate(keep)))


# -- PGM / PPM -----------------------------------------------------------------

def as_graymap(values) -> np.ndarray:
    m = np.asarray(values)
    if m.ndim != 2 or 0 in m.shape:
        raise ValueError(f"gray map must be a non-empty 2-D grid, got shape {m.shape}")
    if m.dtype != np.uint8:
        if np.any(m < 0) or np.any(m > 255) or np.any(m != np.floor(m)):
            raise ValueError("gray map values must be integers in [0, 255]")
        m = m.astype(np.uint8)
    return np.ascontiguousarray(m)


def write_image(image, kind: str = "P5") -> bytes:
    """Binary PGM (``P5``, 2-D gray map) or PPM (``P6``, (H, W, 3) RGB) with maxval 255."""
    if kind == "P5":
        px = as_graymap(image)
    elif kind == "P6":
        px = np.asarray(image)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"PPM image must be (H, W, 3), got {px.shape}")
        px = np.ascontiguousarray(px, dtype=np.uint8)
    else:
        raise ValueError(f"kind must be 'P5' or 'P6', got {kind!r}")
    h, w = px.shape[:2]
    return f"{kind}\n{w} {h}\n255\n".encode("ascii") + px.tobytes()


def _read_pnm(data: bytes, magic: bytes) -> np.ndarray:
    if data[:2] != magic:
        raise FormatError(f"magic: expected {magic.decode()}, got {data[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError("header: truncated")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(f"header: unexpected byte {data[pos:pos + 1]!r}")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("header: missing whitespace before payload")
    pos += 1
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"maxval: only 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise FormatError(f"size: {w}x{h}")
    depth = 1 if magic == b"P5" else 3
    need = w * h * depth
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise FormatError(f"payload: expected {need} bytes, got {len(payload)}")
    px = np.frombuffer(payload, dtype=np.uint8)
    return px.reshape((h, w) if depth == 1 else (h, w, 3)).copy()


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a binary ``P5`` gray map with maxval 255; ``#`` comments allowed."""
    return _read_pnm(data, b"P5")


def read_ppm(data: bytes) -> np.ndarray:
    return _read_pnm(data, b"P6")
