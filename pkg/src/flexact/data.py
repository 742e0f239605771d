"""Dataset construction: windowing, chronological splits and file loaders."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import DTYPE

IDX_IMAGE_MAGIC = 0x00000803


class DataError(ValueError):
    """Insufficient data or invalid generator parameters."""


class FormatError(DataError):
    """Malformed input file."""


@dataclass(frozen=True)
class WindowedSeries:
    inputs: np.ndarray  # N x window x d
    targets: np.ndarray  # N x d
    window: int

    @property
    def d(self) -> int:
        return self.targets.shape[1]

    def __len__(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class SplitIndices:
    train: range
    val: range
    test: range


def window_series(series, window: int = 10) -> WindowedSeries:
    """Pair every run of ``window`` rows with the row that follows it."""
    series = np.asarray(series, dtype=DTYPE)
    if series.ndim != 2:
        raise DataError(f"expected a T x d series, got shape {series.shape}")
    if window < 1:
        raise DataError("window must be positive")
    t = series.shape[0]
    if t <= window:
        raise DataError(f"series of length {t} is too short for window {window}")
    view = np.lib.stride_tricks.sliding_window_view(series, window, axis=0)  # (T-w+1) x d x w
    inputs = np.ascontiguousarray(view[: t - window].transpose(0, 2, 1))
    return WindowedSeries(inputs, series[window:].copy(), window)


def sequential_split(n: int) -> SplitIndices:
    """Contiguous 64/16/20 partition of ``range(n)`` in order."""
    if n < 5:
        raise DataError(f"need at least 5 examples to split, got {n}")
    n_train = int(np.floor(0.64 * n))
    n_val = int(np.floor(0.16 * n))
    return SplitIndices(range(0, n_train), range(n_train, n_train + n_val), range(n_train + n_val, n))


def load_idx_images(path) -> np.ndarray:
    """Read an IDX ``ubyte`` image file into an ``N x 1 x H x W`` array in [0, 1]."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header at offset {len(raw)} (need 16 bytes)")
    magic, n, h, w = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at offset 0 (expected 0x{IDX_IMAGE_MAGIC:08x})")
    expected = n * h * w
    payload = len(raw) - 16
    if payload != expected:
        raise FormatError(f"{path}: header promises {expected} pixel bytes after offset 16, found {payload}")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, 1, h, w)
    return pixels.astype(DTYPE) / 255.0


def save_idx_images(path, images) -> None:
    """Write images in [0, 1] (``N x H x W`` or ``N x 1 x H x W``) as IDX bytes."""
    images = np.asarray(images, dtype=DTYPE)
    if images.ndim == 4:
        if images.shape[1] != 1:
            raise DataError("IDX images must have a single channel")
        images = images[:, 0]
    n, h, w = images.shape
    pixels = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    Path(path).write_bytes(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, h, w) + pixels.tobytes())


def load_returns_csv(path) -> np.ndarray:
    """Load a header-plus-rows numeric CSV into a ``T x d`` array."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty file")
        d = len(header)
        rows = []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise FormatError(f"{path}: row {r} has {len(row)} cells, header has {d}")
            values = []
            for c, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise FormatError(f"{path}: non-numeric cell {cell!r} at row {r}, column {c}") from None
            rows.append(values)
    return np.array(rows, dtype=DTYPE).reshape(len(rows), d)


def synth_var_series(d: int, T: int, spectral_radius: float = 0.6, noise_sd: float = 1.0, seed=0) -> np.ndarray:
    """First-order vector autoregression ``x_t = A x_{t-1} + e_t`` from ``x_0 = 0``.

    ``A`` is a Gaussian matrix rescaled to the requested spectral radius, so
    the process is stationary. ``seed`` may be an int or a Generator.
    """
    if not 0.0 < spectral_radius < 1.0:
        raise DataError(f"spectral radius must lie in (0, 1), got {spectral_radius}")
    if d < 1 or T < 1:
        raise DataError("d and T must be positive")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    a *= spectral_radius / np.max(np.abs(np.linalg.eigvals(a)))
    noise = rng.standard_normal((T, d)) * noise_sd
    x = np.zeros((T, d))
    prev = np.zeros(d)
    for t in range(T):
        prev = a @ prev + noise[t]
        x[t] = prev
    return x


def var_matrix(d: int, spectral_radius: float, seed=0) -> np.ndarray:
    """The transition matrix :func:`synth_var_series` draws for the same seed."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    return a * (spectral_radius / np.max(np.abs(np.linalg.eigvals(a))))


def batches(n: int, batch_size: int, rng: np.random.Generator | None = None):
    """Contiguous mini-batch index arrays; shuffled when ``rng`` is given."""
    order = np.arange(n) if rng is None else rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]
