"""Power spectrograms from complex time series, and 8-bit grayscale images.

The spectrogram matrix is row = time window, column = frequency bin; with
``center_zero_freq`` the zero-frequency bin sits at column ``n_fft // 2``.
Images are written top-to-bottom in time order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numeric import round_half_away
from .sigsim import ComplexTimeSeries


@dataclass(frozen=True)
class SpectrogramConfig:
    n_fft: int = 512
    n_rows: int = 384
    center_zero_freq: bool = True
    power_map: str = "log10"
    log_floor: float = 1e-12

    def validate(self) -> None:
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError(f"n_fft must be a power of two >= 2, got {self.n_fft}")
        if self.n_rows < 1:
            raise ValueError("n_rows must be >= 1")
        if self.power_map not in ("log10", "linear"):
            raise ValueError(f"power_map must be 'log10' or 'linear', got {self.power_map!r}")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be > 0")


@dataclass
class Spectrogram:
    power: np.ndarray  # float64, shape (rows, cols)

    @property
    def rows(self) -> int:
        return int(self.power.shape[0])

    @property
    def cols(self) -> int:
        return int(self.power.shape[1])


@dataclass
class GrayImage:
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ValueError(f"GrayImage needs a 2-D pixel array, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            self.pixels = self.pixels.astype(np.uint8)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


def dft(window, n_fft: int | None = None) -> np.ndarray:
    """Unnormalized forward DFT, ``X[k] = sum_n x[n] exp(-2j pi k n / N)``."""
    x = np.asarray(window, dtype=np.complex128)
    if x.ndim != 1 or (n_fft is not None and x.shape[0] != n_fft):
        raise ValueError(f"expected a window of {n_fft} samples, got shape {x.shape}")
    return np.fft.fft(x)


def stft_power(series: ComplexTimeSeries, cfg: SpectrogramConfig = SpectrogramConfig()) -> Spectrogram:
    """Non-overlapping rectangular windows, ``|X[k]|**2`` per row."""
    cfg.validate()
    s = np.asarray(series.samples, dtype=np.complex128)
    if s.shape != (cfg.n_fft * cfg.n_rows,):
        raise ValueError(
            f"length mismatch: expected {cfg.n_fft * cfg.n_rows} samples, got {s.shape[0]}")
    spec = np.fft.fft(s.reshape(cfg.n_rows, cfg.n_fft), axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    if cfg.center_zero_freq:
        power = np.roll(power, cfg.n_fft // 2, axis=1)
    return Spectrogram(power)


def frequency_to_column(f, n_fft: int, center_zero_freq: bool = True):
    """Column holding the bin nearest normalized frequency ``f``."""
    k = np.mod(round_half_away(np.asarray(f) * n_fft), n_fft).astype(np.int64)
    if center_zero_freq:
        k = (k + n_fft // 2) % n_fft
    return k


def to_gray(spec: Spectrogram, cfg: SpectrogramConfig = SpectrogramConfig()) -> GrayImage:
    """Min-max map (log-)power to [0, 255]; a constant spectrogram maps to 0."""
    p = np.asarray(spec.power, dtype=np.float64)
    v = np.log10(p + cfg.log_floor) if cfg.power_map == "log10" else p
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return GrayImage(np.zeros(v.shape, dtype=np.uint8))
    return GrayImage(round_half_away(255.0 * (v - lo) / (hi - lo)).astype(np.uint8))


def write_pgm(path, img: GrayImage) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(img.pixels).tobytes())


def _header_tokens(data: bytes, count: int):
    """Split the first ``count`` whitespace-separated header fields, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def read_pgm(path) -> GrayImage:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {data[:2]!r})")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    raster = data[offset:]
    if len(raster) != width * height:
        raise ValueError(
            f"{path}: dimension mismatch, header {width}x{height} but {len(raster)} payload bytes")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy())


def write_png(path, img: GrayImage) -> None:
    """8-bit grayscale PNG, no alpha."""
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(img.pixels), mode="L").save(path, format="PNG")
