"""Synthetic narrowband signal simulator.

Seven signal classes are generated as complex baseband time series of
``n_fft * n_rows`` samples.  Each tone follows a per-window frequency
trajectory (the frequency is held constant inside one window of ``n_fft``
samples), is optionally gated in time, and is buried in circular Gaussian
noise with unit deviation per component.

Series can be quantized to interleaved signed 8-bit (re, im) pairs and stored
as a raw payload next to a ``.meta.json`` sidecar.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .numeric import round_half_away


class SignalClass(enum.IntEnum):
    BRIGHTPIXEL = 0
    NARROWBAND = 1
    NARROWBANDDRD = 2
    NOISE = 3
    SQUAREPULSEDNARROWBAND = 4
    SQUIGGLE = 5
    SQUIGGLESQUAREPULSEDNARROWBAND = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "SignalClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown signal class {label!r}") from None


CLASS_LABELS = tuple(c.label for c in SignalClass)

_SQUIGGLE_CLASSES = (SignalClass.SQUIGGLE, SignalClass.SQUIGGLESQUAREPULSEDNARROWBAND)
_PULSED_CLASSES = (SignalClass.SQUAREPULSEDNARROWBAND, SignalClass.SQUIGGLESQUAREPULSEDNARROWBAND)


@dataclass(frozen=True)
class SimParams:
    """Simulation knobs for one sample.

    ``snr_db`` is the tone amplitude over the unit noise deviation,
    ``A = 10**(snr_db / 20)``.  ``snr_db = math.inf`` disables the noise and
    uses ``A = 1``.  Frequencies are in cycles/sample; rates are per window.
    """

    n_fft: int = 512
    n_rows: int = 384
    snr_db: float = 15.0
    f_start: float = 0.0
    drift_rate: float = 0.0
    curvature: float = 0.0
    squiggle_step_std: float = 0.002
    squiggle_smooth_len: int = 8
    pulse_period: int = 32
    pulse_duty: float = 0.5
    brightpixel_windows: int = 16
    rng_seed: int = 0

    @property
    def n_samples(self) -> int:
        return self.n_fft * self.n_rows

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db) and self.snr_db > 0

    @property
    def amplitude(self) -> float:
        return 1.0 if self.noiseless else 10.0 ** (self.snr_db / 20.0)

    def validate(self) -> None:
        if self.n_fft < 2 or self.n_rows < 1:
            raise ValueError("n_fft must be >= 2 and n_rows >= 1")
        if not -0.5 <= self.f_start < 0.5:
            raise ValueError(f"f_start must lie in [-0.5, 0.5), got {self.f_start}")
        if not 0.0 < self.pulse_duty < 1.0:
            raise ValueError(f"pulse_duty must lie in (0, 1), got {self.pulse_duty}")
        if self.pulse_period < 1:
            raise ValueError("pulse_period must be >= 1")
        if self.squiggle_step_std < 0:
            raise ValueError("squiggle_step_std must be >= 0")
        if self.squiggle_smooth_len < 1:
            raise ValueError("squiggle_smooth_len must be >= 1")
        if not 1 <= self.brightpixel_windows <= self.n_rows:
            raise ValueError("brightpixel_windows must lie in [1, n_rows]")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("snr_db must be a number or +inf")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["snr_db"]):
            d["snr_db"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in names}
        if kw.get("snr_db") == "inf":
            kw["snr_db"] = math.inf
        return cls(**kw)


@dataclass
class ComplexTimeSeries:
    samples: np.ndarray  # complex128, shape (n,)

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])


@dataclass
class Complex8Series:
    codes: np.ndarray  # int8, shape (n, 2) as (re, im)
    scale: float
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return int(self.codes.shape[0])

    def dequantize(self) -> ComplexTimeSeries:
        c = self.codes.astype(np.float64) / self.scale
        return ComplexTimeSeries(c[:, 0] + 1j * c[:, 1])


def wrap_frequency(f):
    """Wrap normalized frequencies into [-0.5, 0.5)."""
    f = np.asarray(f, dtype=np.float64)
    return np.mod(f + 0.5, 1.0) - 0.5


def trailing_mean(x: np.ndarray, length: int) -> np.ndarray:
    """Moving average over the last ``length`` values (shorter at the start)."""
    c = np.concatenate(([0.0], np.cumsum(x, dtype=np.float64)))
    idx = np.arange(1, x.shape[0] + 1)
    lo = np.maximum(idx - length, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def _trajectory(cls: SignalClass, params: SimParams, rng: np.random.Generator) -> np.ndarray:
    if cls == SignalClass.NOISE:
        return np.empty(0)
    w = np.arange(params.n_rows, dtype=np.float64)
    f = params.f_start + params.drift_rate * w
    if cls == SignalClass.NARROWBANDDRD:
        f = f + params.curvature * w * w
    elif cls in _SQUIGGLE_CLASSES:
        steps = rng.normal(0.0, params.squiggle_step_std, params.n_rows)
        f = f + trailing_mean(np.cumsum(steps), params.squiggle_smooth_len)
    return wrap_frequency(f)


def frequency_trajectory(cls: SignalClass, params: SimParams) -> np.ndarray:
    """Per-window carrier frequency of ``cls``; empty for pure noise."""
    params.validate()
    return _trajectory(SignalClass(cls), params, np.random.default_rng(params.rng_seed))


def pulse_gate(params: SimParams) -> np.ndarray:
    """Square-pulse mask per window: on for the first ``duty`` share of each period."""
    w = np.arange(params.n_rows)
    return (w % params.pulse_period) < params.pulse_duty * params.pulse_period


def simulate(cls: SignalClass, params: SimParams) -> ComplexTimeSeries:
    """Generate one sample of ``cls``.

    The random stream is consumed in a fixed order (squiggle walk, burst
    start, initial phase, noise) so a given seed is bit-reproducible.
    """
    params.validate()
    cls = SignalClass(cls)
    rng = np.random.default_rng(params.rng_seed)
    n_fft, n_rows = params.n_fft, params.n_rows

    freqs = _trajectory(cls, params, rng)
    out = np.zeros(params.n_samples, dtype=np.complex128)

    if cls != SignalClass.NOISE:
        gate = np.ones(n_rows, dtype=bool)
        if cls in _PULSED_CLASSES:
            gate = pulse_gate(params)
        elif cls == SignalClass.BRIGHTPIXEL:
            start = int(rng.integers(0, n_rows - params.brightpixel_windows + 1))
            gate = np.zeros(n_rows, dtype=bool)
            gate[start:start + params.brightpixel_windows] = True
        phase0 = rng.uniform(0.0, 1.0)
        # phase in cycles at the first sample of each window, reduced mod 1
        starts = np.mod(phase0 + np.concatenate(([0.0], np.cumsum(freqs[:-1] * n_fft))), 1.0)
        j = np.arange(n_fft, dtype=np.float64)
        cycles = starts[:, None] + freqs[:, None] * j[None, :]
        tone = np.exp(2j * np.pi * cycles) * gate[:, None]
        out += params.amplitude * tone.reshape(-1)

    if not params.noiseless:
        z = rng.standard_normal((params.n_samples, 2))
        out += z[:, 0] + 1j * z[:, 1]
    return ComplexTimeSeries(out)


def quantize(series: ComplexTimeSeries) -> Complex8Series:
    """Map ``4 * RMS`` to code 127, round half away from zero, clip to int8."""
    s = np.asarray(series.samples)
    if not np.all(np.isfinite(s)):
        raise ValueError("series contains non-finite samples")
    rms = math.sqrt(float(np.mean(np.abs(s) ** 2))) if s.size else 0.0
    if rms == 0.0:
        raise ValueError("cannot quantize an all-zero series: scale is undefined")
    scale = 127.0 / (4.0 * rms)
    parts = np.stack([s.real, s.imag], axis=1) * scale
    codes = np.clip(round_half_away(parts), -128, 127).astype(np.int8)
    return Complex8Series(codes, scale)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_c8(path, c8: Complex8Series, sidecar: dict | None = None) -> None:
    """Write the little-endian int8 payload and its ``.meta.json`` sidecar."""
    path = Path(path)
    meta = dict(sidecar or {})
    meta.update(n_samples=c8.length, scale=c8.scale, format="c8-interleaved-le")
    path.write_bytes(np.ascontiguousarray(c8.codes, dtype=np.int8).tobytes())
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_c8(path) -> Complex8Series:
    path = Path(path)
    try:
        meta = json.loads(sidecar_path(path).read_text())
        n = int(meta["n_samples"])
        scale = float(meta["scale"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed sidecar for {path}: {exc}") from exc
    payload = path.read_bytes()
    if len(payload) != 2 * n:
        raise ValueError(
            f"length mismatch in {path}: sidecar says {n} samples "
            f"({2 * n} bytes), payload has {len(payload)} bytes")
    if not scale > 0:
        raise ValueError(f"malformed sidecar for {path}: scale must be > 0")
    codes = np.frombuffer(payload, dtype=np.int8).reshape(n, 2).copy()
    return Complex8Series(codes, scale, meta)


def derive_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit per-sample seed from the master seed and sample index."""
    h = hashlib.blake2b(f"{master_seed}:{index}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def sample_params(ranges: dict, rng: np.random.Generator, base: SimParams) -> SimParams:
    """Draw per-sample parameters from config ranges.

    Each entry is ``[lo, hi]`` (uniform; integers if both bounds are ints) or
    ``{"magnitude": [lo, hi]}`` for a uniform magnitude with a random sign.
    Keys are visited in sorted order so the draw sequence is stable.
    """
    names = {f.name for f in fields(SimParams)}
    updates = {}
    for key in sorted(ranges):
        if key not in names:
            raise ValueError(f"unknown simulation parameter {key!r} in ranges")
        spec = ranges[key]
        signed = isinstance(spec, dict)
        lo, hi = spec["magnitude"] if signed else spec
        if isinstance(lo, int) and isinstance(hi, int):
            value = int(rng.integers(lo, hi + 1))
        else:
            value = float(rng.uniform(lo, hi))
        if signed and rng.random() < 0.5:
            value = -value
        updates[key] = value
    return replace(base, **updates)
