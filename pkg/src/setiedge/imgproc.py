"""Image preprocessing: Gaussian smoothing, edge enhancement, area resize.

All filters are 3x3 correlations with replicate borders.  Integer pixels are
produced with round-half-away-from-zero and saturating 8-bit casts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numeric import round_half_away, sat_u8
from .spectro import GrayImage

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int32)
SCHARR_X = np.array([[-3, 0, 3], [-10, 0, 10], [-3, 0, 3]], dtype=np.int32)
LAPLACE = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.int32)

OPERATORS = ("sobel", "scharr", "laplace")
ARMS = ("origin",) + OPERATORS

BORDER_MODES = ("replicate",)


@dataclass(frozen=True)
class GaussianConfig:
    sigma: float = 1.0
    size: int = 3

    def validate(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.size != 3:
            raise ValueError("only 3x3 Gaussian kernels are supported")


@dataclass(frozen=True)
class EdgeConfig:
    operator: str = "sobel"
    alpha: float = 0.5
    beta: float = 0.5

    def validate(self) -> None:
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown edge operator {self.operator!r}; expected one of {OPERATORS}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")


def gaussian_weights(sigma: float) -> np.ndarray:
    """Unnormalized 3x3 weights ``exp(-(x^2 + y^2) / (2 sigma^2))``, x, y in {-1, 0, 1}."""
    x = np.arange(-1, 2, dtype=np.float64)
    r2 = x[:, None] ** 2 + x[None, :] ** 2
    return np.exp(-r2 / (2.0 * sigma * sigma))


def gaussian_kernel(cfg: GaussianConfig = GaussianConfig()) -> np.ndarray:
    # the 1/(2 pi sigma^2) prefactor cancels in the normalization
    cfg.validate()
    w = gaussian_weights(cfg.sigma)
    return w / w.sum()


def _check_border(border: str) -> None:
    if border not in BORDER_MODES:
        raise ValueError(f"unsupported border mode {border!r}")


def correlate3(plane: np.ndarray, kernel: np.ndarray, border: str = "replicate") -> np.ndarray:
    """3x3 correlation, ``out[i, j] = sum k[a, b] * in[i + a - 1, j + b - 1]``.

    Integer kernels run in int64 then narrow to int32; float kernels in float64.
    """
    _check_border(border)
    plane = np.asarray(plane)
    if plane.ndim != 2 or plane.size == 0:
        raise ValueError("expected a non-empty 2-D image")
    integer = np.issubdtype(np.asarray(kernel).dtype, np.integer)
    acc_t = np.int64 if integer else np.float64
    padded = np.pad(plane.astype(acc_t), 1, mode="edge")
    h, w = plane.shape
    out = np.zeros((h, w), dtype=acc_t)
    for a in range(3):
        for b in range(3):
            k = kernel[a, b]
            if k:
                out += k * padded[a:a + h, b:b + w]
    return out.astype(np.int32) if integer else out


def smooth_gaussian(img: GrayImage, cfg: GaussianConfig = GaussianConfig(),
                    border: str = "replicate") -> GrayImage:
    out = correlate3(img.pixels, gaussian_kernel(cfg), border)
    return GrayImage(sat_u8(round_half_away(out)))


def directional_response(img: GrayImage, operator: str, axis: str,
                         border: str = "replicate") -> np.ndarray:
    """Signed int32 gradient plane; the y kernels are the transposed x kernels."""
    kernels = {"sobel": SOBEL_X, "scharr": SCHARR_X}
    if operator not in kernels:
        raise ValueError(f"directional operator must be 'sobel' or 'scharr', got {operator!r}")
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    k = kernels[operator] if axis == "x" else kernels[operator].T
    return correlate3(img.pixels, k, border)


def laplace_response(img: GrayImage, border: str = "replicate") -> np.ndarray:
    return correlate3(img.pixels, LAPLACE, border)


def edge_enhance(img: GrayImage, cfg: EdgeConfig = EdgeConfig(),
                 border: str = "replicate") -> GrayImage:
    """Edge map as uint8.

    Sobel/Scharr: ``sat(round(alpha * sat(|Gx|) + beta * sat(|Gy|)))``, each
    direction saturated before the blend.  Laplace: ``sat(|L|)``.
    """
    cfg.validate()
    if cfg.operator == "laplace":
        return GrayImage(sat_u8(np.abs(laplace_response(img, border))))
    u = sat_u8(np.abs(directional_response(img, cfg.operator, "x", border)))
    v = sat_u8(np.abs(directional_response(img, cfg.operator, "y", border)))
    blend = cfg.alpha * u.astype(np.float64) + cfg.beta * v.astype(np.float64)
    return GrayImage(sat_u8(round_half_away(blend)))


def _bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape
    # half-pixel centres, edge-clamped
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    s = src.astype(np.float64)
    top = s[y0][:, x0] * (1 - fx) + s[y0][:, x1] * fx
    bot = s[y1][:, x0] * (1 - fx) + s[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_area(img: GrayImage, out_h: int = 128, out_w: int = 256) -> GrayImage:
    """Block-mean downscale when the factors are integral, bilinear otherwise."""
    if out_h <= 0 or out_w <= 0:
        raise ValueError("output dimensions must be positive")
    h, w = img.height, img.width
    if h % out_h == 0 and w % out_w == 0:
        fh, fw = h // out_h, w // out_w
        blocks = img.pixels.astype(np.float64).reshape(out_h, fh, out_w, fw)
        out = blocks.sum(axis=(1, 3)) / (fh * fw)
    else:
        out = _bilinear(img.pixels, out_h, out_w)
    return GrayImage(sat_u8(round_half_away(out)))


@dataclass(frozen=True)
class Pipeline:
    """Smoothing, optional edge enhancement, then resize.  ``edge=None`` is the origin arm."""

    gaussian: GaussianConfig = GaussianConfig()
    edge: Optional[EdgeConfig] = None
    out_h: int = 128
    out_w: int = 256

    @classmethod
    def for_arm(cls, arm: str, sigma: float = 1.0, alpha: float = 0.5, beta: float = 0.5,
                out_h: int = 128, out_w: int = 256) -> "Pipeline":
        if arm not in ARMS:
            raise ValueError(f"unknown preprocessing arm {arm!r}; expected one of {ARMS}")
        edge = None if arm == "origin" else EdgeConfig(arm, alpha, beta)
        return cls(GaussianConfig(sigma), edge, out_h, out_w)


def preprocess(img: GrayImage, pipeline: Pipeline = Pipeline()) -> GrayImage:
    out = smooth_gaussian(img, pipeline.gaussian)
    if pipeline.edge is not None:
        out = edge_enhance(out, pipeline.edge)
    return resize_area(out, pipeline.out_h, pipeline.out_w)

