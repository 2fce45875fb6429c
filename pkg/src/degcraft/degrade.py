"""Degradation operators: Gaussian blur, bicubic downsampling, additive noise, JPEG.

:func:`apply` composes them as blur -> downsample -> noise -> JPEG.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .imagecore import Image, decode_jpeg, encode_jpeg

KERNEL_RADIUS = 10


@dataclass(frozen=True)
class DegradationParams:
    sigma: float
    noise_level: float
    jpeg_quality: int
    scale: int = 4

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not np.isfinite(self.noise_level) or self.noise_level < 0:
            raise ParameterError(f"noise_level must be >= 0, got {self.noise_level}")
        if int(self.jpeg_quality) != self.jpeg_quality or not 1 <= self.jpeg_quality <= 100:
            raise ParameterError(f"jpeg_quality must be an integer in 1..100, got {self.jpeg_quality}")
        if int(self.scale) != self.scale or self.scale < 1:
            raise ParameterError(f"scale must be an integer >= 1, got {self.scale}")
        object.__setattr__(self, "jpeg_quality", int(self.jpeg_quality))
        object.__setattr__(self, "scale", int(self.scale))


@dataclass(frozen=True, eq=False)
class BlurKernel:
    radius: int
    taps: np.ndarray
    # 1-D factor when taps == outer(factor, factor); enables the separable path
    factor: np.ndarray | None = None


def _gaussian_1d(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        expo = (x * x) / (2.0 * sigma * sigma)
    # tiny sigmas overflow the exponent; the centre term is exactly exp(0)
    expo[radius] = 0.0
    g = np.exp(-expo)
    return g / g.sum()


def gaussian_kernel(sigma: float, radius: int = KERNEL_RADIUS) -> BlurKernel:
    """Isotropic Gaussian on a fixed ``(2*radius+1)``-square support, summing to 1.

    ``sigma == 0`` gives the delta kernel.
    """
    if not np.isfinite(sigma) or sigma < 0:
        raise ParameterError(f"blur sigma must be >= 0, got {sigma}")
    size = 2 * radius + 1
    if sigma == 0:
        factor = np.zeros(size)
        factor[radius] = 1.0
        return BlurKernel(radius, np.outer(factor, factor), factor)
    factor = _gaussian_1d(sigma, radius)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        expo = (x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * sigma * sigma)
    expo[radius, radius] = 0.0
    taps = np.exp(-expo)
    taps /= taps.sum()
    return BlurKernel(radius, taps, factor)


def convolve(img: Image, k: BlurKernel) -> Image:
    """Per-channel 2-D correlation with reflect-101 padding; output keeps the input size."""
    data = img.data
    if k.factor is not None:
        out = ndimage.correlate1d(data, k.factor, axis=0, mode="mirror")
        out = ndimage.correlate1d(out, k.factor, axis=1, mode="mirror")
    else:
        out = np.empty_like(data)
        for c in range(data.shape[2]):
            out[:, :, c] = ndimage.correlate(data[:, :, c], k.taps, mode="mirror")
    return Image(out)


def cubic_weight(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x < 1, near, np.where(x < 2, far, 0.0))


@lru_cache(maxsize=64)
def _resample_matrix(n_in: int, n_out: int, scale: int) -> np.ndarray:
    # pixel-centre alignment, edge samples replicated
    centres = (np.arange(n_out) + 0.5) * scale - 0.5
    base = np.floor(centres).astype(int)
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for offset in (-1, 0, 1, 2):
        idx = base + offset
        w = cubic_weight(centres - idx)
        np.add.at(m, (rows, np.clip(idx, 0, n_in - 1)), w)
    m.setflags(write=False)
    return m


def downsample(img: Image, scale: int) -> Image:
    """Bicubic (Catmull-Rom) resampling to ``(floor(w/scale), floor(h/scale))``."""
    if int(scale) != scale or scale < 1:
        raise ParameterError(f"scale must be an integer >= 1, got {scale}")
    scale = int(scale)
    if scale == 1:
        return Image(img.data.copy())
    if img.width < scale or img.height < scale:
        raise ParameterError(f"{img.width}x{img.height} image too small for scale {scale}")
    my = _resample_matrix(img.height, img.height // scale, scale)
    mx = _resample_matrix(img.width, img.width // scale, scale)
    h, w, c = img.data.shape
    out = (my @ img.data.reshape(h, w * c)).reshape(-1, w, c)
    out = np.matmul(mx, out)
    return Image(np.clip(out, 0.0, 255.0))


def add_noise(img: Image, level: float, rng: np.random.Generator) -> Image:
    """Add i.i.d. N(0, level^2) per pixel and channel, then clamp to [0, 255].

    ``level == 0`` returns a copy without consuming the stream.
    """
    if not np.isfinite(level) or level < 0:
        raise ParameterError(f"noise level must be >= 0, got {level}")
    if level == 0:
        return Image(img.data.copy())
    noisy = img.data + rng.standard_normal(img.data.shape) * level
    return Image(np.clip(noisy, 0.0, 255.0))


def jpeg_roundtrip(img: Image, quality: int) -> Image:
    return decode_jpeg(encode_jpeg(img, quality))


def apply(img: Image, params: DegradationParams, rng: np.random.Generator) -> Image:
    out = img
    if params.sigma > 0:
        out = convolve(out, gaussian_kernel(params.sigma))
    out = downsample(out, params.scale)
    out = add_noise(out, params.noise_level, rng)
    return jpeg_roundtrip(out, params.jpeg_quality)
