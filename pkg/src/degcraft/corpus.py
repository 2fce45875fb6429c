"""Procedural stand-in for a high-quality image corpus.

No dataset ships with the package, so tests and demos use synthetic images
with natural-image-like statistics: a 1/f colour field, a smooth illumination
gradient and a stack of hard-edged shapes, some filled with fine texture.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imagecore import Image, ImageSet, save_image
from .rng import child_rng


def _pink_field(rng: np.random.Generator, h: int, w: int, beta: float) -> np.ndarray:
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    amp = f ** (-beta / 2.0)
    amp[0, 0] = 0.0
    spec = amp * (rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape))
    field = np.fft.irfft2(spec, s=(h, w))
    return field / (field.std() + 1e-12)


def synth_image(rng: np.random.Generator, size: int = 320) -> Image:
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w] / size
    base = rng.uniform(60, 190, size=3)
    img = np.empty((h, w, 3))
    grad_dir = rng.normal(size=2)
    gradient = (grad_dir[0] * (yy - 0.5) + grad_dir[1] * (xx - 0.5)) * rng.uniform(20, 60)
    for c in range(3):
        img[:, :, c] = base[c] + gradient + 18.0 * _pink_field(rng, h, w, rng.uniform(1.6, 2.4))

    for _ in range(rng.integers(8, 20)):
        colour = rng.uniform(0, 255, size=3)
        cy, cx = rng.uniform(0, 1, size=2)
        if rng.random() < 0.5:
            ry, rx = rng.uniform(0.03, 0.25, size=2)
            angle = rng.uniform(0, np.pi)
            dy, dx = yy - cy, xx - cx
            u = dx * np.cos(angle) + dy * np.sin(angle)
            v = -dx * np.sin(angle) + dy * np.cos(angle)
            mask = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
        else:
            hy, hx = rng.uniform(0.03, 0.2, size=2)
            mask = (np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)
        if rng.random() < 0.4:
            period = rng.uniform(3, 12)
            phase = rng.uniform(0, 2 * np.pi)
            theta = rng.uniform(0, np.pi)
            stripes = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) * size / period + phase)
            texture = rng.uniform(10, 40) * stripes
        else:
            texture = 8.0 * _pink_field(rng, h, w, 2.0)
        for c in range(3):
            img[:, :, c][mask] = colour[c] + texture[mask]
    return Image(np.floor(np.clip(img, 0, 255) + 0.5))


def make_corpus(count: int, seed: int, size: int = 320) -> ImageSet:
    """``count`` procedural images; image ``i`` depends only on ``(seed, i)``."""
    return ImageSet([synth_image(child_rng(seed, i), size) for i in range(count)], label=f"corpus:{seed}")


def write_corpus(out_dir, count: int, seed: int, size: int = 320) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = out / f"{i:06d}.png"
        save_image(synth_image(child_rng(seed, i), size), path)
        paths.append(path)
    return paths
