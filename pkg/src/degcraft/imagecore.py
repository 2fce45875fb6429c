"""Image container, PNG/JPEG file I/O and random patch extraction.

Pixels live in a float64 ``(height, width, channels)`` array holding values in
``[0, 255]``.  Quantization to 8 bits only happens when an image is encoded.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import CodecError, DecodeError, IOFailure, ParameterError, ShapeError, SizingError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(eq=False)
class Image:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ShapeError(f"expected (H, W, 1|3) pixel array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError("image must be at least 1x1")
        if not np.all(np.isfinite(data)):
            raise ParameterError("image contains non-finite values")
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def clamp(self) -> Image:
        return Image(np.clip(self.data, 0.0, 255.0))

    def to_rgb(self) -> Image:
        if self.channels == 3:
            return self
        return Image(np.repeat(self.data, 3, axis=2))

    def to_uint8(self) -> np.ndarray:
        """Clamp and round half away from zero (values are non-negative)."""
        return np.floor(np.clip(self.data, 0.0, 255.0) + 0.5).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


@dataclass(eq=False)
class ImageSet:
    items: list[Image]
    label: str = ""
    # (source index, top, left) per patch when produced by extract_patches
    origins: list[tuple[int, int, int]] | None = field(default=None)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def require_nonempty(self) -> None:
        if not self.items:
            raise SizingError(f"image set {self.label!r} is empty")


def _from_pil(pil: PILImage.Image, name: str) -> Image:
    if pil.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
        raise DecodeError(f"{name}: unsupported bit depth (mode {pil.mode})")
    if pil.mode == "L":
        arr = np.asarray(pil, dtype=np.uint8)[:, :, None]
    else:
        arr = np.asarray(pil.convert("RGB"), dtype=np.uint8)
    return Image(arr.astype(np.float64))


def load_image(path) -> Image:
    """Decode a PNG or JPEG file; grayscale stays single-channel."""
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            if pil.format not in ("PNG", "JPEG"):
                raise DecodeError(f"{path}: unsupported format {pil.format}")
            pil.load()
            return _from_pil(pil, str(path))
    except (UnidentifiedImageError, OSError) as e:
        if isinstance(e, IOFailure):
            raise
        raise DecodeError(f"{path}: cannot decode image ({e})") from e


def _to_pil(img: Image) -> PILImage.Image:
    arr = img.to_uint8()
    if img.channels == 1:
        return PILImage.fromarray(arr[:, :, 0], mode="L")
    return PILImage.fromarray(arr, mode="RGB")


def save_image(img: Image, path, format: str = "PNG", quality: int = 95) -> None:
    path = Path(path)
    format = format.upper()
    if format == "JPG":
        format = "JPEG"
    if format not in ("PNG", "JPEG"):
        raise ParameterError(f"unsupported output format {format}")
    pil = _to_pil(img)
    try:
        if format == "PNG":
            pil.save(path, format="PNG")
        else:
            _check_quality(quality)
            pil.save(path, format="JPEG", quality=int(quality), subsampling=2, optimize=False)
    except OSError as e:
        raise IOFailure(f"cannot write {path}: {e}") from e


def _check_quality(quality) -> None:
    if int(quality) != quality or not 1 <= quality <= 100:
        raise ParameterError(f"JPEG quality must be an integer in 1..100, got {quality}")


def encode_jpeg(img: Image, quality: int) -> bytes:
    """Baseline JFIF bytes, 4:2:0 chroma for colour input."""
    _check_quality(quality)
    buf = io.BytesIO()
    try:
        _to_pil(img).save(buf, format="JPEG", quality=int(quality), subsampling=2, optimize=False)
    except OSError as e:
        raise CodecError(f"JPEG encode failed: {e}") from e
    return buf.getvalue()


def decode_jpeg(payload: bytes) -> Image:
    try:
        with PILImage.open(io.BytesIO(payload)) as pil:
            pil.load()
            return _from_pil(pil, "<jpeg bytes>")
    except (UnidentifiedImageError, OSError) as e:
        raise CodecError(f"JPEG decode failed: {e}") from e


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise IOFailure(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def load_dir(directory, label: str | None = None) -> ImageSet:
    """Load every PNG/JPEG in ``directory`` in sorted filename order.

    Grayscale images are promoted to RGB when the directory mixes both kinds.
    """
    paths = list_images(directory)
    if not paths:
        raise SizingError(f"no PNG/JPEG images in {directory}")
    return unify_channels(ImageSet([load_image(p) for p in paths], label=label or str(directory)))


def unify_channels(images: ImageSet) -> ImageSet:
    if len({im.channels for im in images}) <= 1:
        return images
    return ImageSet([im.to_rgb() for im in images], images.label, images.origins)


def crop(img: Image, top: int, left: int, size: int) -> Image:
    if size < 1 or top < 0 or left < 0 or top + size > img.height or left + size > img.width:
        raise SizingError(f"crop {size}x{size} at ({top}, {left}) exceeds {img.width}x{img.height} image")
    return Image(img.data[top:top + size, left:left + size].copy())


def extract_patches(images: ImageSet, size: int, count_per_image: int, rng: np.random.Generator) -> ImageSet:
    """Random ``size`` x ``size`` crops, ``count_per_image`` from each image.

    Output order is image order, then draw order.  Origins are kept on the
    returned set as ``(image index, top, left)``.
    """
    if size < 1:
        raise ParameterError("patch size must be >= 1")
    if count_per_image < 1:
        raise ParameterError("count_per_image must be >= 1")
    for i, im in enumerate(images):
        if im.height < size or im.width < size:
            raise SizingError(f"image {i} is {im.width}x{im.height}, smaller than patch size {size}")
    patches, origins = [], []
    for i, im in enumerate(images):
        for _ in range(count_per_image):
            top = int(rng.integers(0, im.height - size + 1))
            left = int(rng.integers(0, im.width - size + 1))
            patches.append(crop(im, top, left, size))
            origins.append((i, top, left))
    return ImageSet(patches, label=f"patches[{size}] of {images.label}", origins=origins)


def psnr(a: Image, b: Image) -> float:
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(255.0 ** 2 / mse)


def stack(images: Iterable[Image]) -> np.ndarray:
    """Stack equally sized images into an ``(n, H, W, C)`` array."""
    arrs = [im.data for im in images]
    shapes = {a.shape for a in arrs}
    if len(shapes) > 1:
        raise ShapeError(f"images differ in shape: {sorted(shapes)}")
    return np.stack(arrs)


def as_images(arrays: Sequence[np.ndarray]) -> list[Image]:
    return [Image(a) for a in arrays]
