"""Weighted LR/HR training-pair synthesis and its JSON Lines manifest."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import degrade
from .binspace import BinGrid, WeightVector, bounds, sample_bin, sample_in_bin
from .errors import FormatError, IOFailure, ParameterError, SizingError, ValidationError
from .imagecore import ImageSet, crop, save_image
from .rng import make_rng, mix

MANIFEST_FIELDS = ("hr_path", "lr_path", "bin_flat", "sigma", "noise_level", "jpeg_quality", "scale", "seed")


@dataclass(frozen=True)
class ManifestEntry:
    hr_path: str
    lr_path: str
    bin_flat: int
    sigma: float
    noise_level: float
    jpeg_quality: int
    scale: int
    seed: int

    @property
    def params(self) -> degrade.DegradationParams:
        return degrade.DegradationParams(self.sigma, self.noise_level, self.jpeg_quality, self.scale)


def validate_entry(entry: ManifestEntry, grid: BinGrid) -> None:
    """Raise if the entry's parameters fall outside its bin."""
    grid.check_index(entry.bin_flat)
    values = (entry.sigma, entry.noise_level, entry.jpeg_quality)
    for axis, (lo, hi), v in zip(grid.axes, bounds(grid, entry.bin_flat), values):
        closed = hi == axis.hi
        if not (lo <= v < hi or (closed and v == hi)):
            raise ValidationError(f"{axis.name}={v} outside bin {entry.bin_flat} interval [{lo}, {hi}]")
    if entry.scale != grid.scale:
        raise ValidationError(f"scale {entry.scale} does not match grid scale {grid.scale}")


def _pair(i: int, hq: ImageSet, grid: BinGrid, w: WeightVector, size: int, seed: int):
    rng = make_rng(seed)
    b = sample_bin(w, rng)
    params = sample_in_bin(grid, b, rng)
    im = hq[i % len(hq)]
    top = int(rng.integers(0, im.height - size + 1))
    left = int(rng.integers(0, im.width - size + 1))
    hr = crop(im, top, left, size).to_rgb()
    lr = degrade.apply(hr, params, rng)
    return b, params, hr, lr


def synthesize(hq: ImageSet, grid: BinGrid, w: WeightVector, count: int, out_dir, master_seed: int,
               patch_size: int = 72, workers: int = 1) -> list[ManifestEntry]:
    """Write ``count`` HR/LR PNG pairs under ``out_dir`` and return their manifest entries.

    Pair ``i`` takes its HR crop from image ``i mod len(hq)`` and draws its bin,
    parameters, crop origin and noise from the stream seeded with
    ``mix(master_seed, i)``, which is recorded as the entry's ``seed``.
    Files go to ``out_dir/hr/NNNNNN.png`` and ``out_dir/lr/NNNNNN.png``; the
    manifest itself is written to ``out_dir/manifest.jsonl``.
    """
    if len(w) != grid.n_bins:
        raise ParameterError(f"{len(w)} weights for a grid of {grid.n_bins} bins")
    hq.require_nonempty()
    if count < 0:
        raise ParameterError("count must be >= 0")
    size = patch_size * grid.scale
    for k, im in enumerate(hq):
        if im.height < size or im.width < size:
            raise SizingError(f"HQ image {k} is {im.width}x{im.height}; need at least {size}x{size}")
    out = Path(out_dir)
    try:
        (out / "hr").mkdir(parents=True, exist_ok=True)
        (out / "lr").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IOFailure(f"cannot create output directory {out}: {e}") from e

    def one(i: int) -> ManifestEntry:
        seed = mix(master_seed, i)
        b, params, hr, lr = _pair(i, hq, grid, w, size, seed)
        hr_rel, lr_rel = f"hr/{i:06d}.png", f"lr/{i:06d}.png"
        save_image(hr, out / hr_rel)
        save_image(lr, out / lr_rel)
        return ManifestEntry(hr_rel, lr_rel, b, params.sigma, params.noise_level, params.jpeg_quality,
                             params.scale, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, range(count)))
    else:
        entries = [one(i) for i in range(count)]
    write_manifest(out / "manifest.jsonl", entries)
    return entries


def write_manifest(path, entries) -> None:
    lines = [json.dumps({k: getattr(e, k) for k in MANIFEST_FIELDS}) for e in entries]
    try:
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write manifest {path}: {e}") from e


def read_manifest(path, grid: BinGrid | None = None) -> list[ManifestEntry]:
    """Parse a JSON Lines manifest; with ``grid`` every entry is checked against its bin."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot read manifest {path}: {e}") from e
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            if not isinstance(doc, dict) or set(doc) != set(MANIFEST_FIELDS):
                raise ValueError(f"fields must be exactly {', '.join(MANIFEST_FIELDS)}")
            entry = ManifestEntry(
                str(doc["hr_path"]), str(doc["lr_path"]), _int(doc["bin_flat"]), float(doc["sigma"]),
                float(doc["noise_level"]), _int(doc["jpeg_quality"]), _int(doc["scale"]), _int(doc["seed"]),
            )
        except (ValueError, TypeError) as e:
            raise FormatError(f"{path}: line {lineno}: {e}") from e
        if grid is not None:
            try:
                validate_entry(entry, grid)
            except ValidationError as e:
                raise ValidationError(f"{path}: line {lineno}: {e}") from e
        entries.append(entry)
    return entries


def _int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def bin_counts(entries, n_bins: int) -> np.ndarray:
    return np.bincount([e.bin_flat for e in entries], minlength=n_bins)

