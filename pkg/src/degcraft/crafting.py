"""Weight estimation: per-bin synthesis, Frechet distances and bin weights.

For every bin a set of LR patches is synthesized from high-quality crops with
degradations drawn inside that bin.  Each set's feature Gaussian is compared
with the reference Gaussian; the squared distances are min-max normalized and
turned into sampling weights by::

    w_i = (exp((1 - d_i) ** alpha) - 1) / sum_j (exp((1 - d_j) ** alpha) - 1)

Bin ``b`` always draws from streams rooted at ``mix(master_seed, b)``, so the
result does not depend on how bins are scheduled across workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import binspace, degrade
from .binspace import BinGrid, WeightVector
from .errors import DegenerateDistributionError, ParameterError, SizingError
from .featext import Extractor, ExtractorSpec, ImportExtractor, make_extractor
from .gaussdist import DEFAULT_RIDGE, GaussianStats, fit_gaussian, frechet_distance
from .imagecore import Image, ImageSet, crop, extract_patches, load_dir, save_image
from .rng import child_rng, mix

log = logging.getLogger(__name__)

# child-stream namespaces; bins use mix(master_seed, b) directly
REF_PATCH_STREAM = 1 << 40


@dataclass(frozen=True)
class CraftConfig:
    alpha: float = 25.0
    n_per_bin: int = 100
    patch_size: int = 72
    master_seed: int = 0
    ridge: float = DEFAULT_RIDGE
    workers: int = 1
    ref_patches_per_image: int = 1

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.n_per_bin < 2:
            raise ParameterError(f"n_per_bin must be >= 2, got {self.n_per_bin}")
        if self.patch_size < 1:
            raise ParameterError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")


@dataclass(frozen=True, eq=False)
class DistanceVector:
    raw: np.ndarray
    normalized: np.ndarray

    @classmethod
    def from_raw(cls, raw) -> DistanceVector:
        """Min-max normalize; all-equal distances normalize to zeros."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 1 or raw.size == 0 or not np.all(np.isfinite(raw)):
            raise ParameterError("distances must be a non-empty finite vector")
        lo, hi = raw.min(), raw.max()
        if hi > lo:
            normalized = (raw - lo) / (hi - lo)
        else:
            normalized = np.zeros_like(raw)
        return cls(raw, normalized)

    def argmin(self) -> int:
        return int(np.argmin(self.raw))


def weights_from_distances(d: DistanceVector, alpha: float) -> WeightVector:
    if not np.isfinite(alpha) or alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    n = d.normalized.size
    if alpha == 0:
        return WeightVector(np.full(n, 1.0 / n))
    scores = np.expm1((1.0 - d.normalized) ** alpha)
    total = scores.sum()
    if not total > 0:
        raise DegenerateDistributionError("every bin has normalized distance 1")
    return WeightVector(scores / total)


def hq_crop_size(grid: BinGrid, cfg: CraftConfig) -> int:
    return cfg.patch_size * grid.scale


def check_hq(hq: ImageSet, size: int) -> None:
    hq.require_nonempty()
    for i, im in enumerate(hq):
        if im.height < size or im.width < size:
            raise SizingError(f"HQ image {i} is {im.width}x{im.height}; need at least {size}x{size}")


def random_crop(hq: ImageSet, size: int, rng: np.random.Generator) -> Image:
    im = hq[int(rng.integers(len(hq)))]
    top = int(rng.integers(0, im.height - size + 1))
    left = int(rng.integers(0, im.width - size + 1))
    return crop(im, top, left, size).to_rgb()


def synthesize_bin(hq: ImageSet, grid: BinGrid, b: int, cfg: CraftConfig,
                   render: bool = True) -> tuple[ImageSet, list[degrade.DegradationParams]]:
    """Degraded LR patches for bin ``b`` together with the parameters used.

    Patch ``j`` uses the stream ``mix(mix(master_seed, b), j)``.  With
    ``render=False`` only the parameters are drawn; they equal the rendered ones.
    """
    b = grid.check_index(b)
    size = hq_crop_size(grid, cfg)
    bin_seed = mix(cfg.master_seed, b)
    patches, params = [], []
    for j in range(cfg.n_per_bin):
        rng = child_rng(bin_seed, j)
        hr = random_crop(hq, size, rng)
        p = binspace.sample_in_bin(grid, b, rng)
        params.append(p)
        if render:
            patches.append(degrade.apply(hr, p, rng))
    return ImageSet(patches, label=bin_label(b)), params


def bin_label(b: int) -> str:
    return f"bin_{b:03d}"


def _map(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def bin_statistics(hq: ImageSet, grid: BinGrid, extractor: Extractor, cfg: CraftConfig) -> list[GaussianStats]:
    """Gaussian fit of the features of every bin's synthesized set, in bin order."""
    if isinstance(extractor, ImportExtractor):
        return [fit_gaussian(extractor.extract(ImageSet([], bin_label(b))), cfg.ridge) for b in range(grid.n_bins)]
    check_hq(hq, hq_crop_size(grid, cfg))

    def one(b: int) -> GaussianStats:
        patches, _ = synthesize_bin(hq, grid, b, cfg)
        return fit_gaussian(extractor.extract(patches), cfg.ridge)

    return _map(one, range(grid.n_bins), cfg.workers)


def reference_patches(ref: ImageSet, cfg: CraftConfig) -> ImageSet:
    """Crop ``ref_patches_per_image`` patches per reference image (images already at patch size pass through)."""
    ref.require_nonempty()
    if all(im.height == cfg.patch_size and im.width == cfg.patch_size for im in ref):
        patches = ImageSet([im.to_rgb() for im in ref], label="ref")
    else:
        rng = child_rng(mix(cfg.master_seed, REF_PATCH_STREAM), 0)
        patches = extract_patches(ref, cfg.patch_size, cfg.ref_patches_per_image, rng)
        patches = ImageSet([im.to_rgb() for im in patches], label="ref", origins=patches.origins)
    if len(patches) < 2:
        raise SizingError("need at least 2 reference patches")
    return patches


def reference_statistics(ref: ImageSet, extractor: Extractor, cfg: CraftConfig) -> GaussianStats:
    if isinstance(extractor, ImportExtractor):
        return fit_gaussian(extractor.extract(ImageSet([], "ref")), cfg.ridge)
    return fit_gaussian(extractor.extract(reference_patches(ref, cfg)), cfg.ridge)


def distances_from_stats(ref_stats: GaussianStats, bin_stats: list[GaussianStats]) -> DistanceVector:
    return DistanceVector.from_raw([frechet_distance(s, ref_stats) for s in bin_stats])


def distances(ref: ImageSet, hq: ImageSet, grid: BinGrid, extractor: Extractor, cfg: CraftConfig) -> DistanceVector:
    ref_stats = reference_statistics(ref, extractor, cfg)
    return distances_from_stats(ref_stats, bin_statistics(hq, grid, extractor, cfg))


@dataclass
class EstimateResult:
    weights: WeightVector
    distances: DistanceVector
    provenance: dict = field(default_factory=dict)


def estimate(ref_dir, hq_dir, grid: BinGrid, extractor_spec: ExtractorSpec, cfg: CraftConfig) -> EstimateResult:
    """Load both directories, compute per-bin distances and the weight vector."""
    extractor = make_extractor(extractor_spec)
    if isinstance(extractor, ImportExtractor):
        ref = hq = ImageSet([], "unused")
    else:
        ref = load_dir(ref_dir, label="ref")
        hq = load_dir(hq_dir, label="hq")
    log.info("estimating weights: %d reference images, %d HQ images, %d bins", len(ref), len(hq), grid.n_bins)
    d = distances(ref, hq, grid, extractor, cfg)
    w = weights_from_distances(d, cfg.alpha)
    provenance = {
        "seed": cfg.master_seed,
        "extractor": extractor.tag,
        "axes": grid.to_dict()["axes"],
        "alpha": cfg.alpha,
        "n_per_bin": cfg.n_per_bin,
        "patch_size": cfg.patch_size,
        "ridge": cfg.ridge,
    }
    return EstimateResult(w, d, provenance)


def write_estimate(path, grid: BinGrid, result: EstimateResult) -> None:
    prov = result.provenance
    extra = {
        "n_per_bin": prov.get("n_per_bin"),
        "patch_size": prov.get("patch_size"),
        "ridge": prov.get("ridge"),
        "distances": [float(x) for x in result.distances.raw],
    }
    binspace.write_weights(path, grid, result.weights, prov["alpha"], prov["extractor"], prov["seed"], extra)


def export_bins(hq: ImageSet, grid: BinGrid, cfg: CraftConfig, out_dir, ref: ImageSet | None = None) -> Path:
    """Write every bin's synthesized patches (and optionally the reference patches) as PNGs.

    The layout ``out_dir/bin_NNN/*.png`` and ``out_dir/ref/*.png`` mirrors the
    CSV names the import extractor looks up, so features computed externally
    over these folders can be fed back with ``import:DIR``.
    """
    out = Path(out_dir)
    check_hq(hq, hq_crop_size(grid, cfg))
    sets = [synthesize_bin(hq, grid, b, cfg)[0] for b in range(grid.n_bins)]
    if ref is not None:
        sets.append(reference_patches(ref, cfg))
    for s in sets:
        folder = out / s.label
        folder.mkdir(parents=True, exist_ok=True)
        for i, im in enumerate(s):
            save_image(im, folder / f"{i:06d}.png")
    return out

