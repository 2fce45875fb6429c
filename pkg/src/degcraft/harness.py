"""Experiment harness: test-degradation presets, bin recovery, sample-size stability, heatmaps."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import degrade
from .binspace import BinGrid, bounds
from .crafting import (
    CraftConfig,
    DistanceVector,
    bin_statistics,
    check_hq,
    distances_from_stats,
    hq_crop_size,
    random_crop,
    synthesize_bin,
    weights_from_distances,
)
from .errors import IOFailure, ParameterError, ShapeError
from .featext import Extractor, ExtractorSpec, make_extractor
from .gaussdist import fit_gaussian, frechet_distance
from .imagecore import ImageSet
from .rng import child_rng, mix

log = logging.getLogger(__name__)

REF_TRIAL_STREAM = 2 << 40
STABILITY_STREAM = 3 << 40


@dataclass(frozen=True)
class SettingPreset:
    id: int
    sigma_range: tuple[float, float]
    noise_range: tuple[float, float]
    quality_range: tuple[int, int]

    def sample(self, rng: np.random.Generator, scale: int) -> degrade.DegradationParams:
        """Uniform sigma and noise; quality uniform over the integers of its range."""
        u = rng.random(3)
        s_lo, s_hi = self.sigma_range
        l_lo, l_hi = self.noise_range
        q_lo, q_hi = self.quality_range
        quality = min(q_lo + int(u[2] * (q_hi - q_lo + 1)), q_hi)
        return degrade.DegradationParams(s_lo + u[0] * (s_hi - s_lo), l_lo + u[1] * (l_hi - l_lo), quality, scale)


SETTINGS = {
    1: SettingPreset(1, (0.0, 1.0), (0.0, 10.0), (80, 90)),
    2: SettingPreset(2, (0.5, 1.5), (15.0, 25.0), (75, 85)),
    3: SettingPreset(3, (1.5, 2.5), (5.0, 15.0), (75, 85)),
    4: SettingPreset(4, (2.5, 3.5), (25.0, 35.0), (65, 75)),
}


def get_setting(setting) -> SettingPreset:
    if isinstance(setting, SettingPreset):
        return setting
    if setting not in SETTINGS:
        raise ParameterError(f"unknown setting {setting!r}; choose 1..4")
    return SETTINGS[setting]


def truth_bins(setting, grid: BinGrid) -> list[int]:
    """Bins whose box meets the setting's box with positive volume."""
    setting = get_setting(setting)
    ranges = (setting.sigma_range, setting.noise_range, setting.quality_range)
    out = []
    for b in range(grid.n_bins):
        if all(min(hi, r_hi) - max(lo, r_lo) > 0 for (lo, hi), (r_lo, r_hi) in zip(bounds(grid, b), ranges)):
            out.append(b)
    return out


def synthesize_reference(setting, hq: ImageSet, grid: BinGrid, n: int, patch_size: int, seed: int,
                         render: bool = True) -> tuple[ImageSet, list[degrade.DegradationParams]]:
    """``n`` LR patches degraded with parameters drawn from a preset; patch ``j`` uses stream ``mix(seed, j)``."""
    setting = get_setting(setting)
    size = patch_size * grid.scale
    patches, params = [], []
    for j in range(n):
        rng = child_rng(seed, j)
        hr = random_crop(hq, size, rng)
        p = setting.sample(rng, grid.scale)
        params.append(p)
        if render:
            patches.append(degrade.apply(hr, p, rng))
    return ImageSet(patches, label="ref"), params


def param_features(params: list[degrade.DegradationParams], grid: BinGrid) -> np.ndarray:
    """Ideal features: the true (sigma, noise, quality) of each patch in bin-width units."""
    raw = np.array([[p.sigma, p.noise_level, p.jpeg_quality] for p in params], dtype=np.float64)
    return raw / np.array([axis.width for axis in grid.axes])


@dataclass
class RecoveryReport:
    setting: int
    trials: int
    truth: list[int]
    weights: list[np.ndarray] = field(default_factory=list)
    raw_distances: list[np.ndarray] = field(default_factory=list)
    mass_on_truth: list[float] = field(default_factory=list)
    argmin_hit: list[bool] = field(default_factory=list)
    topk_match: list[bool] = field(default_factory=list)
    extractor: str = ""

    @property
    def mean_mass(self) -> float:
        return float(np.mean(self.mass_on_truth)) if self.mass_on_truth else 0.0

    @property
    def hits(self) -> int:
        return int(sum(self.argmin_hit))

    @property
    def topk_hits(self) -> int:
        return int(sum(self.topk_match))

    def to_text(self) -> str:
        lines = [
            f"setting {self.setting}  extractor {self.extractor}  trials {self.trials}",
            f"truth bins {self.truth}",
            f"argmin in truth: {self.hits}/{self.trials}",
            f"top-{len(self.truth)} equals truth: {self.topk_hits}/{self.trials}",
            f"mean mass on truth: {self.mean_mass:.4f}",
        ]
        for t in range(self.trials):
            w = self.weights[t]
            lines.append(
                f"  trial {t:3d}  mass {self.mass_on_truth[t]:.4f}  argmin {int(np.argmin(self.raw_distances[t])):3d}"
                f"  hit {int(self.argmin_hit[t])}  top bin {int(np.argmax(w)):3d}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "mass_on_truth", "argmin_bin", "argmin_hit", "topk_match"]
                        + [f"w{b}" for b in range(len(self.weights[0]) if self.weights else 0)])
        for t in range(self.trials):
            writer.writerow([t, repr(self.mass_on_truth[t]), int(np.argmin(self.raw_distances[t])),
                             int(self.argmin_hit[t]), int(self.topk_match[t])]
                            + [repr(float(x)) for x in self.weights[t]])
        return buf.getvalue()


def _score(report: RecoveryReport, d: DistanceVector, alpha: float) -> None:
    w = weights_from_distances(d, alpha).weights
    truth = report.truth
    top = set(np.argsort(-w, kind="stable")[:len(truth)].tolist())
    report.weights.append(np.array(w))
    report.raw_distances.append(d.raw)
    report.mass_on_truth.append(float(w[truth].sum()))
    report.argmin_hit.append(d.argmin() in truth)
    report.topk_match.append(top == set(truth))


def recovery_eval(setting, grid: BinGrid, extractor_spec: ExtractorSpec | None, cfg: CraftConfig, trials: int,
                  hq: ImageSet, ref_pool: ImageSet | None = None, ideal: bool = False,
                  bin_stats=None) -> RecoveryReport:
    """Estimate weights for ``trials`` fresh reference sets drawn from a preset.

    The synthesized bin sets are fixed for the whole run (one draw under
    ``cfg.master_seed``); trial ``t`` draws its references from the stream
    ``mix(mix(master_seed, REF_TRIAL_STREAM), t)``.  ``ref_pool`` supplies the
    HQ sources of the references and defaults to ``hq``.  With ``ideal=True``
    the features are the true degradation parameters of each patch.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    setting = get_setting(setting)
    ref_pool = hq if ref_pool is None else ref_pool
    check_hq(hq, hq_crop_size(grid, cfg))
    check_hq(ref_pool, hq_crop_size(grid, cfg))
    extractor: Extractor | None = None
    if ideal:
        tag = "ideal"
        if bin_stats is None:
            bin_stats = [fit_gaussian(param_features(synthesize_bin(hq, grid, b, cfg, render=False)[1], grid), cfg.ridge)
                         for b in range(grid.n_bins)]
    else:
        extractor = make_extractor(extractor_spec)
        tag = extractor.tag
        if bin_stats is None:
            bin_stats = bin_statistics(hq, grid, extractor, cfg)
    report = RecoveryReport(setting.id, trials, truth_bins(setting, grid), extractor=tag)
    trial_root = mix(cfg.master_seed, REF_TRIAL_STREAM)
    for t in range(trials):
        ref, params = synthesize_reference(setting, ref_pool, grid, cfg.n_per_bin, cfg.patch_size,
                                           mix(trial_root, t), render=not ideal)
        feats = param_features(params, grid) if ideal else extractor.extract(ref).values
        d = distances_from_stats(fit_gaussian(feats, cfg.ridge), bin_stats)
        _score(report, d, cfg.alpha)
        log.info("setting %d trial %d: mass %.3f hit %s", setting.id, t, report.mass_on_truth[-1], report.argmin_hit[-1])
    return report


@dataclass
class StabilityRow:
    n: int
    mean: float
    std: float
    values: list[float]


def stability_study(hq: ImageSet, grid: BinGrid, extractor: Extractor, target_bin: int, n_values,
                    trials: int, cfg: CraftConfig, compare_bin: int | None = None) -> list[StabilityRow]:
    """Spread of the estimated distance as a function of the number of patches.

    For each ``n`` and trial, ``n`` reference patches are degraded inside
    ``target_bin`` and ``n`` comparison patches inside ``compare_bin`` (defaults
    to the target), each from fresh crops; the squared Frechet distance between
    the two feature sets is recorded.  ``std`` is the population standard
    deviation over trials.
    """
    n_values = [int(n) for n in n_values]
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ParameterError("n_values must be strictly ascending")
    if n_values and n_values[0] < 2:
        raise ParameterError("each n must be >= 2")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    compare_bin = target_bin if compare_bin is None else compare_bin
    check_hq(hq, hq_crop_size(grid, cfg))
    root = mix(cfg.master_seed, STABILITY_STREAM)
    rows = []
    for n in n_values:
        values = []
        for t in range(trials):
            trial_seed = mix(mix(root, n), t)
            sets = []
            for role, b in ((0, target_bin), (1, compare_bin)):
                sub = CraftConfig(cfg.alpha, n, cfg.patch_size, mix(trial_seed, role), cfg.ridge)
                patches, _ = synthesize_bin(hq, grid, b, sub)
                sets.append(fit_gaussian(extractor.extract(patches), cfg.ridge))
            values.append(frechet_distance(sets[1], sets[0]))
        rows.append(StabilityRow(n, float(np.mean(values)), float(np.std(values)), values))
        log.info("stability n=%d mean %.4g std %.4g", n, rows[-1].mean, rows[-1].std)
    return rows


def stability_text(rows: list[StabilityRow]) -> str:
    lines = [f"{'n':>6} {'mean':>14} {'std':>14}"]
    lines += [f"{r.n:6d} {r.mean:14.6g} {r.std:14.6g}" for r in rows]
    return "\n".join(lines) + "\n"


def stability_csv(rows: list[StabilityRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "mean", "std"])
    for r in rows:
        writer.writerow([r.n, repr(r.mean), repr(r.std)])
    return buf.getvalue()


# -- heatmap ----------------------------------------------------------------

CELL = 20


def heatmap_cell(grid: BinGrid, b: int) -> tuple[int, int]:
    """(row, col) of bin ``b``: rows are noise bins (low at top), columns quality-major then sigma."""
    s, l, q = grid.unflat(b)
    return l, q * grid.sigma.count + s


def heatmap_array(w, grid: BinGrid) -> np.ndarray:
    if grid.shape != (5, 5, 3):
        raise ShapeError(f"heatmap layout needs the default 5x5x3 grid, got {grid.shape}")
    weights = np.asarray(getattr(w, "weights", w), dtype=np.float64)
    if weights.size != grid.n_bins:
        raise ShapeError(f"{weights.size} weights for {grid.n_bins} bins")
    top = weights.max()
    img = np.zeros((grid.noise.count * CELL, grid.quality.count * grid.sigma.count * CELL), dtype=np.uint8)
    if top <= 0:
        return img
    for b in range(grid.n_bins):
        r, c = heatmap_cell(grid, b)
        gray = int(math.floor(255.0 * weights[b] / top + 0.5))
        img[r * CELL:(r + 1) * CELL, c * CELL:(c + 1) * CELL] = gray
    return img


def heatmap(w, grid: BinGrid, path) -> np.ndarray:
    """Write the weight heatmap as a binary PGM (P5) and return the pixel array."""
    img = heatmap_array(w, grid)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + img.tobytes())
    except OSError as e:
        raise IOFailure(f"cannot write heatmap {path}: {e}") from e
    return img
