"""Binned degradation space.

The (sigma, noise, quality) box is cut into equal-width bins per axis.  Bins are
addressed by a flat index with sigma varying fastest and quality slowest::

    flat = (q_idx * n_noise + l_idx) * n_sigma + s_idx

Intervals are half-open except the last bin on each axis, which is closed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .degrade import DegradationParams
from .errors import DegenerateDistributionError, DomainError, FormatError, IOFailure, ParameterError

AXIS_NAMES = ("sigma", "noise", "quality")


@dataclass(frozen=True)
class BinAxis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ParameterError(f"unknown axis name {self.name!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ParameterError(f"axis {self.name}: need lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.count) != self.count or self.count < 1:
            raise ParameterError(f"axis {self.name}: count must be >= 1, got {self.count}")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.count

    def edges(self, i: int) -> tuple[float, float]:
        lo = self.lo + i * self.width
        hi = self.hi if i == self.count - 1 else self.lo + (i + 1) * self.width
        return lo, hi

    def index_of(self, value: float) -> int:
        if not (self.lo <= value <= self.hi):
            raise DomainError(self.name, value, self.lo, self.hi)
        i = int(math.floor((value - self.lo) / self.width))
        i = min(i, self.count - 1)
        # guard against floating error right at interior edges
        lo, hi = self.edges(i)
        if value < lo and i > 0:
            i -= 1
        elif value >= hi and i < self.count - 1:
            i += 1
        return i


@dataclass(frozen=True)
class BinGrid:
    axes: tuple[BinAxis, BinAxis, BinAxis]
    scale: int = 4

    def __post_init__(self):
        if tuple(a.name for a in self.axes) != AXIS_NAMES:
            raise ParameterError(f"axes must be ordered {AXIS_NAMES}")
        if int(self.scale) != self.scale or self.scale < 1:
            raise ParameterError(f"scale must be >= 1, got {self.scale}")

    @property
    def sigma(self) -> BinAxis:
        return self.axes[0]

    @property
    def noise(self) -> BinAxis:
        return self.axes[1]

    @property
    def quality(self) -> BinAxis:
        return self.axes[2]

    @property
    def n_bins(self) -> int:
        return self.sigma.count * self.noise.count * self.quality.count

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.sigma.count, self.noise.count, self.quality.count

    def flat(self, s_idx: int, l_idx: int, q_idx: int) -> int:
        return (q_idx * self.noise.count + l_idx) * self.sigma.count + s_idx

    def unflat(self, b: int) -> tuple[int, int, int]:
        self.check_index(b)
        s_idx = b % self.sigma.count
        rest = b // self.sigma.count
        return s_idx, rest % self.noise.count, rest // self.noise.count

    def check_index(self, b) -> int:
        if int(b) != b or not 0 <= b < self.n_bins:
            raise ParameterError(f"bin index {b} outside [0, {self.n_bins})")
        return int(b)

    def to_dict(self) -> dict:
        return {
            "axes": [{"name": a.name, "lo": a.lo, "hi": a.hi, "count": a.count} for a in self.axes],
            "scale": self.scale,
        }


def make_grid(sigma_axis: BinAxis | None = None, noise_axis: BinAxis | None = None,
              quality_axis: BinAxis | None = None, scale: int = 4) -> BinGrid:
    """Build a grid; omitted axes take the defaults sigma [0,5]x5, noise [0,50]x5, quality [30,90]x3."""
    return BinGrid(
        (
            sigma_axis or BinAxis("sigma", 0.0, 5.0, 5),
            noise_axis or BinAxis("noise", 0.0, 50.0, 5),
            quality_axis or BinAxis("quality", 30.0, 90.0, 3),
        ),
        scale,
    )


def bounds(grid: BinGrid, b: int) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
    idx = grid.unflat(b)
    return tuple(axis.edges(i) for axis, i in zip(grid.axes, idx))


def bin_of(grid: BinGrid, params: DegradationParams) -> int:
    s = grid.sigma.index_of(params.sigma)
    l = grid.noise.index_of(params.noise_level)
    q = grid.quality.index_of(params.jpeg_quality)
    return grid.flat(s, l, q)


def _quality_values(lo: float, hi: float, closed: bool) -> range:
    # integers in [lo, hi); the closed top bin adds hi only if nothing else fits
    values = range(math.ceil(lo), math.ceil(hi))
    if not values and closed and float(hi).is_integer():
        values = range(int(hi), int(hi) + 1)
    if not values:
        raise ParameterError(f"quality interval [{lo}, {hi}) holds no integer")
    return values


def sample_in_bin(grid: BinGrid, b: int, rng: np.random.Generator) -> DegradationParams:
    """Uniform draw inside bin ``b``.

    Quality is drawn uniformly from the integers in ``[lo, hi)``, so over the
    default grid every integer quality 30..89 is equally likely.
    """
    (s_lo, s_hi), (l_lo, l_hi), (q_lo, q_hi) = bounds(grid, b)
    u = rng.random(3)
    sigma = s_lo + u[0] * (s_hi - s_lo)
    noise = l_lo + u[1] * (l_hi - l_lo)
    q_closed = grid.unflat(b)[2] == grid.quality.count - 1
    values = _quality_values(q_lo, q_hi, q_closed)
    quality = values[min(int(u[2] * len(values)), len(values) - 1)]
    return DegradationParams(float(sigma), float(noise), quality, grid.scale)


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ParameterError("weights must be a non-empty vector of finite non-negative values")
        total = w.sum()
        if total == 0:
            raise DegenerateDistributionError("all weights are zero")
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"weights sum to {total!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> WeightVector:
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, raw) -> WeightVector:
        raw = np.asarray(raw, dtype=np.float64)
        total = raw.sum()
        if not total > 0:
            raise DegenerateDistributionError("weights sum to zero")
        return cls(raw / total)


def sample_bin(w: WeightVector, rng: np.random.Generator) -> int:
    """Inverse-CDF categorical draw over the cumulative weights in index order."""
    cdf = np.cumsum(w.weights)
    u = rng.random() * cdf[-1]
    b = int(np.searchsorted(cdf, u, side="right"))
    # skip trailing zero-weight bins reachable only through rounding
    b = min(b, len(cdf) - 1)
    while w.weights[b] == 0:
        b -= 1
    return b


# -- weights file -----------------------------------------------------------

def write_weights(path, grid: BinGrid, w: WeightVector, alpha: float, extractor: str, seed: int,
                  extra: dict | None = None) -> None:
    if len(w) != grid.n_bins:
        raise ParameterError(f"{len(w)} weights for a grid of {grid.n_bins} bins")
    doc = {
        "axes": grid.to_dict()["axes"],
        "scale": grid.scale,
        "alpha": alpha,
        "extractor": extractor,
        "seed": seed,
        "weights": [float(x) for x in w.weights],
    }
    if extra:
        doc.update(extra)
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write weights file {path}: {e}") from e


def read_weights(path) -> tuple[BinGrid, WeightVector, dict]:
    """Return ``(grid, weights, document)`` from a weights JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IOFailure(f"cannot read weights file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e
    try:
        axes = tuple(BinAxis(a["name"], float(a["lo"]), float(a["hi"]), int(a["count"])) for a in doc["axes"])
        grid = BinGrid(axes, int(doc["scale"]))
        w = WeightVector(np.array(doc["weights"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, (ParameterError, DegenerateDistributionError)):
            raise
        raise FormatError(f"{path}: malformed weights file ({e})") from e
    if len(w) != grid.n_bins:
        raise FormatError(f"{path}: {len(w)} weights for a grid of {grid.n_bins} bins")
    return grid, w, doc
