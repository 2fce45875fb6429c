"""Feature extractors mapping fixed-size patches to descriptor vectors.

Three kinds are available:

``stats``
    a 15-dimensional handcrafted descriptor aimed at blur, noise and JPEG
    artefacts (see :data:`STATS_FEATURES`).
``randconv``
    a frozen 3-layer ReLU convolutional net with seeded He-normal weights and
    global average pooling (64 outputs).
``import``
    reads features computed elsewhere from CSV files.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft, ndimage

from .errors import FormatError, IOFailure, ParameterError, ShapeError
from .imagecore import ImageSet, stack
from .rng import make_rng

STATS_FEATURES = (
    "mean", "std",
    "grad_mean", "grad_std",
    "noise_sigma",
    "block_h", "block_v",
    "dct_low", "dct_mid", "dct_high",
    "smooth_var_ratio",
    "acf_h1", "acf_h2", "acf_v1", "acf_v2",
)

_LUMA = np.array([0.299, 0.587, 0.114])
_LAPLACE = np.array([[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]])
_LAPLACE_NORM = math.sqrt(float((_LAPLACE ** 2).sum()))

_u, _v = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
_BAND = _u + _v
_BANDS = (
    (_BAND >= 1) & (_BAND <= 2),
    (_BAND >= 3) & (_BAND <= 7),
    _BAND >= 8,
)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    extractor_tag: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError(f"feature matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ExtractorSpec:
    kind: str
    seed: int = 0
    import_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("stats", "randconv", "import"):
            raise ParameterError(f"unknown extractor kind {self.kind!r}")
        if self.kind == "import" and not self.import_path:
            raise ParameterError("import extractor needs a path")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> ExtractorSpec:
        """Parse the CLI form ``stats``, ``randconv`` or ``import:PATH``."""
        if text.startswith("import:"):
            return cls("import", seed, text[len("import:"):])
        return cls(text, seed)

    @property
    def tag(self) -> str:
        if self.kind == "randconv":
            return f"randconv:{self.seed}"
        if self.kind == "import":
            return f"import:{self.import_path}"
        return "stats"


# -- stats ------------------------------------------------------------------

def luminance(batch: np.ndarray) -> np.ndarray:
    """(n, H, W, 3) -> (n, H, W) ITU-R 601 luma."""
    if batch.shape[-1] == 1:
        return batch[..., 0]
    return batch @ _LUMA


def _safe_ratio(num: np.ndarray, den: np.ndarray, fallback: float) -> np.ndarray:
    out = np.full(num.shape, fallback)
    ok = den > 1e-12
    out[ok] = num[ok] / den[ok]
    return out


def _blockiness(diff: np.ndarray, axis: int) -> np.ndarray:
    # diff[..., k] compares pixel k+1 with pixel k; k+1 on a multiple of 8 is a block edge
    n = diff.shape[axis]
    edge = (np.arange(1, n + 1) % 8) == 0
    if not edge.any() or edge.all():
        return np.zeros(diff.shape[0])
    if axis == 2:
        at, off = diff[:, :, edge], diff[:, :, ~edge]
    else:
        at, off = diff[:, edge, :], diff[:, ~edge, :]
    return at.mean(axis=(1, 2)) - off.mean(axis=(1, 2))


def _autocorr(y: np.ndarray, var: np.ndarray, lag: int, axis: int) -> np.ndarray:
    centred = y - y.mean(axis=(1, 2), keepdims=True)
    if axis == 2:
        prod = centred[:, :, :-lag] * centred[:, :, lag:]
    else:
        prod = centred[:, :-lag, :] * centred[:, lag:, :]
    return _safe_ratio(prod.mean(axis=(1, 2)), var, 1.0)


def stats_features(batch: np.ndarray) -> np.ndarray:
    """Handcrafted descriptor for an (n, H, W, C) batch in [0, 255]; returns (n, 15)."""
    y = luminance(batch)
    n, h, w = y.shape
    if h < 8 or w < 8:
        raise ShapeError("stats extractor needs patches of at least 8x8")
    out = np.empty((n, len(STATS_FEATURES)))
    out[:, 0] = y.mean(axis=(1, 2))
    var = y.var(axis=(1, 2))
    out[:, 1] = np.sqrt(var)

    gx = (y[:, :-2, 2:] + 2 * y[:, 1:-1, 2:] + y[:, 2:, 2:]) - (y[:, :-2, :-2] + 2 * y[:, 1:-1, :-2] + y[:, 2:, :-2])
    gy = (y[:, 2:, :-2] + 2 * y[:, 2:, 1:-1] + y[:, 2:, 2:]) - (y[:, :-2, :-2] + 2 * y[:, :-2, 1:-1] + y[:, :-2, 2:])
    mag = np.hypot(gx, gy)
    out[:, 2] = mag.mean(axis=(1, 2))
    out[:, 3] = mag.std(axis=(1, 2))

    lap = sum(_LAPLACE[i, j] * y[:, i:h - 2 + i, j:w - 2 + j] for i in range(3) for j in range(3))
    out[:, 4] = 1.4826 * np.median(np.abs(lap).reshape(n, -1), axis=1) / _LAPLACE_NORM

    out[:, 5] = _blockiness(np.abs(np.diff(y, axis=2)), axis=2)
    out[:, 6] = _blockiness(np.abs(np.diff(y, axis=1)), axis=1)

    bh, bw = h // 8, w // 8
    blocks = y[:, :bh * 8, :bw * 8].reshape(n, bh, 8, bw, 8).transpose(0, 1, 3, 2, 4)
    coeffs = fft.dctn(blocks, axes=(3, 4), norm="ortho") ** 2
    for k, band in enumerate(_BANDS):
        out[:, 7 + k] = np.log1p(coeffs[..., band].mean(axis=(1, 2, 3)))

    smooth = ndimage.uniform_filter(y, size=(1, 3, 3), mode="reflect")
    out[:, 10] = _safe_ratio(smooth.var(axis=(1, 2)), var, 1.0)

    out[:, 11] = _autocorr(y, var, 1, axis=2)
    out[:, 12] = _autocorr(y, var, 2, axis=2)
    out[:, 13] = _autocorr(y, var, 1, axis=1)
    out[:, 14] = _autocorr(y, var, 2, axis=1)
    return out


# -- randconv ---------------------------------------------------------------

# (in, out, kernel, stride) per layer
RANDCONV_LAYERS = ((3, 32, 5, 2), (32, 64, 5, 2), (64, 64, 3, 2))


def randconv_weights(seed: int) -> list[np.ndarray]:
    """He-normal weights (out, in, k, k) for each layer, in layer order."""
    rng = make_rng(seed)
    weights = []
    for c_in, c_out, k, _ in RANDCONV_LAYERS:
        std = math.sqrt(2.0 / (c_in * k * k))
        weights.append(rng.standard_normal((c_out, c_in, k, k)) * std)
    return weights


def conv2d_relu(x: np.ndarray, weight: np.ndarray, stride: int) -> np.ndarray:
    """Valid convolution (cross-correlation), zero bias, ReLU. x is (n, H, W, C_in)."""
    k = weight.shape[-1]
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    # win: (n, oh, ow, C_in, k, k)
    y = np.tensordot(win, weight, axes=([3, 4, 5], [1, 2, 3]))
    return np.maximum(y, 0.0)


def randconv_features(batch: np.ndarray, weights: list[np.ndarray], chunk: int = 32) -> np.ndarray:
    if batch.shape[-1] != 3:
        raise ShapeError("randconv extractor needs 3-channel patches")
    rows = []
    for start in range(0, batch.shape[0], chunk):
        x = batch[start:start + chunk] / 255.0
        for weight, (_, _, _, stride) in zip(weights, RANDCONV_LAYERS):
            if x.shape[1] < weight.shape[-1] or x.shape[2] < weight.shape[-1]:
                raise ShapeError("patch too small for the randconv extractor")
            x = conv2d_relu(x, weight, stride)
        rows.append(x.mean(axis=(1, 2)))
    return np.concatenate(rows, axis=0)


# -- extractor handles --------------------------------------------------------

class Extractor:
    tag: str
    dim: int | None

    def extract(self, patches: ImageSet) -> FeatureMatrix:
        raise NotImplementedError

    def _batch(self, patches: ImageSet) -> np.ndarray:
        patches.require_nonempty()
        batch = stack(im.to_rgb() for im in patches)
        return batch


class StatsExtractor(Extractor):
    dim = len(STATS_FEATURES)
    tag = "stats"

    def extract(self, patches: ImageSet) -> FeatureMatrix:
        return FeatureMatrix(stats_features(self._batch(patches)), self.tag)


class RandConvExtractor(Extractor):
    dim = RANDCONV_LAYERS[-1][1]

    def __init__(self, seed: int):
        self.seed = seed
        self.tag = f"randconv:{seed}"
        self.weights = randconv_weights(seed)
        for w in self.weights:
            w.setflags(write=False)

    def extract(self, patches: ImageSet) -> FeatureMatrix:
        return FeatureMatrix(randconv_features(self._batch(patches), self.weights), self.tag)


class ImportExtractor(Extractor):
    """Serves precomputed features instead of computing them.

    ``path`` is either one CSV file (returned for every request) or a directory
    holding ``<label>.csv`` per image set, e.g. ``ref.csv`` and ``bin_000.csv``.
    The row count must match the number of patches requested.
    """

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists():
            raise IOFailure(f"import path does not exist: {self.path}")
        self.tag = f"import:{self.path}"
        self.dim = None
        if self.path.is_file():
            self.dim = read_features(self.path).cols

    def lookup(self, label: str) -> Path:
        if self.path.is_file():
            return self.path
        return self.path / f"{label}.csv"

    def extract(self, patches: ImageSet) -> FeatureMatrix:
        fm = read_features(self.lookup(patches.label))
        if len(patches) and fm.rows != len(patches):
            raise FormatError(f"{self.lookup(patches.label)}: {fm.rows} rows for {len(patches)} patches")
        return fm


def make_extractor(spec: ExtractorSpec) -> Extractor:
    if spec.kind == "stats":
        return StatsExtractor()
    if spec.kind == "randconv":
        return RandConvExtractor(spec.seed)
    return ImportExtractor(spec.import_path)


def extract(extractor: Extractor, patches: ImageSet) -> FeatureMatrix:
    return extractor.extract(patches)


# -- CSV format -------------------------------------------------------------

_HEADER = re.compile(r"^# extractor=(?P<tag>.*) rows=(?P<rows>\d+) cols=(?P<cols>\d+)$")


def write_features(path, fm: FeatureMatrix) -> None:
    lines = [f"# extractor={fm.extractor_tag} rows={fm.rows} cols={fm.cols}"]
    lines += [",".join(format(x, ".17g") for x in row) for row in fm.values]
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write features to {path}: {e}") from e


def read_features(path) -> FeatureMatrix:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot read features from {path}: {e}") from e
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty feature file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise FormatError(f"{path}: malformed header {lines[0]!r}")
    rows, cols = int(m["rows"]), int(m["cols"])
    body = lines[1:]
    if len(body) != rows:
        raise FormatError(f"{path}: header says rows={rows} but found {len(body)} data lines")
    values = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise FormatError(f"{path}: line {i + 2} has {len(fields)} values, expected {cols}")
        try:
            values[i] = [float(f) for f in fields]
        except ValueError as e:
            raise FormatError(f"{path}: line {i + 2}: {e}") from e
    return FeatureMatrix(values.reshape(rows, cols), m["tag"])
