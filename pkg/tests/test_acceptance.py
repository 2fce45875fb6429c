"""Acceptance criteria.

Each test records a single PASS/FAIL line (shown in the "acceptance criteria"
section at the end of a pytest run) and then asserts.  Run the file directly
with ``python tests/test_acceptance.py`` to print only those lines.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from degcraft.binspace import WeightVector, bin_of, make_grid, sample_bin
from degcraft.cli import main as cli_main
from degcraft.corpus import make_corpus, write_corpus
from degcraft.crafting import CraftConfig, DistanceVector, bin_statistics, weights_from_distances
from degcraft.degrade import (
    DegradationParams, add_noise, apply, convolve, downsample, gaussian_kernel, jpeg_roundtrip,
)
from degcraft.errors import ValidationError
from degcraft.featext import ExtractorSpec, StatsExtractor
from degcraft.gaussdist import GaussianStats, frechet_distance
from degcraft.harness import recovery_eval, stability_study
from degcraft.imagecore import Image, crop, psnr
from degcraft.rng import make_rng
from degcraft.synthkit import synthesize, validate_entry

pytestmark = pytest.mark.slow
GRID = make_grid()


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_frechet_oracle(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(20240101)
    worst = 0.0
    for _ in range(200):
        c = int(rng.integers(1, 17))
        ma, mb = rng.normal(0, 5, c), rng.normal(0, 5, c)
        va, vb = rng.uniform(0.01, 20, c), rng.uniform(0.01, 20, c)
        expected = float(np.sum((ma - mb) ** 2 + (np.sqrt(va) - np.sqrt(vb)) ** 2))
        got = frechet_distance(GaussianStats(ma, np.diag(va), 2), GaussianStats(mb, np.diag(vb), 2))
        worst = max(worst, abs(got - expected))
    one_d = frechet_distance(GaussianStats(np.zeros(1), np.eye(1), 2), GaussianStats(np.full(1, 3.0), 4 * np.eye(1), 2))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and abs(one_d - 10) <= 1e-8 and elapsed < 5
    verdict(1, ok, f"max |err| {worst:.2e} over 200 pairs; 1-D case {one_d!r}; {elapsed:.2f}s")
    assert ok


# -- 2 ----------------------------------------------------------------------

def test_criterion_2_weight_formula(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, worst_sum = 0.0, 0.0
    for _ in range(100):
        raw = rng.random(75) * rng.uniform(0.1, 100)
        alpha = float(rng.choice([0.5, 1, 5, 25, 100]))
        d = DistanceVector.from_raw(raw)
        w = weights_from_distances(d, alpha).weights
        num = [math.exp((1 - x) ** alpha) - 1 for x in d.normalized]
        direct = np.array(num) / sum(num)
        worst = max(worst, float(np.abs(w - direct).max()))
        worst_sum = max(worst_sum, abs(w.sum() - 1))
        w0 = weights_from_distances(d, 0).weights
        worst_sum = max(worst_sum, abs(w0.sum() - 1))
        if not np.array_equal(w0, np.full(75, 1 / 75)):
            worst = math.inf
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and worst_sum <= 1e-9 and elapsed < 1
    verdict(2, ok, f"max |err| {worst:.2e}; max |sum-1| {worst_sum:.2e}; alpha=0 uniform; {elapsed:.3f}s")
    assert ok


# -- 3 ----------------------------------------------------------------------

RECOVERY_TRIALS = 25


@pytest.fixture(scope="module")
def recovery_reports():
    hq = make_corpus(200, seed=11)
    pool = make_corpus(60, seed=12)
    cfg = CraftConfig(alpha=25, n_per_bin=100, patch_size=72, master_seed=0)
    start = time.perf_counter()
    bin_stats = bin_statistics(hq, GRID, StatsExtractor(), cfg)
    setup = time.perf_counter() - start
    out = {}
    for sid in (1, 2, 3, 4):
        start = time.perf_counter()
        rep = recovery_eval(sid, GRID, ExtractorSpec("stats"), cfg, RECOVERY_TRIALS, hq, pool, bin_stats=bin_stats)
        elapsed = time.perf_counter() - start + setup / 4
        ideal = recovery_eval(sid, GRID, None, cfg, RECOVERY_TRIALS, hq, pool, ideal=True)
        out[sid] = (rep, ideal, elapsed)
    return out


def test_criterion_3_bin_recovery(verdict, recovery_reports):
    parts, ok = [], True
    for sid, (rep, ideal, elapsed) in recovery_reports.items():
        hit_ok = rep.hits >= 22
        ratio = rep.mean_mass / ideal.mean_mass
        cond = [hit_ok, ratio >= 0.8, elapsed < 600]
        text = (f"S{sid}: hits {rep.hits}/25 mass {rep.mean_mass:.3f} (ideal {ideal.mean_mass:.3f}, "
                f"ratio {ratio:.2f}) top{len(rep.truth)} {rep.topk_hits}/25")
        if sid in (1, 4):
            cond.append(rep.mean_mass >= 0.60)
        if sid == 3:
            cond.append(rep.topk_hits >= 18)
        ok &= all(cond)
        parts.append(text + f" {elapsed:.0f}s")
    verdict(3, ok, "; ".join(parts))
    assert ok


# -- 4 ----------------------------------------------------------------------

def test_criterion_4_stability(verdict):
    hq = make_corpus(200, seed=11)
    start = time.perf_counter()
    rows = stability_study(hq, GRID, StatsExtractor(), 62, [10, 25, 50, 100, 150], 25, CraftConfig())
    elapsed = time.perf_counter() - start
    std = {r.n: r.std for r in rows}
    ok = std[100] < std[10] and (std[100] - std[150]) < (std[10] - std[25]) and elapsed < 600
    verdict(4, ok, "std " + ", ".join(f"n={n}: {s:.3g}" for n, s in std.items()) + f"; {elapsed:.0f}s")
    assert ok


# -- 5 ----------------------------------------------------------------------

def test_criterion_5_sampling(verdict, tmp_path):
    rng = make_rng(5)
    uniform = WeightVector.uniform(75)
    draws = np.bincount([sample_bin(uniform, rng) for _ in range(75_000)], minlength=75)
    p_uniform = stats.chisquare(draws).pvalue
    w = WeightVector.normalized(np.random.default_rng(55).random(75) ** 3)
    hq = make_corpus(4, seed=56, size=16)
    entries = synthesize(hq, GRID, w, 10_000, tmp_path / "pairs", master_seed=57, patch_size=4)
    counts = np.bincount([e.bin_flat for e in entries], minlength=75)
    p_manifest = stats.chisquare(counts, w.weights * len(entries)).pvalue
    violations = 0
    for e in entries:
        try:
            validate_entry(e, GRID)
            violations += bin_of(GRID, e.params) != e.bin_flat
        except ValidationError:
            violations += 1
    ok = p_uniform > 0.01 and p_manifest > 0.01 and violations == 0
    verdict(5, ok, f"uniform p={p_uniform:.3f}; manifest p={p_manifest:.3f}; {violations} bound violations")
    assert ok


# -- 6 ----------------------------------------------------------------------

def test_criterion_6_determinism(verdict, tmp_path):
    write_corpus(tmp_path / "hq", 6, seed=61, size=96)
    write_corpus(tmp_path / "ref", 4, seed=62, size=64)
    common = ["--ref-dir", str(tmp_path / "ref"), "--hq-dir", str(tmp_path / "hq"), "--n", "6", "--patch", "24",
              "--seed", "9"]
    codes = [cli_main(["estimate", *common, "--out", str(tmp_path / "w1.json")]),
             cli_main(["estimate", *common, "--out", str(tmp_path / "w2.json")]),
             cli_main(["estimate", *common, "--workers", "4", "--out", str(tmp_path / "w3.json")])]
    weights = [(tmp_path / f"w{i}.json").read_bytes() for i in (1, 2, 3)]
    same_weights = weights[0] == weights[1] == weights[2]
    for name, workers in (("s1", "1"), ("s2", "1"), ("s3", "4")):
        codes.append(cli_main(["synth", "--hq-dir", str(tmp_path / "hq"), "--weights", str(tmp_path / "w1.json"),
                               "--count", "40", "--out-dir", str(tmp_path / name), "--seed", "10", "--patch", "24",
                               "--workers", workers]))

    def snapshot(name):
        root = tmp_path / name
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    snaps = [snapshot(n) for n in ("s1", "s2", "s3")]
    same_pairs = snaps[0] == snaps[1] == snaps[2] and len(snaps[0]) == 81
    ok = codes == [0] * 6 and same_weights and same_pairs
    verdict(6, ok, f"weights files identical: {same_weights}; {len(snaps[0])} synth files identical "
                   f"(sequential twice and 4 workers): {same_pairs}")
    assert ok


# -- 7 ----------------------------------------------------------------------

def _reflect(i, n):
    period = 2 * (n - 1)
    i %= period
    return i if i < n else period - i


def test_criterion_7_degradation_oracles(verdict, small_corpus):
    img = crop(small_corpus[3], 100, 100, 14)
    k = gaussian_kernel(1.7)
    ref = np.zeros_like(img.data)
    h, w, c = img.data.shape
    for y in range(h):
        for x in range(w):
            for dy in range(-10, 11):
                for dx in range(-10, 11):
                    ref[y, x] += k.taps[dy + 10, dx + 10] * img.data[_reflect(y + dy, h), _reflect(x + dx, w)]
    conv_err = float(np.abs(convolve(img, k).data - ref).max())

    n = 256 * 256 * 3
    noise = add_noise(Image(np.full((256, 256, 3), 128.0)), 25, make_rng(71)).data - 128
    bound = 3 * 25 / math.sqrt(2 * n)
    noise_ok = abs(noise.std() - 25) <= bound

    patches = [crop(im, 16, 16, 96) for im in small_corpus]
    mean_psnr = [float(np.mean([psnr(p, jpeg_roundtrip(p, q)) for p in patches])) for q in (90, 70, 50, 30)]
    jpeg_ok = all(a > b for a, b in zip(mean_psnr, mean_psnr[1:]))

    dc_err = 0.0
    jpeg_dc = 0.0
    for level in (0.0, 37.0, 128.0, 255.0):
        flat = Image(np.full((64, 64, 3), level))
        for sigma in (0.5, 2.0, 5.0):
            dc_err = max(dc_err, float(np.abs(downsample(convolve(flat, gaussian_kernel(sigma)), 4).data - level).max()))
            out = apply(flat, DegradationParams(sigma, 0, 50), make_rng(0))
            jpeg_dc = max(jpeg_dc, float(np.abs(out.data - level).max()))
    ok = conv_err <= 1e-9 and noise_ok and jpeg_ok and dc_err <= 1e-9 and jpeg_dc <= 1
    verdict(7, ok, f"conv err {conv_err:.1e}; noise std {noise.std():.4f} (25 +/- {bound:.4f}); "
                   f"PSNR q90..q30 {', '.join(f'{v:.2f}' for v in mean_psnr)}; DC err {dc_err:.1e}, "
                   f"after JPEG {jpeg_dc:.0f}")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
