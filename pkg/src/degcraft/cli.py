"""Command line entry point: ``degcraft <command> ...``.

Exit status is 0 on success, 1 for invalid input and 2 for I/O failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import crafting, harness
from .binspace import make_grid, read_weights
from .corpus import write_corpus
from .errors import IOFailure, ParameterError, ValidationError
from .featext import ExtractorSpec, make_extractor, read_features
from .gaussdist import DEFAULT_RIDGE, fit_gaussian, frechet_distance
from .imagecore import load_dir
from .synthkit import synthesize

log = logging.getLogger("degcraft")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _grid(args):
    return make_grid(scale=args.scale)


def _cfg(args) -> crafting.CraftConfig:
    return crafting.CraftConfig(
        alpha=args.alpha, n_per_bin=args.n, patch_size=args.patch, master_seed=args.seed,
        ridge=args.ridge, workers=args.workers,
    )


def _spec(args) -> ExtractorSpec:
    return ExtractorSpec.parse(args.extractor, seed=args.extractor_seed)


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write {path}: {e}") from e


def cmd_estimate(args) -> None:
    grid = _grid(args)
    result = crafting.estimate(args.ref_dir, args.hq_dir, grid, _spec(args), _cfg(args))
    crafting.write_estimate(args.out, grid, result)
    top = sorted(range(grid.n_bins), key=lambda b: -result.weights.weights[b])[:5]
    print(f"wrote {args.out}; top bins: " + ", ".join(f"{b} ({result.weights.weights[b]:.4f})" for b in top))


def cmd_synth(args) -> None:
    grid, w, _ = read_weights(args.weights)
    hq = load_dir(args.hq_dir, label="hq")
    entries = synthesize(hq, grid, w, args.count, args.out_dir, args.seed, patch_size=args.patch, workers=args.workers)
    print(f"wrote {len(entries)} pairs to {args.out_dir}")


def cmd_recover(args) -> None:
    grid = _grid(args)
    cfg = _cfg(args)
    hq = load_dir(args.hq_dir, label="hq")
    pool = load_dir(args.ref_pool, label="ref-pool") if args.ref_pool else None
    spec = None if args.ideal else _spec(args)
    report = harness.recovery_eval(args.setting, grid, spec, cfg, args.trials, hq, pool, ideal=args.ideal)
    text = report.to_text()
    if args.out:
        _write(Path(f"{args.out}.txt"), text)
        _write(Path(f"{args.out}.csv"), report.to_csv())
    print(text, end="")


def cmd_stability(args) -> None:
    grid = _grid(args)
    cfg = _cfg(args)
    try:
        n_values = [int(x) for x in args.n_list.split(",") if x.strip()]
    except ValueError as e:
        raise ParameterError(f"bad --n-list: {e}") from e
    hq = load_dir(args.hq_dir, label="hq")
    extractor = make_extractor(_spec(args))
    rows = harness.stability_study(hq, grid, extractor, grid.check_index(args.bin), n_values, args.trials, cfg)
    if args.out:
        _write(Path(f"{args.out}.txt"), harness.stability_text(rows))
        _write(Path(f"{args.out}.csv"), harness.stability_csv(rows))
    print(harness.stability_text(rows), end="")


def cmd_heatmap(args) -> None:
    grid, w, _ = read_weights(args.weights)
    harness.heatmap(w, grid, args.out)
    print(f"wrote {args.out}")


def cmd_frechet(args) -> None:
    a = fit_gaussian(read_features(args.a), args.ridge)
    b = fit_gaussian(read_features(args.b), args.ridge)
    print(repr(frechet_distance(a, b)))


def cmd_corpus(args) -> None:
    paths = write_corpus(args.out_dir, args.count, args.seed, args.size)
    print(f"wrote {len(paths)} images to {args.out_dir}")


def cmd_export(args) -> None:
    grid = _grid(args)
    cfg = _cfg(args)
    hq = load_dir(args.hq_dir, label="hq")
    ref = load_dir(args.ref_dir, label="ref") if args.ref_dir else None
    crafting.export_bins(hq, grid, cfg, args.out_dir, ref)
    print(f"wrote bin patch folders to {args.out_dir}")


def _common(p, extractor=True):
    p.add_argument("--alpha", type=float, default=25.0)
    p.add_argument("--n", type=int, default=100, help="patches per bin (and per reference set)")
    p.add_argument("--patch", type=int, default=72, help="LR patch size")
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--workers", type=int, default=1)
    if extractor:
        p.add_argument("--extractor", default="stats", help="stats | randconv | import:PATH")
        p.add_argument("--extractor-seed", type=int, default=0, help="weight seed for randconv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="degcraft", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate bin weights from reference images")
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--hq-dir", required=True)
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="synthesize weighted LR/HR pairs")
    p.add_argument("--hq-dir", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch", type=int, default=72)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="experiments")
    ev = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    r = ev.add_parser("recover", help="recover a preset test distribution")
    r.add_argument("--setting", type=int, required=True, choices=sorted(harness.SETTINGS))
    r.add_argument("--trials", type=int, default=25)
    r.add_argument("--hq-dir", required=True)
    r.add_argument("--ref-pool", help="HQ images used to render references (default: --hq-dir)")
    r.add_argument("--ideal", action="store_true", help="use true degradation parameters as features")
    r.add_argument("--out", help="report prefix; writes PREFIX.txt and PREFIX.csv")
    _common(r)
    r.set_defaults(func=cmd_recover)
    s = ev.add_parser("stability", help="distance spread versus number of patches")
    s.add_argument("--n-list", default="10,25,50,100,150")
    s.add_argument("--trials", type=int, default=25)
    s.add_argument("--hq-dir", required=True)
    s.add_argument("--bin", type=int, default=62)
    s.add_argument("--out", help="report prefix; writes PREFIX.txt and PREFIX.csv")
    _common(s)
    s.set_defaults(func=cmd_stability)

    p = sub.add_parser("heatmap", help="render weights as a PGM heatmap")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("frechet", help="squared Frechet distance between two feature CSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.set_defaults(func=cmd_frechet)

    p = sub.add_parser("corpus", help="write a procedural HQ image corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=320)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("export", help="write per-bin synthesized patches for external feature extraction")
    p.add_argument("--hq-dir", required=True)
    p.add_argument("--ref-dir")
    p.add_argument("--out-dir", required=True)
    _common(p, extractor=False)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationError as e:
        print(f"degcraft: error: {e}", file=sys.stderr)
        return 1
    except (IOFailure, OSError) as e:
        print(f"degcraft: I/O error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
