"""stereofeat command line: extract, match, run, eval and gen-pattern subcommands."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .brief import FormatError, extract, gen_pattern, read_descriptors, write_descriptors, write_pattern
from .config import ConfigError, RunConfig, load_config
from .evaluation import EvaluationError, read_homography, recall_precision_curve, throughput_model, write_curve_csv
from .image import read_pgm
from .matcher import stereo_match, trace_match, write_matches_csv
from .pipeline import SequenceError, compute_disparity_map, load_frames, process_sequence, read_manifest
from .surf import write_keypoints_csv


class CommandError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _config(args) -> RunConfig:
    overrides = {
        "threshold": args.threshold,
        "hamming_threshold": args.hamming_threshold,
        "epsilon": args.epsilon,
        "max_disparity": args.max_disparity,
        "cores": args.cores,
        "seed": args.seed,
        "out": args.out,
        "pattern": getattr(args, "pattern", None),
    }
    return load_config(args.config, overrides)


def cmd_extract(args) -> int:
    cfg = _config(args)
    path = Path(args.image)
    try:
        img = read_pgm(path)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read image {path}: {exc}")
    ext = extract(img, cfg.load_pattern(), cfg.threshold, cfg.scale_table())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    kp_path = out / f"{path.stem}.keypoints.csv"
    desc_path = out / f"{path.stem}.desc"
    write_keypoints_csv(kp_path, ext.keypoints)
    write_descriptors(desc_path, ext.descriptors)
    print(f"keypoints: {len(ext.keypoints)} (detected {ext.detected}, dropped at border {ext.dropped})")
    print(f"wrote {kp_path} and {desc_path}")
    return 0


def _read_desc(path):
    try:
        return read_descriptors(path)
    except OSError as exc:
        raise CommandError(f"cannot read descriptors {path}: {exc}")


def cmd_match(args) -> int:
    cfg = _config(args)
    a, b = _read_desc(args.a), _read_desc(args.b)
    mcfg = cfg.match_config()
    if args.mode == "trace":
        # A is the current (reference) set, B the previous one
        matches = trace_match(b, a, mcfg)
    else:
        matches = stereo_match(a, b, mcfg)
    out = Path(args.out) if args.out else Path("matches.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matches_csv(out, matches)
    print(f"{args.mode} matches: {len(matches)} of {len(a)} references -> {out}")
    return 0


def _write_disparity_csv(path, triples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "disparity"])
        w.writerows(triples)


def cmd_run(args) -> int:
    cfg = _config(args)
    try:
        manifest = read_manifest(args.manifest)
    except OSError as exc:
        raise CommandError(f"cannot read manifest {args.manifest}: {exc}")
    if not manifest:
        raise CommandError(f"manifest {args.manifest} lists no frames")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = process_sequence(
        load_frames(manifest), cfg.match_config(), cfg.load_pattern(), cfg.threshold, cfg.scale_table()
    )
    for res in results:
        k = res.frame_index
        if res.trace is not None:
            write_matches_csv(out / f"frame_{k:04d}_trace.csv", res.trace)
        write_matches_csv(out / f"frame_{k:04d}_stereo.csv", res.stereo)
        _write_disparity_csv(out / f"frame_{k:04d}_disparity.csv", compute_disparity_map(res.stereo))
        trace = "-" if res.trace is None else len(res.trace)
        print(
            f"frame {k}: keypoints L/R {res.left_keypoints}/{res.right_keypoints}, "
            f"trace {trace}, stereo {len(res.stereo)}"
        )
    width, height = read_pgm(manifest[0][0]).shape[::-1]
    fps = throughput_model(cfg.clock_hz, width, height, 2)
    print(f"model fps: {fps} (binocular @{cfg.clock_hz / 1e6:g}MHz)")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    a, b = _read_desc(args.a), _read_desc(args.b)
    try:
        h = read_homography(args.homography)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read homography {args.homography}: {exc}")
    thresholds = list(range(0, 129, cfg.threshold_step))
    if thresholds[-1] != 128:
        thresholds.append(128)
    try:
        points = recall_precision_curve(a, b, h, cfg.correspondence_tol, thresholds, cfg.cores)
    except EvaluationError as exc:
        raise CommandError(f"{exc} ({args.a} vs {args.b}, tolerance {cfg.correspondence_tol}px)", 2)
    out = Path(args.out) if args.out else Path("curve.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(out, points)
    last = points[-1]
    print(f"{len(points)} curve points -> {out}; at threshold {last.threshold}: recall {last.recall:.4f}, "
          f"1-precision {last.one_minus_precision:.4f}")
    return 0


def cmd_gen_pattern(args) -> int:
    cfg = _config(args)
    out = Path(args.out) if args.out else Path("brief_pattern.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pattern(out, gen_pattern(cfg.seed))
    print(f"pattern seed={cfg.seed} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (section [stereofeat])")
    common.add_argument("--threshold", help="Hessian score threshold")
    common.add_argument("--hamming-threshold", type=int)
    common.add_argument("--epsilon", type=int, help="parallel check tolerance in pixels")
    common.add_argument("--max-disparity", type=int)
    common.add_argument("--cores", type=int, help="match cores per group")
    common.add_argument("--seed", type=int, help="pattern seed (gen-pattern)")
    common.add_argument("--out", help="output directory (extract, run) or file (match, eval, gen-pattern)")

    parser = argparse.ArgumentParser(prog="stereofeat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="detect and describe one PGM image")
    p.add_argument("image")
    p.add_argument("--pattern", help="BRIEF pattern file")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("match", parents=[common], help="match two descriptor files")
    p.add_argument("a", help="reference descriptors (current left)")
    p.add_argument("b", help="candidate descriptors (previous left or current right)")
    p.add_argument("--mode", choices=("trace", "stereo"), default="trace")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("run", parents=[common], help="process a binocular sequence manifest")
    p.add_argument("manifest")
    p.add_argument("--pattern", help="BRIEF pattern file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", parents=[common], help="recall / 1-precision curve under a homography")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("homography")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-pattern", parents=[common], help="write a BRIEF sampling pattern file")
    p.set_defaults(func=cmd_gen_pattern)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, FormatError, SequenceError, ValueError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
