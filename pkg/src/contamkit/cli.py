"""Command-line entry point (``contamkit <subcommand>``).

Exit codes: 0 success, 1 partial failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import annotations as ann
from .audio import AudioFormatError, FrameGrid, read_wav, rasterize
from .corpus import (
    ManifestError,
    RunConfig,
    read_asset_manifest,
    read_speech_manifest,
    run_synthesis,
    split_assets,
    write_jsonl,
)
from .heuristic import HeuristicConfig, heuristic_snr
from .loss import gradient_check
from .metrics import DetectionCounts, decile_report, mae, vad_counts
from .rir import analyze_rir

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("contamkit")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- subcommands


def cmd_synthesize(args) -> int:
    try:
        config = RunConfig(
            out_dir=args.out,
            master_seed=args.seed,
            p_rir=args.p_rir,
            snr_range=(args.snr_min, args.snr_max),
            ns_ratio=args.ns_ratio,
            workers=args.workers,
        )
        speech = read_speech_manifest(args.speech)
        noises = read_asset_manifest(args.noise)
        rirs = read_asset_manifest(args.rir) if args.rir else []
    except (ManifestError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    t0 = time.perf_counter()
    result = run_synthesis(speech, noises, rirs, config)
    s = result.summary
    print(
        f"utterances={s['utterances']} failed={len(result.failures)} "
        f"synthesized={result.processed} reused={result.skipped} "
        f"duration_s={s['total_duration_s']:.1f} non_speech_ratio={s['non_speech_ratio']:.3f} "
        f"elapsed_s={time.perf_counter() - t0:.1f}"
    )
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_split_assets(args) -> int:
    try:
        records = read_asset_manifest(args.manifest, check_paths=False)
        parts = split_assets([r.id for r in records], tuple(args.fractions), args.seed)
    except (ManifestError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    by_id = {r.id: r for r in records}
    rows = [
        {"id": i, "path": by_id[i].path, "split": name}
        for name, ids in zip(("train", "dev", "test"), parts)
        for i in ids
    ]
    if args.out:
        write_jsonl(rows, args.out)
    else:
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    log.info("split %d assets into %s", len(records), "/".join(str(len(p)) for p in parts))
    return EXIT_OK


def cmd_analyze_rir(args) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    status = EXIT_OK
    for path in args.wav:
        try:
            onset_ms, c50 = analyze_rir(read_wav(path))
        except (AudioFormatError, ValueError, OSError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            status = EXIT_PARTIAL
            continue
        writer.writerow([path, f"{onset_ms:.4f}", f"{c50:.4f}"])
    return status


def cmd_snr_heuristic(args) -> int:
    try:
        audio = read_wav(args.wav)
        activity = ann.read_activity(args.vad)
    except (AudioFormatError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    grid = FrameGrid.for_audio(audio)
    vad = rasterize(activity, grid)
    snr, tally = heuristic_snr(
        audio, vad, grid, HeuristicConfig(args.window, args.fallback_db), return_tally=True
    )
    text = ann.format_snr_csv(snr)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    log.info("fallback frames=%d ceiling frames=%d", tally["fallback"], tally["zero_noise_power"])
    return EXIT_OK


def _uri(path: Path, suffixes: Sequence[str]) -> str:
    name = path.name
    for suf in suffixes:
        if name.endswith(suf):
            return name[: -len(suf)]
    return path.stem


def _index(directory: str, suffixes: Sequence[str]) -> Dict[str, Path]:
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"not a directory: {directory}")
    out = {}
    for suf in suffixes:
        for p in sorted(d.glob(f"*{suf}")):
            out.setdefault(_uri(p, suffixes), p)
    return out


def cmd_eval_vad(args) -> int:
    suffixes = (".vad.rttm", ".rttm")
    ref, hyp = _index(args.ref, suffixes), _index(args.hyp, suffixes)
    missing = sorted(set(ref) - set(hyp))
    for uri in missing:
        print(f"{uri}: no hypothesis file", file=sys.stderr)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["uri", "tp", "fp", "fn", "tn", "precision", "recall", "fscore"])
    total = DetectionCounts()
    for uri in sorted(set(ref) & set(hyp)):
        r, h = ann.read_rttm(ref[uri]), ann.read_rttm(hyp[uri])
        duration = args.duration or max(r.end, h.end)
        c = vad_counts(r, h, duration, args.frame, args.collar)
        total = total + c
        writer.writerow([uri, c.tp, c.fp, c.fn, c.tn, f"{c.precision:.6f}", f"{c.recall:.6f}", f"{c.fscore:.6f}"])
    writer.writerow(
        ["TOTAL", total.tp, total.fp, total.fn, total.tn,
         f"{total.precision:.6f}", f"{total.recall:.6f}", f"{total.fscore:.6f}"]
    )
    return EXIT_PARTIAL if missing else EXIT_OK


def _gold_c50_from_labels(directory: str) -> Dict[str, float]:
    path = Path(directory) / "labels.jsonl"
    if not path.exists():
        return {}
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                row = json.loads(line)
                out[row["utterance_id"]] = float(row["c50_db"])
    return out


def cmd_eval_regression(args) -> int:
    suffix = f".{args.task}.csv"
    preds = _index(args.pred, (suffix,))
    golds = _index(args.gold, (suffix,))
    utterance_c50 = _gold_c50_from_labels(args.gold) if args.task == "c50" else {}
    clamp = tuple(args.clamp) if args.clamp else None
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["uri", "frames", "mae_db"])
    all_p: List[np.ndarray] = []
    all_g: List[np.ndarray] = []
    status = EXIT_OK
    for uri in sorted(preds):
        p = ann.read_frame_csv(preds[uri])
        if uri in golds:
            g = ann.read_frame_csv(golds[uri])
        elif uri in utterance_c50:
            g = np.full(p.shape, utterance_c50[uri])
        else:
            print(f"{uri}: no gold labels", file=sys.stderr)
            status = EXIT_PARTIAL
            continue
        n = min(len(p), len(g))
        p, g = p[:n], g[:n]
        # SNR gold is undefined off speech: evaluate where gold is defined
        mask = ~np.isnan(g)
        if np.any(np.isnan(p[mask])):
            print(f"{uri}: prediction missing on evaluated frames", file=sys.stderr)
            status = EXIT_PARTIAL
            continue
        if not mask.any():
            continue
        writer.writerow([uri, int(mask.sum()), f"{mae(p, g, mask, clamp):.6f}"])
        all_p.append(p[mask])
        all_g.append(g[mask])
    if all_p:
        p, g = np.concatenate(all_p), np.concatenate(all_g)
        writer.writerow(["TOTAL", p.size, f"{mae(p, g, None, clamp):.6f}"])
    return status


def _read_values(path: str) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.reader(f):
            if not row:
                continue
            try:
                values.append(float(row[-1]))
            except ValueError:
                if values:
                    raise ConfigError(f"{path}: non-numeric value {row[-1]!r}")
    return np.asarray(values)


def cmd_bin_report(args) -> int:
    cond, outcome = _read_values(args.cond), _read_values(args.outcome)
    try:
        report = decile_report(cond, outcome, args.bins)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    writer = csv.DictWriter(
        sys.stdout, ["bin", "low", "high", "count", "mean", "stderr"], lineterminator="\n"
    )
    writer.writeheader()
    writer.writerows(report.rows())
    return EXIT_OK


def cmd_loss_check(args) -> int:
    t0 = time.perf_counter()
    worst = gradient_check(seed=args.seed, num_batches=args.batches)
    for task, err in worst.items():
        print(f"{task}: max relative gradient error {err:.3e}")
    log.info("checked %d batches in %.1fs", args.batches, time.perf_counter() - t0)
    return EXIT_OK if max(worst.values()) <= args.tolerance else EXIT_PARTIAL


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("--verbose", "-v", action="count", default=0)
    common.add_argument("--config", help="JSON file of flag defaults (keys are flag names)")

    parser = argparse.ArgumentParser(prog="contamkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", parents=[common], help="build a contaminated corpus")
    p.add_argument("--speech", required=True, help="speech JSONL manifest")
    p.add_argument("--noise", required=True, help="noise JSONL manifest")
    p.add_argument("--rir", help="impulse-response JSONL manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--p-rir", type=float, default=0.9)
    p.add_argument("--snr-min", type=float, default=0.0)
    p.add_argument("--snr-max", type=float, default=30.0)
    p.add_argument("--ns-ratio", type=float, default=0.3)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("split-assets", parents=[common], help="80/10/10 split of an asset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--fractions", type=float, nargs=3, default=[0.8, 0.1, 0.1])
    p.set_defaults(func=cmd_split_assets)

    p = sub.add_parser("analyze-rir", parents=[common], help="onset and C50 of impulse responses")
    p.add_argument("wav", nargs="+")
    p.set_defaults(func=cmd_analyze_rir)

    p = sub.add_parser("snr-heuristic", parents=[common], help="oracle-VAD SNR baseline")
    p.add_argument("--wav", required=True)
    p.add_argument("--vad", required=True, help="RTTM or onset,offset CSV")
    p.add_argument("--window", type=float, default=6.0)
    p.add_argument("--fallback-db", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_snr_heuristic)

    p = sub.add_parser("eval-vad", parents=[common], help="frame-level VAD precision/recall/F")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--frame", type=float, default=0.016)
    p.add_argument("--collar", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=None)
    p.set_defaults(func=cmd_eval_vad)

    p = sub.add_parser("eval-regression", parents=[common], help="frame-level MAE for SNR or C50")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--task", choices=("snr", "c50"), required=True)
    p.add_argument("--clamp", type=float, nargs=2, metavar=("LOW", "HIGH"))
    p.set_defaults(func=cmd_eval_regression)

    p = sub.add_parser("bin-report", parents=[common], help="equal-count bin report")
    p.add_argument("--cond", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(func=cmd_bin_report)

    p = sub.add_parser("loss-check", parents=[common], help="finite-difference check of the loss")
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_loss_check)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as f:
            values = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from exc
    defaults = {k.lstrip("-").replace("-", "_"): v for k, v in values.items()}
    for action in parser._subparsers._group_actions:  # noqa: SLF001 - argparse has no public accessor
        for subparser in action.choices.values():
            subparser.set_defaults(**defaults)
            for a in subparser._actions:
                if a.dest in defaults:
                    a.required = False


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        level = logging.WARNING - 10 * min(args.verbose, 2)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
