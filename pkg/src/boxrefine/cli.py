"""Command-line interface.

Failures exit non-zero and print one line ``<ErrorClass>: <message>`` on
stderr; the exit status is the error class's ``exit_code``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections import defaultdict
from pathlib import Path

from .bundle import load_bundle, read_boxes, read_truth, write_boxes, write_bundle, write_truth
from .config import load_config, split_config
from .estimator import BUILTINS, resolve
from .evaluate import ApReport, EvalImage, average_precision, format_table
from .exceptions import BoxRefineError, FormatError, UnknownEstimator, UsageError
from .refine import Thresholds, refine_batch
from .synth import PROFILES, SynthConfig, generate_corpus

logger = logging.getLogger("boxrefine")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _estimator(name: str):
    try:
        return resolve(name)
    except UnknownEstimator as exc:
        raise UsageError(str(exc)) from None


def _clean(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _report_record(report: ApReport) -> dict:
    return {k: _clean(v) for k, v in report.as_dict().items()}


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def eval_images(records, scenes, source="predictions") -> list[EvalImage]:
    """Group boxes-file records into per-scene evaluation images."""
    owner = {}
    for s_i, scene in enumerate(scenes):
        for det in scene.detection_indices:
            owner[det] = s_i
    grouped = defaultdict(list)
    for rec in records:
        if rec.index not in owner:
            raise FormatError(f"detection index {rec.index} belongs to no scene in the truth file", source)
        grouped[owner[rec.index]].append(rec)
    images = []
    for s_i, scene in enumerate(scenes):
        recs = grouped.get(s_i, [])
        images.append(
            EvalImage(
                pred_boxes=[r.box for r in recs],
                pred_scores=[r.score for r in recs],
                pred_classes=[r.class_id for r in recs],
                truth_boxes=list(scene.truth_boxes),
                truth_classes=list(scene.class_ids),
            )
        )
    return images


def cmd_synth(args) -> int:
    synth, _ = split_config(load_config(args.config))
    detections, scenes = generate_corpus(synth)
    write_bundle(detections, args.out, image_extent=synth.image_extent, S=synth.S, cls=synth.cls)
    write_truth(scenes, args.truth)
    logger.info("wrote %d detections over %d scenes", len(detections), len(scenes))
    return 0


def cmd_refine(args) -> int:
    f = _estimator(args.estimator)
    thresholds = Thresholds(binarize=args.binarize_threshold, fine=args.fine_threshold)
    bundle = load_bundle(args.input)
    refined = refine_batch(bundle.detections, f, thresholds, n_jobs=args.jobs)
    write_boxes(bundle.detections, refined, args.out)
    n_fallback = sum(r.fallback for r in refined)
    logger.info("refined %d detections (%d fallbacks)", len(refined), n_fallback)
    return 0


def cmd_eval(args) -> int:
    records = read_boxes(args.pred)
    scenes = read_truth(args.truth)
    report = average_precision(eval_images(records, scenes, args.pred))
    sys.stdout.write(format_table({Path(args.pred).name: report}))
    _write_json(args.report, _report_record(report))
    return 0


def compare_estimators(synth: SynthConfig, thresholds: Thresholds, n_jobs: int = 1):
    """Render one corpus per profile and evaluate every builtin estimator on it.

    Returns ``{profile: {estimator: ApReport}}``.
    """
    grid = {}
    for profile_name in PROFILES:
        config = SynthConfig(**{**_config_fields(synth), "profile": profile_name})
        detections, scenes = generate_corpus(config)
        row = {}
        for name, f in BUILTINS.items():
            refined = refine_batch(detections, f, thresholds, n_jobs=n_jobs)
            images = [
                EvalImage(
                    pred_boxes=[refined[i].box for i in s.detection_indices],
                    pred_scores=[detections[i].score for i in s.detection_indices],
                    pred_classes=[detections[i].class_id for i in s.detection_indices],
                    truth_boxes=list(s.truth_boxes),
                    truth_classes=list(s.class_ids),
                )
                for s in scenes
            ]
            row[name] = average_precision(images)
        grid[profile_name] = row
    return grid


def _config_fields(config: SynthConfig) -> dict:
    return {k: getattr(config, k) for k in config.__dataclass_fields__ if k != "extra"}


def cmd_compare(args) -> int:
    synth, run = split_config(load_config(args.config))
    thresholds = Thresholds(binarize=run.binarize_threshold, fine=run.fine_threshold)
    grid = compare_estimators(synth, thresholds, n_jobs=run.n_jobs)
    payload = {}
    for profile_name, row in grid.items():
        best = min(row, key=lambda name: row[name].edge_mae)
        sys.stdout.write(f"profile: {profile_name} (lowest edge MAE: {best})\n")
        sys.stdout.write(format_table(row, label="estimator"))
        sys.stdout.write("\n")
        payload[profile_name] = {
            "best_edge_mae": best,
            "estimators": {name: _report_record(r) for name, r in row.items()},
        }
    if args.report:
        _write_json(args.report, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boxrefine", description="Sub-pixel box refinement from boundary maps.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic detection bundle and its ground truth")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="bundle directory to write")
    p.add_argument("--truth", required=True, help="truth JSON file to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("refine", help="refine every detection in a bundle")
    p.add_argument("--in", dest="input", required=True, help="bundle directory")
    p.add_argument("--out", required=True, help="boxes file to write")
    p.add_argument("--estimator", default="linear", help=f"one of {', '.join(BUILTINS)}")
    p.add_argument("--binarize-threshold", type=float, default=1e-4)
    p.add_argument("--fine-threshold", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1, help="worker threads; output does not depend on it")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="score a boxes file against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", required=True, help="JSON report to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare-estimators", help="AP and edge MAE per estimator and render profile")
    p.add_argument("--config", required=True)
    p.add_argument("--report", help="optional JSON output")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if getattr(args, "binarize_threshold", 0) < 0 or getattr(args, "fine_threshold", 0) < 0:
            raise UsageError("thresholds must be >= 0")
        return args.func(args)
    except BoxRefineError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"IOError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
