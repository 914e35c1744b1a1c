"""COCO-style box AP and per-edge error statistics.

Follows the usual protocol: greedy score-ordered matching per image and
class, IoU thresholds 0.50:0.05:0.95, 101-point interpolated precision,
and area buckets small/medium/large split at 32**2 and 96**2 pixels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import EmptyCorpus
from .geometry import Box, pairwise_iou

IOU_THRESHOLDS = np.linspace(0.5, 0.95, 10)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
AREA_RANGES = {
    "all": (0.0, 1e10),
    "small": (0.0, 32.0**2),
    "medium": (32.0**2, 96.0**2),
    "large": (96.0**2, 1e10),
}


def as_box_array(boxes) -> np.ndarray:
    """Coerce a sequence of :class:`Box` or an ``(n, 4)`` array to float64 ``(n, 4)``."""
    if isinstance(boxes, np.ndarray):
        return boxes.astype(np.float64).reshape(-1, 4)
    rows = [b.as_tuple() if isinstance(b, Box) else tuple(b) for b in boxes]
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]
    unmatched_predictions: tuple[int, ...]
    unmatched_truths: tuple[int, ...]


def _greedy(ious: np.ndarray, order: np.ndarray, threshold: float, gt_ignore=None) -> np.ndarray:
    """Return, per prediction, the index of its matched truth or -1.

    Each prediction (visited in ``order``) takes the best unmatched truth
    with IoU >= threshold, preferring non-ignored truths; ties go to the
    lower truth index.
    """
    n_pred, n_gt = ious.shape
    matched_gt = np.zeros(n_gt, dtype=bool)
    pred_match = np.full(n_pred, -1, dtype=np.int64)
    if gt_ignore is None:
        gt_ignore = np.zeros(n_gt, dtype=bool)
    threshold = min(threshold, 1 - 1e-10)
    for p in order:
        for pool in (~gt_ignore, gt_ignore):
            cand = np.flatnonzero(pool & ~matched_gt & (ious[p] >= threshold))
            if cand.size:
                best = cand[np.argmax(ious[p, cand])]
                matched_gt[best] = True
                pred_match[p] = best
                break
    return pred_match


def score_order(scores) -> np.ndarray:
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def match(predictions, scores, truths, iou_threshold: float = 0.5) -> MatchResult:
    pred = as_box_array(predictions)
    gt = as_box_array(truths)
    ious = pairwise_iou(pred, gt)
    pred_match = _greedy(ious, score_order(scores), iou_threshold)
    pairs = tuple(
        (int(p), int(g), float(ious[p, g])) for p, g in enumerate(pred_match) if g >= 0
    )
    matched = set(int(g) for g in pred_match if g >= 0)
    return MatchResult(
        pairs=pairs,
        unmatched_predictions=tuple(int(p) for p in np.flatnonzero(pred_match < 0)),
        unmatched_truths=tuple(g for g in range(len(gt)) if g not in matched),
    )


@dataclass(frozen=True)
class EdgeErrorStats:
    count: int
    mean: float
    median: float
    p95: float
    per_edge: tuple[float, float, float, float]  # mean |dl|, |dr|, |dt|, |db|


def edge_error(predictions, truths, matching: MatchResult) -> EdgeErrorStats:
    pred = as_box_array(predictions)
    gt = as_box_array(truths)
    if not matching.pairs:
        nan = float("nan")
        return EdgeErrorStats(0, nan, nan, nan, (nan,) * 4)
    p_idx = [p for p, _, _ in matching.pairs]
    g_idx = [g for _, g, _ in matching.pairs]
    err = np.abs(pred[p_idx] - gt[g_idx])
    return EdgeErrorStats(
        count=len(p_idx),
        mean=float(err.mean()),
        median=float(np.median(err)),
        p95=float(np.percentile(err, 95)),
        per_edge=tuple(float(v) for v in err.mean(axis=0)),
    )


@dataclass
class EvalImage:
    """Predictions and ground truth for one image."""

    pred_boxes: np.ndarray
    pred_scores: np.ndarray
    pred_classes: np.ndarray
    truth_boxes: np.ndarray
    truth_classes: np.ndarray

    def __post_init__(self):
        self.pred_boxes = as_box_array(self.pred_boxes)
        self.truth_boxes = as_box_array(self.truth_boxes)
        self.pred_scores = np.asarray(self.pred_scores, dtype=np.float64).reshape(-1)
        self.pred_classes = np.asarray(self.pred_classes, dtype=np.int64).reshape(-1)
        self.truth_classes = np.asarray(self.truth_classes, dtype=np.int64).reshape(-1)
        if not (len(self.pred_boxes) == len(self.pred_scores) == len(self.pred_classes)):
            raise ValueError("prediction arrays differ in length")
        if len(self.truth_boxes) != len(self.truth_classes):
            raise ValueError("truth arrays differ in length")


@dataclass(frozen=True)
class ApReport:
    ap: float
    ap50: float
    ap75: float
    ap_s: float
    ap_m: float
    ap_l: float
    edge_mae: float
    n_images: int = 0
    n_predictions: int = 0
    n_truths: int = 0
    edge: EdgeErrorStats | None = field(default=None, compare=False)

    def as_dict(self) -> dict:
        keys = ("ap", "ap50", "ap75", "ap_s", "ap_m", "ap_l", "edge_mae",
                "n_images", "n_predictions", "n_truths")
        out = {k: getattr(self, k) for k in keys}
        if self.edge is not None:
            out["edge_median"] = self.edge.median
            out["edge_p95"] = self.edge.p95
        return out


def _box_area(boxes: np.ndarray) -> np.ndarray:
    return (boxes[:, 1] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 2])


def _interpolated_ap(scores, tp, ignore, n_pos: int) -> float:
    order = np.argsort(-scores, kind="mergesort")
    keep = ~ignore[order]
    tp = tp[order][keep]
    tp_cum = np.cumsum(tp, dtype=np.float64)
    fp_cum = np.cumsum(~tp, dtype=np.float64)
    if tp.size == 0:
        return 0.0
    recall = tp_cum / n_pos
    precision = tp_cum / (tp_cum + fp_cum)
    # make precision monotonically non-increasing from the right
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    q = np.zeros_like(RECALL_POINTS)
    valid = idx < len(precision)
    q[valid] = precision[idx[valid]]
    return float(q.mean())


def _class_ap(images, cls_id, threshold, area_range, max_dets):
    lo, hi = area_range
    scores, tps, ignores = [], [], []
    n_pos = 0
    for img in images:
        pmask = img.pred_classes == cls_id
        gmask = img.truth_classes == cls_id
        pboxes = img.pred_boxes[pmask]
        pscores = img.pred_scores[pmask]
        order = score_order(pscores)[:max_dets]
        pboxes, pscores = pboxes[order], pscores[order]
        gboxes = img.truth_boxes[gmask]
        g_area = _box_area(gboxes)
        g_ignore = (g_area < lo) | (g_area > hi)
        n_pos += int((~g_ignore).sum())
        if len(pboxes) == 0:
            continue
        ious = pairwise_iou(pboxes, gboxes)
        pm = _greedy(ious, np.arange(len(pboxes)), threshold, g_ignore)
        matched = pm >= 0
        p_area = _box_area(pboxes)
        ignore = (p_area < lo) | (p_area > hi)
        ignore[matched] = g_ignore[pm[matched]]
        scores.append(pscores)
        tps.append(matched)
        ignores.append(ignore)
    if n_pos == 0:
        return None
    if not scores:
        return 0.0
    return _interpolated_ap(
        np.concatenate(scores), np.concatenate(tps), np.concatenate(ignores), n_pos
    )


def _mean_ap(images, classes, thresholds, area_range, max_dets) -> float:
    values = [
        v
        for t in thresholds
        for c in classes
        if (v := _class_ap(images, c, t, area_range, max_dets)) is not None
    ]
    return float(np.mean(values)) if values else float("nan")


def corpus_edge_error(images: Sequence[EvalImage], iou_threshold: float = 0.5) -> EdgeErrorStats:
    """Per-edge errors over class-aware greedy matches across all images."""
    pred_rows, truth_rows, pairs = [], [], []
    offset_p = offset_g = 0
    for img in images:
        for c in np.unique(np.concatenate([img.pred_classes, img.truth_classes])):
            pi = np.flatnonzero(img.pred_classes == c)
            gi = np.flatnonzero(img.truth_classes == c)
            m = match(img.pred_boxes[pi], img.pred_scores[pi], img.truth_boxes[gi], iou_threshold)
            pairs.extend((offset_p + pi[p], offset_g + gi[g], v) for p, g, v in m.pairs)
        pred_rows.append(img.pred_boxes)
        truth_rows.append(img.truth_boxes)
        offset_p += len(img.pred_boxes)
        offset_g += len(img.truth_boxes)
    preds = np.concatenate(pred_rows) if pred_rows else np.zeros((0, 4))
    truths = np.concatenate(truth_rows) if truth_rows else np.zeros((0, 4))
    return edge_error(preds, truths, MatchResult(tuple(pairs), (), ()))


def average_precision(
    images: Sequence[EvalImage],
    iou_thresholds=IOU_THRESHOLDS,
    max_dets: int = 100,
    area_scale: float = 1.0,
) -> ApReport:
    """COCO-style AP summary over a corpus.

    ``area_scale`` multiplies the size-bucket bounds, so a corpus whose
    coordinates were scaled by ``k`` keeps its bucket assignment with
    ``area_scale=k**2``.
    """
    images = list(images)
    n_truths = sum(len(img.truth_boxes) for img in images)
    if n_truths == 0:
        raise EmptyCorpus("corpus contains no ground-truth boxes")
    classes = np.unique(np.concatenate([img.truth_classes for img in images]))
    thresholds = np.asarray(iou_thresholds, dtype=np.float64)
    ranges = {k: (lo * area_scale, hi * area_scale) for k, (lo, hi) in AREA_RANGES.items()}

    def at(t_list, area="all"):
        return _mean_ap(images, classes, t_list, ranges[area], max_dets)

    edge = corpus_edge_error(images, 0.5)
    return ApReport(
        ap=at(thresholds),
        ap50=at([0.5]),
        ap75=at([0.75]),
        ap_s=at(thresholds, "small"),
        ap_m=at(thresholds, "medium"),
        ap_l=at(thresholds, "large"),
        edge_mae=edge.mean,
        n_images=len(images),
        n_predictions=sum(len(img.pred_boxes) for img in images),
        n_truths=n_truths,
        edge=edge,
    )


def format_table(rows: dict[str, ApReport], label: str = "run") -> str:
    """Aligned plain-text table, AP figures shown x100."""
    header = [label, "AP", "AP50", "AP75", "APs", "APm", "APl", "edgeMAE"]
    lines = []
    for name, r in rows.items():
        cells = [name]
        for v in (r.ap, r.ap50, r.ap75, r.ap_s, r.ap_m, r.ap_l):
            cells.append("-" if np.isnan(v) else f"{100 * v:.1f}")
        cells.append("-" if np.isnan(r.edge_mae) else f"{r.edge_mae:.4f}")
        lines.append(cells)
    widths = [max(len(row[i]) for row in [header, *lines]) for i in range(len(header))]
    fmt = lambda row: "  ".join(  # noqa: E731
        c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))
    )
    return "\n".join([fmt(header), *map(fmt, lines)]) + "\n"
