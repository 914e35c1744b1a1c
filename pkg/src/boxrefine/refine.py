"""Per-detection refinement: map -> coarse boundaries -> fine edges -> box."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .boundary_map import (
    DEFAULT_BINARIZE_THRESHOLD,
    BoundaryMap,
    CoarseBoundary,
    binarize,
    build_scoring_matrix,
    coarse_localize,
    compress,
)
from .estimator import HIGH, LOW, EstimatorFn, fine_decode
from .exceptions import ClassOutOfRange, DegenerateBox
from .geometry import Box

logger = logging.getLogger(__name__)

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass(frozen=True)
class Thresholds:
    binarize: float = DEFAULT_BINARIZE_THRESHOLD
    fine: float = 0.0

    def __post_init__(self):
        if not (self.binarize >= 0 and self.fine >= 0):
            raise ValueError(f"thresholds must be >= 0, got {self}")


@dataclass(frozen=True)
class Detection:
    """A detector output: proposal box, class, score and its boundary map."""

    proposal: Box
    class_id: int
    score: float
    map: BoundaryMap

    def __post_init__(self):
        if not 0 <= self.class_id < self.map.cls:
            raise ClassOutOfRange(f"class_id {self.class_id} outside [0, {self.map.cls})")
        if self.map.proposal != self.proposal:
            raise ValueError("detection proposal differs from its map's proposal")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class RefinedDetection:
    box: Box
    fallback: bool
    coarse_box: Box
    reason: str = ""


def map_to_image(pos: float, axis: str, proposal: Box, S: int) -> float:
    """Map a map-grid coordinate in ``[0, S]`` onto the proposal in image space."""
    if S < 2:
        raise ValueError(f"S must be >= 2, got {S}")
    if axis == HORIZONTAL:
        return proposal.l + pos * (proposal.r - proposal.l) / S
    if axis == VERTICAL:
        return proposal.t + pos * (proposal.b - proposal.t) / S
    raise ValueError(f"axis must be {HORIZONTAL!r} or {VERTICAL!r}, got {axis!r}")


def _fallback(d: Detection, reason: str) -> RefinedDetection:
    return RefinedDetection(box=d.proposal, fallback=True, coarse_box=d.proposal, reason=reason)


def _axis_edges(v, coarse: CoarseBoundary, f: EstimatorFn, fine: float):
    low = fine_decode(coarse.i_first, LOW, v[coarse.i_first], f, fine)
    high = fine_decode(coarse.i_last, HIGH, v[coarse.i_last], f, fine)
    return low.position, high.position


def refine_one(
    d: Detection,
    f: EstimatorFn,
    thresholds: Thresholds = Thresholds(),
) -> RefinedDetection:
    S = d.map.S
    M = build_scoring_matrix(S)
    pair = compress(d.map, d.class_id)
    lr = coarse_localize(binarize(pair.v_lr, thresholds.binarize), M)
    tb = coarse_localize(binarize(pair.v_tb, thresholds.binarize), M)
    if not (lr.found and tb.found):
        return _fallback(d, "no boundary evidence above the binarization threshold")

    left, right = _axis_edges(pair.v_lr, lr, f, thresholds.fine)
    top, bottom = _axis_edges(pair.v_tb, tb, f, thresholds.fine)

    P = d.proposal
    try:
        coarse_box = Box(
            map_to_image(lr.i_first, HORIZONTAL, P, S),
            map_to_image(lr.i_last + 1, HORIZONTAL, P, S),
            map_to_image(tb.i_first, VERTICAL, P, S),
            map_to_image(tb.i_last + 1, VERTICAL, P, S),
        )
        box = Box(
            map_to_image(left, HORIZONTAL, P, S),
            map_to_image(right, HORIZONTAL, P, S),
            map_to_image(top, VERTICAL, P, S),
            map_to_image(bottom, VERTICAL, P, S),
        )
    except DegenerateBox as exc:
        return _fallback(d, f"degenerate refined box: {exc}")
    return RefinedDetection(box=box, fallback=False, coarse_box=coarse_box)


def _refine_chunk(start: int, chunk, f, thresholds):
    out = []
    for offset, d in enumerate(chunk):
        try:
            out.append(refine_one(d, f, thresholds))
        except Exception as exc:  # noqa: BLE001 - any per-element failure becomes a fallback
            index = start + offset
            logger.warning("detection %d: refinement failed: %s", index, exc)
            out.append(_fallback(d, f"detection {index}: {type(exc).__name__}: {exc}"))
    return out


def refine_batch(
    detections: Sequence[Detection],
    f: EstimatorFn,
    thresholds: Thresholds = Thresholds(),
    n_jobs: int | None = 1,
) -> list[RefinedDetection]:
    """Refine every detection, preserving order.

    Results do not depend on ``n_jobs``; work is split into contiguous chunks
    and concatenated in input order.
    """
    detections = list(detections)
    for index, d in enumerate(detections):
        if not isinstance(d, Detection):
            raise TypeError(f"element {index} is {type(d).__name__}, expected Detection")
    if not detections:
        return []
    n_jobs = 1 if n_jobs is None else int(n_jobs)
    if n_jobs == 1:
        return _refine_chunk(0, detections, f, thresholds)

    n_chunks = min(len(detections), max(1, abs(n_jobs)) * 4)
    bounds = np.linspace(0, len(detections), n_chunks + 1).astype(int)
    parts = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_refine_chunk)(lo, detections[lo:hi], f, thresholds)
        for lo, hi in zip(bounds[:-1], bounds[1:])
    )
    return [r for part in parts for r in part]
