"""Input validation helpers shared by the estimator API and the CLI."""
from __future__ import annotations

import math
import numbers

import numpy as np

from .exceptions import DegenerateBox
from .refine import Detection


def check_threshold(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not (math.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


def check_detections(X) -> list[Detection]:
    """Return ``X`` as a list of :class:`Detection`, naming the first bad element."""
    detections = getattr(X, "detections", X)
    if isinstance(detections, Detection):
        raise TypeError("expected a sequence of Detection, got a single Detection")
    try:
        detections = list(detections)
    except TypeError:
        raise TypeError(f"expected a sequence of Detection, got {type(X).__name__}") from None
    for index, d in enumerate(detections):
        if not isinstance(d, Detection):
            raise TypeError(f"element {index} is {type(d).__name__}, expected Detection")
    return detections


def check_boxes(y, n: int | None = None) -> np.ndarray:
    """Validate an ``(n, 4)`` array of ``(l, r, t, b)`` boxes."""
    from .evaluate import as_box_array

    boxes = as_box_array(y)
    if n is not None and len(boxes) != n:
        raise ValueError(f"expected {n} boxes, got {len(boxes)}")
    if not np.all(np.isfinite(boxes)):
        raise DegenerateBox("boxes contain non-finite coordinates")
    bad = np.flatnonzero(~((boxes[:, 0] < boxes[:, 1]) & (boxes[:, 2] < boxes[:, 3])))
    if bad.size:
        raise DegenerateBox(f"box {bad[0]} violates l < r and t < b: {boxes[bad[0]].tolist()}")
    return boxes
