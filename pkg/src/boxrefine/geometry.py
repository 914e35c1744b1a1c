"""Axis-aligned boxes in edge form and center-size form.

Image convention: x grows to the right, y grows downward, so ``t < b``.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateBox


class Edge(str, enum.Enum):
    L = "l"
    R = "r"
    T = "t"
    B = "b"


@dataclass(frozen=True)
class Box:
    """Rectangle given by its left, right, top and bottom edges."""

    l: float
    r: float
    t: float
    b: float

    def __post_init__(self):
        coords = (self.l, self.r, self.t, self.b)
        if not all(math.isfinite(c) for c in coords):
            raise DegenerateBox(f"non-finite box coordinates {coords}")
        if not (self.l < self.r and self.t < self.b):
            raise DegenerateBox(
                f"box needs l < r and t < b, got l={self.l!r} r={self.r!r} "
                f"t={self.t!r} b={self.b!r}"
            )

    @property
    def width(self) -> float:
        return self.r - self.l

    @property
    def height(self) -> float:
        return self.b - self.t

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.l, self.r, self.t, self.b)

    @classmethod
    def from_sequence(cls, values) -> "Box":
        l, r, t, b = (float(v) for v in values)
        return cls(l, r, t, b)

    def translate(self, dx: float, dy: float) -> "Box":
        return Box(self.l + dx, self.r + dx, self.t + dy, self.b + dy)

    def scale(self, factor: float) -> "Box":
        return Box(self.l * factor, self.r * factor, self.t * factor, self.b * factor)

    def transpose(self) -> "Box":
        """Swap the horizontal and vertical axes."""
        return Box(self.t, self.b, self.l, self.r)


@dataclass(frozen=True)
class CenterSizeBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.w, self.h)):
            raise DegenerateBox("non-finite center-size box")
        if not (self.w > 0 and self.h > 0):
            raise DegenerateBox(f"center-size box needs w > 0 and h > 0, got w={self.w!r} h={self.h!r}")


def edges_to_center_size(box: Box) -> CenterSizeBox:
    return CenterSizeBox(
        x=(box.l + box.r) / 2,
        y=(box.t + box.b) / 2,
        w=box.r - box.l,
        h=box.b - box.t,
    )


def center_size_to_edges(csbox: CenterSizeBox) -> Box:
    half_w = csbox.w / 2
    half_h = csbox.h / 2
    return Box(csbox.x - half_w, csbox.x + half_w, csbox.y - half_h, csbox.y + half_h)


def set_edge(box: Box, which, value: float) -> Box:
    """Return a copy of ``box`` with one edge moved to ``value``.

    The other three coordinates are carried over untouched. Raises
    :class:`DegenerateBox` if the move inverts or collapses the box.
    """
    edge = Edge(which.value if isinstance(which, Edge) else str(which).lower())
    return dataclasses.replace(box, **{edge.value: float(value)})


def iou(a: Box, b: Box) -> float:
    iw = min(a.r, b.r) - max(a.l, b.l)
    ih = min(a.b, b.b) - max(a.t, b.t)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def pairwise_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """IoU matrix between two ``(n, 4)`` arrays in ``(l, r, t, b)`` order."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 1], b[None, :, 1]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 2], b[None, :, 2])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 1] - a[:, 0]) * (a[:, 3] - a[:, 2])
    area_b = (b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return np.minimum(out, 1.0)


def paired_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Row-wise IoU of two equally long ``(n, 4)`` arrays."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    iw = np.clip(np.minimum(a[:, 1], b[:, 1]) - np.maximum(a[:, 0], b[:, 0]), 0, None)
    ih = np.clip(np.minimum(a[:, 3], b[:, 3]) - np.maximum(a[:, 2], b[:, 2]), 0, None)
    inter = iw * ih
    union = (a[:, 1] - a[:, 0]) * (a[:, 3] - a[:, 2]) + (b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2]) - inter
    return np.minimum(inter / union, 1.0)
