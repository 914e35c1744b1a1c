"""Boundary probability maps and coarse boundary localization.

A map is an ``S x S x cls`` tensor laid out as (row, column, class) over a
proposal region. For one class channel the column maxima drive the left and
right edges, the row maxima drive the top and bottom edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import ClassOutOfRange
from .geometry import Box

DEFAULT_SIZE = 28
DEFAULT_CLASSES = 80
DEFAULT_BINARIZE_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    """Per-class boundary probabilities over ``proposal``.

    ``values`` is stored as a read-only float32 array of shape ``(S, S, cls)``.
    """

    values: np.ndarray
    proposal: Box

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32, copy=True)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[0] != values.shape[1]:
            raise ValueError(f"map values must have shape (S, S, cls), got {values.shape}")
        if values.shape[0] < 2 or values.shape[2] < 1:
            raise ValueError(f"map needs S >= 2 and cls >= 1, got shape {values.shape}")
        if not np.all((values >= 0) & (values <= 1)):
            raise ValueError("map values must lie in [0, 1]")
        if not isinstance(self.proposal, Box):
            raise TypeError("proposal must be a Box")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def S(self) -> int:
        return self.values.shape[0]

    @property
    def cls(self) -> int:
        return self.values.shape[2]

    def channel(self, class_id: int) -> np.ndarray:
        if not 0 <= class_id < self.cls:
            raise ClassOutOfRange(f"class_id {class_id} outside [0, {self.cls})")
        return self.values[:, :, class_id]

    def transpose(self) -> "BoundaryMap":
        """Swap rows and columns (and the proposal's axes accordingly)."""
        return BoundaryMap(self.values.transpose(1, 0, 2), self.proposal.transpose())

    def __eq__(self, other):
        if not isinstance(other, BoundaryMap):
            return NotImplemented
        return self.proposal == other.proposal and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class CompressedPair:
    v_lr: np.ndarray  # column maxima
    v_tb: np.ndarray  # row maxima


@dataclass(frozen=True)
class BinaryVector:
    bits: np.ndarray
    source_threshold: float = DEFAULT_BINARIZE_THRESHOLD

    @property
    def S(self) -> int:
        return len(self.bits)


@dataclass(frozen=True, eq=False)
class ScoringMatrix:
    entries: np.ndarray = field(repr=False)

    @property
    def S(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CoarseBoundary:
    i_first: int
    i_last: int
    found: bool

    @classmethod
    def missing(cls) -> "CoarseBoundary":
        return cls(-1, -1, False)


def compress(boundary_map: BoundaryMap, class_id: int) -> CompressedPair:
    """Max-project one class channel onto both axes."""
    channel = boundary_map.channel(class_id)
    return CompressedPair(v_lr=channel.max(axis=0), v_tb=channel.max(axis=1))


def binarize(v, threshold: float = DEFAULT_BINARIZE_THRESHOLD) -> BinaryVector:
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    bits = (np.asarray(v) > threshold).astype(np.int64)
    return BinaryVector(bits=bits, source_threshold=float(threshold))


@lru_cache(maxsize=32)
def _scoring_entries(S: int) -> np.ndarray:
    # Column i holds +1 on the diagonal and -1 just above it, so that
    # (v @ M)[i] = v[i] - v[i-1]: a rising-edge detector.
    entries = np.eye(S, dtype=np.int64)
    idx = np.arange(1, S)
    entries[idx - 1, idx] = -1
    entries.setflags(write=False)
    return entries


def build_scoring_matrix(S: int = DEFAULT_SIZE) -> ScoringMatrix:
    if S < 2:
        raise ValueError(f"S must be >= 2, got {S}")
    return ScoringMatrix(_scoring_entries(int(S)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def scores(v_b: BinaryVector, M: ScoringMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Activated products with the scoring matrix and with its transpose.

    The first marks rising edges (object starts), the second falling edges
    (object ends, counting the virtual zero past the last element).
    """
    if v_b.S != M.S:
        raise ValueError(f"vector length {v_b.S} does not match scoring matrix size {M.S}")
    return relu(v_b.bits @ M.entries), relu(v_b.bits @ M.entries.T)


def coarse_localize(v_b: BinaryVector, M: ScoringMatrix) -> CoarseBoundary:
    rising, falling = scores(v_b, M)
    starts = np.flatnonzero(rising == 1)
    if starts.size == 0:
        return CoarseBoundary.missing()
    ends = np.flatnonzero(falling == 1)
    return CoarseBoundary(i_first=int(starts[0]), i_last=int(ends[-1]), found=True)
