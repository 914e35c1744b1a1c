"""Boundary-distribution functions and the sub-pixel edge decode.

The value ``x`` read at a coarse boundary pixel is treated as the fraction
of that pixel covered by the object after passing through some monotone
transition profile. An estimator ``f`` maps ``x`` back to a covered fraction,
and the edge is placed that far inside the pixel from its object-facing side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import UnknownEstimator

LOW = "low"
HIGH = "high"

GRID_POINTS = 1024
SLOPE_CAP = 100.0
SLOPE_STEP = 1e-6
ENDPOINT_TOL = 1e-12


def _linear(x):
    return np.asarray(x, dtype=np.float64) * 1.0


def _exponential(x):
    x = np.asarray(x, dtype=np.float64)
    return x * x


def _logarithmic(x):
    return np.log((math.e - 1.0) * np.asarray(x, dtype=np.float64) + 1.0)


@dataclass(frozen=True)
class EstimatorFn:
    """A named map ``[0, 1] -> [0, 1]``; ``func`` must accept numpy arrays."""

    name: str
    func: Callable

    def __call__(self, x):
        out = self.func(x)
        if np.ndim(out) == 0:
            return float(out)
        return np.asarray(out, dtype=np.float64)


BUILTINS = {
    "linear": EstimatorFn("linear", _linear),
    "exponential": EstimatorFn("exponential", _exponential),
    "logarithmic": EstimatorFn("logarithmic", _logarithmic),
}


def builtin(name: str) -> EstimatorFn:
    try:
        return BUILTINS[name]
    except KeyError:
        raise UnknownEstimator(
            f"unknown estimator {name!r}; choose one of {', '.join(BUILTINS)}"
        ) from None


def custom(func: Callable, name: str = "custom") -> EstimatorFn:
    """Wrap a user function; scalar-only functions are vectorized."""
    probe = np.array([0.0, 1.0])
    try:
        vectorized = np.shape(func(probe)) == probe.shape
    except (TypeError, ValueError):
        vectorized = False
    if not vectorized:
        func = np.vectorize(func, otypes=[np.float64])
    return EstimatorFn(name, func)


def resolve(estimator) -> EstimatorFn:
    """Accept a builtin name, an :class:`EstimatorFn` or a bare callable."""
    if isinstance(estimator, EstimatorFn):
        return estimator
    if isinstance(estimator, str):
        return builtin(estimator)
    if callable(estimator):
        return custom(estimator)
    raise UnknownEstimator(f"cannot interpret {estimator!r} as an estimator")


@dataclass(frozen=True)
class Rejection:
    rule: str
    point: float
    detail: str

    def __str__(self):
        return f"{self.rule} violated at x={self.point:.6g}: {self.detail}"


def validate(
    f: EstimatorFn,
    grid_points: int = GRID_POINTS,
    slope_cap: float = SLOPE_CAP,
) -> Rejection | None:
    """Check the distribution-function requirements on a uniform grid.

    Returns ``None`` when ``f`` is acceptable, otherwise the first violated
    rule together with the grid point where it fails. Rules are checked in
    order: finiteness, endpoints, range, strict monotonicity, slope cap.

    Slopes are forward differences with a small fixed step taken at every
    grid point, so a derivative that blows up at an endpoint (``sqrt``) is
    caught even though the grid spacing itself would smooth it out.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    with np.errstate(all="ignore"):
        y = np.asarray(f(grid), dtype=np.float64)
    if y.shape != grid.shape:
        return Rejection("vectorized", 0.0, f"expected shape {grid.shape}, got {y.shape}")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        return Rejection("finite", grid[bad[0]], f"f(x)={y[bad[0]]}")
    if abs(y[0]) > ENDPOINT_TOL:
        return Rejection("passes through (0, 0)", 0.0, f"f(0)={y[0]!r}")
    if abs(y[-1] - 1.0) > ENDPOINT_TOL:
        return Rejection("passes through (1, 1)", 1.0, f"f(1)={y[-1]!r}")
    bad = np.flatnonzero((y < -ENDPOINT_TOL) | (y > 1 + ENDPOINT_TOL))
    if bad.size:
        return Rejection("range [0, 1]", grid[bad[0]], f"f(x)={y[bad[0]]!r}")
    bad = np.flatnonzero(np.diff(y) <= 0)
    if bad.size:
        return Rejection("strictly increasing", grid[bad[0]], "non-increasing step")

    lo = np.minimum(grid, 1.0 - SLOPE_STEP)
    with np.errstate(all="ignore"):
        slope = (np.asarray(f(lo + SLOPE_STEP)) - np.asarray(f(lo))) / SLOPE_STEP
    bad = np.flatnonzero(~(np.abs(slope) <= slope_cap))
    if bad.size:
        return Rejection(
            "slope cap", grid[bad[0]], f"slope {slope[bad[0]]:.4g} exceeds {slope_cap:g}"
        )
    return None


@dataclass(frozen=True)
class FineEdge:
    position: float
    coarse_index: int
    side: str


def fine_decode(
    coarse_index: int,
    side: str,
    x: float,
    f: EstimatorFn,
    fine_threshold: float = 0.0,
) -> FineEdge:
    """Place an edge inside the coarse boundary pixel ``[i, i + 1)``.

    ``side='low'`` is a left/top edge (object lies at higher coordinates),
    ``side='high'`` a right/bottom edge. With no evidence above
    ``fine_threshold`` the edge snaps to the pixel face away from the object.
    """
    if side not in (LOW, HIGH):
        raise ValueError(f"side must be 'low' or 'high', got {side!r}")
    i = int(coarse_index)
    x = float(x)
    if x <= fine_threshold:
        position = float(i + 1) if side == LOW else float(i)
    else:
        covered = float(f(x))
        position = (i + 1) - covered if side == LOW else i + covered
        position = min(max(position, float(i)), float(i + 1))
    return FineEdge(position=position, coarse_index=i, side=side)
