"""Estimator-style front end for box refinement."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .estimator import EstimatorFn, resolve, validate
from .exceptions import InvalidEstimator
from .geometry import paired_iou
from .refine import RefinedDetection, Thresholds, refine_batch
from .validation import check_boxes, check_detections, check_threshold


class BoundaryRefiner(TransformerMixin, BaseEstimator):
    """Refine detection boxes from their boundary probability maps.

    Parameters
    ----------
    estimator : str, EstimatorFn or callable, default="linear"
        Boundary-distribution function. Builtins are ``"linear"``,
        ``"exponential"`` and ``"logarithmic"``.
    binarize_threshold : float, default=1e-4
        Compressed-vector values above this count as object evidence.
    fine_threshold : float, default=0.0
        Boundary values at or below this snap the edge to the pixel face.
    n_jobs : int or None, default=None
        Worker threads for batch refinement. Results do not depend on it.

    Notes
    -----
    Nothing is learned: ``fit`` only resolves and validates ``estimator``.
    ``transform`` maps a sequence of :class:`~boxrefine.refine.Detection`
    to an ``(n, 4)`` array of refined ``(l, r, t, b)`` boxes.
    """

    def __init__(self, estimator="linear", binarize_threshold=1e-4, fine_threshold=0.0, n_jobs=None):
        self.estimator = estimator
        self.binarize_threshold = binarize_threshold
        self.fine_threshold = fine_threshold
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        fn = resolve(self.estimator)
        rejection = validate(fn)
        if rejection is not None:
            raise InvalidEstimator(f"estimator {fn.name!r} rejected: {rejection}")
        self.estimator_fn_: EstimatorFn = fn
        self.thresholds_ = Thresholds(
            binarize=check_threshold("binarize_threshold", self.binarize_threshold),
            fine=check_threshold("fine_threshold", self.fine_threshold),
        )
        return self

    def refine(self, X) -> list[RefinedDetection]:
        check_is_fitted(self, "estimator_fn_")
        return refine_batch(check_detections(X), self.estimator_fn_, self.thresholds_, self.n_jobs)

    def transform(self, X) -> np.ndarray:
        refined = self.refine(X)
        return np.array([r.box.as_tuple() for r in refined], dtype=np.float64).reshape(-1, 4)

    def score(self, X, y) -> float:
        """Mean IoU between refined boxes and the truth boxes ``y``."""
        pred = self.transform(X)
        truth = check_boxes(y, len(pred))
        if len(pred) == 0:
            return float("nan")
        return float(np.mean(paired_iou(pred, truth)))
