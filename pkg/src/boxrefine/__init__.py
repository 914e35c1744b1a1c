"""Sub-pixel refinement of detection boxes from boundary probability maps."""

from .boundary_map import (
    BinaryVector,
    BoundaryMap,
    CoarseBoundary,
    CompressedPair,
    ScoringMatrix,
    binarize,
    build_scoring_matrix,
    coarse_localize,
    compress,
)
from .estimator import EstimatorFn, FineEdge, builtin, fine_decode, validate
from .geometry import Box, CenterSizeBox, center_size_to_edges, edges_to_center_size, iou, set_edge
from .refine import Detection, RefinedDetection, Thresholds, map_to_image, refine_batch, refine_one
from .refiner import BoundaryRefiner

__version__ = "0.1.0"

__all__ = [
    "BinaryVector",
    "BoundaryMap",
    "BoundaryRefiner",
    "Box",
    "CenterSizeBox",
    "CoarseBoundary",
    "CompressedPair",
    "Detection",
    "EstimatorFn",
    "FineEdge",
    "RefinedDetection",
    "ScoringMatrix",
    "Thresholds",
    "binarize",
    "build_scoring_matrix",
    "builtin",
    "center_size_to_edges",
    "coarse_localize",
    "compress",
    "edges_to_center_size",
    "fine_decode",
    "iou",
    "map_to_image",
    "refine_batch",
    "refine_one",
    "set_edge",
    "validate",
]
