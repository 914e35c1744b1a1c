"""Synthetic boundary maps rendered from known sub-pixel boxes.

Every map pixel receives ``g(c)`` where ``c`` is the exact fraction of the
pixel covered by the truth box and ``g`` is a monotone transition profile.
Randomness always comes from explicit seeds: scene ``k`` of a corpus with
base seed ``s`` draws from ``numpy.random.default_rng([s, k])``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .boundary_map import DEFAULT_CLASSES, DEFAULT_SIZE, BoundaryMap
from .exceptions import ConfigError, DegenerateBox, JitterFailed, NoOverlap
from .geometry import Box
from .refine import Detection

E_MINUS_ONE = math.e - 1.0


@dataclass(frozen=True)
class RenderProfile:
    name: str
    g: Callable

    def __call__(self, c):
        return self.g(np.asarray(c, dtype=np.float64))


PROFILES = {
    # inverse of the linear estimator
    "coverage": RenderProfile("coverage", lambda c: c * 1.0),
    # inverse of the exponential (x**2) estimator
    "sqrt": RenderProfile("sqrt", np.sqrt),
    # inverse of the logarithmic estimator
    "exp-transition": RenderProfile("exp-transition", lambda c: np.expm1(c) / E_MINUS_ONE),
}

MATCHED_ESTIMATOR = {
    "coverage": "linear",
    "sqrt": "exponential",
    "exp-transition": "logarithmic",
}


def profile(name: str) -> RenderProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown render profile {name!r}; choose one of {', '.join(PROFILES)}") from None


@dataclass(frozen=True)
class NoiseSpec:
    gaussian_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.gaussian_sigma >= 0:
            raise ValueError(f"gaussian_sigma must be >= 0, got {self.gaussian_sigma}")


@dataclass(frozen=True)
class SceneTruth:
    truth_boxes: tuple[Box, ...]
    class_ids: tuple[int, ...]
    image_extent: tuple[float, float]
    seed: int
    index: int = 0
    detection_indices: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.truth_boxes) != len(self.class_ids):
            raise ValueError("truth_boxes and class_ids differ in length")
        W, H = self.image_extent
        for box in self.truth_boxes:
            if box.l < 0 or box.t < 0 or box.r > W or box.b > H:
                raise ValueError(f"truth box {box} outside image extent {self.image_extent}")


def axis_coverage(lo: float, hi: float, origin: float, extent: float, S: int) -> np.ndarray:
    """Covered fraction of each of ``S`` cells tiling ``[origin, origin + extent]``."""
    a = (lo - origin) * S / extent
    b = (hi - origin) * S / extent
    cells = np.arange(S, dtype=np.float64)
    return np.clip(np.minimum(cells + 1, b) - np.maximum(cells, a), 0.0, 1.0)


def coverage_grid(truth: Box, proposal: Box, S: int) -> np.ndarray:
    """Exact per-pixel coverage of ``truth`` on the ``S x S`` grid over ``proposal``."""
    cx = axis_coverage(truth.l, truth.r, proposal.l, proposal.width, S)
    cy = axis_coverage(truth.t, truth.b, proposal.t, proposal.height, S)
    return np.outer(cy, cx)


def render_map(
    truth: Box,
    proposal: Box,
    S: int = DEFAULT_SIZE,
    cls: int = DEFAULT_CLASSES,
    class_id: int = 0,
    profile: RenderProfile = PROFILES["coverage"],
    distractors: Sequence[tuple[Box, int]] = (),
) -> BoundaryMap:
    """Render ``truth`` into channel ``class_id`` of a fresh map over ``proposal``.

    ``distractors`` are extra ``(box, class_id)`` objects drawn into the same
    map (max-combined per channel); exactness claims do not cover them.
    """
    if min(truth.r, proposal.r) <= max(truth.l, proposal.l) or min(truth.b, proposal.b) <= max(
        truth.t, proposal.t
    ):
        raise NoOverlap(f"truth {truth} does not intersect proposal {proposal}")
    if not 0 <= class_id < cls:
        raise ValueError(f"class_id {class_id} outside [0, {cls})")
    values = np.zeros((S, S, cls), dtype=np.float64)
    values[:, :, class_id] = profile(coverage_grid(truth, proposal, S))
    for box, cid in distractors:
        layer = profile(coverage_grid(box, proposal, S))
        values[:, :, cid] = np.maximum(values[:, :, cid], layer)
    return BoundaryMap(np.clip(values, 0.0, 1.0), proposal)


def add_noise(boundary_map: BoundaryMap, spec: NoiseSpec) -> BoundaryMap:
    if spec.gaussian_sigma == 0:
        return boundary_map
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, spec.gaussian_sigma, size=boundary_map.values.shape)
    noisy = np.clip(boundary_map.values.astype(np.float64) + noise, 0.0, 1.0)
    return BoundaryMap(noisy, boundary_map.proposal)


def jitter_proposal(
    truth: Box,
    magnitude: float,
    seed: int | np.random.Generator,
    S: int = DEFAULT_SIZE,
    max_retries: int = 100,
) -> Box:
    """Perturb each edge of ``truth`` by up to ``magnitude`` map pixels.

    A map pixel is ``1/S`` of the truth's extent on that axis.
    """
    if not magnitude >= 0:
        raise ValueError(f"magnitude must be >= 0, got {magnitude}")
    if magnitude == 0:
        return truth
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pitch = np.array([truth.width, truth.width, truth.height, truth.height]) / S
    base = np.array(truth.as_tuple())
    for _ in range(max_retries):
        edges = base + rng.uniform(-magnitude, magnitude, size=4) * pitch
        try:
            return Box(*map(float, edges))
        except DegenerateBox:
            continue
    raise JitterFailed(f"no valid jitter of {truth} after {max_retries} draws")


@dataclass(frozen=True)
class SynthConfig:
    """Corpus generator settings.

    ``box_size`` bounds the side lengths of truth boxes in image pixels;
    ``jitter`` is in map pixels; ``score_range`` bounds the uniform scores.
    """

    n_scenes: int = 10
    boxes_per_scene: int = 3
    S: int = DEFAULT_SIZE
    cls: int = DEFAULT_CLASSES
    profile: str = "coverage"
    noise: float = 0.0
    jitter: float = 2.0
    seed: int = 0
    image_extent: tuple[float, float] = (640.0, 480.0)
    box_size: tuple[float, float] = (16.0, 320.0)
    score_range: tuple[float, float] = (0.05, 1.0)
    distractors: bool = False
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        W, H = self.image_extent
        lo, hi = self.box_size
        checks = [
            (self.n_scenes >= 0, "n_scenes must be >= 0"),
            (self.boxes_per_scene >= 1, "boxes_per_scene must be >= 1"),
            (self.S >= 2, "S must be >= 2"),
            (self.cls >= 1, "cls must be >= 1"),
            (self.noise >= 0, "noise must be >= 0"),
            (self.jitter >= 0, "jitter must be >= 0"),
            (W > 0 and H > 0, "image_extent must be positive"),
            (0 < lo <= hi, "box_size must satisfy 0 < min <= max"),
            (hi <= min(W, H), "box_size max exceeds the image extent"),
            (0 <= self.score_range[0] <= self.score_range[1] <= 1, "score_range must lie in [0, 1]"),
            (self.profile in PROFILES, f"unknown profile {self.profile!r}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        kwargs = {k: v for k, v in data.items() if k in known}
        for key in ("image_extent", "box_size", "score_range"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        try:
            return cls(**kwargs, extra={k: v for k, v in data.items() if k not in known})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _sample_box(rng: np.random.Generator, config: SynthConfig) -> Box:
    W, H = config.image_extent
    lo, hi = config.box_size
    w, h = rng.uniform(lo, hi, size=2)
    x0 = rng.uniform(0.0, W - w)
    y0 = rng.uniform(0.0, H - h)
    return Box(float(x0), float(x0 + w), float(y0), float(y0 + h))


def generate_scene(config: SynthConfig, index: int, first_detection: int = 0):
    """Build one scene and its detections from the scene's derived seed."""
    rng = np.random.default_rng([config.seed, index])
    g = PROFILES[config.profile]
    truths = [_sample_box(rng, config) for _ in range(config.boxes_per_scene)]
    class_ids = [int(c) for c in rng.integers(0, config.cls, size=len(truths))]
    detections = []
    for k, (truth, cid) in enumerate(zip(truths, class_ids)):
        proposal = jitter_proposal(truth, config.jitter, rng, S=config.S)
        distractors = ()
        if config.distractors:
            distractors = tuple(
                (other, ocid)
                for j, (other, ocid) in enumerate(zip(truths, class_ids))
                if j != k
                and min(other.r, proposal.r) > max(other.l, proposal.l)
                and min(other.b, proposal.b) > max(other.t, proposal.t)
            )
        bmap = render_map(truth, proposal, config.S, config.cls, cid, g, distractors)
        noise_seed = int(rng.integers(0, 2**31 - 1))
        bmap = add_noise(bmap, NoiseSpec(config.noise, noise_seed))
        score = float(rng.uniform(*config.score_range))
        detections.append(Detection(proposal=proposal, class_id=cid, score=score, map=bmap))
    scene = SceneTruth(
        truth_boxes=tuple(truths),
        class_ids=tuple(class_ids),
        image_extent=tuple(config.image_extent),
        seed=config.seed,
        index=index,
        detection_indices=tuple(range(first_detection, first_detection + len(truths))),
    )
    return detections, scene


def iter_corpus(config: SynthConfig):
    """Yield ``(detections, scene)`` per scene without holding the whole corpus."""
    next_index = 0
    for index in range(config.n_scenes):
        detections, scene = generate_scene(config, index, next_index)
        next_index += len(detections)
        yield detections, scene


def generate_corpus(config: SynthConfig) -> tuple[list[Detection], list[SceneTruth]]:
    detections: list[Detection] = []
    scenes: list[SceneTruth] = []
    for dets, scene in iter_corpus(config):
        detections.extend(dets)
        scenes.append(scene)
    return detections, scenes
