import numpy as np
import pytest

from boxrefine.boundary_map import BoundaryMap, binarize, build_scoring_matrix, coarse_localize, compress
from boxrefine.estimator import builtin, custom
from boxrefine.geometry import Box
from boxrefine.refine import (
    HORIZONTAL,
    VERTICAL,
    Detection,
    Thresholds,
    map_to_image,
    refine_batch,
    refine_one,
)
from boxrefine.synth import PROFILES, SynthConfig, generate_corpus, render_map

from conftest import random_inner_box

S = 28
LINEAR = builtin("linear")
EXACT = Thresholds(binarize=0.0)


def to_image(box_map: Box, proposal: Box) -> Box:
    return Box(
        map_to_image(box_map.l, HORIZONTAL, proposal, S),
        map_to_image(box_map.r, HORIZONTAL, proposal, S),
        map_to_image(box_map.t, VERTICAL, proposal, S),
        map_to_image(box_map.b, VERTICAL, proposal, S),
    )


def map_error(refined: Box, truth: Box, proposal: Box) -> np.ndarray:
    pitch = np.array([proposal.width, proposal.width, proposal.height, proposal.height]) / S
    return np.abs(np.array(refined.as_tuple()) - np.array(truth.as_tuple())) / pitch


def detection(values, proposal=Box(10, 38, 20, 48), class_id=0, score=0.5):
    return Detection(proposal, class_id, score, BoundaryMap(values, proposal))


def test_map_to_image_examples():
    P = Box(10, 38, 5, 19)
    assert map_to_image(0, HORIZONTAL, P, S) == 10
    assert map_to_image(S, HORIZONTAL, P, S) == 38
    assert map_to_image(S / 2, HORIZONTAL, P, S) == 24
    assert map_to_image(0, VERTICAL, P, S) == 5
    assert map_to_image(S, VERTICAL, P, S) == 19
    with pytest.raises(ValueError):
        map_to_image(0, "diagonal", P, S)


def test_detection_validation():
    P = Box(0, 1, 0, 1)
    m = BoundaryMap(np.zeros((4, 4, 2)), P)
    with pytest.raises(IndexError):
        Detection(P, 2, 0.5, m)
    with pytest.raises(ValueError):
        Detection(Box(0, 2, 0, 1), 0, 0.5, m)
    with pytest.raises(ValueError):
        Detection(P, 0, 1.5, m)


def test_zero_map_falls_back():
    d = detection(np.zeros((S, S, 2)))
    r = refine_one(d, LINEAR)
    assert r.fallback and r.box == d.proposal and r.reason


def test_full_map_returns_proposal():
    d = detection(np.ones((S, S, 1)))
    r = refine_one(d, LINEAR)
    assert not r.fallback
    assert r.box == d.proposal
    assert r.coarse_box == d.proposal


def test_axes_agree_on_presence(rng):
    # any value above threshold raises both its row max and its column max
    M = build_scoring_matrix(S)
    for _ in range(500):
        values = rng.random((S, S, 1)) * (rng.random((S, S, 1)) < 0.01) * 2e-4
        pair = compress(BoundaryMap(values, Box(0, 1, 0, 1)), 0)
        lr = coarse_localize(binarize(pair.v_lr), M)
        tb = coarse_localize(binarize(pair.v_tb), M)
        assert lr.found == tb.found


def test_degenerate_fine_box_falls_back():
    values = np.zeros((S, S, 1))
    values[10:20, 7, 0] = 0.2  # one column, low coverage: left > right after decode
    r = refine_one(detection(values), LINEAR)
    assert r.fallback and "degenerate" in r.reason


def test_exact_recovery_coverage_linear(rng):
    P = Box(-3.0, 61.0, 100.0, 132.0)
    for _ in range(1000):
        truth_map = random_inner_box(rng, S)
        truth = to_image(truth_map, P)
        d = Detection(P, 0, 0.5, render_map(truth, P, S, 1, 0, PROFILES["coverage"]))
        r = refine_one(d, LINEAR, EXACT)
        assert not r.fallback
        assert map_error(r.box, truth, P).max() <= 1e-6


def test_default_threshold_error_bounded_by_dead_band(rng):
    P = Box(0.0, 56.0, 0.0, 28.0)
    for _ in range(300):
        truth = to_image(random_inner_box(rng, S), P)
        d = Detection(P, 0, 0.5, render_map(truth, P, S, 1, 0, PROFILES["coverage"]))
        r = refine_one(d, LINEAR)
        assert map_error(r.box, truth, P).max() <= 1e-4 + 1e-6


def test_containment_and_coarse_box(rng):
    cfg = SynthConfig(n_scenes=50, boxes_per_scene=2, cls=3, noise=0.05, jitter=2.0, seed=3)
    detections, _ = generate_corpus(cfg)
    for d in detections:
        r = refine_one(d, LINEAR, Thresholds(binarize=0.25))
        if r.fallback:
            assert r.box == d.proposal
            continue
        P = d.proposal
        px, py = P.width / S, P.height / S
        assert P.l - px <= r.box.l and r.box.r <= P.r + px
        assert P.t - py <= r.box.t and r.box.b <= P.b + py
        # fine edges lie inside the coarse boundary pixels
        assert r.coarse_box.l <= r.box.l <= r.coarse_box.l + px + 1e-9
        assert r.coarse_box.r - px - 1e-9 <= r.box.r <= r.coarse_box.r


def test_axis_separability(rng):
    cfg = SynthConfig(n_scenes=20, boxes_per_scene=2, cls=2, noise=0.02, seed=9)
    detections, _ = generate_corpus(cfg)
    for d in detections:
        t = Detection(d.proposal.transpose(), d.class_id, d.score, d.map.transpose())
        a = refine_one(d, LINEAR, Thresholds(binarize=0.1))
        b = refine_one(t, LINEAR, Thresholds(binarize=0.1))
        assert a.fallback == b.fallback
        assert b.box == a.box.transpose()


def test_refine_batch_basics():
    assert refine_batch([], LINEAR) == []
    d = detection(np.ones((S, S, 1)) * 0.5)
    out = refine_batch([d] * 5, LINEAR)
    assert len(out) == 5 and all(r == out[0] for r in out)
    with pytest.raises(TypeError, match="element 1"):
        refine_batch([d, "nope"], LINEAR)


def test_refine_batch_matches_sequential_and_parallel():
    cfg = SynthConfig(n_scenes=250, boxes_per_scene=2, cls=2, noise=0.03, seed=21)
    detections, _ = generate_corpus(cfg)
    assert len(detections) == 500
    th = Thresholds(binarize=0.15)
    expected = [refine_one(d, LINEAR, th) for d in detections]
    assert refine_batch(detections, LINEAR, th) == expected
    assert refine_batch(detections, LINEAR, th, n_jobs=8) == expected
    assert refine_batch(detections, LINEAR, th, n_jobs=-1) == expected


def test_refine_batch_element_failure_becomes_fallback():
    def picky(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 and 0 < x < 1:
            raise ArithmeticError("boom")
        return x

    good = detection(np.ones((S, S, 1)))
    values = np.zeros((S, S, 1))
    values[4:9, 4:9, 0] = 0.5
    bad = detection(values)
    out = refine_batch([good, bad], custom(picky))
    assert not out[0].fallback
    assert out[1].fallback and "detection 1" in out[1].reason
