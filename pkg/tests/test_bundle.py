import json
import shutil
import struct
from pathlib import Path

import numpy as np
import pytest

from boxrefine.boundary_map import BoundaryMap
from boxrefine.bundle import (
    BoxRecord,
    format_boxes,
    load_bundle,
    read_boxes,
    read_bundle,
    read_truth,
    write_boxes,
    write_bundle,
    write_truth,
)
from boxrefine.exceptions import FormatError, MixedShapes, ValueRangeError, VersionMismatch
from boxrefine.geometry import Box
from boxrefine.refine import Detection, RefinedDetection
from boxrefine.synth import SynthConfig, generate_corpus

FIXTURES = Path(__file__).parent / "fixtures"


def golden_detections():
    m0 = np.zeros((4, 4, 2))
    m0[1:3, 1:3, 0] = 1.0
    m0[1:3, 0, 0] = 0.25
    m0[1:3, 3, 0] = 0.5
    m1 = np.zeros((4, 4, 2))
    m1[:, :, 1] = 0.75
    P0, P1 = Box(10.0, 18.0, 20.0, 24.0), Box(0.5, 4.5, 0.25, 8.25)
    return [Detection(P0, 0, 0.875, BoundaryMap(m0, P0)), Detection(P1, 1, 0.5, BoundaryMap(m1, P1))]


def test_golden_fixture_reads():
    bundle = load_bundle(FIXTURES / "golden_v1")
    assert (bundle.S, bundle.cls, bundle.image_extent) == (4, 2, (32.0, 32.0))
    assert bundle.detections == golden_detections()


def test_golden_fixture_blob_layout():
    raw = (FIXTURES / "golden_v1" / "maps.bin").read_bytes()
    assert len(raw) == 2 * 4 * 4 * 2 * 4

    def value(record, row, col, cls):
        offset = record * 128 + ((row * 4 + col) * 2 + cls) * 4
        return struct.unpack_from("<f", raw, offset)[0]

    assert value(0, 1, 0, 0) == 0.25
    assert value(0, 1, 3, 0) == 0.5
    assert value(0, 2, 2, 0) == 1.0
    assert value(0, 0, 0, 0) == 0.0
    assert value(1, 3, 3, 1) == 0.75
    assert value(1, 3, 3, 0) == 0.0


def test_writer_reproduces_golden_bytes(tmp_path):
    write_bundle(golden_detections(), tmp_path / "b", image_extent=(32, 32))
    for name in ("manifest.json", "maps.bin"):
        assert (tmp_path / "b" / name).read_bytes() == (FIXTURES / "golden_v1" / name).read_bytes()


def test_round_trip_random_corpus(tmp_path):
    dets, _ = generate_corpus(SynthConfig(n_scenes=5, boxes_per_scene=3, cls=7, noise=0.1, seed=4))
    write_bundle(dets, tmp_path / "b")
    assert read_bundle(tmp_path / "b") == dets
    write_bundle(read_bundle(tmp_path / "b"), tmp_path / "c")
    for name in ("manifest.json", "maps.bin"):
        assert (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_manifest_path_also_accepted(tmp_path):
    write_bundle(golden_detections(), tmp_path / "b")
    assert read_bundle(tmp_path / "b" / "manifest.json") == golden_detections()


def test_empty_bundle(tmp_path):
    write_bundle([], tmp_path / "e")
    bundle = load_bundle(tmp_path / "e")
    assert bundle.detections == [] and (bundle.S, bundle.cls) == (28, 80)
    assert (tmp_path / "e" / "maps.bin").read_bytes() == b""


def test_blob_size_for_default_shapes(tmp_path):
    P = Box(0, 28, 0, 28)
    dets = [Detection(P, 3, 0.5, BoundaryMap(np.zeros((28, 28, 80)), P))] * 2
    write_bundle(dets, tmp_path / "b")
    assert (tmp_path / "b" / "maps.bin").stat().st_size == 501_760
    assert len(read_bundle(tmp_path / "b")) == 2


def test_mixed_shapes_rejected(tmp_path):
    P = Box(0, 1, 0, 1)
    dets = [
        Detection(P, 0, 0.5, BoundaryMap(np.zeros((4, 4, 2)), P)),
        Detection(P, 0, 0.5, BoundaryMap(np.zeros((5, 5, 2)), P)),
    ]
    with pytest.raises(MixedShapes):
        write_bundle(dets, tmp_path / "b")


@pytest.mark.parametrize(
    "fixture, error, fragment",
    [
        ("truncated_blob", FormatError, "blob length 246 bytes, expected 256"),
        ("bad_version", VersionMismatch, "version 2"),
        ("bad_json", FormatError, "byte 41"),
        ("value_out_of_range", ValueRangeError, "byte 12"),
        ("bad_offset", FormatError, "detection record 1"),
        ("bad_class", FormatError, "detection record 1"),
    ],
)
def test_corrupted_fixtures(fixture, error, fragment):
    with pytest.raises(error) as info:
        read_bundle(FIXTURES / fixture)
    assert fragment in str(info.value)


def test_values_within_tolerance_are_clamped(caplog):
    bundle = load_bundle(FIXTURES / "value_within_tolerance")
    assert bundle.clamped == 1
    assert bundle.detections[0].map.values[0, 0, 0] == 0.0
    assert "clamped 1" in caplog.text


def test_missing_files(tmp_path):
    with pytest.raises(FormatError):
        read_bundle(tmp_path / "nothing")
    shutil.copytree(FIXTURES / "golden_v1", tmp_path / "g")
    (tmp_path / "g" / "maps.bin").unlink()
    with pytest.raises(FormatError, match="blob file not found"):
        read_bundle(tmp_path / "g")


def test_nan_in_blob_rejected(tmp_path):
    shutil.copytree(FIXTURES / "golden_v1", tmp_path / "g")
    raw = bytearray((tmp_path / "g" / "maps.bin").read_bytes())
    raw[200:204] = struct.pack("<f", float("nan"))
    (tmp_path / "g" / "maps.bin").write_bytes(bytes(raw))
    with pytest.raises(ValueRangeError, match="byte 200"):
        read_bundle(tmp_path / "g")


def test_manifest_not_object(tmp_path):
    (tmp_path / "b").mkdir()
    (tmp_path / "b" / "manifest.json").write_text("[1, 2]")
    with pytest.raises(FormatError):
        read_bundle(tmp_path / "b")


def test_truth_round_trip(tmp_path):
    _, scenes = generate_corpus(SynthConfig(n_scenes=3, boxes_per_scene=2, cls=3, seed=1))
    write_truth(scenes, tmp_path / "t.json")
    assert read_truth(tmp_path / "t.json") == scenes
    (tmp_path / "bad.json").write_text(json.dumps({"version": 1, "scenes": [{"truth_boxes": [[0, 0, 0, 1]]}]}))
    with pytest.raises(FormatError, match="scene record 0"):
        read_truth(tmp_path / "bad.json")


def test_boxes_file_round_trip(tmp_path):
    dets = golden_detections()
    refined = [
        RefinedDetection(Box(10.125, 17.0, 21.0, 23.5), False, dets[0].proposal),
        RefinedDetection(dets[1].proposal, True, dets[1].proposal),
    ]
    write_boxes(dets, refined, tmp_path / "boxes.txt")
    text = (tmp_path / "boxes.txt").read_text()
    assert text.splitlines()[0] == "0 0 0.875 10.125 17.0 21.0 23.5 0"
    assert read_boxes(tmp_path / "boxes.txt") == [
        BoxRecord(0, 0, 0.875, Box(10.125, 17.0, 21.0, 23.5), False),
        BoxRecord(1, 1, 0.5, dets[1].proposal, True),
    ]
    assert format_boxes([], []) == ""


@pytest.mark.parametrize(
    "line, fragment",
    [("0 0 0.5 1 2 3\n", "expected 8 fields"), ("0 0 0.5 2 1 0 1 0\n", "l < r"), ("0 0 0.5 0 1 0 1 7\n", "fallback")],
)
def test_boxes_file_errors(tmp_path, line, fragment):
    path = tmp_path / "boxes.txt"
    path.write_text("0 0 0.5 0 1 0 1 0\n" + line)
    with pytest.raises(FormatError) as info:
        read_boxes(path)
    assert "line 2" in str(info.value) and "byte 18" in str(info.value) and fragment in str(info.value)
