"""On-disk formats.

DetectionBundle
    A directory holding ``manifest.json`` and ``maps.bin``. The manifest is
    JSON::

        {"version": 1, "S": 28, "cls": 80, "image_extent": [W, H] | null,
         "blob": "maps.bin",
         "detections": [{"index": 0, "proposal": [l, r, t, b],
                         "class_id": 3, "score": 0.9, "offset": 0}, ...]}

    ``maps.bin`` concatenates one ``S*S*cls`` tensor per detection as
    little-endian float32 in (row, column, class) order; record ``i`` starts
    at byte ``i * S*S*cls*4``.

Truth file
    JSON ``{"version": 1, "scenes": [{"index", "seed", "image_extent",
    "truth_boxes", "class_ids", "detection_indices"}, ...]}``.

Boxes file
    One detection per line, whitespace separated:
    ``index class_id score l r t b fallback`` with ``fallback`` 0 or 1.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .boundary_map import DEFAULT_CLASSES, DEFAULT_SIZE, BoundaryMap
from .exceptions import BoxRefineError, FormatError, MixedShapes, ValueRangeError, VersionMismatch
from .geometry import Box
from .refine import Detection, RefinedDetection
from .synth import SceneTruth

logger = logging.getLogger(__name__)

VERSION = 1
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "maps.bin"
BLOB_DTYPE = np.dtype("<f4")
RANGE_TOL = 1e-6


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


@dataclass
class DetectionBundle:
    detections: list[Detection]
    S: int = DEFAULT_SIZE
    cls: int = DEFAULT_CLASSES
    image_extent: tuple[float, float] | None = None
    clamped: int = field(default=0, compare=False)


def write_bundle(
    detections: Sequence[Detection],
    path,
    image_extent=None,
    S: int | None = None,
    cls: int | None = None,
):
    """Write ``detections`` as a bundle directory at ``path``.

    ``S`` and ``cls`` are taken from the detections; for an empty bundle they
    default to 28 and 80 unless given.
    """
    detections = list(detections)
    path = Path(path)
    if detections:
        S = detections[0].map.S if S is None else S
        cls = detections[0].map.cls if cls is None else cls
    S = DEFAULT_SIZE if S is None else int(S)
    cls = DEFAULT_CLASSES if cls is None else int(cls)
    for i, d in enumerate(detections):
        if (d.map.S, d.map.cls) != (S, cls):
            raise MixedShapes(
                f"detection {i} has map shape S={d.map.S} cls={d.map.cls}, bundle uses S={S} cls={cls}"
            )

    record_bytes = S * S * cls * BLOB_DTYPE.itemsize
    records = [
        {
            "index": i,
            "proposal": list(d.proposal.as_tuple()),
            "class_id": int(d.class_id),
            "score": float(d.score),
            "offset": i * record_bytes,
        }
        for i, d in enumerate(detections)
    ]
    manifest = {
        "version": VERSION,
        "S": S,
        "cls": cls,
        "image_extent": None if image_extent is None else [float(v) for v in image_extent],
        "blob": BLOB_NAME,
        "detections": records,
    }
    path.mkdir(parents=True, exist_ok=True)
    with open(path / BLOB_NAME, "wb") as fh:
        for d in detections:
            fh.write(np.ascontiguousarray(d.map.values, dtype=BLOB_DTYPE).tobytes())
    _write_text(path / MANIFEST_NAME, _dump_json(manifest))


def _require(record: dict, key: str, kind, where: str, path):
    if key not in record:
        raise FormatError(f"{where}: missing key {key!r}", path)
    value = record[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise FormatError(f"{where}: {key!r} must be an integer, got {value!r}", path)
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise FormatError(f"{where}: {key!r} must be a number, got {value!r}", path)
    if kind is list and not isinstance(value, list):
        raise FormatError(f"{where}: {key!r} must be a list, got {value!r}", path)
    return value


def _load_json(path: Path):
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FormatError("file not found", path) from None
    except OSError as exc:
        raise FormatError(f"cannot read: {exc}", path) from None
    try:
        return json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise FormatError(f"not UTF-8 text: {exc.reason}", path, exc.start) from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", path, exc.pos) from None


def load_bundle(path) -> DetectionBundle:
    """Read and fully validate a bundle directory."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    root = manifest_path.parent
    manifest = _load_json(manifest_path)
    if not isinstance(manifest, dict):
        raise FormatError("manifest must be a JSON object", manifest_path, 0)
    version = manifest.get("version")
    if version != VERSION:
        raise VersionMismatch(f"unsupported bundle version {version!r} (expected {VERSION})", manifest_path)
    S = _require(manifest, "S", int, "manifest", manifest_path)
    cls = _require(manifest, "cls", int, "manifest", manifest_path)
    if S < 2 or cls < 1:
        raise FormatError(f"manifest: need S >= 2 and cls >= 1, got S={S} cls={cls}", manifest_path)
    records = _require(manifest, "detections", list, "manifest", manifest_path)
    extent = manifest.get("image_extent")
    if extent is not None:
        if not (isinstance(extent, list) and len(extent) == 2):
            raise FormatError("manifest: image_extent must be [W, H] or null", manifest_path)
        extent = (float(extent[0]), float(extent[1]))
    blob_name = manifest.get("blob", BLOB_NAME)
    if not isinstance(blob_name, str) or os.path.basename(blob_name) != blob_name:
        raise FormatError(f"manifest: invalid blob name {blob_name!r}", manifest_path)
    blob_path = root / blob_name

    record_bytes = S * S * cls * BLOB_DTYPE.itemsize
    expected = record_bytes * len(records)
    try:
        blob = blob_path.read_bytes()
    except FileNotFoundError:
        raise FormatError("blob file not found", blob_path) from None
    if len(blob) != expected:
        raise FormatError(
            f"blob length {len(blob)} bytes, expected {expected} "
            f"({len(records)} x {S}*{S}*{cls}*4)",
            blob_path,
            min(len(blob), expected),
        )
    values = np.frombuffer(blob, dtype=BLOB_DTYPE).astype(np.float32)
    bad = np.flatnonzero(~((values >= -RANGE_TOL) & (values <= 1 + RANGE_TOL)))
    if bad.size:
        raise ValueRangeError(
            f"map value {values[bad[0]]!r} outside [0, 1]", blob_path, int(bad[0]) * BLOB_DTYPE.itemsize
        )
    outside = (values < 0) | (values > 1)
    clamped = int(outside.sum())
    if clamped:
        logger.warning("%s: clamped %d map values within %g of [0, 1]", blob_path, clamped, RANGE_TOL)
        values = np.clip(values, 0.0, 1.0)
    values = values.reshape(len(records), S, S, cls) if records else values

    detections = []
    previous_offset = -1
    for i, rec in enumerate(records):
        where = f"detection record {i}"
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: must be an object", manifest_path)
        offset = _require(rec, "offset", int, where, manifest_path)
        if offset <= previous_offset or offset != i * record_bytes:
            raise FormatError(
                f"{where}: offset {offset} out of sequence (expected {i * record_bytes})", manifest_path
            )
        previous_offset = offset
        proposal = _require(rec, "proposal", list, where, manifest_path)
        class_id = _require(rec, "class_id", int, where, manifest_path)
        score = _require(rec, "score", float, where, manifest_path)
        try:
            box = Box.from_sequence(proposal)
            detections.append(
                Detection(
                    proposal=box,
                    class_id=class_id,
                    score=float(score),
                    map=BoundaryMap(values[i], box),
                )
            )
        except (BoxRefineError, ValueError, TypeError) as exc:
            raise FormatError(f"{where}: {exc}", manifest_path) from None
    return DetectionBundle(detections, S, cls, extent, clamped)


def read_bundle(path) -> list[Detection]:
    return load_bundle(path).detections


def write_truth(scenes: Sequence[SceneTruth], path):
    payload = {
        "version": VERSION,
        "scenes": [
            {
                "index": s.index,
                "seed": s.seed,
                "image_extent": [float(v) for v in s.image_extent],
                "truth_boxes": [list(b.as_tuple()) for b in s.truth_boxes],
                "class_ids": [int(c) for c in s.class_ids],
                "detection_indices": [int(i) for i in s.detection_indices],
            }
            for s in scenes
        ],
    }
    _write_text(Path(path), _dump_json(payload))


def read_truth(path) -> list[SceneTruth]:
    path = Path(path)
    payload = _load_json(path)
    if not isinstance(payload, dict):
        raise FormatError("truth file must be a JSON object", path, 0)
    if payload.get("version") != VERSION:
        raise VersionMismatch(f"unsupported truth version {payload.get('version')!r}", path)
    scenes = _require(payload, "scenes", list, "truth file", path)
    out = []
    for i, rec in enumerate(scenes):
        where = f"scene record {i}"
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: must be an object", path)
        try:
            out.append(
                SceneTruth(
                    truth_boxes=tuple(Box.from_sequence(b) for b in _require(rec, "truth_boxes", list, where, path)),
                    class_ids=tuple(int(c) for c in _require(rec, "class_ids", list, where, path)),
                    image_extent=tuple(float(v) for v in _require(rec, "image_extent", list, where, path)),
                    seed=int(rec.get("seed", 0)),
                    index=int(rec.get("index", i)),
                    detection_indices=tuple(int(d) for d in rec.get("detection_indices", [])),
                )
            )
        except FormatError:
            raise
        except (BoxRefineError, ValueError, TypeError) as exc:
            raise FormatError(f"{where}: {exc}", path) from None
    return out


@dataclass(frozen=True)
class BoxRecord:
    index: int
    class_id: int
    score: float
    box: Box
    fallback: bool


def format_boxes(detections: Sequence[Detection], refined: Sequence[RefinedDetection]) -> str:
    lines = []
    for i, (d, r) in enumerate(zip(detections, refined)):
        l, rr, t, b = r.box.as_tuple()
        lines.append(f"{i} {d.class_id} {d.score!r} {l!r} {rr!r} {t!r} {b!r} {int(r.fallback)}\n")
    return "".join(lines)


def write_boxes(detections, refined, path):
    _write_text(Path(path), format_boxes(detections, refined))


def read_boxes(path) -> list[BoxRecord]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FormatError("file not found", path) from None
    out = []
    offset = 0
    for lineno, line in enumerate(raw.splitlines(keepends=True), start=1):
        text = line.decode("utf-8", errors="replace").strip()
        if text and not text.startswith("#"):
            fields = text.split()
            try:
                if len(fields) != 8:
                    raise ValueError(f"expected 8 fields, got {len(fields)}")
                fallback = int(fields[7])
                if fallback not in (0, 1):
                    raise ValueError(f"fallback flag must be 0 or 1, got {fields[7]}")
                out.append(
                    BoxRecord(
                        index=int(fields[0]),
                        class_id=int(fields[1]),
                        score=float(fields[2]),
                        box=Box(*(float(v) for v in fields[3:7])),
                        fallback=bool(fallback),
                    )
                )
            except (BoxRefineError, ValueError) as exc:
                raise FormatError(f"line {lineno}: {exc}", path, offset) from None
        offset += len(line)
    return out
