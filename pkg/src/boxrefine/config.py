"""Run configuration and the JSON key-value config file.

A config file is a flat JSON object. Corpus keys are those of
:class:`boxrefine.synth.SynthConfig`; refinement keys are those of
:class:`RunConfig`. Unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .boundary_map import DEFAULT_BINARIZE_THRESHOLD, DEFAULT_CLASSES, DEFAULT_SIZE
from .estimator import resolve
from .exceptions import ConfigError, UnknownEstimator
from .synth import SynthConfig


@dataclass(frozen=True)
class RunConfig:
    estimator: str = "linear"
    binarize_threshold: float = DEFAULT_BINARIZE_THRESHOLD
    fine_threshold: float = 0.0
    S: int = DEFAULT_SIZE
    cls: int = DEFAULT_CLASSES
    n_jobs: int = 1

    def __post_init__(self):
        if not (self.binarize_threshold >= 0 and self.fine_threshold >= 0):
            raise ConfigError("thresholds must be >= 0")
        try:
            resolve(self.estimator)
        except UnknownEstimator as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def load_config(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: byte {exc.pos}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(RunConfig)} | {
        f.name for f in fields(SynthConfig) if f.name != "extra"
    }
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    return data


def split_config(data: dict) -> tuple[SynthConfig, RunConfig]:
    synth = SynthConfig.from_dict(data)
    run = RunConfig.from_dict(data)
    if (synth.S, synth.cls) != (run.S, run.cls):
        raise ConfigError("S and cls must agree between corpus and run settings")
    return synth, run
