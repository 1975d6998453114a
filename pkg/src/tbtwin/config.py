"""Experiment configuration: embedded defaults merged with a JSON override file."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .analyzer import DEFAULT_PHASE_SETTINGS, AnalyzerPhase
from .errors import ConfigInvalid
from .simulator import RunConfig
from .source import PumpConfig, SourceParams


@dataclass(frozen=True)
class AnalysisConfig:
    port_pair: tuple[int, int] = (1, 2)
    window: float = 1.28e-9
    bin_width: float = 16e-12
    mc_runs: int = 100
    mc_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "port_pair", tuple(int(p) for p in self.port_pair))
        if len(self.port_pair) != 2 or not set(self.port_pair) <= {1, 2}:
            raise ConfigInvalid(f"port_pair must be two ports in {{1, 2}}, got {self.port_pair}")
        if self.window <= 0 or self.bin_width <= 0:
            raise ConfigInvalid("window and bin_width must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceParams = field(default_factory=SourceParams)
    run: RunConfig = field(default_factory=RunConfig)
    phase_settings: tuple[AnalyzerPhase, ...] = DEFAULT_PHASE_SETTINGS
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output_dir: str = "out"

    def __post_init__(self):
        if not self.phase_settings:
            raise ConfigInvalid("at least one phase setting is required")
        labels = [p.label for p in self.phase_settings]
        if len(set(labels)) != len(labels):
            raise ConfigInvalid(f"duplicate phase settings {labels}")

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "run": self.run.to_dict(),
            "phase_settings": [p.to_dict() for p in self.phase_settings],
            "analysis": {
                "port_pair": list(self.analysis.port_pair),
                "window": self.analysis.window,
                "bin_width": self.analysis.bin_width,
                "mc_runs": self.analysis.mc_runs,
                "mc_seed": self.analysis.mc_seed,
            },
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        merged = merge(cls().to_dict(), d)
        try:
            src = dict(merged["source"])
            src["pump"] = PumpConfig(**src["pump"])
            return cls(
                source=SourceParams(**src),
                run=RunConfig(**merged["run"]),
                phase_settings=tuple(AnalyzerPhase(**p) for p in merged["phase_settings"]),
                analysis=AnalysisConfig(**merged["analysis"]),
                output_dir=merged["output_dir"],
            )
        except TypeError as exc:
            raise ConfigInvalid(f"unknown or malformed config key: {exc}") from exc

    def run_seed(self, index: int) -> int:
        """Seed of the ``index``-th phase-setting run, derived from the base seed."""
        ss = np.random.SeedSequence([self.run.seed, index])
        return int(ss.generate_state(1, dtype=np.uint32)[0])


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; lists and scalars in ``override`` replace."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a JSON object")
    return ExperimentConfig.from_dict(data)


def save_config(cfg: ExperimentConfig, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
