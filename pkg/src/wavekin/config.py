"""Experiment configuration: dataclasses, TOML loading and origin labels.

A config file holds one table per experiment kind (``[sce]``, ``[wke]``,
``[fvs]``, ``[analyze]``, ``[compare]``) plus optional top-level ``seed`` and
``output_dir``. Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import tomli

from .errors import ConfigError

PUBLISHED = "published"
CHOSEN = "chosen"


@dataclass
class SCETrainConfig:
    T: float = 0.8
    R: float = 8.0
    n_time: int = 16
    n_volume: int = 16
    n_initial: int = 16
    n_inner: int = 32
    layout: str = "paired"
    volume_skip: int = 0
    epochs: int = 5000
    lr: float = 1e-3
    batch_size: Optional[int] = None
    init: str = "scaled"
    dtype: str = "float32"
    snapshot_times: tuple = (0.0, 0.2, 0.4, 0.62)
    n_error: int = 2**10
    extrapolation_R: float = 1000.0
    n_extrapolation: int = 2**13

    origin = {
        "T": PUBLISHED, "R": PUBLISHED, "n_time": PUBLISHED, "n_volume": PUBLISHED, "n_initial": PUBLISHED,
        "n_inner": PUBLISHED, "snapshot_times": PUBLISHED, "n_error": PUBLISHED,
        "extrapolation_R": PUBLISHED, "n_extrapolation": PUBLISHED,
    }

    def validate(self):
        self.sce_config().validate()
        _common_training(self)
        if any(not 0 <= t for t in self.snapshot_times):
            raise ConfigError("snapshot times must be non-negative")

    def sce_config(self):
        from .sce import SCEConfig
        return SCEConfig(self.T, self.R, self.n_time, self.n_volume, self.n_initial,
                         self.n_inner, self.layout, self.volume_skip)


@dataclass
class WKETrainConfig:
    gamma: float = 2.0
    T: float = 10.0
    R: float = 10.0
    n_W: int = 2**15
    n_initial: int = 1024
    n_inner: int = 32
    layout: str = "paired"
    stages: tuple = (10.0, 5.0, 2.0)
    epochs: tuple = (2000, 2000, 2000)
    lr: float = 1e-3
    batch_size: Optional[int] = 1024
    eval_every: int = 10
    init: str = "scaled"
    dtype: str = "float32"
    snapshot_times: tuple = (1.0, 5.0, 10.0)
    n_snapshot: int = 1001
    energy_t_max: float = 148.0
    energy_dt: float = 0.5
    large_p_max: float = 1e6

    origin = {
        "gamma": PUBLISHED, "T": PUBLISHED, "R": PUBLISHED, "n_W": PUBLISHED, "n_inner": PUBLISHED,
        "stages": PUBLISHED, "snapshot_times": PUBLISHED, "energy_t_max": PUBLISHED, "large_p_max": PUBLISHED,
    }

    def validate(self):
        self.wke_config().validate()
        _common_training(self)
        if len(self.epochs) != len(self.stages):
            raise ConfigError("need one epoch count per stage")
        if self.energy_t_max <= 0 or self.energy_dt <= 0:
            raise ConfigError("energy_t_max and energy_dt must be positive")

    def wke_config(self):
        from .wke import WKEConfig
        return WKEConfig(self.gamma, self.T, self.R, self.n_W, self.n_initial, self.n_inner,
                         self.layout, tuple(self.stages))


@dataclass
class FVSRunConfig:
    h: float = 0.01
    R: float = 10.0
    dt: float = 0.005
    t_final: float = 148.0
    snapshot_times: tuple = (0.0, 1.0, 5.0, 10.0, 148.0)
    gamma: float = 2.0
    gain_domain: str = "square"

    origin = {"h": PUBLISHED, "R": PUBLISHED, "dt": PUBLISHED, "t_final": PUBLISHED, "gamma": PUBLISHED,
                  "gain_domain": PUBLISHED}

    def validate(self):
        if not 0 < self.h < 1:
            raise ConfigError(f"h must lie in (0, 1), got {self.h}")
        if self.R <= 0 or self.dt <= 0 or self.t_final < 0:
            raise ConfigError("need R > 0, dt > 0 and t_final >= 0")
        if any(not 0 <= t <= self.t_final + 1e-12 for t in self.snapshot_times):
            raise ConfigError("snapshot times must lie in [0, t_final]")
        if self.gain_domain not in ("square", "below_p"):
            raise ConfigError(f"unknown gain domain {self.gain_domain!r}")


@dataclass
class AnalyzeConfig:
    energy_csv: list = field(default_factory=list)
    window: tuple = (20.0, 148.0)
    reference_slope: float = -0.5
    plot: bool = True

    origin = {"reference_slope": PUBLISHED, "window": CHOSEN}

    def validate(self):
        if not self.energy_csv:
            raise ConfigError("analyze needs at least one energy_csv")
        if len(self.window) != 2 or not self.window[0] < self.window[1]:
            raise ConfigError("window must be [t_a, t_b] with t_a < t_b")


@dataclass
class CompareConfig:
    checkpoint: str = ""
    fvs_snapshots: str = ""
    times: tuple = (1.0, 5.0, 10.0)
    R: float = 10.0
    n_grid: int = 1001
    plot: bool = True

    origin = {"times": CHOSEN, "R": PUBLISHED}

    def validate(self):
        if not self.checkpoint or not self.fvs_snapshots:
            raise ConfigError("compare needs checkpoint and fvs_snapshots paths")
        if self.n_grid < 2 or self.R <= 0:
            raise ConfigError("need n_grid >= 2 and R > 0")


SECTIONS = {"sce": SCETrainConfig, "wke": WKETrainConfig, "fvs": FVSRunConfig,
            "analyze": AnalyzeConfig, "compare": CompareConfig}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    output_dir: str = "out"
    params: object = None

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed,
                "output_dir": str(self.output_dir),
                self.experiment: _plain(dataclasses.asdict(self.params))}


def _common_training(cfg):
    if cfg.lr <= 0:
        raise ConfigError("learning rate must be positive")
    if cfg.init not in ("normal", "scaled"):
        raise ConfigError(f"unknown init scheme {cfg.init!r}")
    if cfg.dtype not in ("float32", "float64"):
        raise ConfigError(f"unsupported dtype {cfg.dtype!r}")
    if cfg.batch_size is not None and cfg.batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    epochs = cfg.epochs if isinstance(cfg.epochs, (tuple, list)) else (cfg.epochs,)
    if any(e < 0 for e in epochs):
        raise ConfigError("epochs must be >= 0")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def build_section(kind: str, values: Optional[dict] = None):
    """Dataclass for ``kind`` with ``values`` applied over the defaults."""
    if kind not in SECTIONS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    cls = SECTIONS[kind]
    values = dict(values or {})
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(names))
    if unknown:
        raise ConfigError(f"unknown keys in [{kind}]: {', '.join(unknown)}")
    for k, v in values.items():
        default = names[k].default
        if isinstance(v, list) and (isinstance(default, tuple) or k in ("window", "epochs")):
            values[k] = tuple(v)
        if k == "batch_size" and v in (0, "none"):
            values[k] = None
    try:
        cfg = cls(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def load(kind: str, path=None, seed: Optional[int] = None,
         output_dir: Optional[str] = None) -> ExperimentConfig:
    """Read ``path`` (optional) and return the validated config for ``kind``."""
    raw = {}
    if path is not None:
        try:
            with Path(path).open("rb") as fh:
                raw = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    extra = sorted(set(top) - {"seed", "output_dir"})
    if extra:
        raise ConfigError(f"unknown top-level keys: {', '.join(extra)}")
    params = build_section(kind, raw.get(kind))
    exp = ExperimentConfig(kind, int(top.get("seed", 0)), str(top.get("output_dir", "out")), params)
    if seed is not None:
        exp.seed = seed
    if output_dir is not None:
        exp.output_dir = output_dir
    return exp


def describe(exp: ExperimentConfig) -> str:
    """Human-readable listing with a origin tag per value."""
    p = exp.params
    prov = getattr(type(p), "origin", {})
    lines = [f"experiment = {exp.experiment}", f"seed = {exp.seed}  # chosen",
             f"output_dir = {exp.output_dir}", f"[{exp.experiment}]"]
    for f in fields(p):
        lines.append(f"{f.name} = {getattr(p, f.name)!r}  # {prov.get(f.name, CHOSEN)}")
    return "\n".join(lines)
