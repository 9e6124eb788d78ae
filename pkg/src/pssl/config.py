"""Experiment configuration: nested dataclasses loaded from JSON and
validated before any simulation starts."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .behavior import BehaviorConfig
from .world import CameraModel, World

OUTPUT_DIR_ENV = "PSSL_OUTPUT_DIR"

SCHEME_KINDS = ("cold_turkey", "dagger", "training_wheels", "pure_stereo")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scheme:
    kind: str
    beta: float = 0.25

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigError(f"scheme.kind: must be one of {SCHEME_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"scheme.beta: must lie in [0, 1], got {self.beta}")

    @property
    def label(self):
        return f"dagger({self.beta:g})" if self.kind == "dagger" else self.kind


COLD_TURKEY = Scheme("cold_turkey")
DAGGER = Scheme("dagger", 0.25)
TRAINING_WHEELS = Scheme("training_wheels")
PURE_STEREO = Scheme("pure_stereo")


@dataclass(frozen=True)
class Phases:
    initial: float = 60.0
    learning: float = 240.0
    test: float = 300.0
    time_scale: float = 1.0  # multiplies all three durations

    def frames(self, fps):
        """Frame counts (initial, learning, test) after time scaling."""
        return tuple(max(1, int(round(d * self.time_scale * fps)))
                     for d in (self.initial, self.learning, self.test))


@dataclass(frozen=True)
class VBoWParams:
    n_textons: int = 10
    patch_size: int = 5
    samples: int = 500
    kohonen_iterations: int = 50_000
    warmup_frames: int = 300
    patches_per_image: int = 100


@dataclass(frozen=True)
class EstimatorParams:
    k: int = 5
    smooth_window: int = 4


@dataclass(frozen=True)
class OfflineParams:
    dataset_dir: str | None = None  # None synthesises a dataset from the world
    n_frames: int = 5000
    n_test: int = 1000  # held out from the end of the walk
    checkpoints: tuple = (250, 500, 1000, 2000, 4000)
    seed: int = 0
    target_tpr: float = 0.96


@dataclass(frozen=True)
class ExperimentConfig:
    world: World = field(default_factory=World)
    camera: CameraModel = field(default_factory=CameraModel)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    schemes: tuple = (COLD_TURKEY, DAGGER, TRAINING_WHEELS)
    phases: Phases = field(default_factory=Phases)
    vbow: VBoWParams = field(default_factory=VBoWParams)
    estimator: EstimatorParams = field(default_factory=EstimatorParams)
    offline: OfflineParams = field(default_factory=OfflineParams)
    fps: float = 10.0
    forward_speed: float = 0.5
    t_override: float = 10.0  # disparity at 1.0 m with bf = 10
    seeds: tuple = (0,)
    stereo_baseline: bool = True
    mono_source: str = "knn"  # "oracle" feeds the noiseless stereo value instead
    heatmap_bins: int = 20
    bootstrap_iters: int = 10_000
    bootstrap_seed: int = 0
    workers: int = 1
    output_dir: str = "runs"

    @property
    def dt(self):
        return 1.0 / self.fps

    def resolved_output_dir(self):
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        try:
            self.behavior.validate(self.camera.disparity_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        need(self.fps > 0, "fps", "must be positive")
        need(self.forward_speed > 0, "forward_speed", "must be positive")
        # a single turn step must not jump over the alignment window
        need(self.behavior.turn_rate * self.dt < 2 * self.behavior.t_e, "behavior.turn_rate",
             "turn step per frame must be smaller than 2 * t_e")
        need(self.behavior.t < self.t_override <= self.camera.disparity_max, "t_override",
             "must lie in (behavior.t, camera.disparity_max]")
        p = self.phases
        for name in ("initial", "learning", "test", "time_scale"):
            need(getattr(p, name) > 0, f"phases.{name}", "must be positive")
        need(len(self.schemes) >= 1, "schemes", "at least one scheme is required")
        labels = [s.label for s in self.schemes]
        need(len(set(labels)) == len(labels), "schemes", "duplicate scheme")
        need(len(self.seeds) >= 1, "seeds", "at least one seed is required")
        need(all(isinstance(s, int) and s >= 0 for s in self.seeds), "seeds",
             "must be non-negative integers")
        need(len(set(self.seeds)) == len(self.seeds), "seeds", "duplicate seed")
        v = self.vbow
        need(v.n_textons >= 1, "vbow.n_textons", "must be >= 1")
        need(v.patch_size >= 1, "vbow.patch_size", "must be >= 1")
        need(v.patch_size <= min(self.camera.width, self.camera.height), "vbow.patch_size",
             "larger than the image")
        need(v.samples >= 1, "vbow.samples", "must be >= 1")
        need(v.kohonen_iterations >= 1, "vbow.kohonen_iterations", "must be >= 1")
        need(v.warmup_frames >= 1, "vbow.warmup_frames", "must be >= 1")
        need(v.patches_per_image >= 1, "vbow.patches_per_image", "must be >= 1")
        need(self.estimator.k >= 1, "estimator.k", "must be >= 1")
        need(self.estimator.smooth_window >= 1, "estimator.smooth_window", "must be >= 1")
        need(self.mono_source in ("knn", "oracle"), "mono_source", "must be 'knn' or 'oracle'")
        o = self.offline
        need(o.n_test >= 1, "offline.n_test", "must be >= 1")
        need(o.n_frames > o.n_test, "offline.n_frames", "must exceed offline.n_test")
        need(len(o.checkpoints) >= 1 and all(isinstance(c, int) and c >= 1 for c in o.checkpoints),
             "offline.checkpoints", "must be a non-empty list of positive integers")
        need(list(o.checkpoints) == sorted(set(o.checkpoints)), "offline.checkpoints",
             "must be strictly increasing")
        need(o.dataset_dir is not None or max(o.checkpoints) <= o.n_frames - o.n_test,
             "offline.checkpoints", "largest checkpoint exceeds the training split")
        need(0.0 <= o.target_tpr <= 1.0, "offline.target_tpr", "must lie in [0, 1]")
        need(self.heatmap_bins >= 1, "heatmap_bins", "must be >= 1")
        need(self.bootstrap_iters >= 1000, "bootstrap_iters", "must be >= 1000")
        need(self.workers >= 1, "workers", "must be >= 1")
        return self

    def to_dict(self):
        w = self.world
        return {
            "world": {"width": w.width, "depth": w.depth, "texture_seed": w.texture_seed,
                      "texture_scale": w.texture_scale, "wall_height": w.wall_height,
                      "camera_height": w.camera_height, "margin": w.margin},
            "camera": dataclasses.asdict(self.camera),
            "behavior": dataclasses.asdict(self.behavior),
            "schemes": [dataclasses.asdict(s) for s in self.schemes],
            "phases": dataclasses.asdict(self.phases),
            "vbow": dataclasses.asdict(self.vbow),
            "estimator": dataclasses.asdict(self.estimator),
            "offline": {**dataclasses.asdict(self.offline),
                        "checkpoints": list(self.offline.checkpoints)},
            "fps": self.fps, "forward_speed": self.forward_speed,
            "t_override": self.t_override, "seeds": list(self.seeds),
            "stereo_baseline": self.stereo_baseline, "mono_source": self.mono_source,
            "heatmap_bins": self.heatmap_bins, "bootstrap_iters": self.bootstrap_iters,
            "bootstrap_seed": self.bootstrap_seed, "workers": self.workers,
            "output_dir": self.output_dir,
        }


_NESTED = {"world": World, "camera": CameraModel, "behavior": BehaviorConfig,
           "phases": Phases, "vbow": VBoWParams, "estimator": EstimatorParams,
           "offline": OfflineParams}
# angles in JSON are given in degrees
_DEGREES = {("camera", "hfov_deg"): "hfov", ("behavior", "t_e_deg"): "t_e",
            ("behavior", "turn_rate_deg"): "turn_rate"}


def _build(cls, name, data):
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    data = dict(data)
    for (section, key), target in _DEGREES.items():
        if section == name and key in data:
            data[target] = math.radians(data.pop(key))
    if name == "offline" and "checkpoints" in data:
        data["checkpoints"] = tuple(data["checkpoints"])
    allowed = {f.name for f in dataclasses.fields(cls) if f.init and f.name != "textures"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown field")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    kwargs = {}
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in data.items():
        if key not in top:
            raise ConfigError(f"{key}: unknown field")
        if key in _NESTED:
            kwargs[key] = _build(_NESTED[key], key, value)
        elif key == "schemes":
            if not isinstance(value, list):
                raise ConfigError("schemes: expected a list")
            kwargs[key] = tuple(_build(Scheme, "scheme", s) for s in value)
        elif key == "seeds":
            if isinstance(value, dict):  # {"start": a, "count": n}
                value = list(range(value.get("start", 0), value.get("start", 0) + value["count"]))
            if not isinstance(value, list):
                raise ConfigError("seeds: expected a list or {start, count}")
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs).validate()


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)
