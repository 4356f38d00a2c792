"""Pipeline configuration: one JSON file drives templates, layers, losses,
optimizer, schedule and the synthetic dataset.

Every key is documented in the README together with its default; layer
code receives all hyperparameters from here.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigMismatch


@dataclass
class StageConfig:
    """One decoding scale: a spiral layer followed by upsampling."""

    spiral_length: int = 9
    dilation: int = 1
    kernel_count: int = 8
    channels: int = 32
    c_mid: int | None = None


@dataclass
class RoiConfig:
    kernel: str = "plain"  # "plain" | "dynamic" | "none"
    spiral_length: int = 9
    dilation: int = 2
    kernel_count: int = 8


@dataclass
class OptimizerConfig:
    lr: float = 0.001
    decay_epoch: int = 48
    decay_factor: float = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class DatasetConfig:
    train_size: int = 48
    holdout_size: int = 16
    image_size: int = 24
    blob_sigma_px: float = 2.0
    amplitude: float = 6.0
    z_amplitude: float = 3.0
    basis_size: int = 3
    field_freq_min: float = 0.5
    field_freq_max: float = 1.5
    # template level the field is sampled at before upsampling to the finest
    # mesh; -1 evaluates directly at finest-level vertices
    field_scale: int = 0
    # per-region multiplicative gain on the field, drawn from 1 +- spread;
    # 0 disables the region structure
    region_gain_spread: float = 0.0
    landmark_noise: float = 0.0
    view_rotation_max: float = 0.5


@dataclass
class PipelineConfig:
    seed: int = 0
    template_levels: int = 4
    template_base: str = "tetrahedron"
    template_radius: float = 80.0
    template_paths: list[str] | None = None
    upsample_paths: list[str] | None = None
    region_labels_path: str | None = None
    landmarks: int = 8
    stages: list[StageConfig] = field(default_factory=lambda: [
        StageConfig(channels=32),
        StageConfig(channels=32),
        StageConfig(channels=16),
        StageConfig(channels=16),
    ])
    roi: RoiConfig = field(default_factory=RoiConfig)
    loss_weights: dict = field(default_factory=lambda: {
        "mesh": 1.0, "pose2d": 1.0, "norm": 1.0, "edge": 1.0, "con3d": 1.0, "con2d": 1.0})
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    input_center: float = 0.5
    input_gain: float = 8.0
    offset_scale: float = 20.0
    head_init: str = "glorot"  # "glorot" | "zeros"
    epochs: int = 60
    batch_size: int = 8
    dataset: DatasetConfig = field(default_factory=DatasetConfig)

    @property
    def feature_channels(self) -> int:
        # one blob channel per landmark plus the two coordinate ramps
        return self.landmarks + 2

    def validate(self) -> "PipelineConfig":
        if len(self.stages) != self.template_levels:
            raise ConfigMismatch(f"{len(self.stages)} stages for {self.template_levels} "
                                 "template scales; they must match")
        if self.template_paths is not None and len(self.template_paths) != self.template_levels:
            raise ConfigMismatch("template_paths must list one mesh per scale")
        if (self.template_paths is None) != (self.upsample_paths is None):
            raise ConfigMismatch("template_paths and upsample_paths go together")
        if self.upsample_paths is not None and len(self.upsample_paths) != self.template_levels - 1:
            raise ConfigMismatch("upsample_paths must list one map per scale transition")
        for i, st in enumerate(self.stages):
            if st.channels < 1 or st.spiral_length < 1 or st.dilation < 1 or st.kernel_count < 1:
                raise ConfigMismatch(f"stage {i}: all sizes must be positive")
        # lr 0 is allowed as a degenerate no-update schedule (used in tests)
        if self.optimizer.lr < 0:
            raise ConfigMismatch("learning rate must not be negative")
        if self.roi.kernel not in ("plain", "dynamic", "none"):
            raise ConfigMismatch(f"unknown roi kernel type: {self.roi.kernel!r}")
        if self.head_init not in ("glorot", "zeros"):
            raise ConfigMismatch(f"unknown head_init: {self.head_init!r}")
        if self.landmarks < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigMismatch("landmarks, epochs and batch_size must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        obj = dict(obj)
        try:
            if "stages" in obj:
                obj["stages"] = [StageConfig(**s) for s in obj["stages"]]
            if "roi" in obj:
                obj["roi"] = RoiConfig(**obj["roi"])
            if "optimizer" in obj:
                obj["optimizer"] = OptimizerConfig(**obj["optimizer"])
            if "dataset" in obj:
                obj["dataset"] = DatasetConfig(**obj["dataset"])
            cfg = cls(**obj)
        except TypeError as exc:
            raise ConfigMismatch(f"bad config key: {exc}") from exc
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigMismatch(f"config is not valid JSON: {path} ({exc})") from exc
        return cls.from_dict(obj)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
