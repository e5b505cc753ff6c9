"""
Run configuration (JSON, strict keys) and the model size presets.
"""
import hashlib
import json
import os

import numpy as np

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

from errors import ConfigError

ABLATION_MODES = (
    "hybrid", "sq_only", "pq_only", "conv_backbone", "no_crossattn",
    "no_refine", "feat2d_sq", "feat2d_pq", "feat2d_hybrid",
)
MODEL_SCALES = ("micro", "desk", "full")


@dataclass
class ModelConfig:
    name: str
    image_res: int
    patch: int
    dim: int
    enc_depth: int
    dec_depth: int
    heads: int
    plane_patch: int
    channels: int
    mlp_widths: List[int]
    normal_stride: int
    hourglass_hidden: int
    mlp_ratio: int = 4
    z_std: float = 0.02
    use_norm: bool = True
    use_bias: bool = True
    prior_vertices: int = 1000

    def __post_init__(self):
        if self.image_res % self.patch != 0:
            raise ConfigError(f"image_res {self.image_res} is not divisible by patch size {self.patch}")
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} is not divisible by {self.heads} heads")
        if self.channels % 2 != 0:
            raise ConfigError(f"channel count {self.channels} must be even to split the tri-plane")
        if self.image_res % self.normal_stride != 0:
            raise ConfigError(f"normal_stride {self.normal_stride} does not divide image_res {self.image_res}")
        if self.image_res % self.plane_res != 0:
            raise ConfigError(f"plane resolution {self.plane_res} does not divide image_res {self.image_res}")

    @property
    def tokens(self) -> int:
        return (self.image_res // self.patch) ** 2

    @property
    def token_grid(self) -> int:
        return self.image_res // self.patch

    @property
    def plane_res(self) -> int:
        return self.token_grid * self.plane_patch

    @property
    def half_channels(self) -> int:
        return self.channels // 2

    @property
    def normal_res(self) -> int:
        return self.image_res // self.normal_stride

    @property
    def fused_width(self) -> int:
        return 2 * self.channels + 7

    def replace(self, **changes) -> "ModelConfig":
        doc = asdict(self)
        doc.update(changes)
        return ModelConfig(**doc)


MODEL_PRESETS: Dict[str, ModelConfig] = {
    "micro": ModelConfig(
        name="micro", image_res=8, patch=4, dim=16, enc_depth=1, dec_depth=1, heads=2,
        plane_patch=2, channels=4, mlp_widths=[8, 4, 1], normal_stride=2,
        hourglass_hidden=4, mlp_ratio=2, prior_vertices=300,
    ),
    "desk": ModelConfig(
        name="desk", image_res=64, patch=8, dim=64, enc_depth=2, dec_depth=2, heads=4,
        plane_patch=2, channels=16, mlp_widths=[128, 256, 128, 64, 32, 1], normal_stride=2,
        hourglass_hidden=16,
    ),
    "full": ModelConfig(
        name="full", image_res=512, patch=16, dim=256, enc_depth=6, dec_depth=3, heads=8,
        plane_patch=4, channels=64, mlp_widths=[512, 1024, 512, 256, 128, 1], normal_stride=4,
        hourglass_hidden=64, prior_vertices=6890,
    ),
}


def model_preset(scale: str) -> ModelConfig:
    try:
        return MODEL_PRESETS[scale]
    except KeyError:
        raise ConfigError(f"Unknown model scale {scale!r}; expected one of {MODEL_SCALES}") from None


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 4
    steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    sq_dropout: float = 0.1
    pool_size: int = 4
    points: int = 2048
    checkpoint_every: int = 100


@dataclass
class DataConfig:
    count: int = 10
    difficulty: str = "easy"
    prior_vertices: Optional[int] = None


@dataclass
class ReconstructConfig:
    resolution: int = 64
    chunk_size: int = 16384


@dataclass
class EvaluateConfig:
    samples: int = 100000
    render_res: int = 256


@dataclass
class RunConfig:
    model_scale: str = "desk"
    seed: int = 0
    ablation_mode: str = "hybrid"
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    reconstruct: ReconstructConfig = field(default_factory=ReconstructConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)

    def __post_init__(self):
        if self.model_scale not in MODEL_SCALES:
            raise ConfigError(f"model_scale must be one of {MODEL_SCALES}, got {self.model_scale!r}")
        if self.ablation_mode not in ABLATION_MODES:
            raise ConfigError(f"ablation_mode must be one of {ABLATION_MODES}, got {self.ablation_mode!r}")
        if self.train.batch_size < 1 or self.train.points < 1:
            raise ConfigError("train.batch_size and train.points must be positive")
        if not 0.0 <= self.train.sq_dropout < 1.0:
            raise ConfigError(f"train.sq_dropout must lie in [0, 1), got {self.train.sq_dropout}")
        if self.reconstruct.resolution < 2:
            raise ConfigError("reconstruct.resolution must be at least 2")

    @property
    def model(self) -> ModelConfig:
        base = model_preset(self.model_scale)
        if self.data.prior_vertices is not None:
            return base.replace(prior_vertices=self.data.prior_vertices)
        return base

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Dotted keys ('train.steps') replace values; None values are ignored."""
        doc = self.to_dict()
        for dotted, value in overrides.items():
            if value is None:
                continue
            node = doc
            *path, leaf = dotted.split(".")
            for part in path:
                if not isinstance(node.get(part), dict):
                    raise ConfigError(f"Unknown config section in {dotted!r}")
                node = node[part]
            if leaf not in node:
                raise ConfigError(f"Unknown config key {dotted!r}")
            node[leaf] = value
        return RunConfig.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "RunConfig":
        return _build(cls, doc, "")

    @classmethod
    def from_json(cls, path: Union[str, os.PathLike]) -> "RunConfig":
        with open(path, "r") as ip:
            try:
                doc = json.load(ip)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(doc)


def _build(cls, doc: Any, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"Config section {where or '<root>'} must be an object")
    known = {f.name: f for f in fields(cls)}
    if unknown := sorted(set(doc) - set(known)):
        raise ConfigError(f"Unknown config key(s) {', '.join(where + k for k in unknown)}")
    kwargs = {}
    for name, value in doc.items():
        sub = _SECTIONS.get(name) if cls is RunConfig else None
        if sub is not None:
            kwargs[name] = _build(sub, value, f"{where}{name}.")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e


_SECTIONS = {
    "train": TrainConfig,
    "data": DataConfig,
    "reconstruct": ReconstructConfig,
    "evaluate": EvaluateConfig,
}


def rng_stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent generator keyed by (root seed, purpose, index)."""
    tag = int.from_bytes(hashlib.sha256(purpose.encode("utf-8")).digest()[:4], "little")
    return np.random.default_rng([int(seed), tag, int(index)])


def write_manifest(out_dir: Union[str, os.PathLike], config: RunConfig, filename: str = "manifest.json", **extra) -> str:
    os.makedirs(out_dir, exist_ok=True)
    doc = {"config_hash": config.config_hash(), "seed": config.seed, "config": config.to_dict()}
    doc |= extra
    path = os.path.join(out_dir, filename)
    with open(path, "w") as op:
        json.dump(doc, op, indent=2, sort_keys=True)
    return path
