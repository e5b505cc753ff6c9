"""
The full reconstruction model: encoder, tri-plane decoders, principal-plane
refinement, normal-feature network and the implicit-function heads, wired
per ablation mode, plus the on-disk checkpoint.
"""
import json
import os

import numpy as np

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from autodiff import Adam, Tensor, load_tensor, no_grad, save_tensor
from body_prior import PriorMesh
from encoder import Encoder, InputBundle
from errors import ConfigError
from feature_query import (FUSED_LAYOUT_VERSION, NORMAL_CHANNELS, FusedFeature, PriorGeometry, fuse,
                           prior_vertex_features)
from implicit_surface import FieldHeads, HeadsField
from layers import Conv2d, HourglassLite, Module
from run_config import ABLATION_MODES, ModelConfig, RunConfig, rng_stream, write_manifest
from triplane_decoder import (ConvPlaneBackbone, CrossPlaneDecoder, PrincipalDecoder, PrincipalRefiner, TriPlane,
                              TriPlanePair, no_refine, split_triplane)

CHECKPOINT_FORMAT = 1


class NormalFeatureNet(Module):
    """Strided conv over the 6-channel front/back normals, then a two-stack hourglass back to 6 channels."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        self.down = Conv2d(NORMAL_CHANNELS, cfg.hourglass_hidden, cfg.normal_stride, rng, stride=cfg.normal_stride)
        self.hourglass = HourglassLite(cfg.hourglass_hidden, cfg.hourglass_hidden, NORMAL_CHANNELS, rng, stacks=2)

    def __call__(self, normals: Tensor) -> Tensor:
        return self.hourglass(self.down(normals))


@dataclass
class SampleState:
    """Everything the heads need from one input bundle and its prior."""
    pair: TriPlanePair
    vertex_features: Tensor
    normal_grid: Tensor
    prior: PriorMesh


class AvatarModel(Module):

    def __init__(self, cfg: ModelConfig, mode: str, rng: np.random.Generator) -> None:
        if mode not in ABLATION_MODES:
            raise ConfigError(f"Unknown ablation mode {mode!r}")
        self._cfg = cfg
        self._mode = mode
        if mode == "conv_backbone":
            self.backbones = [ConvPlaneBackbone(cfg, rng) for _ in range(3)]
        else:
            self.encoder = Encoder(cfg, rng)
            self.principal = PrincipalDecoder(cfg, rng)
            if mode == "no_crossattn":
                self.side_yz = PrincipalDecoder(cfg, rng)
                self.side_xz = PrincipalDecoder(cfg, rng)
            elif not mode.startswith("feat2d"):
                self.cross_yz = CrossPlaneDecoder(cfg, rng)
                self.cross_xz = CrossPlaneDecoder(cfg, rng)
        if mode != "no_refine":
            self.refiner = PrincipalRefiner(cfg, rng)
        self.normal_net = NormalFeatureNet(cfg, rng)
        self.heads = FieldHeads(cfg.fused_width, cfg.mlp_widths, rng)

    @property
    def config(self) -> ModelConfig:
        return self._cfg

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def uses_sq(self) -> bool:
        return self._mode not in ("pq_only", "feat2d_pq")

    @property
    def uses_pq(self) -> bool:
        return self._mode not in ("sq_only", "feat2d_sq")

    def planes(self, bundle: InputBundle) -> TriPlane:
        if self._mode == "conv_backbone":
            stacked = Tensor(bundle.stacked())
            f_xy, f_yz, f_xz = (bb(stacked) for bb in self.backbones)
        else:
            h = self.encoder(bundle)
            f_xy = self.principal(h)
            if self._mode == "no_crossattn":
                f_yz, f_xz = self.side_yz(h), self.side_xz(h)
            elif self._mode.startswith("feat2d"):
                f_yz = f_xz = Tensor(np.zeros(f_xy.shape))
            else:
                f_yz, f_xz = self.cross_yz(h), self.cross_xz(h)
        refined = no_refine(f_xy) if self._mode == "no_refine" else self.refiner(bundle.image, f_xy)
        return TriPlane(f_xy, f_yz, f_xz, refined)

    def normal_grid(self, bundle: InputBundle) -> Tensor:
        return self.normal_net(Tensor(bundle.normals()))

    def encode_sample(self, bundle: InputBundle, prior: PriorMesh) -> SampleState:
        pair = split_triplane(self.planes(bundle))
        vertex_features = prior_vertex_features(pair.pq, prior)
        return SampleState(pair, vertex_features, self.normal_grid(bundle), prior)

    def features(self, state: SampleState, points: np.ndarray, geometry: Optional[PriorGeometry] = None,
                 drop_sq: bool = False) -> FusedFeature:
        """drop_sq zeroes the spatial-query and normal blocks (train-time dropout, prior-only use)."""
        return fuse(points, state.pair, state.prior, state.vertex_features, state.normal_grid, geometry,
                    use_sq=self.uses_sq and not drop_sq, use_pq=self.uses_pq, use_normal=not drop_sq)

    def __call__(self, bundle: InputBundle, prior: PriorMesh, points: np.ndarray,
                 geometry: Optional[PriorGeometry] = None) -> Tuple[Tensor, Tensor]:
        return self.heads(self.features(self.encode_sample(bundle, prior), points, geometry).as_tensor())


def build_model(config: RunConfig, mode: Optional[str] = None) -> AvatarModel:
    return AvatarModel(config.model, mode or config.ablation_mode, rng_stream(config.seed, "init"))


class SampleField(HeadsField):
    """Inference-time field for one input: planes, vertex table and normal grid are computed once."""

    def __init__(self, model: AvatarModel, bundle: InputBundle, prior: PriorMesh, prior_only: bool = False) -> None:
        with no_grad():
            self.state = model.encode_sample(bundle, prior)
        self.model = model
        self.prior_only = prior_only
        super().__init__(model.heads, lambda pts: model.features(self.state, pts, drop_sq=self.prior_only))


class PriorOnlyField(HeadsField):
    """
    Prior-enhanced query alone: spatial-query and normal blocks are zero and
    the signed distance is taken against `prior`, which may be a re-posed mesh
    carrying a transferred vertex table.
    """

    def __init__(self, model: AvatarModel, prior: PriorMesh, vertex_features: Tensor) -> None:
        if vertex_features.shape[0] != len(prior.vertices):
            raise ConfigError(f"vertex table has {vertex_features.shape[0]} rows for {len(prior.vertices)} vertices")
        self.prior = prior
        self.vertex_features = vertex_features
        super().__init__(model.heads, lambda pts: fuse(pts, None, prior, vertex_features, None,
                                                       use_sq=False, use_pq=True, use_normal=False))


@dataclass
class Checkpoint:
    config: RunConfig
    model: AvatarModel
    step: int
    optimizer: Optional[Adam] = None


def _param_file(name: str) -> str:
    return name + ".f64"


def save_checkpoint(out_dir: Union[str, os.PathLike], model: AvatarModel, config: RunConfig, step: int,
                    optimizer: Optional[Adam] = None, **extra) -> str:
    """
    <out_dir>/manifest.json, params/<name>.f64 and, with an optimizer,
    optim/<name>.m.f64 and optim/<name>.v.f64 in parameter order.
    """
    params_dir = os.path.join(out_dir, "params")
    os.makedirs(params_dir, exist_ok=True)
    names: List[Dict[str, object]] = []
    named = list(model.named_parameters())
    for name, p in named:
        save_tensor(os.path.join(params_dir, _param_file(name)), p.data)
        names.append({"name": name, "shape": list(p.shape)})
    optim_doc = None
    if optimizer is not None:
        optim_dir = os.path.join(out_dir, "optim")
        os.makedirs(optim_dir, exist_ok=True)
        for (name, _), m, v in zip(named, optimizer.m, optimizer.v):
            save_tensor(os.path.join(optim_dir, name + ".m.f64"), m)
            save_tensor(os.path.join(optim_dir, name + ".v.f64"), v)
        optim_doc = {"t": optimizer.t, "lr": optimizer.lr, "beta1": optimizer.beta1, "beta2": optimizer.beta2}
    return write_manifest(out_dir, config, format=CHECKPOINT_FORMAT, step=int(step), ablation_mode=model.mode,
                          model_scale=model.config.name, fused_layout=FUSED_LAYOUT_VERSION, parameters=names,
                          optimizer=optim_doc, **extra)


def load_checkpoint(ckpt_dir: Union[str, os.PathLike]) -> Checkpoint:
    manifest_path = os.path.join(ckpt_dir, "manifest.json")
    with open(manifest_path, "r") as ip:
        doc = json.load(ip)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("fused_layout") != FUSED_LAYOUT_VERSION:
        raise ConfigError(f"{manifest_path}: unsupported checkpoint format")
    config = RunConfig.from_dict(doc["config"])
    model = build_model(config, doc["ablation_mode"])
    named = list(model.named_parameters())
    stored = [(e["name"], tuple(e["shape"])) for e in doc["parameters"]]
    if stored != [(n, p.shape) for n, p in named]:
        raise ConfigError(f"{manifest_path}: parameter list does not match the {doc['ablation_mode']} model")
    for name, p in named:
        p.assign(load_tensor(os.path.join(ckpt_dir, "params", _param_file(name))))

    optimizer = None
    if doc.get("optimizer") is not None:
        od = doc["optimizer"]
        optimizer = Adam(model.parameters(), lr=od["lr"], beta1=od["beta1"], beta2=od["beta2"])
        optim_dir = os.path.join(ckpt_dir, "optim")
        optimizer.load_state(od["t"],
                             [load_tensor(os.path.join(optim_dir, n + ".m.f64")) for n, _ in named],
                             [load_tensor(os.path.join(optim_dir, n + ".v.f64")) for n, _ in named])
    return Checkpoint(config, model, int(doc["step"]), optimizer)
