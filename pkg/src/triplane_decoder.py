"""
3D-decoupling decoder.

The principal (xy) plane is decoded from h by self-attention, the yz and xz
planes by two independent cross-attention decoders whose query stream starts
from a learnable embedding z, and the principal plane is refined to twice its
resolution with image evidence before the planes are split channel-wise into
the spatial-query and prior-query groups.
"""
import math

import numpy as np

from dataclasses import dataclass
from typing import Optional

from autodiff import Parameter, Tensor, concat, upsample2x
from errors import ConfigError
from layers import (Conv2d, ConvTranspose2d, CrossDecoderLayer, EncoderBlock, HourglassLite, Linear, Module,
                    channel_concat, run_blocks, token_grid_to_plane)
from run_config import ModelConfig


@dataclass
class TriPlane:
    f_xy: Tensor
    f_yz: Tensor
    f_xz: Tensor
    f_xy_refined: Tensor

    def __post_init__(self):
        if not (self.f_xy.shape == self.f_yz.shape == self.f_xz.shape):
            raise ConfigError(f"base planes disagree: {self.f_xy.shape}, {self.f_yz.shape}, {self.f_xz.shape}")
        H, W, C = self.f_xy.shape
        if self.f_xy_refined.shape != (2 * H, 2 * W, C):
            raise ConfigError(f"refined plane {self.f_xy_refined.shape} is not {(2 * H, 2 * W, C)}")

    @property
    def channels(self) -> int:
        return self.f_xy.shape[2]

    def planes(self):
        return {"xy": self.f_xy, "yz": self.f_yz, "xz": self.f_xz, "xy_refined": self.f_xy_refined}


@dataclass
class TriPlanePair:
    sq: TriPlane
    pq: TriPlane


def split_triplane(planes: TriPlane) -> TriPlanePair:
    """First C/2 channels feed the spatial query, the last C/2 the prior query."""
    C = planes.channels
    if C % 2:
        raise ConfigError(f"cannot split {C} channels into equal halves")
    h = C // 2
    halves = [(p[:, :, :h], p[:, :, h:]) for p in (planes.f_xy, planes.f_yz, planes.f_xz, planes.f_xy_refined)]
    return TriPlanePair(TriPlane(*(a for a, _ in halves)), TriPlane(*(b for _, b in halves)))


def merge_triplane(pair: TriPlanePair) -> TriPlane:
    return TriPlane(*(concat([a, b], axis=-1) for a, b in zip(
        (pair.sq.f_xy, pair.sq.f_yz, pair.sq.f_xz, pair.sq.f_xy_refined),
        (pair.pq.f_xy, pair.pq.f_yz, pair.pq.f_xz, pair.pq.f_xy_refined))))


def _grid_side(tokens: int) -> int:
    side = math.isqrt(tokens)
    if side * side != tokens:
        raise ConfigError(f"{tokens} tokens do not form a square grid")
    return side


class PrincipalDecoder(Module):
    """Self-attention over h, then a per-token linear map to a plane_patch^2 x C texel block."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        self.plane_patch = cfg.plane_patch
        self.channels = cfg.channels
        self.blocks = [EncoderBlock(cfg.dim, cfg.heads, cfg.mlp_ratio, rng, cfg.use_norm, cfg.use_bias)
                       for _ in range(cfg.dec_depth)]
        self.proj = Linear(cfg.dim, cfg.plane_patch ** 2 * cfg.channels, rng, cfg.use_bias)

    def __call__(self, h: Tensor) -> Tensor:
        side = _grid_side(h.shape[0])
        x = run_blocks(self.blocks, h, "principal_decoder.block")
        return token_grid_to_plane(self.proj(x), side, self.plane_patch, self.channels)


class CrossPlaneDecoder(Module):
    """Query stream initialised from the learnable embedding z; keys and values come from h."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        self.plane_patch = cfg.plane_patch
        self.channels = cfg.channels
        self.z = Parameter(rng.standard_normal((cfg.tokens, cfg.dim)) * cfg.z_std)
        self.layers = [CrossDecoderLayer(cfg.dim, cfg.heads, cfg.mlp_ratio, rng, cfg.use_norm, cfg.use_bias)
                       for _ in range(cfg.dec_depth)]
        self.proj = Linear(cfg.dim, cfg.plane_patch ** 2 * cfg.channels, rng, cfg.use_bias)

    def __call__(self, h: Tensor, z: Optional[Tensor] = None) -> Tensor:
        """The plane grid follows the query tokens of z; h may hold any number of key tokens."""
        z = self.z if z is None else z
        if z.ndim != 2 or h.ndim != 2 or z.shape[1] != h.shape[1]:
            raise ConfigError(f"embedding z {z.shape} and latent h {h.shape} must share their width")
        side = _grid_side(z.shape[0])
        s = run_blocks(self.layers, z, "cross_decoder.layer", h)
        return token_grid_to_plane(self.proj(s), side, self.plane_patch, self.channels)


def decode_principal(h: Tensor, decoder: PrincipalDecoder) -> Tensor:
    return decoder(h)


def decode_cross(z: Tensor, h: Tensor, decoder: CrossPlaneDecoder) -> Tensor:
    return decoder(h, z)


class PrincipalRefiner(Module):
    """
    DownConv(image) concatenated with f_xy, a two-stack hourglass, then a
    stride-2 transposed convolution: [H,W,C] -> [2H,2W,C].
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        factor = cfg.image_res // cfg.plane_res
        C = cfg.channels
        self.down = Conv2d(3, C, factor, rng, stride=factor)
        self.hourglass = HourglassLite(2 * C, cfg.hourglass_hidden, C, rng, stacks=2)
        self.up = ConvTranspose2d(C, C, 4, rng, stride=2, pad=1)

    def __call__(self, image: np.ndarray, f_xy: Tensor) -> Tensor:
        image = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=np.float64))
        fused = channel_concat(self.down(image), f_xy)
        return self.up(self.hourglass(fused))


def refine_principal(image: np.ndarray, f_xy: Tensor, refiner: PrincipalRefiner) -> Tensor:
    return refiner(image, f_xy)


class ConvPlaneBackbone(Module):
    """Convolutional encoder-decoder producing one plane from the 9-channel bundle."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        factor = cfg.image_res // cfg.plane_res
        self.down = Conv2d(9, cfg.hourglass_hidden, factor, rng, stride=factor)
        self.body = HourglassLite(cfg.hourglass_hidden, cfg.hourglass_hidden, cfg.channels, rng, stacks=1)

    def __call__(self, stacked: Tensor) -> Tensor:
        return self.body(self.down(stacked))


def no_refine(f_xy: Tensor) -> Tensor:
    """Stand-in refined plane when refinement is ablated: nearest-neighbour doubling."""
    return upsample2x(f_xy)
