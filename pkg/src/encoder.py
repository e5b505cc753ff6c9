"""
Global-correlated encoder: the image and both normal maps are cut into
non-overlapping n x n patches, linearly projected, given a learned positional
embedding and mixed by pre-norm self-attention blocks into the latent h [T, D].

Image arrays are row 0 = bottom (y = -0.5), column 0 = left (x = -0.5), so
texel rows of every plane derived from them increase with +y.
"""
import numpy as np

from dataclasses import dataclass
from typing import Optional

from autodiff import Parameter, Tensor
from errors import ConfigError, DimensionError
from layers import EncoderBlock, Linear, Module, run_blocks
from run_config import ModelConfig

BUNDLE_CHANNELS = 9


@dataclass
class InputBundle:
    image: np.ndarray
    normal_front: np.ndarray
    normal_back: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        self.normal_front = np.asarray(self.normal_front, dtype=np.float64)
        self.normal_back = np.asarray(self.normal_back, dtype=np.float64)
        self.mask = np.asarray(self.mask).astype(bool)
        shape = self.image.shape
        if len(shape) != 3 or shape[2] != 3:
            raise DimensionError(f"image must be HxWx3, got {shape}")
        if self.normal_front.shape != shape or self.normal_back.shape != shape or self.mask.shape != shape[:2]:
            raise DimensionError("image, normal maps and mask disagree in size")

    @property
    def resolution(self) -> int:
        return self.image.shape[0]

    def stacked(self) -> np.ndarray:
        """H x W x 9: image, front normals, back normals."""
        return np.concatenate([self.image, self.normal_front, self.normal_back], axis=-1)

    def normals(self) -> np.ndarray:
        return np.concatenate([self.normal_front, self.normal_back], axis=-1)

    def validate(self, tol: float = 1e-3) -> None:
        """Background is zero everywhere; normals are unit inside the mask."""
        background = ~self.mask
        if np.any(self.stacked()[background] != 0):
            raise ValueError("bundle has non-zero background pixels")
        for n in (self.normal_front, self.normal_back):
            lengths = np.linalg.norm(n[self.mask], axis=-1)
            if lengths.size and np.abs(lengths - 1.0).max() > tol:
                raise ValueError("bundle normals are not unit length inside the mask")


def patchify(bundle: InputBundle, n: int) -> np.ndarray:
    """[T, n*n*9] tokens in raster order (rows, then columns); each row is (dy, dx, channel) flattened."""
    H, W = bundle.image.shape[:2]
    if n < 1 or H % n or W % n:
        raise ConfigError(f"image {H}x{W} is not divisible into {n}x{n} patches")
    x = bundle.stacked()
    return (x.reshape(H // n, n, W // n, n, BUNDLE_CHANNELS)
            .transpose(0, 2, 1, 3, 4)
            .reshape((H // n) * (W // n), n * n * BUNDLE_CHANNELS))


def unpatchify(tokens: np.ndarray, n: int, H: int, W: int) -> np.ndarray:
    if tokens.shape != ((H // n) * (W // n), n * n * BUNDLE_CHANNELS):
        raise DimensionError(f"token matrix {tokens.shape} does not match a {H}x{W} image with patch {n}")
    return (tokens.reshape(H // n, W // n, n, n, BUNDLE_CHANNELS)
            .transpose(0, 2, 1, 3, 4)
            .reshape(H, W, BUNDLE_CHANNELS))


class Encoder(Module):

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        self.patch = cfg.patch
        self.proj = Linear(cfg.patch * cfg.patch * BUNDLE_CHANNELS, cfg.dim, rng, cfg.use_bias)
        self.pos = Parameter(rng.standard_normal((cfg.tokens, cfg.dim)) * 0.02)
        self.blocks = [EncoderBlock(cfg.dim, cfg.heads, cfg.mlp_ratio, rng, cfg.use_norm, cfg.use_bias)
                       for _ in range(cfg.enc_depth)]

    def encode_tokens(self, patches: Tensor, pos: Optional[Tensor] = None) -> Tensor:
        x = self.proj(patches) + (self.pos if pos is None else pos)
        return run_blocks(self.blocks, x, "encoder.block")

    def __call__(self, bundle: InputBundle) -> Tensor:
        patches = Tensor(patchify(bundle, self.patch))
        if patches.shape[0] != self.pos.shape[0]:
            raise ConfigError(f"bundle yields {patches.shape[0]} tokens, encoder expects {self.pos.shape[0]}")
        return self.encode_tokens(patches)


def encode(bundle: InputBundle, encoder: Encoder) -> Tensor:
    return encoder(bundle)
