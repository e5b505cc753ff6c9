"""
Trainable building blocks on top of the autodiff package.

Parameters are discovered through `named_parameters`, which walks instance
attributes in assignment order, so parameter order (and therefore checkpoint
layout and optimizer state) is fixed by construction order.
"""
import math

import numpy as np

from typing import Iterator, List, Optional, Sequence, Tuple

from autodiff import (Parameter, Tensor, concat, conv2d, conv_transpose2d, layer_norm, leaky_relu,
                      relu, sigmoid, softmax)
from errors import ConfigError, NumericError


class Module:

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            if isinstance(value, Parameter):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{prefix}{name}.{i}", item

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def _normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return rng.standard_normal(shape) * std


class Linear(Module):

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True) -> None:
        self.weight = Parameter(_normal(rng, (d_in, d_out), math.sqrt(2.0 / (d_in + d_out))))
        self.bias = Parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    """Affine layer norm over the last axis; identity when disabled."""

    def __init__(self, dim: int, enabled: bool = True, affine_bias: bool = True) -> None:
        self.enabled = enabled
        self.gain = Parameter(np.ones(dim)) if enabled else None
        self.bias = Parameter(np.zeros(dim)) if enabled and affine_bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if not self.enabled:
            return x
        return layer_norm(x, self.gain, self.bias)


class MultiHeadAttention(Module):
    """
    Scaled dot-product attention. Queries come from `q_in` [Tq,D], keys and
    values from `kv_in` [Tk,D]; scores are scaled by 1/sqrt(d) with d the
    per-head key width. The last attention weights [heads,Tq,Tk] are kept on
    `_last_weights` for inspection.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, bias: bool = True) -> None:
        if dim % heads != 0:
            raise ConfigError(f"attention width {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.w_q = Linear(dim, dim, rng, bias)
        self.w_k = Linear(dim, dim, rng, bias)
        self.w_v = Linear(dim, dim, rng, bias)
        self.w_o = Linear(dim, dim, rng, bias)
        self._last_weights: Optional[np.ndarray] = None

    def _split(self, x: Tensor) -> Tensor:
        T = x.shape[0]
        return x.reshape(T, self.heads, self.head_dim).transpose(1, 0, 2)

    def __call__(self, q_in: Tensor, kv_in: Optional[Tensor] = None) -> Tensor:
        kv_in = q_in if kv_in is None else kv_in
        q = self._split(self.w_q(q_in))
        k = self._split(self.w_k(kv_in))
        v = self._split(self.w_v(kv_in))
        scores = (q @ k.transpose(0, 2, 1)) * (1.0 / math.sqrt(self.head_dim))
        weights = softmax(scores, axis=-1)
        self._last_weights = weights.data
        mixed = (weights @ v).transpose(1, 0, 2).reshape(q_in.shape[0], self.heads * self.head_dim)
        return self.w_o(mixed)


class FeedForward(Module):

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator, bias: bool = True) -> None:
        self.fc1 = Linear(dim, hidden, rng, bias)
        self.fc2 = Linear(hidden, dim, rng, bias)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(x)))


class EncoderBlock(Module):
    """Pre-norm self-attention block: x + MHA(LN(x)), then x + FFN(LN(x))."""

    def __init__(self, dim: int, heads: int, mlp_ratio: int, rng: np.random.Generator,
                 use_norm: bool = True, use_bias: bool = True) -> None:
        self.norm1 = LayerNorm(dim, use_norm, use_bias)
        self.attn = MultiHeadAttention(dim, heads, rng, use_bias)
        self.norm2 = LayerNorm(dim, use_norm, use_bias)
        self.ffn = FeedForward(dim, mlp_ratio * dim, rng, use_bias)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.ffn(self.norm2(x))


class CrossDecoderLayer(Module):
    """
    Query-stream layer with a norm after every sub-layer:
    s = LN(s + SelfAttn(s)); s = LN(s + CrossAttn(s, h)); s = LN(s + FFN(s)).
    """

    def __init__(self, dim: int, heads: int, mlp_ratio: int, rng: np.random.Generator,
                 use_norm: bool = True, use_bias: bool = True) -> None:
        self.self_attn = MultiHeadAttention(dim, heads, rng, use_bias)
        self.norm1 = LayerNorm(dim, use_norm, use_bias)
        self.cross_attn = MultiHeadAttention(dim, heads, rng, use_bias)
        self.norm2 = LayerNorm(dim, use_norm, use_bias)
        self.ffn = FeedForward(dim, mlp_ratio * dim, rng, use_bias)
        self.norm3 = LayerNorm(dim, use_norm, use_bias)

    def __call__(self, s: Tensor, h: Tensor) -> Tensor:
        s = self.norm1(s + self.self_attn(s))
        s = self.norm2(s + self.cross_attn(s, h))
        return self.norm3(s + self.ffn(s))


def run_blocks(blocks: Sequence, x: Tensor, where: str, *extra) -> Tensor:
    """Applies blocks in order, labelling numeric failures with the block index."""
    for i, block in enumerate(blocks):
        try:
            x = block(x, *extra)
        except NumericError as e:
            raise NumericError(f"non-finite activations ({e})", f"{where}.{i}") from e
    return x


class Conv2d(Module):

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, pad: int = 0, bias: bool = True) -> None:
        self.stride = stride
        self.pad = pad
        self.kernel = Parameter(_normal(rng, (kernel, kernel, c_in, c_out), math.sqrt(2.0 / (kernel * kernel * c_in))))
        self.bias = Parameter(np.zeros(c_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.kernel, self.bias, self.stride, self.pad)


class ConvTranspose2d(Module):

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 2, pad: int = 0, bias: bool = True) -> None:
        self.stride = stride
        self.pad = pad
        self.kernel = Parameter(_normal(rng, (kernel, kernel, c_in, c_out), math.sqrt(2.0 / (kernel * kernel * c_in))))
        self.bias = Parameter(np.zeros(c_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return conv_transpose2d(x, self.kernel, self.bias, self.stride, self.pad)


def down_conv(c_in: int, c_out: int, rng: np.random.Generator) -> Conv2d:
    """Halves H and W exactly (kernel 4, stride 2, pad 1)."""
    return Conv2d(c_in, c_out, 4, rng, stride=2, pad=1)


def up_conv(c_in: int, c_out: int, rng: np.random.Generator) -> ConvTranspose2d:
    """Doubles H and W exactly (kernel 4, stride 2, pad 1)."""
    return ConvTranspose2d(c_in, c_out, 4, rng, stride=2, pad=1)


class HourglassStack(Module):
    """Two-level down/up conv pyramid with additive skips."""

    def __init__(self, channels: int, rng: np.random.Generator) -> None:
        self.enc0 = Conv2d(channels, channels, 3, rng, pad=1)
        self.down1 = down_conv(channels, channels, rng)
        self.down2 = down_conv(channels, channels, rng)
        self.up2 = up_conv(channels, channels, rng)
        self.up1 = up_conv(channels, channels, rng)

    def __call__(self, x: Tensor) -> Tensor:
        e0 = leaky_relu(self.enc0(x))
        e1 = leaky_relu(self.down1(e0))
        e2 = leaky_relu(self.down2(e1))
        u1 = leaky_relu(self.up2(e2)) + e1
        return leaky_relu(self.up1(u1)) + e0


class HourglassLite(Module):
    """Input 3x3 conv, `stacks` hourglass stacks, 1x1 output conv. Spatial size is preserved (must be divisible by 4)."""

    def __init__(self, c_in: int, hidden: int, c_out: int, rng: np.random.Generator, stacks: int = 2) -> None:
        self.stem = Conv2d(c_in, hidden, 3, rng, pad=1)
        self.stacks = [HourglassStack(hidden, rng) for _ in range(stacks)]
        self.head = Conv2d(hidden, c_out, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        y = leaky_relu(self.stem(x))
        for stack in self.stacks:
            y = stack(y)
        return self.head(y)


class MLPHead(Module):
    """Fully-connected head: LeakyReLU(0.2) on hidden layers, sigmoid on the output."""

    def __init__(self, d_in: int, widths: Sequence[int], rng: np.random.Generator) -> None:
        dims = [d_in, *widths]
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = leaky_relu(layer(x), 0.2)
        return sigmoid(self.layers[-1](x))


def token_grid_to_plane(tokens: Tensor, grid: int, patch: int, channels: int) -> Tensor:
    """[grid*grid, patch*patch*C] tokens in raster order -> [grid*patch, grid*patch, C] plane."""
    return (tokens.reshape(grid, grid, patch, patch, channels)
            .transpose(0, 2, 1, 3, 4)
            .reshape(grid * patch, grid * patch, channels))


def channel_concat(*maps: Tensor) -> Tensor:
    return concat(maps, axis=-1)
