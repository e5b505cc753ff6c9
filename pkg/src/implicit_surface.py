"""
Occupancy and colour heads, dense grid evaluation and surface extraction at
the o = 0.5 level set.
"""
import numpy as np

from typing import Callable, Optional, Protocol, Sequence, Tuple

from autodiff import Tensor, no_grad
from errors import DimensionError, NumericError
from feature_query import FusedFeature
from isosurface import marching_cubes
from layers import MLPHead, Module
from mesh_geometry import TriMesh, vertex_normals
from utils.settings import Settings
from utils.utils import print_warning

ISO_LEVEL = 0.5
# rows per head evaluation; every batch is padded to a multiple of this
EVAL_BLOCK = 512
# rough working set of one point while it passes through the heads
BYTES_PER_POINT = 8 * 4096


class FieldHeads(Module):
    """Two MLPs with the same trunk: occupancy (1 output) and colour (3 outputs)."""

    def __init__(self, d_in: int, widths: Sequence[int], rng: np.random.Generator) -> None:
        widths = list(widths)
        if not widths or widths[-1] != 1:
            raise DimensionError(f"occupancy widths must end in a single output, got {widths}")
        self.d_in = d_in
        self.occupancy = MLPHead(d_in, widths, rng)
        self.color = MLPHead(d_in, widths[:-1] + [3], rng)

    def __call__(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        if x.shape[-1] != self.d_in:
            raise DimensionError(f"fused feature has width {x.shape[-1]}, heads expect {self.d_in}")
        try:
            return self.occupancy(x), self.color(x)
        except NumericError as e:
            raise NumericError(str(e), "field_heads") from e


def evaluate(heads: FieldHeads, fused: FusedFeature) -> Tuple[Tensor, Tensor]:
    """(o [N,1], c [N,3]) for a batch of fused features."""
    return heads(fused.as_tensor())


class ImplicitField(Protocol):
    def occupancy(self, points: np.ndarray) -> np.ndarray: ...

    def color(self, points: np.ndarray) -> np.ndarray: ...


def blocked_apply(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, block: int = EVAL_BLOCK) -> np.ndarray:
    """
    Applies fn to fixed-size row blocks, padding the last one by repeating its
    final row. A row's value depends only on its block, so callers that keep
    block boundaries aligned get identical results for any batching.
    """
    points = np.atleast_2d(points)
    n = len(points)
    if n == 0:
        return fn(points)
    out = []
    for start in range(0, n, block):
        rows = points[start:start + block]
        short = block - len(rows)
        if short:
            rows = np.concatenate([rows, np.repeat(rows[-1:], short, axis=0)])
        out.append(np.asarray(fn(rows))[:block - short])
    return np.concatenate(out)


class HeadsField:
    """
    Evaluates FieldHeads over points whose fused features come from
    `features(points) -> FusedFeature`; no gradients are recorded.
    """

    def __init__(self, heads: FieldHeads, features: Callable[[np.ndarray], FusedFeature]) -> None:
        self.heads = heads
        self.features = features

    def _fused(self, points: np.ndarray) -> Tensor:
        x = self.features(points).as_tensor()
        if x.shape[-1] != self.heads.d_in:
            raise DimensionError(f"fused feature has width {x.shape[-1]}, heads expect {self.heads.d_in}")
        return x

    def _occupancy_block(self, points: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.heads.occupancy(self._fused(points)).data[:, 0]

    def _color_block(self, points: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.heads.color(self._fused(points)).data

    def occupancy(self, points: np.ndarray) -> np.ndarray:
        return blocked_apply(self._occupancy_block, points)

    def color(self, points: np.ndarray) -> np.ndarray:
        return blocked_apply(self._color_block, points)


def grid_coordinates(resolution: int) -> np.ndarray:
    """Corner-aligned node coordinates along one axis of [-0.5, 0.5]."""
    return np.linspace(-0.5, 0.5, resolution)


def grid_memory_mb(resolution: int, chunk_size: int) -> float:
    return (resolution ** 3 * 8 + chunk_size * BYTES_PER_POINT) / 2 ** 20


def evaluate_grid(field: ImplicitField, resolution: int, chunk_size: Optional[int] = None) -> np.ndarray:
    """
    Occupancy on an R^3 corner-aligned grid over [-0.5, 0.5]^3; volume[i, j, k]
    is the value at (x_i, y_j, z_k). Points are fed in chunks rounded up to a
    multiple of EVAL_BLOCK, so the result does not depend on the chunk size.
    """
    if resolution < 2:
        raise DimensionError(f"grid resolution must be at least 2, got {resolution}")
    chunk = chunk_size or Settings.get_chunk_size()
    chunk = -(-chunk // EVAL_BLOCK) * EVAL_BLOCK
    need = grid_memory_mb(resolution, chunk)
    if need > Settings.get_memory_budget_mb():
        raise MemoryError(f"a {resolution}^3 grid needs about {need:.0f} MB, budget is "
                          f"{Settings.get_memory_budget_mb()} MB")

    axis = grid_coordinates(resolution)
    total = resolution ** 3
    volume = np.empty(total, dtype=np.float64)
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        i, j, k = np.unravel_index(flat, (resolution,) * 3)
        points = np.stack([axis[i], axis[j], axis[k]], axis=1)
        volume[flat] = field.occupancy(points)
    return volume.reshape((resolution,) * 3)


def extract_surface(volume: np.ndarray, iso: float = ISO_LEVEL) -> TriMesh:
    """Marching cubes on a grid from `evaluate_grid`; normals point where occupancy falls."""
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3 or len(set(volume.shape)) != 1:
        raise DimensionError(f"expected a cubic volume, got shape {volume.shape}")
    if not np.all(np.isfinite(volume)):
        raise NumericError("volume holds non-finite values", "extract_surface")
    lo, hi = float(volume.min()), float(volume.max())
    if not lo < iso < hi:
        print_warning(f"iso level {iso} lies outside the volume range [{lo:.4g}, {hi:.4g}]; surface is empty")
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    R = volume.shape[0]
    vertices, faces = marching_cubes(volume, iso, np.full(3, -0.5), 1.0 / (R - 1))
    return TriMesh(vertices, faces, vertex_normals=vertex_normals(vertices, faces))


def colorize(mesh: TriMesh, field: ImplicitField) -> TriMesh:
    out = mesh.copy()
    if mesh.is_empty:
        out.vertex_colors = np.zeros((len(mesh.vertices), 3))
        return out
    out.vertex_colors = np.clip(field.color(mesh.vertices), 0.0, 1.0)
    return out


def reconstruct_mesh(field: ImplicitField, resolution: int, chunk_size: Optional[int] = None,
                     iso: float = ISO_LEVEL) -> TriMesh:
    return colorize(extract_surface(evaluate_grid(field, resolution, chunk_size), iso), field)
