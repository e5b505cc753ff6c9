"""
Hybrid prior fusion: spatial query on the tri-plane, prior-enhanced query
through the body mesh, pixel-aligned normal feature, and the fused
implicit-function input [f_sq, f_pq, sdf_prior, f_n].
"""
import numpy as np

from dataclasses import dataclass
from typing import Optional

from autodiff import Tensor, bilinear_sample, concat, gather_rows
from body_prior import PriorMesh
from triplane_decoder import TriPlane, TriPlanePair

# bump when the concatenation order or widths change
FUSED_LAYOUT_VERSION = 1
NORMAL_CHANNELS = 6

_DROPPED_AXIS = {"xy": (0, 1), "yz": (1, 2), "xz": (0, 2)}


def project(x: np.ndarray, plane_id: str) -> np.ndarray:
    """Orthographic drop of one axis; [-0.5, 0.5] maps to [-1, 1] (u first kept axis, v second)."""
    try:
        keep = _DROPPED_AXIS[plane_id]
    except KeyError:
        raise ValueError(f"Unknown plane {plane_id!r}") from None
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return 2.0 * x[:, keep]


def spatial_query(half: TriPlane, x: np.ndarray) -> Tensor:
    """[N, 2*(C/2)]: refined-xy sample, then the sum of the yz and xz samples."""
    xy = bilinear_sample(half.f_xy_refined, project(x, "xy"))
    side = bilinear_sample(half.f_yz, project(x, "yz")) + bilinear_sample(half.f_xz, project(x, "xz"))
    return concat([xy, side], axis=-1)


def prior_vertex_features(half: TriPlane, mesh: PriorMesh) -> Tensor:
    return spatial_query(half, mesh.vertices)


@dataclass
class PriorGeometry:
    """Per-point nearest face, its barycentrics and the signed distance to the prior."""
    face: np.ndarray
    bary: np.ndarray
    sdf: np.ndarray

    def take(self, rows: np.ndarray) -> "PriorGeometry":
        return PriorGeometry(self.face[rows], self.bary[rows], self.sdf[rows])


def prior_geometry(x: np.ndarray, mesh: PriorMesh) -> PriorGeometry:
    x = np.atleast_2d(x)
    query = mesh.query
    dist, face, bary, _ = query.closest(x)
    sdf = np.where(query.inside(x), -dist, dist)
    return PriorGeometry(face, bary, sdf)


def prior_query(x: np.ndarray, mesh: PriorMesh, vertex_features: Tensor,
                geometry: Optional[PriorGeometry] = None) -> Tensor:
    """u F(v0) + v F(v1) + w F(v2) over the nearest face of each point."""
    if vertex_features.shape[0] != len(mesh.vertices):
        raise ValueError(f"feature table has {vertex_features.shape[0]} rows for {len(mesh.vertices)} vertices")
    if geometry is None:
        face, bary = mesh.query.nearest_face(np.atleast_2d(x))
    else:
        face, bary = geometry.face, geometry.bary
    corners = mesh.faces[face]
    out = None
    for i in range(3):
        term = gather_rows(vertex_features, corners[:, i]) * bary[:, i:i + 1]
        out = term if out is None else out + term
    return out


def normal_feature(x: np.ndarray, normal_grid: Tensor) -> Tensor:
    return bilinear_sample(normal_grid, project(x, "xy"))


@dataclass
class FusedFeature:
    f_sq: Tensor
    f_pq: Tensor
    sdf_prior: Tensor
    f_n: Tensor

    def as_tensor(self) -> Tensor:
        return concat([self.f_sq, self.f_pq, self.sdf_prior, self.f_n], axis=-1)

    @property
    def width(self) -> int:
        return self.f_sq.shape[-1] + self.f_pq.shape[-1] + 1 + self.f_n.shape[-1]


def _zeros(n: int, width: int) -> Tensor:
    return Tensor(np.zeros((n, width)))


def fuse(x: np.ndarray, pair: Optional[TriPlanePair], mesh: PriorMesh, vertex_features: Optional[Tensor],
         normal_grid: Optional[Tensor], geometry: Optional[PriorGeometry] = None,
         use_sq: bool = True, use_pq: bool = True, use_normal: bool = True) -> FusedFeature:
    """
    Assembles the implicit-function input. Disabled components are zeros of
    the same width, so every mode shares one head signature. `pair` may be
    None when only the prior query runs off a precomputed vertex table.
    """
    x = np.atleast_2d(x)
    n = len(x)
    if pair is None and (use_sq or vertex_features is None):
        raise ValueError("tri-plane pair is required unless a prior-only query has its vertex table")
    width = 2 * pair.sq.channels if pair is not None else vertex_features.shape[-1]
    if geometry is None:
        geometry = prior_geometry(x, mesh)
    f_sq = spatial_query(pair.sq, x) if use_sq else _zeros(n, width)
    if use_pq:
        table = vertex_features if vertex_features is not None else prior_vertex_features(pair.pq, mesh)
        f_pq = prior_query(x, mesh, table, geometry)
    else:
        f_pq = _zeros(n, width)
    f_n = normal_feature(x, normal_grid) if use_normal and normal_grid is not None else _zeros(n, NORMAL_CHANNELS)
    return FusedFeature(f_sq, f_pq, Tensor(geometry.sdf.reshape(n, 1)), f_n)
