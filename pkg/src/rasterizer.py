"""
Orthographic software rasterizer.

A view rotates world coordinates into camera space; the camera looks down
-z, so larger camera z is closer. Pixel (row r, column c) samples the camera
point (-0.5 + (c + 0.5) / res, -0.5 + (r + 0.5) / res): row 0 is the bottom
of the image. Pixel centres lying exactly on a shared edge follow the
top-left rule, and depth ties go to the lower face index.
"""
import numpy as np

from dataclasses import dataclass
from typing import Dict, List

from encoder import InputBundle
from mesh_geometry import TriMesh, vertex_normals

PAIR_BLOCK = 1 << 21
DEFAULT_COLOR = 0.8

VIEW_ROTATIONS: Dict[str, np.ndarray] = {
    "front": np.eye(3),
    "left": np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    "back": np.diag([-1.0, 1.0, -1.0]),
    "right": np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
    "above": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    "below": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
}
VIEW_NAMES = tuple(VIEW_ROTATIONS)


@dataclass(frozen=True)
class OrthoView:
    name: str
    rotation: np.ndarray
    resolution: int

    @property
    def direction(self) -> np.ndarray:
        """World direction from the subject towards the camera."""
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])


def make_view(name: str, resolution: int) -> OrthoView:
    if name not in VIEW_ROTATIONS:
        raise ValueError(f"Unknown view {name!r}; expected one of {VIEW_NAMES}")
    return OrthoView(name, VIEW_ROTATIONS[name], int(resolution))


def six_views(resolution: int) -> List[OrthoView]:
    return [make_view(name, resolution) for name in VIEW_NAMES]


@dataclass
class RenderBuffer:
    color: np.ndarray
    normal: np.ndarray
    depth: np.ndarray
    mask: np.ndarray

    @classmethod
    def empty(cls, res: int) -> "RenderBuffer":
        return cls(np.zeros((res, res, 3)), np.zeros((res, res, 3)), np.zeros((res, res)), np.zeros((res, res), bool))


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _owns(e: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Inside test for one edge of a counter-clockwise triangle, top-left rule on ties."""
    top_left = (dy < 0) | ((dy == 0) & (dx < 0))
    return (e > 0) | ((e == 0) & top_left)


def _fragments(xy: np.ndarray, faces: np.ndarray, res: int):
    """Yields (face, pixel, barycentrics) for every covered pixel centre, in face blocks."""
    tri = xy[faces]
    area2 = _edge(tri[:, 0, 0], tri[:, 0, 1], tri[:, 1, 0], tri[:, 1, 1], tri[:, 2, 0], tri[:, 2, 1])
    live = np.flatnonzero(area2 != 0)
    # make every live triangle counter-clockwise in the image plane
    flip = area2 < 0
    order = np.where(flip[:, None], [0, 2, 1], [0, 1, 2])
    tri = np.take_along_axis(tri, order[:, :, None], axis=1)

    pix_lo = np.ceil((tri.min(axis=1) + 0.5) * res - 0.5).astype(np.int64)
    pix_hi = np.floor((tri.max(axis=1) + 0.5) * res - 0.5).astype(np.int64)
    pix_lo = np.clip(pix_lo, 0, res - 1)
    pix_hi = np.clip(pix_hi, -1, res - 1)
    w = np.maximum(0, pix_hi[:, 0] - pix_lo[:, 0] + 1)
    h = np.maximum(0, pix_hi[:, 1] - pix_lo[:, 1] + 1)
    live = live[(w[live] > 0) & (h[live] > 0)]

    start = 0
    while start < len(live):
        counts = (w * h)[live[start:]]
        take = max(1, int(np.searchsorted(np.cumsum(counts), PAIR_BLOCK, side="right")))
        block = live[start:start + take]
        start += take
        n = (w * h)[block]
        f = np.repeat(block, n)
        local = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
        col = pix_lo[f, 0] + local % w[f]
        row = pix_lo[f, 1] + local // w[f]
        px = -0.5 + (col + 0.5) / res
        py = -0.5 + (row + 0.5) / res
        a, b, c = tri[f, 0], tri[f, 1], tri[f, 2]
        e_bc = _edge(b[:, 0], b[:, 1], c[:, 0], c[:, 1], px, py)
        e_ca = _edge(c[:, 0], c[:, 1], a[:, 0], a[:, 1], px, py)
        e_ab = _edge(a[:, 0], a[:, 1], b[:, 0], b[:, 1], px, py)
        inside = (_owns(e_bc, c[:, 0] - b[:, 0], c[:, 1] - b[:, 1])
                  & _owns(e_ca, a[:, 0] - c[:, 0], a[:, 1] - c[:, 1])
                  & _owns(e_ab, b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]))
        if not inside.any():
            continue
        total = np.abs(area2[f[inside]])
        bary = np.stack([e_bc[inside], e_ca[inside], e_ab[inside]], axis=1) / total[:, None]
        # back to the face's own corner order
        bary = np.take_along_axis(bary, np.argsort(order[f[inside]], axis=1), axis=1)
        yield f[inside], row[inside] * res + col[inside], bary


def rasterize(mesh: TriMesh, view: OrthoView) -> RenderBuffer:
    res = view.resolution
    out = RenderBuffer.empty(res)
    if mesh.is_empty:
        return out
    cam = mesh.vertices @ view.rotation.T
    normals = mesh.vertex_normals if mesh.vertex_normals is not None else vertex_normals(mesh.vertices, mesh.faces)
    cam_normals = normals @ view.rotation.T
    colors = mesh.vertex_colors if mesh.vertex_colors is not None else np.full((len(cam), 3), DEFAULT_COLOR)

    faces_l, pix_l, bary_l = [], [], []
    for f, pix, bary in _fragments(cam[:, :2], mesh.faces, res):
        faces_l.append(f)
        pix_l.append(pix)
        bary_l.append(bary)
    if not faces_l:
        return out
    f = np.concatenate(faces_l)
    pix = np.concatenate(pix_l)
    bary = np.concatenate(bary_l)
    corners = mesh.faces[f]
    depth = np.einsum("nk,nk->n", bary, cam[corners, 2])

    # nearest fragment per pixel; equal depths resolve to the lower face index
    order = np.lexsort((f, -depth, pix))
    pix_sorted = pix[order]
    first = order[np.r_[True, pix_sorted[1:] != pix_sorted[:-1]]]

    win_pix = pix[first]
    win_bary = bary[first][:, :, None]
    win_corners = corners[first]
    n = (win_bary * cam_normals[win_corners]).sum(axis=1)
    n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-12)
    rows, cols = np.divmod(win_pix, res)
    out.normal[rows, cols] = n
    out.color[rows, cols] = np.clip((win_bary * colors[win_corners]).sum(axis=1), 0.0, 1.0)
    out.depth[rows, cols] = depth[first]
    out.mask[rows, cols] = True
    return out


def render_bundle(mesh: TriMesh, resolution: int) -> InputBundle:
    """
    Front colour image plus front and back normal maps, all in the front frame:
    the back render is mirrored to the front pixel grid and its normals rotated
    back into world coordinates. The mask is the intersection of both silhouettes.
    """
    front = rasterize(mesh, make_view("front", resolution))
    back_view = make_view("back", resolution)
    back = rasterize(mesh, back_view)
    back_normal = (back.normal @ back_view.rotation)[:, ::-1]
    back_mask = back.mask[:, ::-1]
    mask = front.mask & back_mask
    keep = mask[..., None]
    return InputBundle(np.where(keep, front.color, 0.0), np.where(keep, front.normal, 0.0),
                       np.where(keep, back_normal, 0.0), mask)
