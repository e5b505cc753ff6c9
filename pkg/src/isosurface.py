"""
Marching cubes over a regular grid.

Triangles are wound so normals point away from corners above the iso level
(outward for an occupancy field, inward for a signed distance). Cells whose
faces are all unambiguous use the complement-canonical table row, so flipping
the field around the iso level reproduces the same vertices with every face
reversed; cells with an ambiguous face keep their own row, which resolves the
face identically from both sides.
"""
import numpy as np

from typing import Tuple

from marching_tables import CORNER_OFFSETS, EDGE_CORNERS, FACE_CORNERS, TRI_TABLE

EDGE_T_CLAMP = 1e-6
WELD_TOL = 1e-9


def _table_points_to_set_corners() -> bool:
    corner = CORNER_OFFSETS.astype(np.float64)
    mids = 0.5 * (corner[EDGE_CORNERS[:, 0]] + corner[EDGE_CORNERS[:, 1]])
    a, b, c = mids[list(TRI_TABLE[1])]
    normal = np.cross(b - a, c - a)
    return float(normal @ (corner[0] - (a + b + c) / 3.0)) > 0


def _has_ambiguous_face(case: int) -> bool:
    bits = [(case >> k) & 1 for k in range(8)]
    for f in FACE_CORNERS:
        s = [bits[k] for k in f]
        if s[0] == s[2] and s[1] == s[3] and s[0] != s[1]:
            return True
    return False


def _build_case_triangles():
    """Per case: oriented edge triples [n,3] (outward = away from set corners)."""
    toward_set = _table_points_to_set_corners()
    cases = []
    for case in range(256):
        if _has_ambiguous_face(case):
            row, reverse = case, toward_set
        elif case <= 255 - case:
            row, reverse = case, toward_set
        else:
            row, reverse = 255 - case, not toward_set
        tris = np.array(TRI_TABLE[row], dtype=np.int64).reshape(-1, 3)
        cases.append(tris[:, ::-1].copy() if reverse else tris)
    return cases


CASE_TRIANGLES = _build_case_triangles()


def marching_cubes(volume: np.ndarray, iso: float, origin: np.ndarray, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    volume[i, j, k] is the field at origin + spacing * (i, j, k) (x, y, z).
    Returns (vertices [V,3], faces [F,3]); vertices are shared between cells
    through their grid edge and zero-area faces are dropped.
    """
    volume = np.asarray(volume, dtype=np.float64)
    nx, ny, nz = volume.shape
    if min(nx, ny, nz) < 2:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)
    above = volume > iso

    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for k, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        case |= above[dx:nx - 1 + dx, dy:ny - 1 + dy, dz:nz - 1 + dz].astype(np.int64) << k
    cells = np.argwhere((case != 0) & (case != 255))
    if len(cells) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)
    cell_case = case[cells[:, 0], cells[:, 1], cells[:, 2]]

    counts = np.array([len(t) for t in CASE_TRIANGLES])[cell_case]
    owner = np.repeat(np.arange(len(cells)), counts)
    local = np.concatenate([CASE_TRIANGLES[c] for c in cell_case])
    base = cells[owner]

    # global edge key: (corner a grid index, axis), a the lower-index endpoint
    ca = CORNER_OFFSETS[EDGE_CORNERS[:, 0]]
    cb = CORNER_OFFSETS[EDGE_CORNERS[:, 1]]
    lower = np.minimum(ca, cb)
    axis = np.argmax(np.abs(cb - ca), axis=1)
    node = base[:, None, :] + lower[local]
    key = ((node[..., 0] * ny + node[..., 1]) * nz + node[..., 2]) * 3 + axis[local]

    uniq, inverse = np.unique(key.reshape(-1), return_inverse=True)
    faces = inverse.reshape(-1, 3)

    ax = uniq % 3
    flat = uniq // 3
    i0 = np.stack([flat // (ny * nz), (flat // nz) % ny, flat % nz], axis=1)
    i1 = i0 + np.eye(3, dtype=np.int64)[ax]
    v0 = volume[i0[:, 0], i0[:, 1], i0[:, 2]]
    v1 = volume[i1[:, 0], i1[:, 1], i1[:, 2]]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(v1 != v0, (iso - v0) / (v1 - v0), 0.5)
    t = np.clip(t, EDGE_T_CLAMP, 1.0 - EDGE_T_CLAMP)
    grid_pos = i0 + t[:, None] * (i1 - i0)

    grid_pos, faces = weld_positions(grid_pos, faces, WELD_TOL)
    vertices = np.asarray(origin, dtype=np.float64) + spacing * grid_pos
    return drop_degenerate(vertices, faces)


def weld_positions(vertices: np.ndarray, faces: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Merges vertices that coincide within tol (same units as vertices)."""
    snapped = np.round(vertices / tol).astype(np.int64)
    _, first, inverse = np.unique(snapped, axis=0, return_index=True, return_inverse=True)
    if len(first) == len(vertices):
        return vertices, faces
    order = np.argsort(first)
    remap = np.empty(len(first), dtype=np.int64)
    remap[order] = np.arange(len(first))
    return vertices[first[order]], remap[inverse.reshape(-1)][faces]


def drop_degenerate(vertices: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if len(faces) == 0:
        return vertices, faces
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    area2 = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    distinct = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[distinct & (area2 > 0)]
    used = np.unique(faces)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[faces]
