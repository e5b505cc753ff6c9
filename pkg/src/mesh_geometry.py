"""
Exact triangle-mesh queries and mesh utilities.

`MeshQuery` answers closest-point (face index + barycentrics), unsigned and
signed distance, and the generalized winding number for batches of points.
Closest-point search is brute force over candidate faces pruned per spatial
block with a nearest-vertex upper bound, so results do not depend on how the
caller partitions its points.
"""
import math

import numpy as np

from dataclasses import dataclass
from scipy.spatial import cKDTree
from typing import Optional, Tuple

from errors import MeshError
from utils.utils import print_warning

PAIR_BLOCK = 1 << 20
DEGENERATE_AREA = 1e-14


@dataclass
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    vertex_colors: Optional[np.ndarray] = None
    vertex_normals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def copy(self) -> "TriMesh":
        return TriMesh(
            self.vertices.copy(), self.faces.copy(),
            None if self.vertex_colors is None else self.vertex_colors.copy(),
            None if self.vertex_normals is None else self.vertex_normals.copy(),
        )


def face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def face_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    n = np.cross(b - a, c - a)
    length = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(length > 0, length, 1.0)


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals, unit length (isolated vertices get +z)."""
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    weighted = np.cross(b - a, c - a)
    acc = np.zeros_like(vertices)
    for i in range(3):
        np.add.at(acc, faces[:, i], weighted)
    length = np.linalg.norm(acc, axis=1, keepdims=True)
    fallback = np.tile([0.0, 0.0, 1.0], (len(vertices), 1))
    return np.where(length > 0, acc / np.where(length > 0, length, 1.0), fallback)


def directed_edges(faces: np.ndarray) -> np.ndarray:
    return np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])


def is_watertight(faces: np.ndarray) -> bool:
    """Every edge shared by exactly two faces with opposite directions."""
    if len(faces) == 0:
        return False
    edges = directed_edges(np.asarray(faces, dtype=np.int64))
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts != 1):
        return False
    forward = {(int(a), int(b)) for a, b in uniq}
    return all((b, a) in forward for a, b in forward)


def euler_characteristic(mesh: TriMesh) -> int:
    used = np.unique(mesh.faces)
    edges = np.sort(directed_edges(mesh.faces), axis=1)
    n_edges = len(np.unique(edges, axis=0))
    return int(len(used) - n_edges + len(mesh.faces))


def sample_surface(mesh: TriMesh, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Area-uniform surface samples by cumulative face-area inversion.
    Returns (points [n,3], face index [n], barycentrics [n,3]).
    """
    if mesh.is_empty:
        raise MeshError("Cannot sample an empty mesh")
    areas = face_areas(mesh.vertices, mesh.faces)
    cdf = np.cumsum(areas)
    picks = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    picks = np.minimum(picks, len(areas) - 1)
    r1, r2 = rng.random(n), rng.random(n)
    s = np.sqrt(r1)
    bary = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=1)
    tri = mesh.vertices[mesh.faces[picks]]
    return np.einsum("nk,nkd->nd", bary, tri), picks, bary


def closest_barycentric(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    Barycentric coordinates of the closest point on triangle (a,b,c) to p.
    All arguments broadcast over leading axes (last axis xyz).
    Region tests follow Ericson, Real-Time Collision Detection, 5.1.5.
    """
    ab, ac, ap = b - a, c - a, p - a
    bp, cp = p - b, p - c
    d1, d2 = (ab * ap).sum(-1), (ac * ap).sum(-1)
    d3, d4 = (ab * bp).sum(-1), (ac * bp).sum(-1)
    d5, d6 = (ab * cp).sum(-1), (ac * cp).sum(-1)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def _safe(num, den):
        return num / np.where(den != 0, den, 1.0)

    t_ab = _safe(d1, d1 - d3)
    t_ac = _safe(d2, d2 - d6)
    t_bc = _safe(d4 - d3, (d4 - d3) + (d5 - d6))
    denom = va + vb + vc
    v_in = _safe(vb, denom)
    w_in = _safe(vc, denom)

    zero, one = np.zeros_like(d1), np.ones_like(d1)
    conditions = [
        (d1 <= 0) & (d2 <= 0),
        (d3 >= 0) & (d4 <= d3),
        (vc <= 0) & (d1 >= 0) & (d3 <= 0),
        (d6 >= 0) & (d5 <= d6),
        (vb <= 0) & (d2 >= 0) & (d6 <= 0),
        (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
    ]
    u = np.select(conditions, [one, zero, 1 - t_ab, zero, 1 - t_ac, zero], 1 - v_in - w_in)
    v = np.select(conditions, [zero, one, t_ab, zero, zero, 1 - t_bc], v_in)
    w = np.select(conditions, [zero, zero, zero, one, t_ac, t_bc], w_in)
    bary = np.clip(np.stack([u, v, w], axis=-1), 0.0, 1.0)
    return bary / bary.sum(-1, keepdims=True)


def solid_angles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Signed solid angle of each triangle seen from p (Van Oosterom and Strackee)."""
    ra, rb, rc = a - p, b - p, c - p
    la, lb, lc = (np.linalg.norm(r, axis=-1) for r in (ra, rb, rc))
    num = (ra * np.cross(rb, rc)).sum(-1)
    den = (la * lb * lc + (ra * rb).sum(-1) * lc
           + (ra * rc).sum(-1) * lb + (rb * rc).sum(-1) * la)
    return 2.0 * np.arctan2(num, den)


class MeshQuery:
    """Point queries against a fixed closed triangle mesh."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, warn: bool = True) -> None:
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if len(faces) == 0:
            raise MeshError("MeshQuery needs at least one face")
        areas = face_areas(vertices, faces)
        keep = areas > DEGENERATE_AREA
        if not keep.all() and warn:
            print_warning(f"skipping {int((~keep).sum())} degenerate face(s)")
        if not keep.any():
            raise MeshError("All faces are degenerate")
        self.vertices = vertices
        self.faces = faces
        self.face_ids = np.flatnonzero(keep)
        kept = faces[keep]
        self.a = vertices[kept[:, 0]]
        self.b = vertices[kept[:, 1]]
        self.c = vertices[kept[:, 2]]
        tri = np.stack([self.a, self.b, self.c], axis=1)
        self.face_lo = tri.min(axis=1)
        self.face_hi = tri.max(axis=1)
        self._vertex_tree = cKDTree(vertices[np.unique(kept)])

    @property
    def n_faces(self) -> int:
        return len(self.face_ids)

    def _blocks(self, points: np.ndarray):
        """Groups point indices into spatial cells, with candidate faces per cell."""
        ub, _ = self._vertex_tree.query(points)
        lo, hi = points.min(axis=0), points.max(axis=0)
        cells_per_axis = max(1, min(8, int(round(len(points) ** (1 / 3) / 4))))
        span = np.where(hi > lo, hi - lo, 1.0)
        cell = np.minimum(((points - lo) / span * cells_per_axis).astype(np.int64), cells_per_axis - 1)
        key = (cell[:, 0] * cells_per_axis + cell[:, 1]) * cells_per_axis + cell[:, 2]
        order = np.argsort(key, kind="stable")
        bounds = np.flatnonzero(np.diff(key[order])) + 1
        for idx in np.split(order, bounds):
            p = points[idx]
            b_lo, b_hi = p.min(axis=0), p.max(axis=0)
            gap = np.maximum(0.0, np.maximum(self.face_lo - b_hi, b_lo - self.face_hi))
            reach = ub[idx].max()
            candidates = np.flatnonzero((gap ** 2).sum(axis=1) <= reach ** 2 * (1 + 1e-12) + 1e-30)
            yield idx, candidates

    def closest(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Returns (distance [P], face index [P] into the original face list,
        barycentrics [P,3], closest points [P,3]). Ties go to the lowest face index.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        P = len(points)
        dist = np.empty(P)
        face = np.empty(P, dtype=np.int64)
        bary = np.empty((P, 3))
        closest = np.empty((P, 3))
        for idx, cand in self._blocks(points):
            a, b, c = self.a[cand], self.b[cand], self.c[cand]
            rows = max(1, PAIR_BLOCK // max(1, len(cand)))
            for s in range(0, len(idx), rows):
                sub = idx[s:s + rows]
                p = points[sub][:, None, :]
                bc = closest_barycentric(p, a[None], b[None], c[None])
                q = bc[..., 0:1] * a[None] + bc[..., 1:2] * b[None] + bc[..., 2:3] * c[None]
                d = np.linalg.norm(p - q, axis=-1)
                best = np.argmin(d, axis=1)
                r = np.arange(len(sub))
                dist[sub] = d[r, best]
                face[sub] = self.face_ids[cand[best]]
                bary[sub] = bc[r, best]
                closest[sub] = q[r, best]
        return dist, face, bary, closest

    def winding_number(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        out = np.empty(len(points))
        rows = max(1, PAIR_BLOCK // self.n_faces)
        for s in range(0, len(points), rows):
            p = points[s:s + rows][:, None, :]
            out[s:s + rows] = solid_angles(p, self.a[None], self.b[None], self.c[None]).sum(axis=1) / (4.0 * math.pi)
        return out

    def inside(self, points: np.ndarray) -> np.ndarray:
        return self.winding_number(points) > 0.5

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Exact distance to the surface, negative inside."""
        dist, _, _, _ = self.closest(points)
        return np.where(self.inside(points), -dist, dist)

    def nearest_face(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        _, face, bary, _ = self.closest(points)
        return face, bary


def write_obj(path: str, mesh: TriMesh) -> None:
    """OBJ with optional per-vertex colour appended to each `v` line."""
    with open(path, "w") as op:
        op.write(f"# {len(mesh.vertices)} vertices, {len(mesh.faces)} faces\n")
        colors = mesh.vertex_colors
        for i, v in enumerate(mesh.vertices):
            line = f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}"
            if colors is not None:
                line += f" {colors[i, 0]:.6f} {colors[i, 1]:.6f} {colors[i, 2]:.6f}"
            op.write(line + "\n")
        for f in mesh.faces + 1:
            op.write(f"f {f[0]} {f[1]} {f[2]}\n")


def read_obj(path: str) -> TriMesh:
    verts, colors, faces = [], [], []
    with open(path, "r") as ip:
        for line_no, line in enumerate(ip, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                values = [float(t) for t in parts[1:]]
                verts.append(values[:3])
                if len(values) >= 6:
                    colors.append(values[3:6])
            elif parts[0] == "f":
                idx = [int(t.split("/")[0]) for t in parts[1:]]
                if len(idx) != 3:
                    raise MeshError(f"{path}:{line_no}: only triangular faces are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    mesh = TriMesh(np.array(verts).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))
    if colors and len(colors) == len(verts):
        mesh.vertex_colors = np.array(colors)
    if len(mesh.faces) and (mesh.faces.min() < 0 or mesh.faces.max() >= len(mesh.vertices)):
        raise MeshError(f"{path}: face index out of range")
    return mesh


def write_ply(path: str, mesh: TriMesh) -> None:
    """Binary little-endian PLY: float32 xyz + uchar rgb per vertex, uchar-count int32 faces."""
    colors = mesh.vertex_colors if mesh.vertex_colors is not None else np.full((len(mesh.vertices), 3), 0.5)
    rgb = np.clip(np.round(colors * 255.0), 0, 255).astype(np.uint8)
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(mesh.vertices)}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        f"element face {len(mesh.faces)}\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    vdtype = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)])
    vrec = np.empty(len(mesh.vertices), dtype=vdtype)
    vrec["xyz"] = mesh.vertices
    vrec["rgb"] = rgb
    fdtype = np.dtype([("n", "u1"), ("idx", "<i4", 3)])
    frec = np.empty(len(mesh.faces), dtype=fdtype)
    frec["n"] = 3
    frec["idx"] = mesh.faces
    with open(path, "wb") as op:
        op.write(header.encode("ascii"))
        op.write(vrec.tobytes())
        op.write(frec.tobytes())


def read_ply(path: str) -> TriMesh:
    with open(path, "rb") as ip:
        raw = ip.read()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply\n") or end < 0:
        raise MeshError(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii").splitlines()
    if "format binary_little_endian 1.0" not in header:
        raise MeshError(f"{path}: only binary little-endian PLY is supported")
    counts = {ln.split()[1]: int(ln.split()[2]) for ln in header if ln.startswith("element")}
    body = raw[end + len(b"end_header\n"):]
    vdtype = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)])
    fdtype = np.dtype([("n", "u1"), ("idx", "<i4", 3)])
    nv, nf = counts.get("vertex", 0), counts.get("face", 0)
    vrec = np.frombuffer(body, dtype=vdtype, count=nv)
    frec = np.frombuffer(body, dtype=fdtype, count=nf, offset=nv * vdtype.itemsize)
    return TriMesh(vrec["xyz"].astype(np.float64), frec["idx"].astype(np.int64),
                   vertex_colors=vrec["rgb"].astype(np.float64) / 255.0)


def uv_sphere(radius: float = 1.0, n_lat: int = 24, n_lon: int = 48) -> TriMesh:
    """Closed, outward-wound latitude/longitude sphere."""
    verts = [[0.0, radius, 0.0]]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            verts.append([radius * math.sin(theta) * math.cos(phi), radius * math.cos(theta),
                          -radius * math.sin(theta) * math.sin(phi)])
    verts.append([0.0, -radius, 0.0])
    bottom = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    for j in range(n_lon):
        faces.append([bottom, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    return TriMesh(np.array(verts), np.array(faces))
