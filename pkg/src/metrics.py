"""
Reconstruction metrics: Chamfer and point-to-surface distance in centimetres
(1 box unit = 1 m), six-view normal-image L2 and PSNR of colour renders.
"""
import json
import math
import os

import numpy as np
import pandas as pd

from dataclasses import asdict, dataclass, field
from scipy.spatial import cKDTree
from tabulate import tabulate
from typing import Dict, Union

from errors import DimensionError, MeshError
from mesh_geometry import MeshQuery, TriMesh, sample_surface
from rasterizer import VIEW_NAMES, make_view, rasterize

CM_PER_UNIT = 100.0
PSNR_CAP_DB = 99.0


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean of nearest-neighbour distances, in cm."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise MeshError("chamfer needs two non-empty point sets")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean())) * CM_PER_UNIT


def p2s(points: np.ndarray, mesh: TriMesh) -> float:
    """Mean exact point-to-triangle distance from points to the mesh surface, in cm."""
    if mesh.is_empty:
        raise MeshError("p2s needs a non-empty mesh")
    dist, _, _, _ = MeshQuery(mesh.vertices, mesh.faces).closest(points)
    return float(dist.mean()) * CM_PER_UNIT


def normal_error(normal_a: np.ndarray, mask_a: np.ndarray, normal_b: np.ndarray, mask_b: np.ndarray) -> float:
    """Mean squared normal difference over the union of both masks; background normals are zero."""
    union = mask_a | mask_b
    if not union.any():
        return 0.0
    diff = normal_a[union] - normal_b[union]
    return float((diff * diff).sum(axis=1).mean())


def normal_metric(mesh_a: TriMesh, mesh_b: TriMesh, resolution: int = 256) -> Dict[str, float]:
    """Per-view normal L2 for the six canonical views plus their average."""
    out = {}
    for name in VIEW_NAMES:
        view = make_view(name, resolution)
        ra, rb = rasterize(mesh_a, view), rasterize(mesh_b, view)
        out[name] = normal_error(ra.normal, ra.mask, rb.normal, rb.mask)
    out["average"] = float(np.mean([out[name] for name in VIEW_NAMES]))
    return out


def psnr(img_a: np.ndarray, img_b: np.ndarray) -> float:
    img_a = np.asarray(img_a, dtype=np.float64)
    img_b = np.asarray(img_b, dtype=np.float64)
    if img_a.shape != img_b.shape:
        raise DimensionError(f"psnr shapes disagree: {img_a.shape} vs {img_b.shape}")
    mse = float(np.mean((img_a - img_b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def color_psnr(mesh_a: TriMesh, mesh_b: TriMesh, resolution: int = 256) -> Dict[str, float]:
    out = {}
    for name in VIEW_NAMES:
        view = make_view(name, resolution)
        out[name] = psnr(rasterize(mesh_a, view).color, rasterize(mesh_b, view).color)
    out["average"] = float(np.mean([out[name] for name in VIEW_NAMES]))
    return out


@dataclass
class EvaluationReport:
    chamfer_cm: float
    p2s_cm: float
    normals: Dict[str, float] = field(default_factory=dict)
    normals_front: float = 0.0
    psnr_db: float = 0.0
    psnr_views: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def write_json(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w") as op:
            json.dump(self.to_dict(), op, indent=2)

    @classmethod
    def read_json(cls, path: Union[str, os.PathLike]) -> "EvaluationReport":
        with open(path, "r") as ip:
            return cls(**json.load(ip))

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{"Chamfer (cm)": self.chamfer_cm, "P2S (cm)": self.p2s_cm,
                              "Normals": self.normals_front, "PSNR (dB)": self.psnr_db}])

    def views_frame(self) -> pd.DataFrame:
        rows = {"Normal L2": self.normals, "PSNR (dB)": self.psnr_views}
        return pd.DataFrame.from_dict(rows, orient="index")[list(VIEW_NAMES) + ["average"]]

    def as_table(self) -> str:
        return "\n".join([
            tabulate(self.summary_frame(), headers="keys", tablefmt="psql", showindex=False, floatfmt=".4f"),
            tabulate(self.views_frame(), headers="keys", tablefmt="psql", floatfmt=".4f"),
        ])


def evaluate_meshes(pred: TriMesh, gt: TriMesh, samples: int, render_res: int,
                    rng: np.random.Generator) -> EvaluationReport:
    if pred.is_empty or gt.is_empty:
        raise MeshError("evaluation needs two non-empty meshes")
    # both meshes draw from the same stream, so identical meshes give identical samples
    seed = int(rng.integers(2 ** 63))
    pred_pts, _, _ = sample_surface(pred, samples, np.random.default_rng(seed))
    gt_pts, _, _ = sample_surface(gt, samples, np.random.default_rng(seed))
    normals = normal_metric(pred, gt, render_res)
    colors = color_psnr(pred, gt, render_res)
    return EvaluationReport(
        chamfer_cm=chamfer(pred_pts, gt_pts),
        p2s_cm=p2s(gt_pts, pred),
        normals=normals,
        normals_front=normals["front"],
        psnr_db=colors["front"],
        psnr_views=colors,
    )
