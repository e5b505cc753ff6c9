"""
Procedural clothed-body samples and the on-disk dataset layout.

A sample is a posed body prior plus "clothing": every capsule inflated by a
per-part offset and, on hard samples, a flared skirt volume. The ground-truth
surface is the marching-cubes mesh of that union; occupancy labels come from
the analytic field away from the surface and from the mesh winding number
inside a thin band around it, so labels always agree with the mesh.

Everything is placed into the unit box by (x - center) * scale with
scale <= 1.
"""
import functools
import json
import os

import numpy as np

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from tqdm import tqdm
from typing import Dict, List, Optional, Sequence, Union

from body_prior import (CAPSULES, NUM_JOINTS, PART_INDEX, PART_NAMES, BodyParams, PriorConfig, PriorMesh,
                        build_template, capsule_surface_distances, extract_field_surface, load_prior,
                        normalize_to_box, pose_mesh, posed_capsules, random_params, save_prior)
from encoder import InputBundle
from errors import ConfigError
from image_io import load_bundle, save_bundle
from mesh_geometry import MeshQuery, TriMesh, directed_edges, read_obj, vertex_normals, write_obj
from rasterizer import render_bundle
from run_config import rng_stream
from utils.settings import Settings

DIFFICULTY_LEVELS = {"rest": 0.0, "easy": 0.25, "medium": 0.5, "hard": 1.0}
SKIRT_DIFFICULTY = 1.0
GT_SPACING = 0.01
# band half-width around the surface, in units of the longest gt edge
BAND_EDGES = 1.5
_CLOTHED_PARTS = ("torso", "l_upper_arm", "r_upper_arm", "l_lower_arm", "r_lower_arm",
                  "l_upper_leg", "r_upper_leg", "l_lower_leg", "r_lower_leg")


def difficulty_value(difficulty: Union[str, float]) -> float:
    if isinstance(difficulty, str):
        if difficulty in DIFFICULTY_LEVELS:
            return DIFFICULTY_LEVELS[difficulty]
        try:
            difficulty = float(difficulty)
        except ValueError:
            raise ConfigError(f"Unknown difficulty {difficulty!r}; expected one of "
                              f"{', '.join(DIFFICULTY_LEVELS)} or a number in [0, 1]") from None
    if not 0.0 <= difficulty <= 1.0:
        raise ConfigError(f"difficulty must lie in [0, 1], got {difficulty}")
    return float(difficulty)


@dataclass
class Skirt:
    """Flared cone around the vertical axis through (cx, cz), from y_top down to y_bottom."""
    cx: float
    cz: float
    y_top: float
    y_bottom: float
    r_top: float
    r_bottom: float

    def sdf(self, p: np.ndarray) -> np.ndarray:
        height = self.y_top - self.y_bottom
        h = np.clip((self.y_top - p[:, 1]) / height, 0.0, 1.0)
        radius = self.r_top + (self.r_bottom - self.r_top) * h
        radial = np.hypot(p[:, 0] - self.cx, p[:, 2] - self.cz)
        slope = np.cos(np.arctan2(self.r_bottom - self.r_top, height))
        d_side = (radial - radius) * slope
        d_cap = np.maximum(p[:, 1] - self.y_top, self.y_bottom - p[:, 1])
        outside = np.hypot(np.maximum(d_side, 0.0), np.maximum(d_cap, 0.0))
        return np.where((d_side < 0) & (d_cap < 0), np.maximum(d_side, d_cap), outside)


@dataclass
class Clothing:
    inflation: np.ndarray
    part_colors: np.ndarray
    stripe_period: float
    stripe_strength: float
    skirt: Optional[Skirt] = None
    skirt_color: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def is_bare(self) -> bool:
        return self.skirt is None and not np.any(self.inflation)

    def to_dict(self) -> Dict[str, object]:
        return {
            "inflation": self.inflation.tolist(),
            "part_colors": self.part_colors.tolist(),
            "stripe_period": self.stripe_period,
            "stripe_strength": self.stripe_strength,
            "skirt": None if self.skirt is None else vars(self.skirt).copy(),
            "skirt_color": self.skirt_color.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, object]) -> "Clothing":
        return cls(np.array(doc["inflation"], dtype=np.float64), np.array(doc["part_colors"], dtype=np.float64),
                   float(doc["stripe_period"]), float(doc["stripe_strength"]),
                   None if doc["skirt"] is None else Skirt(**doc["skirt"]),
                   np.array(doc["skirt_color"], dtype=np.float64))


def random_clothing(rng: np.random.Generator, difficulty: float, params: BodyParams) -> Clothing:
    inflation = np.zeros(len(PART_NAMES))
    for name in _CLOTHED_PARTS:
        inflation[PART_INDEX[name]] = rng.uniform(0.2, 1.0) * 0.02 * difficulty
    colors = rng.uniform(0.15, 0.9, (len(PART_NAMES), 3))
    period = float(rng.uniform(0.03, 0.08))
    strength = float(rng.uniform(0.1, 0.35))
    skirt = None
    skirt_color = rng.uniform(0.15, 0.9, 3)
    if difficulty >= SKIRT_DIFFICULTY and rng.random() < 0.5:
        starts, ends, _ = posed_capsules(params)
        pelvis = 0.5 * (starts[0] + ends[0])
        skirt = Skirt(cx=float(pelvis[0]), cz=float(pelvis[2]), y_top=float(pelvis[1] + 0.04),
                      y_bottom=float(pelvis[1] - rng.uniform(0.18, 0.3)),
                      r_top=float(rng.uniform(0.11, 0.13)), r_bottom=float(rng.uniform(0.16, 0.22)))
    return Clothing(inflation, colors, period, strength, skirt, skirt_color)


@dataclass
class TrainingSample:
    sample_id: int
    seed: int
    difficulty: float
    params: BodyParams
    clothing: Clothing
    center: np.ndarray
    scale: float
    bundle: InputBundle
    gt_mesh: TriMesh
    prior: PriorMesh
    band: float
    prior_budget: int = 1000

    def __post_init__(self):
        self._gt_query: Optional[MeshQuery] = None

    @property
    def gt_query(self) -> MeshQuery:
        if self._gt_query is None:
            self._gt_query = MeshQuery(self.gt_mesh.vertices, self.gt_mesh.faces)
        return self._gt_query

    def _world(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) / self.scale + self.center

    def analytic_sdf(self, points: np.ndarray) -> np.ndarray:
        """Clothed-body signed distance in box units (negative inside)."""
        return clothed_sdf(self._world(points), self.params, self.clothing) * self.scale

    def gt_occupancy(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        sdf = self.analytic_sdf(points)
        labels = (sdf < 0).astype(np.float64)
        near = np.abs(sdf) <= self.band
        if near.any():
            labels[near] = self.gt_query.inside(points[near]).astype(np.float64)
        return labels

    def gt_color(self, points: np.ndarray) -> np.ndarray:
        return clothed_color(self._world(points), self.params, self.clothing)

    def meta(self) -> Dict[str, object]:
        return {
            "sample_id": self.sample_id,
            "seed": self.seed,
            "difficulty": self.difficulty,
            "params": self.params.to_dict(),
            "clothing": self.clothing.to_dict(),
            "transform": {"center": self.center.tolist(), "scale": self.scale},
            "band": self.band,
            "image_res": self.bundle.resolution,
            "prior_budget": self.prior_budget,
        }


def clothed_sdf(world: np.ndarray, params: BodyParams, clothing: Clothing) -> np.ndarray:
    starts, ends, radii = posed_capsules(params)
    parts = np.array([c.part for c in CAPSULES])
    sdf = capsule_surface_distances(world, starts=starts, ends=ends,
                                    radii=radii + clothing.inflation[parts]).min(axis=1)
    if clothing.skirt is not None:
        sdf = np.minimum(sdf, clothing.skirt.sdf(world))
    return sdf


def clothed_color(world: np.ndarray, params: BodyParams, clothing: Clothing) -> np.ndarray:
    """Part colour of the nearest (inflated) capsule or the skirt, darkened on alternate horizontal stripes."""
    starts, ends, radii = posed_capsules(params)
    parts = np.array([c.part for c in CAPSULES])
    dist = capsule_surface_distances(world, starts=starts, ends=ends, radii=radii + clothing.inflation[parts])
    base = clothing.part_colors[parts[np.argmin(dist, axis=1)]]
    if clothing.skirt is not None:
        on_skirt = clothing.skirt.sdf(world) < dist.min(axis=1)
        base = np.where(on_skirt[:, None], clothing.skirt_color, base)
    stripe = np.floor(world[:, 1] / clothing.stripe_period) % 2 == 1
    return np.clip(base * (1.0 - clothing.stripe_strength * stripe[:, None]), 0.0, 1.0)


@functools.lru_cache(maxsize=4)
def template_for(vertices: int) -> PriorMesh:
    return build_template(PriorConfig(joints=NUM_JOINTS, vertices=vertices))


def place_prior(template: PriorMesh, params: BodyParams, center: np.ndarray, scale: float) -> PriorMesh:
    """Posed prior moved into the sample's box frame."""
    posed = pose_mesh(template, params)
    return posed.with_vertices((posed.vertices - center) * scale, (posed.joints - center) * scale)


def _longest_edge(mesh: TriMesh) -> float:
    e = directed_edges(mesh.faces)
    return float(np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1).max())


def synth_sample(seed: int, difficulty: Union[str, float], sample_id: int = 0, image_res: int = 64,
                 prior_vertices: int = 1000, spacing: float = GT_SPACING) -> TrainingSample:
    """Deterministic in (seed, sample_id, difficulty, sizes)."""
    level = difficulty_value(difficulty)
    rng = rng_stream(seed, "sample", sample_id)
    params = random_params(rng, level)
    clothing = random_clothing(rng, level, params)
    template = template_for(prior_vertices)
    posed = pose_mesh(template, params)

    if clothing.is_bare:
        world_mesh = posed.as_trimesh()
    else:
        starts, ends, radii = posed_capsules(params)
        reach = radii.max() + clothing.inflation.max()
        if clothing.skirt is not None:
            reach += clothing.skirt.r_bottom + 0.3
        lo = np.minimum(starts, ends).min(axis=0) - reach
        hi = np.maximum(starts, ends).max(axis=0) + reach
        world_mesh = extract_field_surface(lambda p: clothed_sdf(p, params, clothing), lo, hi, spacing)

    center, scale = normalize_to_box(np.concatenate([world_mesh.vertices, posed.vertices]))
    prior = place_prior(template, params, center, scale)
    vertices = (world_mesh.vertices - center) * scale
    gt = TriMesh(vertices, world_mesh.faces, vertex_colors=clothed_color(world_mesh.vertices, params, clothing),
                 vertex_normals=vertex_normals(vertices, world_mesh.faces))
    return TrainingSample(sample_id, seed, level, params, clothing, center, scale, render_bundle(gt, image_res),
                          gt, prior, BAND_EDGES * _longest_edge(gt), prior_vertices)


SAMPLE_DIR = "sample_{:05d}"


def save_sample(root: Union[str, os.PathLike], sample: TrainingSample) -> str:
    out = os.path.join(root, SAMPLE_DIR.format(sample.sample_id))
    os.makedirs(out, exist_ok=True)
    save_bundle(out, sample.bundle)
    write_obj(os.path.join(out, "mesh.obj"), sample.gt_mesh)
    save_prior(os.path.join(out, "prior.obj"), sample.prior, sample.params)
    with open(os.path.join(out, "meta.json"), "w") as op:
        json.dump(sample.meta(), op, indent=2)
    return out


def load_sample(sample_dir: Union[str, os.PathLike]) -> TrainingSample:
    with open(os.path.join(sample_dir, "meta.json"), "r") as ip:
        meta = json.load(ip)
    gt = read_obj(os.path.join(sample_dir, "mesh.obj"))
    gt.vertex_normals = vertex_normals(gt.vertices, gt.faces)
    prior, _ = load_prior(os.path.join(sample_dir, "prior.obj"))
    return TrainingSample(
        int(meta["sample_id"]), int(meta["seed"]), float(meta["difficulty"]), BodyParams.from_dict(meta["params"]),
        Clothing.from_dict(meta["clothing"]), np.array(meta["transform"]["center"], dtype=np.float64),
        float(meta["transform"]["scale"]), load_bundle(sample_dir), gt, prior, float(meta["band"]),
        int(meta["prior_budget"]),
    )


def list_samples(root: Union[str, os.PathLike]) -> List[str]:
    if not os.path.isdir(root):
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    names = sorted(n for n in os.listdir(root) if n.startswith("sample_")
                   and os.path.isfile(os.path.join(root, n, "meta.json")))
    return [os.path.join(root, n) for n in names]


def load_dataset(root: Union[str, os.PathLike]) -> List[TrainingSample]:
    paths = list_samples(root)
    if not paths:
        raise ConfigError(f"no samples found under {root}")
    return [load_sample(p) for p in paths]


def _generate_one(job) -> str:
    root, seed, difficulty, sample_id, image_res, prior_vertices = job
    return save_sample(root, synth_sample(seed, difficulty, sample_id, image_res, prior_vertices))


def generate_dataset(root: Union[str, os.PathLike], count: int, difficulty: Union[str, float], seed: int,
                     image_res: int = 64, prior_vertices: int = 1000, ids: Optional[Sequence[int]] = None) -> List[str]:
    """Writes `count` samples; each sample depends only on (seed, id), whatever the worker count."""
    difficulty_value(difficulty)
    os.makedirs(root, exist_ok=True)
    ids = list(range(count)) if ids is None else list(ids)
    jobs = [(root, seed, difficulty, i, image_res, prior_vertices) for i in ids]
    workers = Settings.get_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(tqdm(pool.map(_generate_one, jobs), total=len(jobs), desc="gen-data",
                             disable=not Settings.is_verbose()))
    return [_generate_one(job) for job in tqdm(jobs, desc="gen-data", disable=not Settings.is_verbose())]
