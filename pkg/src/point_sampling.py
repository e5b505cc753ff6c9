"""
Training point sets: G_o for occupancy (surface-biased plus uniform in the
box) and G_c for colour (on the surface, jittered along the normal).
"""
import numpy as np

from dataclasses import dataclass
from typing import List

from feature_query import PriorGeometry, prior_geometry
from mesh_geometry import face_normals, sample_surface
from utils.utils import print_warning

POINTS_PER_SET = 2048
NEAR_TO_UNIFORM = 15
SIGMA_OCCUPANCY = 0.05
SIGMA_COLOR = 0.001
BALANCE = (0.25, 0.75)
BALANCE_TRIES = 5


@dataclass
class PointBatch:
    occ_points: np.ndarray
    occ_labels: np.ndarray
    color_points: np.ndarray
    color_labels: np.ndarray
    geometry: PriorGeometry

    @property
    def points(self) -> np.ndarray:
        """Occupancy rows first, then colour rows; `geometry` follows the same order."""
        return np.concatenate([self.occ_points, self.color_points])

    @property
    def n_occupancy(self) -> int:
        return len(self.occ_points)


def split_counts(n: int):
    near = n * NEAR_TO_UNIFORM // (NEAR_TO_UNIFORM + 1)
    return near, n - near


def sample_occupancy(sample, n: int, rng: np.random.Generator, sigma: float = SIGMA_OCCUPANCY):
    """
    (points [n,3], labels [n]): 15 of every 16 points are surface samples with
    isotropic Gaussian noise, the rest uniform in [-0.5, 0.5]^3. A draw whose
    positive fraction leaves BALANCE is redrawn a few times.
    """
    n_near, n_uniform = split_counts(n)
    for attempt in range(BALANCE_TRIES):
        surface, _, _ = sample_surface(sample.gt_mesh, n_near, rng)
        near = surface + rng.normal(0.0, sigma, surface.shape)
        uniform = rng.uniform(-0.5, 0.5, (n_uniform, 3))
        points = np.concatenate([near, uniform])
        labels = sample.gt_occupancy(points)
        if n < 16 or BALANCE[0] <= labels.mean() <= BALANCE[1]:
            return points, labels
        print_warning(f"occupancy batch has {labels.mean():.2f} positives, redrawing (attempt {attempt + 1})")
    return points, labels


def sample_color(sample, n: int, rng: np.random.Generator, sigma: float = SIGMA_COLOR):
    """(points [n,3], colours [n,3]); colour is read at the surface point before the offset."""
    surface, face, _ = sample_surface(sample.gt_mesh, n, rng)
    normals = face_normals(sample.gt_mesh.vertices, sample.gt_mesh.faces)[face]
    offset = rng.normal(0.0, sigma, n) if sigma > 0 else np.zeros(n)
    return surface + normals * offset[:, None], sample.gt_color(surface)


def sample_batch(sample, n: int, rng: np.random.Generator) -> PointBatch:
    occ, occ_labels = sample_occupancy(sample, n, rng)
    color, color_labels = sample_color(sample, n, rng)
    geometry = prior_geometry(np.concatenate([occ, color]), sample.prior)
    return PointBatch(occ, occ_labels, color, color_labels, geometry)


def build_pool(sample, size: int, n: int, rng: np.random.Generator) -> List[PointBatch]:
    """`size` batches drawn in order from one generator."""
    return [sample_batch(sample, n, rng) for _ in range(size)]
