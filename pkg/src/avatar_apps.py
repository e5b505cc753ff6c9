"""
Feature rigs: the per-vertex prior-query table of one subject, attached to
its posed prior. Animation re-poses the prior and carries the table over by
vertex identity; try-on swaps the table rows of selected body parts between
two subjects. Both reconstruct with the prior-enhanced query alone.
"""
import json
import os

import numpy as np

from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Union

from autodiff import Tensor, load_tensor, no_grad, save_tensor
from avatar_model import AvatarModel, PriorOnlyField
from body_prior import PART_NAMES, BodyParams, PriorMesh, parse_part_ids
from errors import ConfigError, MeshError
from implicit_surface import ISO_LEVEL, reconstruct_mesh
from mesh_geometry import TriMesh
from synthetic_data import place_prior, template_for

RIG_FORMAT = 1
RIG_FEATURES = "vertex_features.f64"
RIG_MANIFEST = "rig.json"


@dataclass
class FeatureRig:
    mesh: PriorMesh
    vertex_features: np.ndarray
    params: BodyParams
    center: np.ndarray
    scale: float
    prior_budget: int

    def __post_init__(self):
        self.vertex_features = np.asarray(self.vertex_features, dtype=np.float64)
        n = len(self.mesh.vertices)
        if self.vertex_features.ndim != 2 or self.vertex_features.shape[0] != n:
            raise MeshError(f"vertex table of shape {self.vertex_features.shape} does not fit a {n}-vertex prior")
        labels = self.mesh.part_labels
        if len(labels) != n or labels.min() < 0 or labels.max() >= len(PART_NAMES):
            raise MeshError("part labels must cover every prior vertex")

    @property
    def part_labels(self) -> np.ndarray:
        return self.mesh.part_labels


def rig_from_sample(model: AvatarModel, sample) -> FeatureRig:
    """
    Encodes the sample and reads the vertex table off the prior-query half
    of its tri-plane. The prior is re-posed from the template so later
    retargets reproduce it exactly.
    """
    if not model.uses_pq:
        raise ConfigError(f"the {model.mode} model has no prior-query pathway to rig")
    template = template_for(sample.prior_budget)
    mesh = place_prior(template, sample.params, sample.center, sample.scale)
    if not np.array_equal(mesh.faces, sample.prior.faces):
        raise MeshError("sample prior does not share the template topology")
    with no_grad():
        state = model.encode_sample(sample.bundle, mesh)
    return FeatureRig(mesh, state.vertex_features.numpy().copy(), sample.params, sample.center.copy(),
                      float(sample.scale), int(sample.prior_budget))


def retarget(rig: FeatureRig, theta_new: np.ndarray) -> FeatureRig:
    """Same shape, new pose; the vertex table moves with its vertices unchanged."""
    params = BodyParams(beta=rig.params.beta.copy(), theta=np.asarray(theta_new, dtype=np.float64))
    if np.array_equal(params.theta, rig.params.theta):
        return replace(rig, params=params, vertex_features=rig.vertex_features.copy())
    template = template_for(rig.prior_budget)
    if len(template.vertices) != len(rig.vertex_features) or not np.array_equal(template.faces, rig.mesh.faces):
        raise MeshError("rig topology does not match the body template")
    mesh = place_prior(template, params, rig.center, rig.scale)
    return replace(rig, mesh=mesh, params=params, vertex_features=rig.vertex_features.copy())


def _part_ids(parts: Iterable[Union[int, str]]) -> List[int]:
    ids, names = [], []
    for p in parts:
        if isinstance(p, str):
            names.append(p)
        elif 0 <= int(p) < len(PART_NAMES):
            ids.append(int(p))
        else:
            raise ConfigError(f"Unknown body part id {p}; ids run 0..{len(PART_NAMES) - 1}")
    return sorted(set(ids) | set(parse_part_ids(names)))


def try_on(target: FeatureRig, source: FeatureRig, parts: Iterable[Union[int, str]]) -> FeatureRig:
    """Rows of the target table whose vertex lies on one of `parts` are taken from the source."""
    ids = _part_ids(parts)
    if target.vertex_features.shape != source.vertex_features.shape \
            or not np.array_equal(target.part_labels, source.part_labels):
        raise MeshError("try-on needs two rigs on the same template and part labelling")
    features = target.vertex_features.copy()
    rows = np.isin(target.part_labels, ids)
    features[rows] = source.vertex_features[rows]
    return replace(target, vertex_features=features)


def rig_field(model: AvatarModel, rig: FeatureRig) -> PriorOnlyField:
    return PriorOnlyField(model, rig.mesh, Tensor(rig.vertex_features))


def reconstruct_rig(model: AvatarModel, rig: FeatureRig, resolution: int, chunk_size: Optional[int] = None,
                    iso: float = ISO_LEVEL) -> TriMesh:
    return reconstruct_mesh(rig_field(model, rig), resolution, chunk_size, iso)


def save_rig(out_dir: Union[str, os.PathLike], rig: FeatureRig) -> str:
    os.makedirs(out_dir, exist_ok=True)
    save_tensor(os.path.join(out_dir, RIG_FEATURES), rig.vertex_features)
    doc = {
        "format": RIG_FORMAT,
        "part_names": list(PART_NAMES),
        "part_labels": rig.part_labels.astype(int).tolist(),
        "params": rig.params.to_dict(),
        "center": rig.center.tolist(),
        "scale": rig.scale,
        "prior_budget": rig.prior_budget,
    }
    path = os.path.join(out_dir, RIG_MANIFEST)
    with open(path, "w") as op:
        json.dump(doc, op, indent=2)
    return path


def load_rig(rig_dir: Union[str, os.PathLike]) -> FeatureRig:
    """The prior mesh is re-posed from the template, not stored."""
    path = os.path.join(rig_dir, RIG_MANIFEST)
    with open(path, "r") as ip:
        doc = json.load(ip)
    if doc.get("format") != RIG_FORMAT:
        raise ConfigError(f"{path}: unsupported rig format")
    params = BodyParams.from_dict(doc["params"])
    center = np.array(doc["center"], dtype=np.float64)
    mesh = place_prior(template_for(int(doc["prior_budget"])), params, center, float(doc["scale"]))
    if not np.array_equal(mesh.part_labels, np.array(doc["part_labels"])):
        raise MeshError(f"{path}: part labels do not match the body template")
    return FeatureRig(mesh, load_tensor(os.path.join(rig_dir, RIG_FEATURES)), params, center,
                      float(doc["scale"]), int(doc["prior_budget"]))
