"""
Procedural articulated body used as the parametric prior M(beta, theta).

The body is a union of capsules hung on a 24-joint kinematic tree. The
template surface is extracted from the rest-pose capsule union, skinning
weights fall off with distance to each joint's capsules, and posing is
linear blend skinning over the tree. World frame: y up, +x to the body's
left, +z towards the front camera, 1 unit = 1 m; the rest body spans
roughly 0.92 m and sits inside [-0.5, 0.5]^3.
"""
import json
import os

import numpy as np

from dataclasses import dataclass, field
from scipy.spatial.transform import Rotation
from typing import Dict, List, Optional, Sequence, Tuple

from errors import ConfigError, DimensionError, MeshError
from isosurface import marching_cubes
from mesh_geometry import MeshQuery, TriMesh, is_watertight, read_obj, write_obj
from utils.utils import print_warning

JOINT_NAMES = (
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2", "l_ankle",
    "r_ankle", "spine3", "l_foot", "r_foot", "neck", "l_collar", "r_collar", "head",
    "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist", "l_hand", "r_hand",
)
JOINT_INDEX = {name: i for i, name in enumerate(JOINT_NAMES)}
PARENTS = np.array([-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21])
NUM_JOINTS = len(JOINT_NAMES)
NUM_BETAS = 10
BETA_LIMIT = 3.0

PART_NAMES = (
    "head", "torso", "l_upper_arm", "r_upper_arm", "l_lower_arm", "r_lower_arm",
    "l_upper_leg", "r_upper_leg", "l_lower_leg", "r_lower_leg", "hands", "feet",
)
PART_INDEX = {name: i for i, name in enumerate(PART_NAMES)}

BETA_NAMES = (
    "height", "girth", "arm_length", "leg_length", "torso_length",
    "head_size", "arm_girth", "leg_girth", "shoulder_width", "hip_width",
)
BETA_STEP = 0.05


def _mirror(p):
    return [-p[0], p[1], p[2]]


_L_JOINTS = {
    "l_hip": [0.085, -0.04, 0.0], "l_knee": [0.09, -0.22, 0.0], "l_ankle": [0.095, -0.40, 0.0],
    "l_foot": [0.095, -0.43, 0.05], "l_collar": [0.04, 0.24, 0.0], "l_shoulder": [0.11, 0.245, 0.0],
    "l_elbow": [0.231, 0.175, 0.0], "l_wrist": [0.335, 0.115, 0.0], "l_hand": [0.378, 0.09, 0.0],
}
_C_JOINTS = {
    "pelvis": [0.0, 0.0, 0.0], "spine1": [0.0, 0.06, 0.0], "spine2": [0.0, 0.13, 0.0],
    "spine3": [0.0, 0.19, 0.0], "neck": [0.0, 0.27, 0.0], "head": [0.0, 0.31, 0.0],
}


def _rest_joints() -> np.ndarray:
    table = dict(_C_JOINTS)
    for name, p in _L_JOINTS.items():
        table[name] = p
        table["r_" + name[2:]] = _mirror(p)
    return np.array([table[n] for n in JOINT_NAMES], dtype=np.float64)


REST_JOINTS = _rest_joints()


@dataclass(frozen=True)
class Capsule:
    owner: int
    start: Tuple[float, float, float]
    end: Tuple[float, float, float]
    radius: float
    part: int


def _capsules() -> List[Capsule]:
    J = REST_JOINTS
    tip = {
        "head_top": [0.0, 0.38, 0.0],
        "l_toe": [0.095, -0.43, 0.11],
        "l_fingers": [0.413, 0.07, 0.0],
    }
    spec = [
        ("pelvis", J[JOINT_INDEX["r_hip"]], J[JOINT_INDEX["l_hip"]], 0.07, "torso"),
        ("pelvis", J[JOINT_INDEX["pelvis"]], J[JOINT_INDEX["spine1"]], 0.075, "torso"),
        ("spine1", J[JOINT_INDEX["spine1"]], J[JOINT_INDEX["spine2"]], 0.078, "torso"),
        ("spine2", J[JOINT_INDEX["spine2"]], J[JOINT_INDEX["spine3"]], 0.082, "torso"),
        ("spine3", J[JOINT_INDEX["spine3"]], J[JOINT_INDEX["neck"]], 0.088, "torso"),
        ("neck", J[JOINT_INDEX["neck"]], J[JOINT_INDEX["head"]], 0.045, "head"),
        ("head", J[JOINT_INDEX["head"]], tip["head_top"], 0.065, "head"),
    ]
    for side, sign in (("l", 1.0), ("r", -1.0)):
        flip = np.array([sign, 1.0, 1.0])

        def j(name):
            return J[JOINT_INDEX[f"{side}_{name}"]]

        spec += [
            (f"{side}_collar", j("collar"), j("shoulder"), 0.05, "torso"),
            (f"{side}_shoulder", j("shoulder"), j("elbow"), 0.045, f"{side}_upper_arm"),
            (f"{side}_elbow", j("elbow"), j("wrist"), 0.04, f"{side}_lower_arm"),
            (f"{side}_wrist", j("wrist"), j("hand"), 0.038, "hands"),
            (f"{side}_hand", j("hand"), np.array(tip["l_fingers"]) * flip, 0.036, "hands"),
            (f"{side}_hip", j("hip"), j("knee"), 0.06, f"{side}_upper_leg"),
            (f"{side}_knee", j("knee"), j("ankle"), 0.048, f"{side}_lower_leg"),
            (f"{side}_ankle", j("ankle"), j("foot"), 0.042, "feet"),
            (f"{side}_foot", j("foot"), np.array(tip["l_toe"]) * flip, 0.04, "feet"),
        ]
    return [Capsule(JOINT_INDEX[o], tuple(map(float, a)), tuple(map(float, b)), r, PART_INDEX[p])
            for o, a, b, r, p in spec]


CAPSULES = _capsules()

# per-joint rotation magnitude limits (radians) used when sampling poses
JOINT_LIMITS = np.array([
    0.3, 0.8, 0.8, 0.3, 1.2, 1.2, 0.3, 0.4, 0.4, 0.3, 0.3, 0.3,
    0.4, 0.2, 0.2, 0.5, 1.2, 1.2, 1.4, 1.4, 0.5, 0.5, 0.3, 0.3,
])


@dataclass
class PriorConfig:
    joints: int = NUM_JOINTS
    vertices: int = 1000
    blend: float = 0.03
    max_calibration_rounds: int = 4


@dataclass
class BodyParams:
    beta: np.ndarray = field(default_factory=lambda: np.zeros(NUM_BETAS))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(3 * NUM_JOINTS))

    def __post_init__(self):
        self.beta = np.clip(np.asarray(self.beta, dtype=np.float64).reshape(-1), -BETA_LIMIT, BETA_LIMIT)
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        if self.theta.size != 3 * NUM_JOINTS:
            raise DimensionError(f"theta must hold 3*{NUM_JOINTS} values, got {self.theta.size}")
        if not np.all(np.isfinite(self.theta)) or not np.all(np.isfinite(self.beta)):
            raise ConfigError("body parameters must be finite")

    @property
    def is_rest(self) -> bool:
        return not self.beta.any() and not self.theta.any()

    def to_dict(self) -> Dict[str, List[float]]:
        return {"beta": self.beta.tolist(), "theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, doc: Dict[str, Sequence[float]]):
        return cls(beta=np.array(doc["beta"]), theta=np.array(doc["theta"]))


@dataclass
class PriorMesh:
    vertices: np.ndarray
    faces: np.ndarray
    skin_weights: np.ndarray
    part_labels: np.ndarray
    joints: np.ndarray

    def __post_init__(self):
        self._query: Optional[MeshQuery] = None

    @property
    def query(self) -> MeshQuery:
        if self._query is None:
            self._query = MeshQuery(self.vertices, self.faces)
        return self._query

    def as_trimesh(self) -> TriMesh:
        return TriMesh(self.vertices, self.faces)

    def with_vertices(self, vertices: np.ndarray, joints: np.ndarray) -> "PriorMesh":
        return PriorMesh(vertices, self.faces, self.skin_weights, self.part_labels, joints)


def capsule_distance(points: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Distance from points [P,3] to the segment start-end."""
    d = end - start
    t = np.clip(((points - start) @ d) / max(float(d @ d), 1e-30), 0.0, 1.0)
    return np.linalg.norm(points - (start + t[:, None] * d), axis=1)


def capsule_surface_distances(points: np.ndarray, capsules: Sequence[Capsule] = CAPSULES,
                              starts: Optional[np.ndarray] = None, ends: Optional[np.ndarray] = None,
                              radii: Optional[np.ndarray] = None) -> np.ndarray:
    """[P, n_capsules] signed distance to each capsule surface (negative inside)."""
    starts = np.array([c.start for c in capsules]) if starts is None else starts
    ends = np.array([c.end for c in capsules]) if ends is None else ends
    radii = np.array([c.radius for c in capsules]) if radii is None else radii
    return np.stack([capsule_distance(points, s, e) - r for s, e, r in zip(starts, ends, radii)], axis=1)


def union_sdf(points: np.ndarray, starts: np.ndarray, ends: np.ndarray, radii: np.ndarray) -> np.ndarray:
    return capsule_surface_distances(points, starts=starts, ends=ends, radii=radii).min(axis=1)


def capsule_arrays(capsules: Sequence[Capsule] = CAPSULES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (np.array([c.start for c in capsules]), np.array([c.end for c in capsules]),
            np.array([c.radius for c in capsules]))


def extract_field_surface(sdf_fn, lo: np.ndarray, hi: np.ndarray, spacing: float) -> TriMesh:
    """Marching cubes of a signed-distance callable over the box [lo, hi] padded by two cells."""
    lo = lo - 2 * spacing
    counts = np.ceil((hi + 2 * spacing - lo) / spacing).astype(int) + 1
    axes = [lo[i] + spacing * np.arange(counts[i]) for i in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    volume = -sdf_fn(grid).reshape(counts)
    vertices, faces = marching_cubes(volume, 0.0, lo, spacing)
    return TriMesh(vertices, faces)


def skinning_weights(points: np.ndarray, blend: float, capsules: Sequence[Capsule] = CAPSULES,
                     n_joints: int = NUM_JOINTS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compact-support falloff on capsule surface distance:
    w_k ~ max(0, 1 - (d_k - d_min) / blend)^2, rows normalized.
    Returns (weights [P,K], part label [P]).
    """
    dist = capsule_surface_distances(points, capsules)
    owners = np.array([c.owner for c in capsules])
    per_joint = np.full((len(points), n_joints), np.inf)
    for k in range(n_joints):
        mask = owners == k
        if mask.any():
            per_joint[:, k] = dist[:, mask].min(axis=1)
    d_min = per_joint.min(axis=1, keepdims=True)
    raw = np.maximum(0.0, 1.0 - (per_joint - d_min) / blend) ** 2
    weights = raw / raw.sum(axis=1, keepdims=True)
    parts = np.array([c.part for c in capsules])[np.argmin(dist, axis=1)]
    return weights, parts


def build_template(config: PriorConfig = PriorConfig()) -> PriorMesh:
    """Rest-pose capsule body with roughly `config.vertices` vertices."""
    if config.joints != NUM_JOINTS:
        raise ConfigError(f"the procedural skeleton has {NUM_JOINTS} joints, got K={config.joints}")
    if config.vertices < 50:
        raise ConfigError("vertex budget must be at least 50")
    starts, ends, radii = capsule_arrays()
    lo = np.minimum(starts, ends).min(axis=0) - radii.max()
    hi = np.maximum(starts, ends).max(axis=0) + radii.max()

    def sdf(p):
        return union_sdf(p, starts, ends, radii)

    # vertex count scales with 1/spacing^2; iterate to the budget
    spacing = 0.025 * np.sqrt(1000.0 / config.vertices)
    mesh = extract_field_surface(sdf, lo, hi, spacing)
    for _ in range(config.max_calibration_rounds):
        ratio = len(mesh.vertices) / config.vertices
        if abs(ratio - 1.0) < 0.08:
            break
        spacing *= np.sqrt(ratio)
        mesh = extract_field_surface(sdf, lo, hi, spacing)

    if not is_watertight(mesh.faces):
        raise MeshError("template weld is not a closed 2-manifold")
    weights, parts = skinning_weights(mesh.vertices, config.blend)
    return PriorMesh(mesh.vertices, mesh.faces, weights, parts, REST_JOINTS.copy())


def shape_scales(beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-joint offset length scale (how the offset from the parent stretches)
    and per-joint bone girth scale, from the analytic shape coefficients.
    """
    b = np.zeros(NUM_BETAS)
    b[:min(NUM_BETAS, beta.size)] = beta[:NUM_BETAS]
    s = 1.0 + BETA_STEP * b
    length = np.full(NUM_JOINTS, s[0])
    girth = np.full(NUM_JOINTS, s[1])
    groups = {
        2: ["l_elbow", "r_elbow", "l_wrist", "r_wrist", "l_hand", "r_hand"],
        3: ["l_knee", "r_knee", "l_ankle", "r_ankle", "l_foot", "r_foot"],
        4: ["spine1", "spine2", "spine3", "neck"],
        5: ["head"],
        8: ["l_collar", "r_collar", "l_shoulder", "r_shoulder"],
        9: ["l_hip", "r_hip"],
    }
    for coeff, names in groups.items():
        for n in names:
            length[JOINT_INDEX[n]] *= s[coeff]
    girth_groups = {
        5: ["neck", "head"],
        6: ["l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist", "l_hand", "r_hand"],
        7: ["l_hip", "r_hip", "l_knee", "r_knee", "l_ankle", "r_ankle", "l_foot", "r_foot"],
    }
    for coeff, names in girth_groups.items():
        for n in names:
            girth[JOINT_INDEX[n]] *= s[coeff]
    return length, girth


def _primary_child(k: int) -> int:
    children = np.flatnonzero(PARENTS == k)
    if len(children) == 0:
        return -1
    spine = [c for c in children if JOINT_NAMES[c].startswith("spine") or JOINT_NAMES[c] == "neck"]
    return int(spine[0]) if spine else int(children[0])


def shaped_joints(beta: np.ndarray, rest: np.ndarray = REST_JOINTS) -> np.ndarray:
    length, _ = shape_scales(beta)
    out = np.empty_like(rest)
    for k in range(NUM_JOINTS):
        p = PARENTS[k]
        out[k] = rest[k] * length[k] if p < 0 else out[p] + length[k] * (rest[k] - rest[p])
    return out


def _bone_affines(beta: np.ndarray, rest: np.ndarray, shaped: np.ndarray) -> np.ndarray:
    """[K,3,3] rest-to-shaped linear part of each bone: girth across, length along the bone."""
    length, girth = shape_scales(beta)
    mats = np.empty((NUM_JOINTS, 3, 3))
    for k in range(NUM_JOINTS):
        child = _primary_child(k)
        if child < 0:
            d, l = np.array([0.0, 1.0, 0.0]), length[k]
        else:
            d = rest[child] - rest[k]
            l = np.linalg.norm(shaped[child] - shaped[k]) / np.linalg.norm(d)
            d = d / np.linalg.norm(d)
        mats[k] = girth[k] * np.eye(3) + (l - girth[k]) * np.outer(d, d)
    return mats


def apply_shape(template: PriorMesh, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Shaped rest vertices and joints; exact identity for beta = 0."""
    if not np.any(beta):
        return template.vertices, template.joints
    shaped = shaped_joints(beta, template.joints)
    mats = _bone_affines(beta, template.joints, shaped)
    local = template.vertices[:, None, :] - template.joints[None, :, :]
    moved = shaped[None, :, :] + np.einsum("kij,pkj->pki", mats, local)
    return np.einsum("pk,pki->pi", template.skin_weights, moved), shaped


def forward_kinematics(theta: np.ndarray, joints: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Global rotations [K,3,3] and posed joint positions [K,3] for axis-angle theta [3K]."""
    local = Rotation.from_rotvec(theta.reshape(NUM_JOINTS, 3)).as_matrix()
    glob = np.empty_like(local)
    posed = np.empty_like(joints)
    for k in range(NUM_JOINTS):
        p = PARENTS[k]
        if p < 0:
            glob[k] = local[k]
            posed[k] = joints[k]
        else:
            glob[k] = glob[p] @ local[k]
            posed[k] = posed[p] + glob[p] @ (joints[k] - joints[p])
    return glob, posed


def pose_mesh(template: PriorMesh, params: BodyParams) -> PriorMesh:
    """Shape then linear-blend-skin the template; topology is unchanged."""
    if params.is_rest:
        return template.with_vertices(template.vertices.copy(), template.joints.copy())
    vertices, joints = apply_shape(template, params.beta)
    if not params.theta.any():
        return template.with_vertices(vertices.copy(), joints.copy())
    glob, posed = forward_kinematics(params.theta, joints)
    local = vertices[:, None, :] - joints[None, :, :]
    per_bone = np.einsum("kij,pkj->pki", glob, local) + posed[None, :, :]
    return template.with_vertices(np.einsum("pk,pki->pi", template.skin_weights, per_bone), posed)


def posed_capsules(params: BodyParams, rest: np.ndarray = REST_JOINTS,
                   capsules: Sequence[Capsule] = CAPSULES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Capsule endpoints and radii after shaping and posing (rigid per owning joint)."""
    starts, ends, radii = capsule_arrays(capsules)
    owners = np.array([c.owner for c in capsules])
    if np.any(params.beta):
        shaped = shaped_joints(params.beta, rest)
        mats = _bone_affines(params.beta, rest, shaped)
        _, girth = shape_scales(params.beta)
        starts = shaped[owners] + np.einsum("nij,nj->ni", mats[owners], starts - rest[owners])
        ends = shaped[owners] + np.einsum("nij,nj->ni", mats[owners], ends - rest[owners])
        radii = radii * girth[owners]
        rest = shaped
    glob, posed = forward_kinematics(params.theta, rest)
    starts = posed[owners] + np.einsum("nij,nj->ni", glob[owners], starts - rest[owners])
    ends = posed[owners] + np.einsum("nij,nj->ni", glob[owners], ends - rest[owners])
    return starts, ends, radii


def _adjacent_pairs(capsules: Sequence[Capsule]) -> set:
    """Capsule index pairs whose owners are equal, parent/child, siblings or two links apart."""
    def ancestors(k):
        chain = []
        while k >= 0:
            chain.append(k)
            k = PARENTS[k]
        return chain

    near = set()
    for i, a in enumerate(capsules):
        for j, b in enumerate(capsules):
            up_a, up_b = ancestors(a.owner)[:3], ancestors(b.owner)[:3]
            siblings = PARENTS[a.owner] == PARENTS[b.owner]
            if b.owner in up_a or a.owner in up_b or siblings:
                near.add((i, j))
    return near


_NEAR_PAIRS = _adjacent_pairs(CAPSULES)


def pose_collides(params: BodyParams, tolerance: float = 0.5) -> bool:
    """True when two non-neighbouring capsules interpenetrate by more than `tolerance` of their radii."""
    starts, ends, radii = posed_capsules(params)
    t = np.linspace(0.0, 1.0, 9)
    samples = starts[:, None, :] + t[None, :, None] * (ends - starts)[:, None, :]
    n = len(starts)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) in _NEAR_PAIRS:
                continue
            d = np.linalg.norm(samples[i][:, None, :] - samples[j][None, :, :], axis=-1).min()
            if d < tolerance * (radii[i] + radii[j]):
                return True
    return False


def random_params(rng: np.random.Generator, difficulty: float, max_tries: int = 20) -> BodyParams:
    """Pose within joint limits scaled by difficulty; colliding poses are resampled."""
    if difficulty <= 0:
        return BodyParams()
    for attempt in range(max_tries):
        beta = rng.uniform(-1.0, 1.0, NUM_BETAS) * 2.0 * difficulty
        axes = rng.standard_normal((NUM_JOINTS, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        angles = rng.uniform(-1.0, 1.0, NUM_JOINTS) * JOINT_LIMITS * difficulty
        theta = (axes * angles[:, None]).reshape(-1)
        theta[:3] = 0.0
        params = BodyParams(beta=beta, theta=theta)
        if not pose_collides(params):
            return params
        print_warning(f"sampled pose self-intersects, resampling (attempt {attempt + 1})")
    return BodyParams(beta=beta, theta=np.zeros(3 * NUM_JOINTS))


def normalize_to_box(points: np.ndarray, margin: float = 0.02) -> Tuple[np.ndarray, float]:
    """(center, scale) mapping points into [-0.5+margin, 0.5-margin]^3; scale never exceeds 1."""
    lo, hi = points.min(axis=0), points.max(axis=0)
    center = 0.5 * (lo + hi)
    extent = float((hi - lo).max())
    scale = min(1.0, (1.0 - 2.0 * margin) / extent) if extent > 0 else 1.0
    return center, scale


def signed_distance(x: np.ndarray, mesh) -> np.ndarray:
    """Exact distance to the nearest face, negative inside (winding number > 0.5)."""
    return _query_for(mesh).signed_distance(np.atleast_2d(x))


def nearest_face(x: np.ndarray, mesh) -> Tuple[np.ndarray, np.ndarray]:
    """(face index, barycentrics) of the closest surface point; ties to the lowest face index."""
    return _query_for(mesh).nearest_face(np.atleast_2d(x))


def _query_for(mesh) -> MeshQuery:
    if isinstance(mesh, PriorMesh):
        return mesh.query
    cached = getattr(mesh, "_query", None)
    if cached is None:
        cached = MeshQuery(mesh.vertices, mesh.faces)
        try:
            mesh._query = cached
        except AttributeError:
            pass
    return cached


def save_prior(obj_path: str, mesh: PriorMesh, params: Optional[BodyParams] = None) -> str:
    """Writes the OBJ plus a JSON sidecar (same stem) with weights, labels and joints."""
    write_obj(obj_path, mesh.as_trimesh())
    sidecar = os.path.splitext(obj_path)[0] + ".json"
    doc = {
        "part_names": list(PART_NAMES),
        "joint_names": list(JOINT_NAMES),
        "skin_weights": np.round(mesh.skin_weights, 12).tolist(),
        "part_labels": mesh.part_labels.astype(int).tolist(),
        "joints": mesh.joints.tolist(),
    }
    if params is not None:
        doc["params"] = params.to_dict()
    with open(sidecar, "w") as op:
        json.dump(doc, op)
    return sidecar


def load_prior(obj_path: str) -> Tuple[PriorMesh, Optional[BodyParams]]:
    tri = read_obj(obj_path)
    sidecar = os.path.splitext(obj_path)[0] + ".json"
    with open(sidecar, "r") as ip:
        doc = json.load(ip)
    weights = np.array(doc["skin_weights"], dtype=np.float64)
    weights /= weights.sum(axis=1, keepdims=True)
    labels = np.array(doc["part_labels"], dtype=np.int64)
    if len(weights) != len(tri.vertices) or len(labels) != len(tri.vertices):
        raise MeshError(f"{sidecar}: sidecar does not match {obj_path}")
    params = BodyParams.from_dict(doc["params"]) if "params" in doc else None
    return PriorMesh(tri.vertices, tri.faces, weights, labels, np.array(doc["joints"])), params


def parse_part_ids(names: Sequence[str]) -> List[int]:
    unknown = [n for n in names if n not in PART_INDEX]
    if unknown:
        raise ConfigError(f"Unknown body part(s): {', '.join(unknown)}; known parts: {', '.join(PART_NAMES)}")
    return sorted({PART_INDEX[n] for n in names})
