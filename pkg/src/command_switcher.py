import inspect
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from autodiff import no_grad
from avatar_apps import FeatureRig, RIG_MANIFEST, load_rig, reconstruct_rig, retarget, rig_from_sample, save_rig, try_on
from avatar_model import SampleField, load_checkpoint
from errors import ConfigError
from image_io import channel_grid, write_gray
from implicit_surface import ISO_LEVEL, reconstruct_mesh
from mesh_geometry import TriMesh, is_watertight, read_obj, read_ply, write_obj, write_ply
from metrics import evaluate_meshes
from pose_parser import parse_modes, parse_parts, parse_theta
from run_config import RunConfig, rng_stream, write_manifest
from synthetic_data import generate_dataset, load_dataset, load_sample
from trainer import build_pools, train as run_training
from utils.settings import Settings
from utils.table_format import table_format_print
from utils.utils import print_status, print_warning

CMD = "command"
PLANE_IDS = ("xy", "yz", "xz")


def switch_and_delegate(parse_dict: Dict):
    """Runs the command named in parse_dict with the entries its signature asks for."""
    parse_dict = dict(parse_dict)
    command = parse_dict.pop(CMD, None)

    if command not in DEFINED_COMMANDS:
        raise ConfigError(f"Command {command!r} not recognised.")

    function_ptr = DEFINED_COMMANDS[command]
    sign = inspect.signature(function_ptr)

    for name, param in sign.parameters.items():
        if param.default is inspect.Parameter.empty and parse_dict.get(name) is None:
            raise ConfigError(f"{command} needs --{name.replace('_', '-')}")

    return function_ptr(**{k: v for k, v in parse_dict.items() if k in sign.parameters})


def load_config(path: Optional[str], overrides: Dict) -> RunConfig:
    config = RunConfig.from_json(path) if path else RunConfig()
    return config.with_overrides(overrides)


def read_mesh(path: str) -> TriMesh:
    if os.path.isdir(path):
        path = os.path.join(path, "mesh.obj")
    return read_ply(path) if path.lower().endswith(".ply") else read_obj(path)


def write_mesh(path: str, mesh: TriMesh, config: RunConfig, **extra) -> str:
    """Mesh plus a <stem>.manifest.json beside it."""
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    if path.lower().endswith(".ply"):
        write_ply(path, mesh)
    else:
        write_obj(path, mesh)
    if not mesh.is_empty and not is_watertight(mesh.faces):
        print_warning(f"{path} is not watertight")
    stem = os.path.splitext(os.path.basename(path))[0]
    write_manifest(out_dir, config, filename=f"{stem}.manifest.json", mesh=os.path.basename(path),
                   vertices=len(mesh.vertices), faces=len(mesh.faces), **extra)
    print_status(f"{len(mesh.vertices)} vertices, {len(mesh.faces)} faces written to {path}")
    return path


def gen_data(out: str, config: Optional[str] = None, count: Optional[int] = None,
             difficulty: Optional[str] = None, seed: Optional[int] = None):
    cfg = load_config(config, {"seed": seed, "data.count": count, "data.difficulty": difficulty})
    model = cfg.model
    paths = generate_dataset(out, cfg.data.count, cfg.data.difficulty, cfg.seed, model.image_res, model.prior_vertices)
    write_manifest(out, cfg, command="gen-data", samples=[os.path.basename(p) for p in paths])
    print_status(f"{len(paths)} samples written to {out}")
    return paths


def _check_resolution(cfg: RunConfig, dataset) -> None:
    res = {s.bundle.resolution for s in dataset}
    if res != {cfg.model.image_res}:
        raise ConfigError(f"dataset image resolution {sorted(res)} does not match the "
                          f"{cfg.model_scale} model ({cfg.model.image_res})")


def train(data: str, out: str, config: Optional[str] = None, steps: Optional[int] = None,
          seed: Optional[int] = None, mode: Optional[str] = None, resume: Optional[str] = None):
    cfg = load_config(config, {"seed": seed, "train.steps": steps, "ablation_mode": mode})
    dataset = load_dataset(data)
    _check_resolution(cfg, dataset)
    result = run_training(cfg, dataset, out, resume=resume)
    if len(result.log):
        table_format_print(result.log.tail(1).values.tolist(), list(result.log.columns))
    return result


def _sample_field(checkpoint: str, input: str, prior_only: bool = False):
    ckpt = load_checkpoint(checkpoint)
    sample = load_sample(input)
    _check_resolution(ckpt.config, [sample])
    return ckpt, SampleField(ckpt.model, sample.bundle, sample.prior, prior_only=prior_only)


def reconstruct(checkpoint: str, input: str, out: str, res: Optional[int] = None,
                chunk_size: Optional[int] = None, iso: float = ISO_LEVEL, prior_only: bool = False):
    ckpt, field = _sample_field(checkpoint, input, prior_only)
    rc = ckpt.config.reconstruct
    mesh = reconstruct_mesh(field, res or rc.resolution, chunk_size or rc.chunk_size, iso)
    return write_mesh(out, mesh, ckpt.config, command="reconstruct", checkpoint=os.path.abspath(checkpoint),
                      input=os.path.abspath(input), resolution=res or rc.resolution, prior_only=prior_only)


def evaluate(pred: str, gt: str, report: Optional[str] = None, config: Optional[str] = None,
             seed: Optional[int] = None, samples: Optional[int] = None, render_res: Optional[int] = None):
    cfg = load_config(config, {"seed": seed, "evaluate.samples": samples, "evaluate.render_res": render_res})
    result = evaluate_meshes(read_mesh(pred), read_mesh(gt), cfg.evaluate.samples, cfg.evaluate.render_res,
                             rng_stream(cfg.seed, "evaluate"))
    print(result.as_table())
    if report:
        out_dir = os.path.dirname(os.path.abspath(report))
        os.makedirs(out_dir, exist_ok=True)
        result.write_json(report)
        stem = os.path.splitext(os.path.basename(report))[0]
        write_manifest(out_dir, cfg, filename=f"{stem}.manifest.json", command="evaluate",
                       pred=os.path.abspath(pred), gt=os.path.abspath(gt))
    return result


def split_dataset(n: int, seed: int, holdout: float = 0.2):
    """(train ids, test ids); a single sample is used for both."""
    if n == 1:
        return [0], [0]
    order = rng_stream(seed, "split").permutation(n)
    n_test = max(1, int(round(n * holdout)))
    return sorted(order[n_test:].tolist()), sorted(order[:n_test].tolist())


ABLATION_COLUMNS = ["Mode", "Chamfer (cm)", "P2S (cm)", "Normals", "PSNR (dB)"]


def ablate(data: str, out: str, modes: str = "all", config: Optional[str] = None, steps: Optional[int] = None,
           seed: Optional[int] = None, res: Optional[int] = None, report: Optional[str] = None):
    """Trains and evaluates each mode on one shared split; one table row per mode."""
    cfg = load_config(config, {"seed": seed, "train.steps": steps, "reconstruct.resolution": res})
    mode_list = parse_modes(modes)
    dataset = load_dataset(data)
    _check_resolution(cfg, dataset)
    train_ids, test_ids = split_dataset(len(dataset), cfg.seed)
    train_set = [dataset[i] for i in train_ids]
    pools = build_pools(cfg, train_set)

    rows: List[list] = []
    reports: Dict[str, List[dict]] = {}
    for mode in tqdm(mode_list, desc="ablate", disable=not Settings.is_verbose()):
        mode_cfg = cfg.with_overrides({"ablation_mode": mode})
        mode_dir = os.path.join(out, mode)
        model = run_training(mode_cfg, train_set, mode_dir, pools=pools).model
        per_sample = []
        for i in test_ids:
            sample = dataset[i]
            field = SampleField(model, sample.bundle, sample.prior)
            mesh = reconstruct_mesh(field, cfg.reconstruct.resolution, cfg.reconstruct.chunk_size)
            write_mesh(os.path.join(mode_dir, f"sample_{sample.sample_id:05d}.obj"), mesh, mode_cfg,
                       command="ablate", sample=sample.sample_id)
            if mesh.is_empty:
                print_warning(f"{mode}: empty reconstruction for sample {sample.sample_id}, skipped in the average")
                continue
            per_sample.append(evaluate_meshes(mesh, sample.gt_mesh, cfg.evaluate.samples, cfg.evaluate.render_res,
                                              rng_stream(cfg.seed, "evaluate", sample.sample_id)))
        reports[mode] = [r.to_dict() for r in per_sample]
        if per_sample:
            rows.append([mode] + [float(np.mean([getattr(r, k) for r in per_sample]))
                                  for k in ("chamfer_cm", "p2s_cm", "normals_front", "psnr_db")])
        else:
            rows.append([mode] + [float("nan")] * 4)

    table_format_print(rows, ABLATION_COLUMNS)
    report = report or os.path.join(out, "ablation.csv")
    write_ablation_report(report, rows)
    write_manifest(out, cfg, command="ablate", modes=mode_list, train_ids=train_ids, test_ids=test_ids,
                   per_sample=reports)
    return rows


def write_ablation_report(path: str, rows: List[list]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pd.DataFrame(rows, columns=ABLATION_COLUMNS).to_csv(path, index=False)


def _rig(model, path: str) -> FeatureRig:
    """A saved rig directory or a sample directory to rig from."""
    if os.path.isfile(os.path.join(path, RIG_MANIFEST)):
        return load_rig(path)
    return rig_from_sample(model, load_sample(path))


def animate(checkpoint: str, input: str, theta_new: str, out: str, res: Optional[int] = None,
            chunk_size: Optional[int] = None, rig_out: Optional[str] = None):
    ckpt = load_checkpoint(checkpoint)
    rig = _rig(ckpt.model, input)
    posed = retarget(rig, parse_theta(theta_new, base=rig.params.theta))
    if rig_out:
        save_rig(rig_out, posed)
    rc = ckpt.config.reconstruct
    mesh = reconstruct_rig(ckpt.model, posed, res or rc.resolution, chunk_size or rc.chunk_size)
    return write_mesh(out, mesh, ckpt.config, command="animate", input=os.path.abspath(input),
                      theta=posed.params.theta.tolist())


def tryon(checkpoint: str, target: str, source: str, parts: str, out: str, res: Optional[int] = None,
          chunk_size: Optional[int] = None, rig_out: Optional[str] = None):
    ckpt = load_checkpoint(checkpoint)
    ids = parse_parts(parts)
    dressed = try_on(_rig(ckpt.model, target), _rig(ckpt.model, source), ids)
    if rig_out:
        save_rig(rig_out, dressed)
    rc = ckpt.config.reconstruct
    mesh = reconstruct_rig(ckpt.model, dressed, res or rc.resolution, chunk_size or rc.chunk_size)
    return write_mesh(out, mesh, ckpt.config, command="tryon", target=os.path.abspath(target),
                      source=os.path.abspath(source), parts=ids)


def inspect_planes(checkpoint: str, input: str, out: str, channels: int = 16):
    """One min-max normalised channel grid per plane: xy (refined), yz and xz."""
    ckpt = load_checkpoint(checkpoint)
    sample = load_sample(input)
    with no_grad():
        planes = ckpt.model.planes(sample.bundle)
    C = planes.channels
    if channels > C:
        print_warning(f"only {C} channels per plane, showing {C}")
    shown = max(1, min(channels, C))
    grids = {"xy": planes.f_xy_refined, "yz": planes.f_yz, "xz": planes.f_xz}
    os.makedirs(out, exist_ok=True)
    files = []
    for plane_id in PLANE_IDS:
        path = os.path.join(out, f"plane_{plane_id}.png")
        write_gray(path, channel_grid(grids[plane_id].numpy(), shown))
        files.append(os.path.basename(path))
    write_manifest(out, ckpt.config, command="inspect-planes", input=os.path.abspath(input), channels=shown,
                   files=files)
    print_status(f"{len(files)} plane grids written to {out}")
    return files


DEFINED_COMMANDS = {
    "gen-data": gen_data,
    "train": train,
    "reconstruct": reconstruct,
    "evaluate": evaluate,
    "ablate": ablate,
    "animate": animate,
    "tryon": tryon,
    "inspect-planes": inspect_planes,
}
