"""
Losses and the optimisation loop.

L_GTA = L_o + L_c, with L_o the mean binary cross-entropy over G_o and L_c
the mean absolute colour error over G_c. Each step averages L_GTA over a
batch of samples. The batch (sample ids, pool slots, SQ dropout draws) is a
pure function of (seed, step), so a resumed run repeats an uninterrupted one.
"""
import os
import time

import numpy as np
import pandas as pd

from dataclasses import dataclass, field
from tqdm import tqdm
from typing import List, Optional, Sequence, Tuple, Union

from autodiff import Adam, Tensor, backward, bce_loss, l1_loss
from avatar_model import AvatarModel, SampleField, build_model, load_checkpoint, save_checkpoint
from errors import ConfigError, NumericError
from point_sampling import PointBatch, build_pool
from run_config import RunConfig, rng_stream
from utils.settings import Settings
from utils.utils import print_status, print_warning

LOG_COLUMNS = ["step", "L_o", "L_c", "L_GTA", "wall_ms"]
LOG_FILE = "train_log.csv"


def loss_occupancy(pred_o: Tensor, labels: np.ndarray) -> Tensor:
    return bce_loss(pred_o, labels)


def loss_color(pred_c: Tensor, labels: np.ndarray) -> Tensor:
    return l1_loss(pred_c, np.asarray(labels, dtype=np.float64).reshape(pred_c.shape))


def batch_losses(model: AvatarModel, sample, batch: PointBatch, drop_sq: bool = False) -> Tuple[Tensor, Tensor]:
    """(L_o, L_c) for one sample; occupancy and colour rows share one feature pass."""
    state = model.encode_sample(sample.bundle, sample.prior)
    x = model.features(state, batch.points, batch.geometry, drop_sq=drop_sq).as_tensor()
    n = batch.n_occupancy
    occ = model.heads.occupancy(x[:n])
    col = model.heads.color(x[n:])
    return loss_occupancy(occ, batch.occ_labels), loss_color(col, batch.color_labels)


@dataclass
class StepPlan:
    samples: np.ndarray
    slots: np.ndarray
    drop_sq: np.ndarray


def plan_step(seed: int, step: int, n_samples: int, batch_size: int, pool_size: int, dropout: float) -> StepPlan:
    rng = rng_stream(seed, "batch", step)
    samples = rng.choice(n_samples, size=batch_size, replace=n_samples < batch_size)
    slots = rng.integers(0, pool_size, size=batch_size)
    drop = rng.random(batch_size) < dropout
    return StepPlan(samples, slots, drop)


def build_pools(config: RunConfig, dataset: Sequence) -> List[List[PointBatch]]:
    pools = []
    for sample in tqdm(dataset, desc="point pools", disable=not Settings.is_verbose()):
        rng = rng_stream(config.seed, "pool", sample.sample_id)
        pools.append(build_pool(sample, config.train.pool_size, config.train.points, rng))
    return pools


def _check_gradients(model: AvatarModel) -> None:
    for name, p in model.named_parameters():
        if not np.all(np.isfinite(p.grad)):
            raise NumericError("non-finite gradient", name)


@dataclass
class TrainResult:
    model: AvatarModel
    optimizer: Adam
    step: int
    log: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=LOG_COLUMNS))


def _snapshot(model: AvatarModel, optimizer: Adam):
    return ([p.data.copy() for p in model.parameters()], optimizer.t,
            [m.copy() for m in optimizer.m], [v.copy() for v in optimizer.v])


def _restore(model: AvatarModel, optimizer: Adam, snap) -> None:
    params, t, m, v = snap
    for p, data in zip(model.parameters(), params):
        p.assign(data)
    optimizer.load_state(t, m, v)


def train(config: RunConfig, dataset: Sequence, out_dir: Optional[Union[str, os.PathLike]] = None,
          resume: Optional[Union[str, os.PathLike]] = None, pools: Optional[List[List[PointBatch]]] = None) -> TrainResult:
    """
    Runs config.train.steps optimisation steps in total (a resumed run starts
    at its checkpoint's step). With out_dir, checkpoints land there every
    checkpoint_every steps and at the end, next to the CSV log. A non-finite
    loss or gradient restores the last good state, writes it, and re-raises.
    """
    if not dataset:
        raise ConfigError("training needs at least one sample")
    tc = config.train
    rows: List[dict] = []
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.config.config_hash() != config.with_overrides({"train.steps": ckpt.config.train.steps}).config_hash():
            print_warning("resuming with a configuration that differs from the checkpoint's")
        model, start = ckpt.model, ckpt.step
        optimizer = ckpt.optimizer or Adam(model.parameters(), lr=tc.lr, beta1=tc.beta1, beta2=tc.beta2)
        prior_log = os.path.join(resume, LOG_FILE)
        if os.path.isfile(prior_log):
            rows = pd.read_csv(prior_log).query("step <= @start").to_dict("records")
    else:
        model, start = build_model(config), 0
        optimizer = Adam(model.parameters(), lr=tc.lr, beta1=tc.beta1, beta2=tc.beta2)

    if pools is None:
        pools = build_pools(config, dataset)
    dropout = tc.sq_dropout if model.uses_sq else 0.0

    def checkpoint(step: int) -> None:
        if out_dir is None:
            return
        save_checkpoint(out_dir, model, config, step, optimizer, samples=len(dataset))
        pd.DataFrame(rows, columns=LOG_COLUMNS).to_csv(os.path.join(out_dir, LOG_FILE), index=False)

    if start == 0:
        checkpoint(0)
    progress = tqdm(range(start, tc.steps), desc="train", disable=not Settings.is_verbose(),
                    initial=start, total=tc.steps)
    for step in progress:
        tick = time.perf_counter()
        plan = plan_step(config.seed, step, len(dataset), tc.batch_size, tc.pool_size, dropout)
        snap = _snapshot(model, optimizer)
        try:
            optimizer.zero_grad()
            l_o_sum, l_c_sum, total = 0.0, 0.0, None
            for i, slot, drop in zip(plan.samples, plan.slots, plan.drop_sq):
                l_o, l_c = batch_losses(model, dataset[i], pools[i][slot], drop_sq=bool(drop))
                l_o_sum += l_o.item()
                l_c_sum += l_c.item()
                term = l_o + l_c
                total = term if total is None else total + term
            loss = total / float(len(plan.samples))
            backward(loss)
            _check_gradients(model)
            optimizer.step()
        except NumericError as e:
            _restore(model, optimizer, snap)
            checkpoint(step)
            print_warning(f"training aborted at step {step + 1}: {e}; last good checkpoint kept")
            raise
        n = len(plan.samples)
        rows.append({"step": step + 1, "L_o": l_o_sum / n, "L_c": l_c_sum / n, "L_GTA": l_o_sum / n + l_c_sum / n,
                     "wall_ms": (time.perf_counter() - tick) * 1000.0})
        progress.set_postfix(L_GTA=f"{rows[-1]['L_GTA']:.4f}")
        if tc.checkpoint_every and (step + 1) % tc.checkpoint_every == 0 and step + 1 < tc.steps:
            checkpoint(step + 1)

    final_step = max(start, tc.steps)
    checkpoint(final_step)
    if out_dir is not None:
        print_status(f"checkpoint written to {out_dir} at step {final_step}")
    return TrainResult(model, optimizer, final_step, pd.DataFrame(rows, columns=LOG_COLUMNS))


def occupancy_accuracy(model: AvatarModel, sample, points: np.ndarray, labels: np.ndarray) -> float:
    """Share of points whose predicted occupancy falls on the labelled side of 0.5."""
    pred = SampleField(model, sample.bundle, sample.prior).occupancy(points)
    return float(np.mean((pred > 0.5) == (np.asarray(labels) > 0.5)))
