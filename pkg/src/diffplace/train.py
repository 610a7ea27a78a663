"""Training orchestration: dataset loading, batching, learning-rate decay,
checkpointing, and the resume path used for the two-stage pre-train /
fine-tune flow.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import dataset as ds
from . import ddpm
from . import denoiser as dn


@dataclass
class TrainConfig:
    steps: int = 10_000
    batch_size: int = 16
    lr: float = 3e-4
    lr_decay: str = "cosine"  # or "constant"
    ckpt_interval: int = 0  # 0 = final checkpoint only
    seed: int = 0
    log_interval: int = 100
    limit: int | None = None  # cap on circuits loaded from the dataset


def load_training_set(path, limit=None):
    """Load (netlist, coords) pairs from a dataset file."""
    out = []
    for record in ds.read_dataset(path):
        nl, pl, _ = ds.record_to_netlist(record)
        if pl is None:
            raise ds.DatasetError(
                f"record {record.get('circuit_id')} has no placement; cannot train"
            )
        out.append((nl, pl.coords))
        if limit is not None and len(out) >= limit:
            break
    if not out:
        raise ds.DatasetError(f"{path}: dataset has no records")
    return out


def lr_at(step, cfg):
    if cfg.lr_decay == "constant":
        return cfg.lr
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * step / max(cfg.steps, 1)))


def train(
    dataset_path,
    model_config,
    train_config,
    ckpt_path,
    schedule=None,
    resume=None,
    log_path=None,
    progress=None,
):
    """Train a denoiser on a dataset; returns (params, loss history tail).

    The loss curve is a deterministic function of (dataset, configs, seed).
    `resume` continues from an existing checkpoint (new optimizer schedule,
    as in the pre-train-then-fine-tune recipe).
    """
    circuits = load_training_set(dataset_path, train_config.limit)
    schedule = schedule or ddpm.cosine_schedule(1000)

    step0 = 0
    if resume is not None:
        loaded_cfg, params, meta, opt_arrays = dn.load_checkpoint(resume)
        if loaded_cfg != model_config:
            raise ValueError(
                "checkpoint config differs from requested model config; "
                "drop the overrides or match them"
            )
        opt = ad.Adam(params, lr=train_config.lr)
        if opt_arrays:
            opt.load_state_arrays(opt_arrays)
        step0 = int(meta.get("step", 0))
    else:
        params = dn.init_params(model_config, train_config.seed)
        opt = ad.Adam(params, lr=train_config.lr)

    rng = np.random.default_rng([int(train_config.seed), 0x7431])
    log_rows = []
    losses = []
    for step in range(1, train_config.steps + 1):
        idx = rng.integers(0, len(circuits), size=train_config.batch_size)
        batch = [circuits[i] for i in idx]
        lr = lr_at(step - 1, train_config)
        loss = ddpm.training_step(
            batch, params, model_config, opt, schedule, rng, lr=lr, step_index=step
        )
        losses.append(loss)
        if step % train_config.log_interval == 0 or step == 1:
            log_rows.append((step0 + step, loss, lr))
            if progress:
                progress(step, loss, lr)
        if train_config.ckpt_interval and step % train_config.ckpt_interval == 0:
            _save(ckpt_path, model_config, params, opt, step0 + step, loss, train_config)
    _save(
        ckpt_path,
        model_config,
        params,
        opt,
        step0 + train_config.steps,
        losses[-1],
        train_config,
    )
    if log_path:
        with open(log_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["step", "loss", "lr"])
            w.writerows(log_rows)
    return params, losses


def _save(path, config, params, opt, step, loss, train_config):
    dn.save_checkpoint(
        path,
        config,
        params,
        meta={
            "step": step,
            "loss": loss,
            "train_seed": train_config.seed,
            "batch_size": train_config.batch_size,
        },
        opt_arrays=opt.state_arrays(),
    )
