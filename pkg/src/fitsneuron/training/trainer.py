"""Mini-batch training loop."""
from __future__ import annotations

import logging

import numpy as np

from ..data import Dataset
from ..errors import ConfigurationError
from .config import NetworkConfig
from .model import evaluate, forward_backward
from .optim import OptimState, optimizer_step
from .params import init_parameters

__all__ = ["train"]

log = logging.getLogger(__name__)


def train(cfg: NetworkConfig, dataset: Dataset, params=None, eval_batch=256):
    """Train on the ``train`` split and keep the parameters with the best
    ``val`` accuracy (earliest epoch wins ties).

    Returns ``dict(params, history, init)`` where ``history`` lists
    ``(epoch, train_loss, val_accuracy)`` tuples. Everything is keyed by
    ``cfg.seed``: weight init, shuffling order and dropout masks.
    """
    if "train" not in dataset.splits:
        raise ConfigurationError("dataset has no train split")
    x_tr, y_tr = dataset.split("train")
    if "val" in dataset.splits and len(dataset.splits["val"]):
        x_va, y_va = dataset.split("val")
    else:
        x_va, y_va = x_tr, y_tr
    if x_tr.shape[2] != cfg.n_inputs:
        raise ConfigurationError(f"dataset has {x_tr.shape[2]} channels, config expects {cfg.n_inputs}")
    if params is None:
        params = init_parameters(cfg)
    x_tr = x_tr.astype(float)
    n = len(x_tr)
    batches_per_epoch = -(-n // cfg.batch_size)
    opt = OptimState(cfg.lr, cfg.epochs * batches_per_epoch, lr_scale={"u": cfg.freq_lr_scale})
    rng = np.random.default_rng([cfg.seed, 1])
    arrays = params.named(cfg)
    history = []
    best = params.copy()
    best_acc = -1.0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            res = forward_backward(params, cfg, x_tr[idx], y_tr[idx], dropout_rng=rng, step=opt.step)
            optimizer_step(opt, arrays, res["grads"])
            losses.append(res["loss"] * len(idx))
        train_loss = float(sum(losses) / n)
        val_acc = evaluate(params, cfg, x_va, y_va, eval_batch)["accuracy"]
        history.append((epoch, train_loss, val_acc))
        log.info("epoch %d loss %.4f val %.4f", epoch, train_loss, val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            best = params.copy()
    return dict(params=best, history=history)
