"""Adam with a cosine-annealed learning rate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["OptimState", "cosine_lr", "optimizer_step"]


def cosine_lr(base, step, horizon):
    """``base * (1 + cos(pi * step / horizon)) / 2``, held at zero past ``horizon``."""
    if horizon <= 0:
        return base
    return base * 0.5 * (1.0 + math.cos(math.pi * min(step, horizon) / horizon))


@dataclass
class OptimState:
    lr: float
    horizon: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_scale: dict = field(default_factory=dict)
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(opt: OptimState, arrays: dict, grads: dict):
    """One Adam update of ``arrays`` in place.

    ``arrays`` maps names to unconstrained parameter arrays; names missing
    from ``grads`` are left alone. ``opt.lr_scale`` multiplies the learning
    rate of names starting with a given prefix. Returns the learning rate used.
    """
    lr = cosine_lr(opt.lr, opt.step, opt.horizon)
    opt.step += 1
    c1 = 1.0 - opt.beta1 ** opt.step
    c2 = 1.0 - opt.beta2 ** opt.step
    for name, p in arrays.items():
        g = grads.get(name)
        if g is None:
            continue
        m = opt.m.setdefault(name, np.zeros_like(p))
        v = opt.v.setdefault(name, np.zeros_like(p))
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        scale = next((s for pre, s in opt.lr_scale.items() if name.startswith(pre)), 1.0)
        p -= lr * scale * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return lr
