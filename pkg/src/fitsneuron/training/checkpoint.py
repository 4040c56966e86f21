"""JSON checkpoints with full-precision decimal parameters."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .config import NetworkConfig
from .params import LearnableParams

__all__ = ["save_checkpoint", "load_checkpoint", "checkpoint_to_json", "checkpoint_from_json"]

FORMAT = "fits-checkpoint v1"


def _enc(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "values": [repr(float(x)) for x in a.ravel()]}


def _dec(d):
    return np.array([float(s) for s in d["values"]], dtype=float).reshape(d["shape"])


def checkpoint_to_json(cfg: NetworkConfig, params: LearnableParams, history=()):
    doc = {
        "format": FORMAT,
        "config": cfg.to_dict(),
        "params": {
            "weights": [_enc(w) for w in params.weights],
            "freq_u": [_enc(u) for u in params.freq_u],
            "beta_hat": [_enc(b) for b in params.beta_hat],
            "lambda_hat": [_enc(l) for l in params.lambda_hat],
        },
        "init": {"freq_u": [_enc(u) for u in params.init_freq_u]} if params.init_freq_u is not None else None,
        "history": [{"epoch": int(e), "train_loss": repr(float(l)), "val_accuracy": repr(float(a))}
                    for e, l, a in history],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def checkpoint_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ConfigurationError(f"not a checkpoint (format {doc.get('format')!r})")
    cfg = NetworkConfig.from_dict(doc["config"])
    p = doc["params"]
    init = doc.get("init")
    params = LearnableParams(
        [_dec(w) for w in p["weights"]],
        [_dec(u) for u in p["freq_u"]],
        [_dec(b) for b in p["beta_hat"]],
        [_dec(l) for l in p["lambda_hat"]],
        [_dec(u) for u in init["freq_u"]] if init else None,
        cfg.f_min,
        [cfg.frequency_cap(i) for i in range(len(cfg.hidden))],
    )
    history = [(h["epoch"], float(h["train_loss"]), float(h["val_accuracy"])) for h in doc["history"]]
    return cfg, params, history


def save_checkpoint(path, cfg, params, history=()):
    Path(path).write_text(checkpoint_to_json(cfg, params, history))


def load_checkpoint(path):
    return checkpoint_from_json(Path(path).read_text())
