"""Surrogate-gradient training of feedforward FiTS networks."""
from .checkpoint import load_checkpoint, save_checkpoint
from .config import STABILITY_MARGIN, VARIANTS, NetworkConfig, energy_variant
from .model import evaluate, forward, forward_backward, predict, surrogate_grad
from .optim import OptimState, cosine_lr, optimizer_step
from .params import (LearnableParams, decode_frequency, encode_frequency, init_parameters,
                     layer_params, perturb_target_frequencies)
from .trainer import train

__all__ = [
    "NetworkConfig", "VARIANTS", "STABILITY_MARGIN", "energy_variant",
    "LearnableParams", "init_parameters", "layer_params", "decode_frequency", "encode_frequency",
    "perturb_target_frequencies", "surrogate_grad", "forward", "forward_backward", "evaluate",
    "predict", "OptimState", "cosine_lr", "optimizer_step", "train", "save_checkpoint",
    "load_checkpoint",
]
