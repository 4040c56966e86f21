"""Learnable parameters, their constrained decodings and the perturbation protocol."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ..analysis import dkappa_domega, kappa_from_target
from ..errors import ConfigurationError
from ..neuron import LayerParams
from .config import NetworkConfig

__all__ = [
    "LearnableParams",
    "init_parameters",
    "log_spaced_targets",
    "decode_frequency",
    "encode_frequency",
    "layer_params",
    "perturb_target_frequencies",
    "LAMBDA_HAT_INIT",
]

LAMBDA_HAT_INIT = -3.0
# encode clips the sigmoid fraction away from {0, 1} so grid endpoints stay finite
_FRAC_EPS = 1e-9


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def log_spaced_targets(n, f_min, f_max):
    """Neuron ``i`` of ``n`` gets ``f_min * (f_max / f_min) ** (i / (n - 1))``."""
    if n == 1:
        return np.array([float(f_min)])
    return f_min * (f_max / f_min) ** (np.arange(n) / (n - 1))


def decode_frequency(u, f_min, f_cap):
    """``f_min * (f_cap / f_min) ** sigmoid(u)``, always inside ``(f_min, f_cap)``."""
    return f_min * (f_cap / f_min) ** _sigmoid(np.asarray(u, dtype=float))


def encode_frequency(f, f_min, f_cap):
    frac = np.log(np.asarray(f, dtype=float) / f_min) / math.log(f_cap / f_min)
    frac = np.clip(frac, _FRAC_EPS, 1 - _FRAC_EPS)
    return np.log(frac) - np.log1p(-frac)


@dataclass
class LearnableParams:
    """Weights of every linear layer (hidden layers, then readout) and
    per-neuron FS/TS coordinates of every hidden layer.

    ``freq_u`` is the unconstrained target-frequency coordinate,
    ``beta_hat``/``lambda_hat`` are ``(N, M)`` arrays. ``init_freq_u`` records
    the initialization for the reset perturbation.
    """

    weights: list
    freq_u: list
    beta_hat: list
    lambda_hat: list
    init_freq_u: list | None = None
    f_min: float = 1.0
    f_caps: list = field(default_factory=list)

    def named(self, cfg: NetworkConfig):
        """Trainable arrays by name, in a fixed order. Values are the live arrays."""
        out = {}
        for i, w in enumerate(self.weights):
            out[f"w{i}"] = w
        for i in range(len(self.freq_u)):
            if cfg.learns_frequency:
                out[f"u{i}"] = self.freq_u[i]
            if self.beta_hat[i].shape[1]:
                out[f"bh{i}"] = self.beta_hat[i]
                out[f"lh{i}"] = self.lambda_hat[i]
        return out

    def all_arrays(self):
        out = {f"w{i}": w for i, w in enumerate(self.weights)}
        for i in range(len(self.freq_u)):
            out[f"u{i}"] = self.freq_u[i]
            out[f"bh{i}"] = self.beta_hat[i]
            out[f"lh{i}"] = self.lambda_hat[i]
        return out

    def copy(self):
        return copy.deepcopy(self)

    def target_frequencies(self, layer):
        return decode_frequency(self.freq_u[layer], self.f_min, self.f_caps[layer])

    def beta(self, layer):
        return np.tanh(self.beta_hat[layer])

    def lam(self, layer):
        return _sigmoid(self.lambda_hat[layer])


def init_parameters(cfg: NetworkConfig):
    """Log-spaced target frequencies, ``beta_hat = 0``, ``lambda_hat = -3`` and
    variance-scaled uniform weights drawn from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    sizes = cfg.layer_sizes
    weights = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = cfg.weight_gain * math.sqrt(3.0 / n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
    caps = [cfg.frequency_cap(i) for i in range(len(cfg.hidden))]
    freq_u, beta_hat, lambda_hat = [], [], []
    for i, n in enumerate(cfg.hidden):
        freq_u.append(encode_frequency(log_spaced_targets(n, cfg.f_min, cfg.f_max), cfg.f_min, caps[i]))
        beta_hat.append(np.zeros((n, cfg.order[i])))
        lambda_hat.append(np.full((n, cfg.order[i]), LAMBDA_HAT_INIT))
    return LearnableParams(weights, freq_u, beta_hat, lambda_hat,
                           [u.copy() for u in freq_u], cfg.f_min, caps)


def layer_params(params: LearnableParams, cfg: NetworkConfig, layer):
    """Neuron coefficients of a hidden layer plus the pieces the backward pass
    needs to chain gradients into ``freq_u``.

    Returns ``(LayerParams, dcoef_du)`` where ``dcoef_du`` is the derivative of
    ``eta * dt`` (equal to ``gamma * dt``) with respect to ``freq_u``, or
    ``None`` when the variant has no adaptation coupling.
    """
    n = cfg.hidden[layer]
    mu, rho, dt = 1.0 / cfg.tau_m[layer], 1.0 / cfg.tau_a[layer], cfg.dt
    if cfg.uses_frequency:
        u = params.freq_u[layer]
        sig = _sigmoid(u)
        ratio = math.log(params.f_caps[layer] / params.f_min)
        f = params.f_min * np.exp(ratio * sig)
        omega = 2 * math.pi * f
        kappa = kappa_from_target(mu, rho, omega)
        root = np.sqrt(kappa)
        coef = root * dt
        domega_du = omega * ratio * sig * (1 - sig)
        dcoef_du = dt / (2 * root) * dkappa_domega(mu, rho, omega) * domega_du
    else:
        coef = np.zeros(n)
        dcoef_du = None
    prm = LayerParams(
        np.full(n, 1.0 - mu * dt),
        np.full(n, 1.0 - rho * dt),
        np.array(coef, dtype=float),
        np.array(coef, dtype=float),
        params.beta(layer),
        params.lam(layer),
    )
    return prm, dcoef_du


def perturb_target_frequencies(params: LearnableParams, mode, seed=0, permutations=None):
    """Inference-time perturbation of the learned target frequencies.

    ``"reset"`` restores the recorded initialization; ``"shuffle"`` permutes
    the coordinates within each layer (``permutations`` overrides the random
    draw). Everything else is copied unchanged.
    """
    if params.init_freq_u is None:
        raise ConfigurationError("parameters carry no recorded initialization")
    out = params.copy()
    if mode == "reset":
        out.freq_u = [u.copy() for u in params.init_freq_u]
    elif mode == "shuffle":
        rng = np.random.default_rng(seed)
        new = []
        for i, u in enumerate(params.freq_u):
            perm = rng.permutation(len(u)) if permutations is None else np.asarray(permutations[i])
            if sorted(perm.tolist()) != list(range(len(u))):
                raise ConfigurationError(f"layer {i}: not a permutation of {len(u)} neurons")
            new.append(u[perm].copy())
        out.freq_u = new
    else:
        raise ConfigurationError(f"unknown perturbation mode {mode!r}")
    return out
