"""Network forward pass, reverse-mode gradients through the unrolled dynamics,
and evaluation."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..errors import DivergedTrainingError
from ..neuron import layer_forward
from .config import NetworkConfig
from .params import LearnableParams, layer_params

__all__ = [
    "surrogate_grad",
    "ForwardResult",
    "forward",
    "forward_backward",
    "layer_backward",
    "evaluate",
    "predict",
    "cross_entropy",
]


def surrogate_grad(v, v_th, width=1.0):
    """Triangular pseudo-derivative ``(1/w) max(0, 1 - |v - v_th| / w)``."""
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(v) - v_th) / width) / width


def cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient with respect to ``logits``."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    b = logits.shape[0]
    loss = -logp[np.arange(b), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(b), labels] -= 1.0
    return float(loss), grad / b


class ForwardResult(NamedTuple):
    logits: np.ndarray
    traces: list
    layer_params: list
    masks: list
    inputs: list


def forward(params: LearnableParams, cfg: NetworkConfig, x, *, spike_fn="heaviside", record=False,
            dropout_rng=None):
    """Hidden layers, then a readout summed over time.

    ``x`` has shape ``(B, T, N_in)``. Inverted dropout with probability
    ``cfg.dropout`` is applied to hidden spike outputs when ``dropout_rng`` is
    given; one mask per sample and neuron is shared across time.
    """
    h = np.asarray(x, dtype=float)
    traces, prms, masks, inputs = [], [], [], []
    for i in range(len(cfg.hidden)):
        prm, dcoef = layer_params(params, cfg, i)
        inputs.append(h)
        tr = layer_forward(params.weights[i], prm, h, cfg.v_th, spike_fn=spike_fn,
                           surrogate_width=cfg.surrogate_width, record=record)
        out = tr.spikes
        mask = None
        if dropout_rng is not None and cfg.dropout > 0:
            keep = dropout_rng.random((out.shape[0], 1, out.shape[2])) >= cfg.dropout
            mask = keep / (1.0 - cfg.dropout)
            out = out * mask
        traces.append(tr)
        prms.append((prm, dcoef))
        masks.append(mask)
        h = out
    inputs.append(h)
    logits = h.sum(axis=1) @ params.weights[-1].T
    return ForwardResult(logits, traces, prms, masks, inputs)


def layer_backward(cache, prm, g_out, v_th, *, spike_fn="heaviside", width=1.0, detach_reset=False):
    """Reverse pass of one layer.

    ``g_out`` is the loss gradient with respect to the emitted values, shape
    ``(B, T, N)``. Returns ``(g_currents (T, B, N), grads)`` where ``grads``
    holds per-neuron gradients of ``eta_dt``, ``gamma_dt``, ``beta`` and
    ``lam``. Batch contributions are summed in a fixed order.
    """
    g_out = np.moveaxis(np.asarray(g_out, dtype=float), -2, 0)
    v_all, a_all = cache["v"], cache["a"]
    stage_all, new_all, mix_all = cache["stage"], cache["new"], cache["mix"]
    steps = g_out.shape[0]
    order = prm.order
    shape = g_out.shape[1:]
    red = tuple(range(len(shape) - 1))

    gv = np.zeros(shape)
    ga = np.zeros(shape)
    gst = [np.zeros(shape) for _ in range(order + 1)]
    g_eta = np.zeros(prm.size)
    g_gamma = np.zeros(prm.size)
    g_beta = np.zeros((prm.size, order))
    g_lam = np.zeros((prm.size, order))
    g_cur = np.empty_like(g_out)

    for k in range(steps - 1, -1, -1):
        mixed = mix_all[k, order]
        if spike_fn == "linear":
            gmix = g_out[k] + gv
        else:
            ds = surrogate_grad(mixed, v_th, width)
            reset_path = gv if detach_reset else gv * (1.0 - v_th * ds)
            gmix = g_out[k] * ds + reset_path
        gnew = [g.copy() for g in gst]
        for m in range(order, 0, -1):
            lam = prm.lam[:, m - 1]
            gnew[m] += lam * gmix
            g_lam[:, m - 1] += (gmix * (new_all[k, m] - mix_all[k, m - 1])).sum(axis=red)
            gmix = (1.0 - lam) * gmix
        gnew[0] += gmix
        gold = [np.zeros(shape) for _ in range(order + 1)]
        for m in range(order, 0, -1):
            g = gnew[m]
            beta = prm.beta[:, m - 1]
            g_beta[:, m - 1] += (g * (stage_all[k, m] - new_all[k, m - 1])).sum(axis=red)
            gold[m] += beta * g
            gnew[m - 1] -= beta * g
            gold[m - 1] += g
        v0 = new_all[k, 0]
        gv0 = gnew[0] + prm.gamma_dt * ga
        g_gamma += (ga * v0).sum(axis=red)
        g_eta -= (gv0 * a_all[k]).sum(axis=red)
        g_cur[k] = gv0
        gv = prm.mu_bar * gv0
        ga = prm.rho_bar * ga - prm.eta_dt * gv0
        gst = gold
    grads = dict(eta_dt=g_eta, gamma_dt=g_gamma, beta=g_beta, lam=g_lam)
    return g_cur, grads


def forward_backward(params: LearnableParams, cfg: NetworkConfig, x, y, *, spike_fn="heaviside",
                     dropout_rng=None, step=None):
    """Loss, gradients for every array in ``params.all_arrays()`` and spike rates.

    Returns a dict with ``loss``, ``grads`` (keyed like ``all_arrays``) and
    ``spike_rates`` (mean emitted value per neuron per step, one array per
    hidden layer).
    """
    y = np.asarray(y)
    fw = forward(params, cfg, x, spike_fn=spike_fn, record=True, dropout_rng=dropout_rng)
    loss, g_logits = cross_entropy(fw.logits, y)
    if not math.isfinite(loss):
        raise DivergedTrainingError(f"non-finite loss at step {step}", step)
    grads = {}
    h_last = fw.inputs[-1]
    grads[f"w{len(cfg.hidden)}"] = g_logits.T @ h_last.sum(axis=1)
    # every time step of the last hidden layer feeds the summed readout
    g_h = np.broadcast_to((g_logits @ params.weights[-1])[:, None, :], h_last.shape)
    for i in range(len(cfg.hidden) - 1, -1, -1):
        tr = fw.traces[i]
        prm, dcoef = fw.layer_params[i]
        if fw.masks[i] is not None:
            g_h = g_h * fw.masks[i]
        g_cur, lg = layer_backward(tr.cache, prm, g_h, cfg.v_th, spike_fn=spike_fn,
                                   width=cfg.surrogate_width, detach_reset=cfg.detach_reset)
        x_in = fw.inputs[i]
        g_cur_b = np.moveaxis(g_cur, 0, -2)  # (B, T, N)
        grads[f"w{i}"] = np.einsum("btn,btm->nm", g_cur_b, x_in)
        beta, lam = prm.beta, prm.lam
        grads[f"bh{i}"] = lg["beta"] * (1.0 - beta * beta)
        grads[f"lh{i}"] = lg["lam"] * lam * (1.0 - lam)
        if dcoef is not None:
            grads[f"u{i}"] = (lg["eta_dt"] + lg["gamma_dt"]) * dcoef
        else:
            grads[f"u{i}"] = np.zeros_like(params.freq_u[i])
        if i > 0:
            g_h = g_cur_b @ params.weights[i]
    rates = [tr.spikes.mean(axis=(0, 1)) for tr in fw.traces]
    return dict(loss=loss, grads=grads, spike_rates=rates, logits=fw.logits)


def predict(params, cfg, x, batch_size=256):
    out = []
    for s in range(0, len(x), batch_size):
        out.append(forward(params, cfg, x[s:s + batch_size]).logits.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def evaluate(params, cfg, x, y, batch_size=256):
    """Accuracy and mean hidden firing rates (per linear-layer input) on ``(x, y)``."""
    correct = 0
    spikes = None
    total_steps = 0
    for s in range(0, len(x), batch_size):
        xb = x[s:s + batch_size]
        fw = forward(params, cfg, xb)
        correct += int((fw.logits.argmax(axis=1) == y[s:s + batch_size]).sum())
        sums = [float(h.sum()) for h in fw.inputs]
        spikes = sums if spikes is None else [a + b for a, b in zip(spikes, sums)]
        total_steps += xb.shape[0] * xb.shape[1]
    sizes = cfg.layer_sizes[:-1]
    rates = [sp / (total_steps * n) for sp, n in zip(spikes, sizes)] if spikes else []
    return dict(accuracy=correct / max(len(x), 1), firing_rates=rates)
