"""Theoretical event-driven energy from AC/MAC operation counts.

Counting rules (version ``COUNTING_RULES_VERSION``), per hidden neuron per step:

* plain LIF: 1 MAC (leak multiply-add)
* adaptive LIF and FS: 4 MACs (two coupled semi-implicit updates)
* each TS stage: +3 MACs (all-pass multiply, two mixing multiplies)
* threshold compare and reset subtraction: 2 ACs

Synaptic accumulates are spike driven: a linear layer with input firing
rate ``r`` costs ``r * N_in * N_out * T`` ACs. The readout layer counts as a
linear layer but has no neuron-internal cost.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "E_AC_PJ",
    "E_MAC_PJ",
    "COUNTING_RULES_VERSION",
    "NEURON_MACS",
    "VARIANTS",
    "LayerOps",
    "OpCounts",
    "EnergyReport",
    "count_operations",
    "estimate_energy",
    "instrumented_run",
]

E_AC_PJ = 0.9
E_MAC_PJ = 4.6
COUNTING_RULES_VERSION = "1"
NEURON_MACS = {"plainLIF": 1, "adaptFrozen": 4, "FS": 4, "FS+TS": 4}
TS_STAGE_MACS = 3
THRESHOLD_RESET_ACS = 2
VARIANTS = tuple(NEURON_MACS)


@dataclass
class LayerOps:
    synaptic_acs: float = 0
    synaptic_macs: float = 0
    neuron_acs: float = 0
    neuron_macs: float = 0


@dataclass
class OpCounts:
    layers: list = field(default_factory=list)

    @property
    def acs(self):
        return sum(l.synaptic_acs + l.neuron_acs for l in self.layers)

    @property
    def macs(self):
        return sum(l.synaptic_macs + l.neuron_macs for l in self.layers)

    def category(self, name):
        """``(acs, macs)`` totals for ``"synaptic"`` or ``"neuron"``."""
        if name not in ("synaptic", "neuron"):
            raise ConfigurationError(f"unknown category {name!r}")
        return (sum(getattr(l, f"{name}_acs") for l in self.layers),
                sum(getattr(l, f"{name}_macs") for l in self.layers))


def _layer_sizes(cfg):
    sizes = getattr(cfg, "layer_sizes", cfg)
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigurationError("need at least input and output sizes, all >= 1")
    return sizes


def neuron_macs_per_step(variant, order=0):
    if variant not in NEURON_MACS:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if order < 0:
        raise ConfigurationError("TS order must be >= 0")
    return NEURON_MACS[variant] + TS_STAGE_MACS * order


def count_operations(cfg, variant, firing_rates, steps, order=0):
    """Operation counts for a feedforward network.

    Parameters
    ----------
    cfg : NetworkConfig or sequence of ints
        Layer sizes ``[N_in, hidden..., N_classes]``.
    variant : one of ``VARIANTS``
    firing_rates : sequence
        Input firing rate (spikes per channel per step) of each linear layer,
        one per layer including the readout. ``Fraction`` values give exact
        counts.
    steps : int
    order : int
        Number of TS stages added to the variant.
    """
    sizes = _layer_sizes(cfg)
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    rates = list(firing_rates)
    if len(rates) != len(sizes) - 1:
        raise ConfigurationError(f"need {len(sizes) - 1} firing rates, got {len(rates)}")
    if any(not (0 <= r <= 1) for r in rates):
        raise ConfigurationError("firing rates must lie in [0, 1]")
    per_neuron = neuron_macs_per_step(variant, order)
    out = OpCounts()
    for idx, (n_in, n_out, r) in enumerate(zip(sizes[:-1], sizes[1:], rates)):
        lo = LayerOps(synaptic_acs=r * (n_in * n_out * steps))
        if idx < len(sizes) - 2:
            lo.neuron_macs = per_neuron * n_out * steps
            lo.neuron_acs = THRESHOLD_RESET_ACS * n_out * steps
        out.layers.append(lo)
    return out


@dataclass
class EnergyReport:
    """Energies in microjoules."""

    e_layer: float
    e_neuron: float
    e_total: float
    layers: list
    e_ac_pj: float = E_AC_PJ
    e_mac_pj: float = E_MAC_PJ
    counting_rules_version: str = COUNTING_RULES_VERSION

    def to_json(self, **extra):
        doc = {
            "constants": {"e_ac_pj": self.e_ac_pj, "e_mac_pj": self.e_mac_pj},
            "counting_rules_version": self.counting_rules_version,
            "counting_rules": {
                "neuron_macs_per_step": NEURON_MACS,
                "ts_stage_macs": TS_STAGE_MACS,
                "threshold_reset_acs": THRESHOLD_RESET_ACS,
            },
            "e_layer_uj": self.e_layer,
            "e_neuron_uj": self.e_neuron,
            "e_total_uj": self.e_total,
            "layers": self.layers,
        }
        doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=True)


def _uj(acs, macs):
    return (float(acs) * E_AC_PJ + float(macs) * E_MAC_PJ) * 1e-6


def estimate_energy(c: OpCounts):
    layers = []
    for i, l in enumerate(c.layers):
        layers.append({
            "layer": i,
            **{k: float(v) for k, v in asdict(l).items()},
            "e_layer_uj": _uj(l.synaptic_acs, l.synaptic_macs),
            "e_neuron_uj": _uj(l.neuron_acs, l.neuron_macs),
        })
    e_layer = _uj(*c.category("synaptic"))
    e_neuron = _uj(*c.category("neuron"))
    return EnergyReport(e_layer, e_neuron, e_layer + e_neuron, layers)


class _Tally:
    def __init__(self):
        self.acs = 0
        self.macs = 0

    def mul(self, a, b):
        self.macs += 1
        return a * b

    def acc(self, a, b):
        self.acs += 1
        return a + b


def instrumented_run(weights, layers, spikes_in, variant, v_th=1.0):
    """Event-driven scalar simulation that tallies every operation it performs.

    ``weights`` lists the weight matrices of all linear layers (the last is
    the readout); ``layers`` lists a ``LayerParams`` per hidden layer. Returns
    ``(OpCounts, rates)`` with measured input rates as exact fractions, and the
    output spikes of each hidden layer.
    """
    neuron_macs_per_step(variant, layers[0].order if layers else 0)
    x = np.asarray(spikes_in)
    steps = x.shape[0]
    counts = OpCounts()
    rates = []
    hidden_out = []
    for li, w in enumerate(weights):
        w = np.asarray(w, dtype=float)
        n_out, n_in = w.shape
        rates.append(Fraction(int(x.sum()), n_in * steps))
        syn = _Tally()
        currents = np.zeros((steps, n_out))
        for k in range(steps):
            cur = [0.0] * n_out
            for i in np.flatnonzero(x[k]):
                for j in range(n_out):
                    cur[j] = syn.acc(cur[j], w[j, i])
            currents[k] = cur
        lo = LayerOps(synaptic_acs=syn.acs)
        if li < len(layers):
            prm = layers[li]
            neu = _Tally()
            out = np.zeros((steps, n_out), dtype=np.int8)
            for j in range(n_out):
                v = a = 0.0
                stage = [0.0] * (prm.order + 1)
                for k in range(steps):
                    if variant == "plainLIF":
                        v0 = neu.mul(prm.mu_bar[j], v) + currents[k, j]
                    else:
                        v0 = neu.mul(prm.mu_bar[j], v) - neu.mul(prm.eta_dt[j], a) + currents[k, j]
                        a = neu.mul(prm.rho_bar[j], a) + neu.mul(prm.gamma_dt[j], v0)
                    new = [v0]
                    mixed = v0
                    for m in range(1, prm.order + 1):
                        vm = neu.mul(prm.beta[j, m - 1], stage[m] - new[m - 1]) + stage[m - 1]
                        new.append(vm)
                        mixed = neu.mul(1.0 - prm.lam[j, m - 1], mixed) + neu.mul(prm.lam[j, m - 1], vm)
                    stage = new
                    neu.acs += 1  # threshold compare
                    s = 1 if mixed >= v_th else 0
                    v = neu.acc(mixed, -v_th if s else 0.0)
                    out[k, j] = s
            lo.neuron_macs = neu.macs
            lo.neuron_acs = neu.acs
            hidden_out.append(out)
            x = out
        counts.layers.append(lo)
    return counts, rates, hidden_out
