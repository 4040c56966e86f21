from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigurationError
from ..neuron import FSParams
from ..stability import max_stable_target_frequency

__all__ = ["NetworkConfig", "VARIANTS", "STABILITY_MARGIN", "energy_variant"]

VARIANTS = ("lif", "adapt-frozen", "fs-frozen", "fs")
# learnable target frequencies are capped at this fraction of the semi-implicit limit
STABILITY_MARGIN = 0.95


def _per_layer(value, n, name):
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ConfigurationError(f"{name} needs one entry per hidden layer ({n}), got {len(value)}")
        return tuple(value)
    return (value,) * n


@dataclass
class NetworkConfig:
    """Feedforward FiTS network and its training recipe.

    ``variant`` selects the neuron model: ``"lif"`` (no adaptation),
    ``"adapt-frozen"`` (adaptation frozen at zero coupling), ``"fs-frozen"``
    (log-spaced target frequencies, not trained) or ``"fs"`` (learnable
    target frequencies). ``order`` adds TS stages to any variant. ``order``,
    ``tau_m`` and ``tau_a`` may be given per hidden layer.
    """

    n_inputs: int
    n_classes: int
    hidden: tuple = (32, 32)
    variant: str = "fs"
    order: int | tuple = 0
    v_th: float = 1.0
    tau_m: float | tuple = 0.04
    tau_a: float | tuple = 0.2
    dt: float = 0.004
    f_min: float = 1.0
    f_max: float = 50.0
    dropout: float = 0.0
    seed: int = 0
    weight_gain: float = 1.0
    surrogate_width: float = 1.0
    detach_reset: bool = False
    lr: float = 2e-3
    freq_lr_scale: float = 1.0
    epochs: int = 30
    batch_size: int = 32

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        n = len(self.hidden)
        if n < 1 or any(h < 1 for h in self.hidden) or self.n_inputs < 1 or self.n_classes < 1:
            raise ConfigurationError("layer widths must be >= 1 and at least one hidden layer is required")
        self.order = tuple(int(m) for m in _per_layer(self.order, n, "order"))
        self.tau_m = tuple(float(t) for t in _per_layer(self.tau_m, n, "tau_m"))
        self.tau_a = tuple(float(t) for t in _per_layer(self.tau_a, n, "tau_a"))
        if any(m < 0 for m in self.order):
            raise ConfigurationError("TS order must be >= 0")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0 < self.f_min < self.f_max:
            raise ConfigurationError("need 0 < f_min < f_max")
        if not 0 <= self.dropout < 1:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if not (self.v_th > 0 and self.surrogate_width > 0):
            raise ConfigurationError("v_th and surrogate_width must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("epochs must be >= 0 and batch_size >= 1")
        for i in range(n):
            cap = self.frequency_cap(i)
            if not self.f_max < cap:
                raise ConfigurationError(
                    f"f_max={self.f_max} Hz violates the stability cap {cap:.4f} Hz of layer {i} "
                    f"({STABILITY_MARGIN} x semi-implicit limit)"
                )

    @property
    def layer_sizes(self):
        return (self.n_inputs, *self.hidden, self.n_classes)

    def fs_constants(self, layer):
        return FSParams(self.tau_m[layer], self.tau_a[layer], self.dt)

    def frequency_cap(self, layer):
        lim = max_stable_target_frequency(self.fs_constants(layer), "semi-implicit")
        return STABILITY_MARGIN * lim.hz

    @property
    def learns_frequency(self):
        return self.variant == "fs"

    @property
    def uses_frequency(self):
        return self.variant in ("fs", "fs-frozen")

    def to_dict(self):
        d = asdict(self)
        for k in ("hidden", "order", "tau_m", "tau_a"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown network config keys: {unknown}")
        return cls(**d)


def energy_variant(cfg: NetworkConfig):
    """Map a network variant to the energy module's variant name and TS order."""
    order = max(cfg.order)
    if cfg.variant == "lif":
        return "plainLIF", order
    if cfg.variant == "adapt-frozen":
        return "adaptFrozen", order
    return ("FS", 0) if order == 0 else ("FS+TS", order)
