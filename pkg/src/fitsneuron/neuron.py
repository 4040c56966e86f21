"""Discrete-time FiTS neuron: semi-implicit FS update, all-pass TS cascade,
spike generation and subtractive soft reset.

Two forms are provided. The scalar functions (``fs_step``, ``ts_step``,
``fire_and_reset``, ``fits_step``) act on one neuron and are the reference.
``layer_forward`` runs a whole feedforward layer over time with numpy and
performs the same floating point operations in the same order, so both forms
agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, NumericOverflowError

__all__ = [
    "FSParams",
    "TSParams",
    "NeuronState",
    "SpikeOutput",
    "LayerParams",
    "LayerTrace",
    "fs_step",
    "ts_step",
    "fire_and_reset",
    "fits_step",
    "simulate_neuron",
    "synaptic_currents",
    "layer_forward",
    "relaxed_spike",
]


@dataclass(frozen=True)
class FSParams:
    """Continuous-time constants of the FS module and their discrete coefficients.

    Parameters
    ----------
    tau_m, tau_a : float
        Membrane and adaptation time constants in seconds.
    dt : float
        Simulation step in seconds, ``0 < dt < min(tau_m, tau_a)``.
    eta, gamma : float
        Adaptation feedback and voltage-to-adaptation coupling (both >= 0).
    strict : bool
        When true (default) the coupling ``kappa = eta * gamma`` must lie
        strictly below the semi-implicit stability bound.
    """

    tau_m: float
    tau_a: float
    dt: float
    eta: float = 0.0
    gamma: float = 0.0
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not (self.tau_m > 0 and self.tau_a > 0):
            raise ConfigurationError(f"time constants must be positive, got tau_m={self.tau_m}, tau_a={self.tau_a}")
        if not (0 < self.dt < min(self.tau_m, self.tau_a)):
            raise ConfigurationError(f"dt={self.dt} must satisfy 0 < dt < min(tau_m, tau_a)")
        if self.eta < 0 or self.gamma < 0:
            raise ConfigurationError("eta and gamma must be nonnegative")
        if self.strict:
            from .stability import semi_implicit_kappa_bound

            bound = semi_implicit_kappa_bound(self.mu, self.rho, self.dt)
            if not self.kappa < bound:
                raise ConfigurationError(
                    f"kappa={self.kappa:.6g} is not below the semi-implicit stability bound {bound:.6g}"
                )

    @classmethod
    def from_kappa(cls, tau_m, tau_a, dt, kappa, strict=True):
        """Build with the default ``eta = gamma = sqrt(kappa)`` split."""
        if kappa < 0:
            raise ConfigurationError(f"kappa must be nonnegative, got {kappa}")
        root = math.sqrt(kappa)
        return cls(tau_m, tau_a, dt, root, root, strict=strict)

    @classmethod
    def from_target(cls, tau_m, tau_a, dt, f_star, strict=True):
        """Build from a continuous-time target frequency ``f_star`` in Hz."""
        from .analysis import kappa_from_target

        kappa = kappa_from_target(1.0 / tau_m, 1.0 / tau_a, 2.0 * math.pi * f_star)
        return cls.from_kappa(tau_m, tau_a, dt, float(kappa), strict=strict)

    @property
    def mu(self):
        return 1.0 / self.tau_m

    @property
    def rho(self):
        return 1.0 / self.tau_a

    @property
    def kappa(self):
        return self.eta * self.gamma

    @property
    def mu_bar(self):
        return 1.0 - self.mu * self.dt

    @property
    def rho_bar(self):
        return 1.0 - self.rho * self.dt

    @property
    def kappa_bar(self):
        return self.eta * self.gamma * self.dt**2

    @property
    def eta_dt(self):
        return self.eta * self.dt

    @property
    def gamma_dt(self):
        return self.gamma * self.dt

    @property
    def eta_equals_gamma(self):
        """True when the default ``eta = gamma`` constraint holds."""
        return self.eta == self.gamma


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class TSParams:
    """All-pass coefficients and mixing weights in unconstrained coordinates.

    ``beta = tanh(beta_hat)`` lies in (-1, 1) and ``lam = sigmoid(lambda_hat)``
    in (0, 1). ``order == 0`` is the FS-only neuron.
    """

    beta_hat: tuple = ()
    lambda_hat: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "beta_hat", tuple(float(b) for b in self.beta_hat))
        object.__setattr__(self, "lambda_hat", tuple(float(b) for b in self.lambda_hat))
        if len(self.beta_hat) != len(self.lambda_hat):
            raise ConfigurationError("beta_hat and lambda_hat must have the same length")

    @classmethod
    def from_constrained(cls, beta, lam):
        beta = np.asarray(beta, dtype=float)
        lam = np.asarray(lam, dtype=float)
        if np.any(np.abs(beta) >= 1):
            raise ConfigurationError("all-pass coefficients need |beta| < 1")
        if np.any((lam < 0) | (lam > 1)):
            raise ConfigurationError("mixing weights need 0 <= lambda <= 1")
        with np.errstate(divide="ignore"):
            lam_hat = np.log(lam) - np.log1p(-lam)
        return cls(tuple(np.arctanh(beta)), tuple(lam_hat))

    @classmethod
    def identity(cls, order=0):
        return cls((0.0,) * order, (-np.inf,) * order)

    @property
    def order(self):
        return len(self.beta_hat)

    @property
    def beta(self):
        return np.tanh(np.asarray(self.beta_hat, dtype=float))

    @property
    def lam(self):
        return _sigmoid(self.lambda_hat)


@dataclass(frozen=True)
class NeuronState:
    """Carried voltage ``v``, adaptation ``a`` and stage history ``V_0..V_M``."""

    v: float
    a: float
    stage_v: tuple

    @classmethod
    def zeros(cls, order=0):
        return cls(0.0, 0.0, (0.0,) * (order + 1))

    @property
    def order(self):
        return len(self.stage_v) - 1


class SpikeOutput(NamedTuple):
    s: int
    v_next: float
    pre_reset_v: float


def fs_step(p: FSParams, v, a, i):
    """One semi-implicit Euler step of the FS module.

    Returns the pre-reset FS voltage ``V_0[k+1]`` and ``a[k+1]``; the
    adaptation update already sees the new voltage.
    """
    v0_next = p.mu_bar * v - p.eta_dt * a + i
    a_next = p.rho_bar * a + p.gamma_dt * v0_next
    return v0_next, a_next


def ts_step(ts: TSParams, stage_v_prev: Sequence[float], v0_next):
    """Advance the all-pass cascade one step and mix the stage outputs.

    Returns the new stage list (slot 0 holds ``v0_next``) and the mixed
    pre-reset voltage.
    """
    if len(stage_v_prev) != ts.order + 1:
        raise ConfigurationError(
            f"stage history has length {len(stage_v_prev)}, expected {ts.order + 1} for order {ts.order}"
        )
    beta = ts.beta
    lam = ts.lam
    new = [v0_next]
    mixed = v0_next
    for m in range(1, ts.order + 1):
        b = float(beta[m - 1])
        lm = float(lam[m - 1])
        vm = b * (stage_v_prev[m] - new[m - 1]) + stage_v_prev[m - 1]
        new.append(vm)
        mixed = (1.0 - lm) * mixed + lm * vm
    return new, mixed


def fire_and_reset(v_mixed, v_th):
    """Threshold and subtract. Exact equality with ``v_th`` fires."""
    s = 1 if v_mixed >= v_th else 0
    v_next = v_mixed - v_th if s else v_mixed
    return SpikeOutput(s, v_next, v_mixed)


def fits_step(p: FSParams, ts: TSParams, st: NeuronState, i, v_th):
    """Full discrete-time update of one neuron.

    Stage histories and the adaptation current are never reset on a spike.
    """
    v0_next, a_next = fs_step(p, st.v, st.a, i)
    stages, mixed = ts_step(ts, st.stage_v, v0_next)
    out = fire_and_reset(mixed, v_th)
    return NeuronState(out.v_next, a_next, tuple(stages)), out


def simulate_neuron(p: FSParams, ts: TSParams, currents, v_th, neuron=0):
    """Scalar reference loop over a current sequence.

    Returns ``(spikes, pre_reset, final_state)``.
    """
    st = NeuronState.zeros(ts.order)
    spikes = np.zeros(len(currents), dtype=np.int8)
    pre = np.zeros(len(currents))
    for k, i in enumerate(currents):
        st, out = fits_step(p, ts, st, float(i), v_th)
        if not (math.isfinite(st.v) and math.isfinite(st.a)):
            raise NumericOverflowError(f"non-finite state in neuron {neuron} at step {k}", neuron, k)
        spikes[k] = out.s
        pre[k] = out.pre_reset_v
    return spikes, pre, st


@dataclass
class LayerParams:
    """Per-neuron coefficient arrays for a layer of ``N`` neurons with order ``M``."""

    mu_bar: np.ndarray
    rho_bar: np.ndarray
    eta_dt: np.ndarray
    gamma_dt: np.ndarray
    beta: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        n = self.mu_bar.shape[0]
        for name in ("rho_bar", "eta_dt", "gamma_dt"):
            if getattr(self, name).shape != (n,):
                raise ConfigurationError(f"{name} must have shape ({n},)")
        self.beta = np.asarray(self.beta, dtype=float).reshape(n, -1)
        self.lam = np.asarray(self.lam, dtype=float).reshape(n, -1)
        if self.beta.shape != self.lam.shape:
            raise ConfigurationError("beta and lambda arrays must have equal shapes")

    @property
    def size(self):
        return self.mu_bar.shape[0]

    @property
    def order(self):
        return self.beta.shape[1]

    @classmethod
    def from_neurons(cls, fs: Sequence[FSParams], ts: Sequence[TSParams]):
        if len(fs) != len(ts):
            raise ConfigurationError("need one TSParams per FSParams")
        dts = {p.dt for p in fs}
        if len(dts) > 1:
            raise ConfigurationError("all neurons in a layer must share dt")
        orders = {t.order for t in ts}
        if len(orders) > 1:
            raise ConfigurationError("all neurons in a layer must share the TS order")
        order = orders.pop() if orders else 0
        n = len(fs)
        beta = np.array([t.beta for t in ts], dtype=float).reshape(n, order)
        lam = np.array([t.lam for t in ts], dtype=float).reshape(n, order)
        return cls(
            np.array([p.mu_bar for p in fs]),
            np.array([p.rho_bar for p in fs]),
            np.array([p.eta_dt for p in fs]),
            np.array([p.gamma_dt for p in fs]),
            beta,
            lam,
        )

    def astype(self, dtype):
        return LayerParams(*(np.asarray(getattr(self, f), dtype=dtype) for f in
                             ("mu_bar", "rho_bar", "eta_dt", "gamma_dt", "beta", "lam")))


@dataclass
class LayerTrace:
    """Outputs of ``layer_forward``. Arrays put time on axis ``-2``.

    ``spikes`` holds the emitted values (binary for the Heaviside mode),
    ``pre_reset`` the mixed voltage before reset. When recorded, ``cache``
    keeps the per-step states needed for backpropagation (time on axis 0).
    """

    spikes: np.ndarray
    pre_reset: np.ndarray
    cache: dict | None = None


def relaxed_spike(d, width):
    """Integral of the triangular surrogate: a C1 ramp from 0 to 1 on ``[-w, w]``."""
    d = np.asarray(d)
    w2 = 2.0 * width * width
    lo = (d + width) ** 2 / w2
    hi = 1.0 - (width - d) ** 2 / w2
    return np.where(d <= -width, 0.0, np.where(d <= 0.0, lo, np.where(d < width, hi, 1.0)))


def synaptic_currents(weights, spikes_in):
    """Input current ``I[k] = W s_in[k]`` for every step at once."""
    weights = np.asarray(weights)
    spikes_in = np.asarray(spikes_in, dtype=weights.dtype)
    if weights.ndim != 2 or spikes_in.shape[-1] != weights.shape[1]:
        raise ConfigurationError(
            f"weights {weights.shape} do not match input channels {spikes_in.shape[-1]}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        return spikes_in @ weights.T


def layer_forward(weights, params: LayerParams, spikes_in, v_th=1.0, *, spike_fn="heaviside",
                  surrogate_width=1.0, dtype=np.float64, record=False):
    """Run a feedforward FiTS layer over time.

    Parameters
    ----------
    weights : (N_out, N_in) array
    params : LayerParams with ``N_out`` neurons
    spikes_in : (..., T, N_in) array
        Input spikes; leading axes are independent samples.
    v_th : float
    spike_fn : {"heaviside", "relaxed", "linear"}
        ``"heaviside"`` is the spiking neuron. ``"relaxed"`` replaces the step
        by ``relaxed_spike`` in the forward pass. ``"linear"`` disables
        spiking and reset and emits the pre-reset voltage itself.
    record : bool
        Keep the intermediate states for ``training.model.backward``.
    """
    weights = np.asarray(weights, dtype=dtype)
    if weights.shape[0] != params.size:
        raise ConfigurationError(f"weights have {weights.shape[0]} rows but layer has {params.size} neurons")
    if spike_fn not in ("heaviside", "relaxed", "linear"):
        raise ConfigurationError(f"unknown spike_fn {spike_fn!r}")
    prm = params.astype(dtype)
    currents = synaptic_currents(weights, np.asarray(spikes_in, dtype=dtype))
    currents = np.moveaxis(currents, -2, 0)  # (T, ..., N)
    steps = currents.shape[0]
    shape = currents.shape[1:]
    order = prm.order
    one_minus_lam = (1.0 - prm.lam).astype(dtype)
    v_th = dtype(v_th) if dtype is not np.float64 else float(v_th)

    v = np.zeros(shape, dtype)
    a = np.zeros(shape, dtype)
    stage = [np.zeros(shape, dtype) for _ in range(order + 1)]
    out_s = np.empty((steps,) + shape, dtype)
    out_p = np.empty((steps,) + shape, dtype)
    if record:
        rec_v = np.empty((steps,) + shape, dtype)
        rec_a = np.empty((steps,) + shape, dtype)
        rec_stage = np.empty((steps, order + 1) + shape, dtype)
        rec_new = np.empty((steps, order + 1) + shape, dtype)
        rec_mix = np.empty((steps, order + 1) + shape, dtype)

    # overflow surfaces as NumericOverflowError below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            if record:
                rec_v[k] = v
                rec_a[k] = a
                for m in range(order + 1):
                    rec_stage[k, m] = stage[m]
            v0 = prm.mu_bar * v - prm.eta_dt * a + currents[k]
            a = prm.rho_bar * a + prm.gamma_dt * v0
            new = [v0]
            mixed = v0
            if record:
                rec_mix[k, 0] = mixed
            for m in range(1, order + 1):
                vm = prm.beta[:, m - 1] * (stage[m] - new[m - 1]) + stage[m - 1]
                new.append(vm)
                mixed = one_minus_lam[:, m - 1] * mixed + prm.lam[:, m - 1] * vm
                if record:
                    rec_mix[k, m] = mixed
            stage = new
            if record:
                for m in range(order + 1):
                    rec_new[k, m] = new[m]
            if spike_fn == "heaviside":
                fired = mixed >= v_th
                s = fired.astype(dtype)
                v = np.where(fired, mixed - v_th, mixed)
            elif spike_fn == "relaxed":
                s = relaxed_spike(mixed - v_th, surrogate_width).astype(dtype)
                v = mixed - s * v_th
            else:
                s = mixed
                v = mixed
            out_s[k] = s
            out_p[k] = mixed

    if not (np.all(np.isfinite(out_p)) and np.all(np.isfinite(v)) and np.all(np.isfinite(a))):
        bad = np.argwhere(~np.isfinite(out_p))
        k, neuron = (int(bad[0][0]), int(bad[0][-1])) if len(bad) else (steps - 1, -1)
        raise NumericOverflowError(f"non-finite state in neuron {neuron} at step {k}", neuron, k)

    cache = None
    if record:
        cache = dict(v=rec_v, a=rec_a, stage=rec_stage, new=rec_new, mix=rec_mix,
                     currents=currents, spikes_in=np.asarray(spikes_in, dtype=dtype))
    return LayerTrace(np.moveaxis(out_s, 0, -2), np.moveaxis(out_p, 0, -2), cache)
