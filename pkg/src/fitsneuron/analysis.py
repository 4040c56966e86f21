"""Frequency-domain analysis of the FiTS neuron.

Continuous-time target frequency and its closed-form inverse, pole
comparison, the discrete-time response of the semi-implicit update with its
exact stationary candidates, a brute-force sweep oracle, and group-delay
tools for the all-pass cascade and its lambda-mixture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .errors import (DomainError, InternalConsistencyError, NearPoleError, RefineGridError,
                     SingularMixtureError)
from .neuron import FSParams, TSParams

__all__ = [
    "CTResponse",
    "DTResponse",
    "StationaryCandidates",
    "GroupDelayCurve",
    "PoleInfo",
    "SweepResult",
    "ct_magnitude_sq",
    "ct_target_frequency",
    "kappa_from_target",
    "dkappa_domega",
    "pole_analysis",
    "dt_transfer",
    "dt_magnitude_sq_cos",
    "dt_stationary_candidates",
    "realized_dt_target_sweep",
    "group_delay_numeric",
    "allpass_stage",
    "allpass_cascade",
    "mixed_single_stage",
    "ts_chain_response",
    "fs_delay_shift",
    "DEFAULT_GRID_SIZE",
    "DEFAULT_SWEEP_RESOLUTION_HZ",
    "analysis_grid",
]

DEFAULT_GRID_SIZE = 4096
DEFAULT_SWEEP_RESOLUTION_HZ = 1e-4


@dataclass(frozen=True)
class CTResponse:
    """Continuous-time subthreshold response ``(rho + jW) / ((mu rho + kappa - W^2) + j(mu + rho) W)``."""

    mu: float
    rho: float
    kappa: float

    def __post_init__(self):
        if not (self.mu > 0 and self.rho > 0 and self.kappa >= 0):
            raise DomainError(f"need mu > 0, rho > 0, kappa >= 0; got {self}")

    @classmethod
    def from_params(cls, p: FSParams):
        return cls(p.mu, p.rho, p.kappa)

    def __call__(self, omega):
        s = 1j * np.asarray(omega, dtype=float)
        return (self.rho + s) / (s * s + (self.mu + self.rho) * s + self.mu * self.rho + self.kappa)


@dataclass(frozen=True)
class DTResponse:
    """Discrete-time response of the semi-implicit update,
    ``H_d(z) = (z - rho_bar) / ((z - mu_bar)(z - rho_bar) + kappa_bar z)``."""

    mu_bar: float
    rho_bar: float
    kappa_bar: float
    dt: float

    def __post_init__(self):
        if not (0 < self.mu_bar < 1 and 0 < self.rho_bar < 1):
            raise DomainError("mu_bar and rho_bar must lie in (0, 1)")
        if self.kappa_bar < 0 or self.dt <= 0:
            raise DomainError("kappa_bar must be >= 0 and dt > 0")

    @classmethod
    def from_params(cls, p: FSParams):
        return cls(p.mu_bar, p.rho_bar, p.kappa_bar, p.dt)

    @classmethod
    def from_target(cls, tau_m, tau_a, dt, f_star):
        """Semi-implicit neuron whose continuous-time target is ``f_star`` Hz."""
        mu, rho = 1.0 / tau_m, 1.0 / tau_a
        kappa = float(kappa_from_target(mu, rho, 2.0 * math.pi * f_star))
        return cls(1.0 - mu * dt, 1.0 - rho * dt, kappa * dt * dt, dt)

    def __call__(self, omega):
        return dt_transfer(self, omega)

    def to_hz(self, omega):
        return np.asarray(omega) / (2.0 * math.pi * self.dt)


class StationaryCandidates(NamedTuple):
    x_plus: float
    x_minus: float
    omega_plus: float | None
    omega_minus: float | None
    omega_star: float | None
    branch: str | None

    def f_star(self, dt):
        """Selected realized target in Hz (0.0 for a low-pass response)."""
        return 0.0 if self.omega_star is None else self.omega_star / (2.0 * math.pi * dt)


class GroupDelayCurve(NamedTuple):
    omega_grid: np.ndarray
    delay: np.ndarray
    phase: np.ndarray


class PoleInfo(NamedTuple):
    complex: bool
    omega_pole: float | None


class SweepResult(NamedTuple):
    f_star: float
    omega_star: float
    lowpass: bool


def analysis_grid(n=DEFAULT_GRID_SIZE):
    """``n`` uniform points strictly inside (0, pi)."""
    return np.pi * (np.arange(n) + 0.5) / n


# -- continuous time -------------------------------------------------------

def ct_magnitude_sq(r: CTResponse, omega):
    omega = np.asarray(omega, dtype=float)
    w2 = omega * omega
    return (r.rho**2 + w2) / ((r.mu * r.rho + r.kappa - w2) ** 2 + (r.mu + r.rho) ** 2 * w2)


def ct_target_frequency(r: CTResponse):
    """Nonzero maximizer of ``|H(jW)|`` in rad/s, or ``None`` when the response is low-pass."""
    root = math.sqrt(r.kappa * (2 * r.rho**2 + 2 * r.rho * r.mu + r.kappa))
    if not root > r.rho**2:
        return None
    return math.sqrt(root - r.rho**2)


def kappa_from_target(mu, rho, omega_star):
    """Coupling ``kappa`` that places the magnitude peak at ``omega_star`` (rad/s).

    Uses the positive root of ``kappa^2 + 2 b kappa - c^2 = 0`` with
    ``b = rho (rho + mu)`` and ``c = omega_star^2 + rho^2`` written as
    ``c^2 / (b + hypot(b, c))``, which has no subtractive cancellation.
    Accepts numpy arrays.
    """
    omega_star = np.asarray(omega_star, dtype=float)
    if np.any(~(omega_star > 0)):
        raise DomainError("target frequency must be positive")
    b = rho * (rho + mu)
    c = omega_star * omega_star + rho * rho
    out = c * c / (b + np.hypot(b, c))
    return out if out.ndim else float(out)


def dkappa_domega(mu, rho, omega_star):
    """Derivative of ``kappa_from_target`` with respect to ``omega_star``."""
    omega_star = np.asarray(omega_star, dtype=float)
    b = rho * (rho + mu)
    c = omega_star * omega_star + rho * rho
    kappa = c * c / (b + np.hypot(b, c))
    return c / (kappa + b) * 2.0 * omega_star


def pole_analysis(r: CTResponse):
    """Whether the homogeneous poles are complex, and their imaginary part."""
    disc = 4 * (r.mu * r.rho + r.kappa) - (r.mu + r.rho) ** 2
    if disc > 0:
        return PoleInfo(True, 0.5 * math.sqrt(disc))
    return PoleInfo(False, None)


# -- discrete time ---------------------------------------------------------

def dt_transfer(d: DTResponse, omega):
    """``H_d(e^{jw})``; raises ``NearPoleError`` if the denominator vanishes."""
    z = np.exp(1j * np.asarray(omega, dtype=float))
    den = (z - d.mu_bar) * (z - d.rho_bar) + d.kappa_bar * z
    if np.any(np.abs(den) < 1e-14):
        raise NearPoleError("transfer function evaluated at a pole")
    return (z - d.rho_bar) / den


def dt_magnitude_sq_cos(d: DTResponse, x):
    """``|H_d|^2`` as a rational function of ``x = cos(w)``."""
    x = np.asarray(x, dtype=float)
    mb, rb, kb = d.mu_bar, d.rho_bar, d.kappa_bar
    s = kb - mb - rb
    num = 1 + rb * rb - 2 * rb * x
    den = 1 + s * s + mb * mb * rb * rb - 2 * mb * rb + 2 * s * (1 + mb * rb) * x + 4 * mb * rb * x * x
    return num / den


def dt_stationary_candidates(d: DTResponse):
    """Closed-form stationary points of ``|H_d(e^{jw})|`` in ``x = cos w``.

    The realized target is whichever interior candidate beats every other
    candidate and both band edges ``x = +-1``; ``branch`` records which root
    won.
    """
    mb, rb, kb = d.mu_bar, d.rho_bar, d.kappa_bar
    inner = (kb / mb) * ((1 - rb * rb) * (1 - mb * rb) + kb * rb)
    if inner < 0:
        raise InternalConsistencyError(f"negative discriminant {inner!r} for {d}")
    root = math.sqrt(inner)
    x_plus = (1 + rb * rb + root) / (2 * rb)
    x_minus = (1 + rb * rb - root) / (2 * rb)

    def interior(x):
        return math.acos(x) if -1 < x < 1 else None

    w_plus, w_minus = interior(x_plus), interior(x_minus)
    best_val = max(float(dt_magnitude_sq_cos(d, 1.0)), float(dt_magnitude_sq_cos(d, -1.0)))
    omega_star, branch = None, None
    for name, x, w in (("minus", x_minus, w_minus), ("plus", x_plus, w_plus)):
        if w is None:
            continue
        val = float(dt_magnitude_sq_cos(d, x))
        if val > best_val:
            best_val, omega_star, branch = val, w, name
    return StationaryCandidates(x_plus, x_minus, w_plus, w_minus, omega_star, branch)


def realized_dt_target_sweep(d: DTResponse, resolution=DEFAULT_SWEEP_RESOLUTION_HZ, grid_size=8192):
    """Brute-force argmax of ``|H_d(e^{jw})|`` in Hz.

    A uniform grid over ``[0, pi]`` locates the peak; golden-section search
    on the bracketing grid cell refines it well below ``resolution``. Evaluates
    the complex response directly and never uses the closed-form candidates.
    """
    if not resolution > 0:
        raise DomainError("resolution must be positive")
    grid = np.linspace(0.0, np.pi, grid_size + 1)
    mag = np.abs(dt_transfer(d, grid)) ** 2
    i = int(np.argmax(mag))
    if i == 0 or i == grid_size:
        return SweepResult(0.0, 0.0, True)
    w_tol = 2 * np.pi * d.dt * resolution * 1e-3
    res = optimize.minimize_scalar(
        lambda w: -abs(complex(dt_transfer(d, w))) ** 2,
        bracket=(grid[i - 1], grid[i], grid[i + 1]),
        method="golden",
        options={"xtol": min(1.4e-8, w_tol / grid[i])},
    )
    w = float(res.x)
    return SweepResult(w / (2 * np.pi * d.dt), w, False)


# -- group delay -----------------------------------------------------------

def _unwrap(phase):
    jumps = np.diff(phase)
    if np.any(np.abs(np.abs(jumps) - np.pi) <= 1e-6):
        raise RefineGridError("adjacent phase samples differ by ~pi; use a denser grid")
    corr = -2 * np.pi * np.round(jumps / (2 * np.pi))
    return phase + np.concatenate(([0.0], np.cumsum(corr)))


def group_delay_numeric(response: Callable, omega_grid):
    """Phase and group delay (samples) of ``response`` on a uniform grid.

    Phase is unwrapped; the delay is the negative derivative taken by
    second-order central differences (one-sided at the ends).
    """
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 3:
        raise DomainError("need a 1-D grid of at least 3 points")
    h = np.diff(grid)
    if np.any(h <= 0) or grid[0] <= 0 or grid[-1] >= np.pi:
        raise DomainError("grid must be strictly ascending inside (0, pi)")
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise DomainError("grid spacing must be uniform")
    phase = _unwrap(np.angle(response(grid)))
    delay = -np.gradient(phase, h[0], edge_order=2)
    return GroupDelayCurve(grid, delay, phase)


class StageResponse(NamedTuple):
    value: complex
    phase: float
    delay: float


def allpass_stage(beta, omega):
    """First-order all-pass ``(e^{-jw} - beta) / (1 - beta e^{-jw})`` with its analytic delay."""
    if not abs(beta) < 1:
        raise DomainError(f"all-pass coefficient must satisfy |beta| < 1, got {beta}")
    omega = np.asarray(omega, dtype=float)
    zi = np.exp(-1j * omega)
    value = (zi - beta) / (1 - beta * zi)
    delay = (1 - beta * beta) / (1 + beta * beta - 2 * beta * np.cos(omega))
    return StageResponse(value, np.angle(value), delay)


def allpass_cascade(betas, omega):
    """Product of first-order all-pass stages."""
    out = np.ones_like(np.asarray(omega, dtype=float), dtype=complex)
    for b in betas:
        out = out * allpass_stage(b, omega).value
    return out


class MixedStage(NamedTuple):
    delay: np.ndarray
    negative_region: np.ndarray


def mixed_single_stage(lambda1, beta1, omega):
    """Group delay of ``(1 - lam) + lam A_1`` and the exact negative-delay predicate."""
    st = allpass_stage(beta1, omega)
    cos_phi = np.cos(st.phase)
    num = lambda1 * (lambda1 + (1 - lambda1) * cos_phi)
    den = lambda1**2 + (1 - lambda1) ** 2 + 2 * lambda1 * (1 - lambda1) * cos_phi
    if np.any(den < 1e-14):
        raise SingularMixtureError("mixture magnitude vanishes (lambda = 1/2 with cos(phase) = -1)")
    delay = num / den * st.delay
    if lambda1 < 0.5:
        negative = cos_phi < -lambda1 / (1 - lambda1)
    else:
        negative = np.zeros_like(cos_phi, dtype=bool)
    return MixedStage(delay, negative)


def ts_chain_response(ts, omega):
    """Frequency response of the TS module (FS output normalized to 1).

    ``ts`` is a ``TSParams`` or a ``(beta, lam)`` pair of sequences.
    """
    if isinstance(ts, TSParams):
        beta, lam = ts.beta, ts.lam
    else:
        beta, lam = (np.asarray(x, dtype=float) for x in ts)
    omega = np.asarray(omega, dtype=float)
    path = np.ones_like(omega, dtype=complex)
    mixed = np.ones_like(omega, dtype=complex)
    for b, lm in zip(beta, lam):
        path = path * allpass_stage(b, omega).value
        mixed = (1 - lm) * mixed + lm * path
    return mixed


def fs_delay_shift(d: DTResponse, ts, omega_grid):
    """Delay of FS+TS minus delay of FS alone on the same grid."""
    fs_only = group_delay_numeric(d, omega_grid)
    full = group_delay_numeric(lambda w: d(w) * ts_chain_response(ts, w), omega_grid)
    return full.delay - fs_only.delay
