"""Zero-input stability of the explicit and semi-implicit FS discretizations.

Jury margins of the 2x2 state matrix, the closed-form coupling bounds they
imply, the largest target frequency each scheme can hold, and zero-input
trajectories for export.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "StateMatrix2x2",
    "StabilityReport",
    "KappaBounds",
    "FrequencyLimit",
    "Trajectory",
    "SCHEMES",
    "build_state_matrix",
    "jury_assess",
    "explicit_kappa_bound",
    "semi_implicit_kappa_bound",
    "kappa_stability_bounds",
    "target_frequency_for_bound",
    "max_stable_target_frequency",
    "zero_input_trajectory",
    "write_trajectory_csv",
    "DIVERGENCE_LIMIT",
]

SCHEMES = ("explicit", "semi-implicit")
DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class StateMatrix2x2:
    a11: float
    a12: float
    a21: float
    a22: float
    scheme: str

    @property
    def trace(self):
        return self.a11 + self.a22

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def as_array(self):
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])


class StabilityReport(NamedTuple):
    jury_1mTpD: float
    jury_1pTpD: float
    jury_1mD: float
    stable: bool
    spectral_radius: float

    def violated(self):
        """Names of the Jury margins that are not strictly positive."""
        names = ("1-T+D", "1+T+D", "1-D")
        return [n for n, m in zip(names, self[:3]) if not m > 0]


class KappaBounds(NamedTuple):
    explicit: float
    semi_implicit: float


class FrequencyLimit(NamedTuple):
    hz: float
    lowpass: bool
    kappa_bound: float


def build_state_matrix(p, scheme="semi-implicit"):
    """Zero-input update matrix acting on ``(V, a)``."""
    dt = p.dt
    if scheme == "explicit":
        return StateMatrix2x2(1 - p.mu * dt, -p.eta * dt, p.gamma * dt, 1 - p.rho * dt, scheme)
    if scheme == "semi-implicit":
        return StateMatrix2x2(
            1 - p.mu * dt,
            -p.eta * dt,
            p.gamma * dt * (1 - p.mu * dt),
            1 - p.rho * dt - p.kappa * dt * dt,
            scheme,
        )
    raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def jury_assess(m: StateMatrix2x2):
    """Second-order Jury test on ``lambda^2 - T lambda + D``."""
    t, d = m.trace, m.det
    margins = (1 - t + d, 1 + t + d, 1 - d)
    eig = np.roots([1.0, -t, d])
    radius = float(np.max(np.abs(eig)))
    return StabilityReport(*margins, all(x > 0 for x in margins), radius)


def explicit_kappa_bound(mu, rho, dt):
    return (mu + rho) / dt - mu * rho


def semi_implicit_kappa_bound(mu, rho, dt):
    return mu * rho + 4 / dt**2 - 2 * (mu + rho) / dt


def kappa_stability_bounds(p):
    return KappaBounds(explicit_kappa_bound(p.mu, p.rho, p.dt), semi_implicit_kappa_bound(p.mu, p.rho, p.dt))


def target_frequency_for_bound(mu, rho, kappa_bound):
    """Target frequency (Hz) realized at ``kappa = kappa_bound``; zero with the
    low-pass flag when the bound does not reach the emergence threshold."""
    from .analysis import CTResponse, ct_target_frequency

    if not kappa_bound > 0:
        return FrequencyLimit(0.0, True, kappa_bound)
    omega = ct_target_frequency(CTResponse(mu, rho, kappa_bound))
    if omega is None:
        return FrequencyLimit(0.0, True, kappa_bound)
    return FrequencyLimit(omega / (2 * math.pi), False, kappa_bound)


def max_stable_target_frequency(p, scheme="semi-implicit"):
    bounds = kappa_stability_bounds(p)
    if scheme == "explicit":
        bound = bounds.explicit
    elif scheme == "semi-implicit":
        bound = bounds.semi_implicit
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    return target_frequency_for_bound(p.mu, p.rho, bound)


class Trajectory(NamedTuple):
    step: np.ndarray
    v: np.ndarray
    a: np.ndarray
    diverged: bool


def zero_input_trajectory(p, scheme, v0, a0, steps):
    """Iterate the zero-input state matrix from ``(v0, a0)``.

    Stops early (``diverged=True``) once ``|V|`` exceeds ``DIVERGENCE_LIMIT``.
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    m = build_state_matrix(p, scheme)
    vs = [float(v0)]
    as_ = [float(a0)]
    diverged = False
    v, a = float(v0), float(a0)
    for _ in range(steps):
        v, a = m.a11 * v + m.a12 * a, m.a21 * v + m.a22 * a
        if not abs(v) <= DIVERGENCE_LIMIT:
            diverged = True
            break
        vs.append(v)
        as_.append(a)
    return Trajectory(np.arange(len(vs)), np.array(vs), np.array(as_), diverged)


def write_trajectory_csv(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "V", "a"])
        for k, v, a in zip(traj.step, traj.v, traj.a):
            w.writerow([int(k), repr(float(v)), repr(float(a))])
