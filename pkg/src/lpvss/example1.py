"""Three realizations of one scalar LPV system with noise.

Input-output form::

    y[t] = -p[t] y[t-1] + p[t] u[t-1] + e[t] + e[t-1]

State-minimal realization, rational and dynamic in ``p`` (reads ``p[t+1]``)::

    x[t+1] = -p[t] x[t] + u[t] + (1 - p[t+1]) / p[t+1] e[t]
    y[t]   =  p[t] x[t] + e[t]

Two-state realization with static affine dependence::

    xa[t+1] = [[-p[t], 1], [0, 0]] xa[t] + [[-1, 1], [0, 1]] [u[t]; e[t]]
    y[t]    = [-p[t], 1] xa[t] + e[t]

All three start from rest: past outputs, inputs, noise and states are zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ModelError, NumericalError
from .simulate import derive_rng

__all__ = [
    "Example1Config",
    "generate_signals",
    "simulate_io",
    "simulate_rational_ss",
    "simulate_augmented_ss",
    "AUGMENTED_STATE_DIM",
    "MINIMAL_STATE_DIM",
    "equivalence_check",
    "write_comparison_csv",
]

MINIMAL_STATE_DIM = 1
AUGMENTED_STATE_DIM = 2


@dataclass(frozen=True)
class Example1Config:
    horizon: int = 100
    seed: int = 0
    p_min: float = 0.1
    p_max: float = 1.0
    input_kind: str = "gaussian"
    noise_std: float = 1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ModelError("horizon must be >= 1")
        if not 0 < self.p_min <= self.p_max:
            raise ModelError("need 0 < p_min <= p_max")


def generate_signals(config, run=None):
    """Draw ``(u, e, p)``; ``p`` has one extra sample and ``|p| >= p_min``."""
    rng = derive_rng(config.seed, run)
    N = config.horizon
    mag = rng.uniform(config.p_min, config.p_max, N + 1)
    p = np.where(rng.random(N + 1) < 0.5, -mag, mag)
    if config.input_kind == "gaussian":
        u = rng.standard_normal(N)
    elif config.input_kind == "prbs":
        u = rng.integers(0, 2, N) * 2.0 - 1.0
    else:
        u = np.zeros(N)
    e = config.noise_std * rng.standard_normal(N)
    return u, e, p


def _prep(u, e, p, extra=0):
    u = np.asarray(u, dtype=float).ravel()
    e = np.asarray(e, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    N = u.size
    if e.size != N or p.size < N + extra:
        raise ModelError(f"length mismatch: u {N}, e {e.size}, p {p.size} (need {N + extra})")
    return u, e, p, N


def simulate_io(u, e, p):
    """Difference-equation recursion of the input-output form."""
    u, e, p, N = _prep(u, e, p)
    y = np.empty(N)
    y_prev = u_prev = e_prev = 0.0
    for t in range(N):
        y[t] = -p[t] * y_prev + p[t] * u_prev + e[t] + e_prev
        y_prev, u_prev, e_prev = y[t], u[t], e[t]
    return y


def simulate_rational_ss(u, e, p, p_min=0.1):
    """State-minimal realization; ``p`` must hold ``N + 1`` samples."""
    u, e, p, N = _prep(u, e, p, extra=1)
    small = np.flatnonzero(np.abs(p[1:N + 1]) < p_min)
    if small.size:
        t = int(small[0]) + 1
        raise NumericalError(f"|p| = {abs(p[t]):.3g} < p_min = {p_min} at t={t}")
    x = 0.0
    y = np.empty(N)
    for t in range(N):
        y[t] = p[t] * x + e[t]
        x = -p[t] * x + u[t] + (1.0 - p[t + 1]) / p[t + 1] * e[t]
    return y


def simulate_augmented_ss(u, e, p):
    """Two-state realization with static affine scheduling dependence."""
    u, e, p, N = _prep(u, e, p)
    x = np.zeros(AUGMENTED_STATE_DIM)
    Bu = np.array([[-1.0, 1.0], [0.0, 1.0]])
    y = np.empty(N)
    for t in range(N):
        A = np.array([[-p[t], 1.0], [0.0, 0.0]])
        y[t] = np.array([-p[t], 1.0]) @ x + e[t]
        x = A @ x + Bu @ np.array([u[t], e[t]])
    return y


def equivalence_check(config, trials=1):
    """Max absolute output discrepancy between the three realizations.

    Returns ``(max_abs_diff, last)`` where ``last`` is the tuple
    ``(y_io, y_rational, y_augmented)`` of the final trial.
    """
    worst = 0.0
    last = None
    for k in range(trials):
        u, e, p = generate_signals(config, k)
        y_io = simulate_io(u, e, p[:-1])
        y_ra = simulate_rational_ss(u, e, p, config.p_min)
        y_au = simulate_augmented_ss(u, e, p[:-1])
        worst = max(worst, float(np.max(np.abs(y_io - y_ra))), float(np.max(np.abs(y_io - y_au))))
        last = (y_io, y_ra, y_au)
    return worst, last


def write_comparison_csv(path, y_io, y_ra, y_au):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y_io", "y_rational", "y_augmented"])
        for t, row in enumerate(zip(y_io, y_ra, y_au)):
            w.writerow([t] + [repr(float(v)) for v in row])
