"""Kalman gains computed from a finite window of the scheduling history.

``K_tau[t]`` is obtained by restarting the covariance recursion at ``t - tau``
(see :func:`lpvss.convergence.restarted_covariances`) and applying the gain
formula with the restarted prior. It reads only ``p[t-tau], ..., p[t]``. The
remainder ``K[t] - K_tau[t]`` measures what the truncation throws away.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .convergence import (decorrelated_matrices, default_burn_in,
                          estimate_condition_constants, restart_upper_limit,
                          restarted_covariances)
from .core import ModelError, SchedulingTrajectory
from .innovation import FilterTrace, _step, compute_trace

__all__ = [
    "truncated_gain",
    "truncated_gain_trace",
    "DecayCurve",
    "decay_study",
    "write_decay_csv",
]


def _restart_matrix(model, P0, P0_scale, constants, trajectories):
    if P0 is not None:
        return np.asarray(P0, dtype=float)
    if constants is None:
        constants = estimate_condition_constants(model, trajectories)
    if not 0.0 < P0_scale < 1.0:
        raise ModelError("P0_scale must lie in (0, 1)")
    return P0_scale * restart_upper_limit(constants) * np.eye(model.nx)


def truncated_gain(model, mats, t, tau, P0, Abar=None, GQG=None):
    """``(K_tau, Phat_prior)`` at time index ``t`` for window length ``tau >= 1``."""
    if tau < 1:
        raise ModelError("tau must be >= 1")
    if t - tau < 0:
        raise ModelError(f"window of length {tau} at t={t} exceeds the trajectory start")
    Pp, _, K, _ = restarted_covariances(model, mats, t - tau, t, P0, Abar, GQG)
    return K, Pp


def truncated_gain_trace(model, traj, tau, P0_scale=0.5, constants=None, P0=None):
    """Truncated gains for every time with a complete window.

    Returns a :class:`~lpvss.innovation.FilterTrace` whose first entry is
    time ``t0 + tau``; ``P_prior`` holds the restarted priors.
    """
    if not isinstance(traj, SchedulingTrajectory):
        traj = SchedulingTrajectory(traj)
    N = len(traj)
    if tau < 1 or tau >= N:
        raise ModelError(f"window length {tau} does not fit a trajectory of length {N}")
    P0 = _restart_matrix(model, P0, P0_scale, constants, [traj])
    mats = model.evaluate(traj)
    Abar, GQG = decorrelated_matrices(model, mats)
    n = model.noise
    out = {k: [] for k in ("K", "L", "Pp", "Pq", "Om", "cond")}
    for t in range(tau, N):
        Pp, _, _, _ = restarted_covariances(model, mats, t - tau, t, P0, Abar, GQG)
        r = _step(mats["A"][t], mats["C"][t], mats["G"][t], mats["H"][t], n.Q, n.S, n.R, Pp, t)
        for k, v in zip(("K", "L", "Pp", "Pq", "Om", "cond"),
                        (r.K, r.L, Pp, r.P_post, r.Omega, r.cond)):
            out[k].append(v)
    return FilterTrace(np.array(out["K"]), np.array(out["L"]), np.array(out["Pp"]),
                       np.array(out["Pq"]), np.array(out["Om"]), r.P_next,
                       traj.t0 + tau, "restarted", np.array(out["cond"]))


@dataclass
class DecayCurve:
    """Remainder and covariance-difference statistics per window length.

    ``remainder[j]`` and ``cov_diff[j]`` hold the raw norms for ``taus[j]``
    over a shared ``(trial, t)`` index set; ``decay_fraction[j]`` is the
    share of samples with ``||R(taus[j])|| > ||R(taus[j+1])||``.
    """

    taus: np.ndarray
    remainder: np.ndarray
    cov_diff: np.ndarray
    decay_fraction: np.ndarray
    samples: list

    def stat(self, which, how):
        data = self.remainder if which == "remainder" else self.cov_diff
        return {"max": data.max(axis=1), "median": np.median(data, axis=1)}[how]

    @property
    def overall_decay_fraction(self):
        if self.decay_fraction.size == 0:
            return float("nan")
        return float(self.decay_fraction.mean())


def decay_study(model, ensemble, taus, P0_scale=0.5, constants=None, stride=5,
                burn_in=None, P0=None):
    """Measure ``||K - K_tau||_2`` and ``||P - Phat_tau||_2`` over an ensemble.

    Measurement times start at ``burn_in + max(taus)`` and are spaced by
    ``stride`` so every window length is evaluated on the same samples.
    """
    taus = np.asarray(sorted(set(int(t) for t in taus)))
    if len(ensemble) == 0:
        raise ModelError("empty trajectory ensemble")
    if taus.size == 0 or taus[0] < 1:
        raise ModelError("window lengths must be >= 1")
    if burn_in is None:
        burn_in = default_burn_in(model.nx)
    traces, all_mats = [], []
    for traj in ensemble:
        mats = model.evaluate(traj)
        all_mats.append(mats)
        traces.append(compute_trace(model, traj, mats=mats))
    P0 = (np.asarray(P0, dtype=float) if P0 is not None else
          _restart_matrix(model, None, P0_scale,
                          constants if constants is not None else
                          estimate_condition_constants(model, ensemble, traces=traces), ensemble))
    rem = [[] for _ in taus]
    cov = [[] for _ in taus]
    samples = []
    for j, (traj, mats, trace) in enumerate(zip(ensemble, all_mats, traces)):
        Abar, GQG = decorrelated_matrices(model, mats)
        start = burn_in + int(taus[-1])
        if start >= len(traj):
            raise ModelError(f"trajectory {j} too short for burn-in {burn_in} and tau {taus[-1]}")
        for t in range(start, len(traj), stride):
            samples.append((j, t))
            for q, tau in enumerate(taus):
                K, Pp = truncated_gain(model, mats, t, int(tau), P0, Abar, GQG)
                rem[q].append(np.linalg.norm(trace.K[t] - K, 2))
                cov[q].append(np.linalg.norm(trace.P_prior[t] - Pp, 2))
    rem, cov = np.array(rem), np.array(cov)
    frac = np.array([np.mean(rem[q] > rem[q + 1]) for q in range(taus.size - 1)])
    return DecayCurve(taus, rem, cov, frac, samples)


def write_decay_csv(curve, path):
    """``tau,stat,remainder_norm,cov_norm,decay_fraction`` rows (max and median)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "stat", "remainder_norm", "cov_norm", "decay_fraction"])
        for q, tau in enumerate(curve.taus):
            frac = repr(float(curve.decay_fraction[q])) if q < curve.decay_fraction.size else ""
            for how in ("max", "median"):
                w.writerow([int(tau), how, repr(float(curve.stat("remainder", how)[q])),
                            repr(float(curve.stat("cov", how)[q])), frac])
