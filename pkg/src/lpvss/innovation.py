"""Innovation form of an LPV-SS model: the time-varying Kalman predictor.

For a fixed scheduling trajectory the general-noise model is equivalent to::

    xc[t+1] = A(p[t]) xc[t] + B(p[t]) u[t] + K[t] xi[t]
    y[t]    = C(p[t]) xc[t] + D(p[t]) u[t] + xi[t],     xi[t] ~ N(0, Omega[t])

with ``K[t]``, ``Omega[t]`` and the prior covariance ``P[t|t-1]`` produced by
the Riccati recursion in :func:`riccati_step`. The gain depends on the whole
past of ``p``, which is what the truncation in :mod:`lpvss.gainapprox` is about.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import ModelError, NumericalError, SchedulingTrajectory

__all__ = [
    "OMEGA_TOL",
    "RiccatiStep",
    "FilterTrace",
    "FilterRun",
    "riccati_step",
    "compute_trace",
    "run_filter",
    "suboptimal_covariance",
    "posterior_to_prior",
    "write_trace_csv",
    "whiteness",
]

log = logging.getLogger(__name__)

#: ``Omega`` is rejected when its smallest eigenvalue is below this times its trace.
OMEGA_TOL = 1e-12


class RiccatiStep(NamedTuple):
    K: np.ndarray
    Omega: np.ndarray
    P_next: np.ndarray
    L: np.ndarray
    P_post: np.ndarray
    cond: float


def _sym(M):
    return 0.5 * (M + M.T)


def _factor_omega(Omega, t=None):
    lam = np.linalg.eigvalsh(Omega)
    tr = np.trace(Omega)
    if not lam[0] > OMEGA_TOL * abs(tr):
        where = "" if t is None else f" at t={t}"
        raise NumericalError(f"innovation covariance singular{where}; spectrum {lam.tolist()}")
    return cho_factor(Omega), float(lam[-1] / lam[0])


def _step(A, C, G, H, Q, S, R, P, t=None):
    """One Riccati step on evaluated matrices.

    Also returns the filter gain ``L = P C^T Omega^-1`` and the posterior
    ``(I - L C) P``, which the predictor recursion does not need itself.
    """
    PCt = P @ C.T
    Omega = _sym(C @ PCt + H @ R @ H.T)
    cf, cond = _factor_omega(Omega, t)
    cross = A @ PCt + G @ S @ H.T
    K = cho_solve(cf, cross.T).T
    P_next = _sym(A @ P @ A.T - K @ Omega @ K.T + G @ Q @ G.T)
    L = cho_solve(cf, PCt.T).T
    P_post = _sym(P - L @ C @ P)
    return RiccatiStep(K, Omega, P_next, L, P_post, cond)


def riccati_step(model, p, P_prior, t=None):
    """Propagate the prior error covariance by one step at scheduling point ``p``.

    Parameters
    ----------
    model : LpvSsModel
    p : array_like
        Scheduling point ``p[t]``.
    P_prior : ndarray, shape (n_x, n_x)
        ``P[t|t-1]``, symmetric PSD.
    t : int, optional
        Only used to label errors.

    Returns
    -------
    RiccatiStep
        ``Omega = C P C^T + H R H^T``,
        ``K = (A P C^T + G S H^T) Omega^-1`` and
        ``P_next = A P A^T - K Omega K^T + G Q G^T`` (symmetrized).
    """
    A, _, C, _, G, H = model.matrices(p)
    n = model.noise
    return _step(A, C, G, H, n.Q, n.S, n.R, np.asarray(P_prior, dtype=float), t)


@dataclass(frozen=True)
class FilterTrace:
    """Gains and covariances along a scheduling trajectory.

    Index ``k`` refers to time ``t0 + k``. ``P_prior[k]`` is ``P[t|t-1]``,
    ``P_post[k]`` is ``P[t|t]``, ``K[k]`` the predictor gain and ``L[k]`` the
    filter gain. ``P_final`` is the prior one step past the horizon.
    """

    K: np.ndarray
    L: np.ndarray
    P_prior: np.ndarray
    P_post: np.ndarray
    Omega: np.ndarray
    P_final: np.ndarray
    t0: int = 0
    init_mode: str = "known-state"
    omega_cond: np.ndarray | None = None

    def __len__(self):
        return self.K.shape[0]


def _run_recursion(mats, noise, start, stop, P0, t0=0):
    """Iterate :func:`_step` over ``mats`` indices ``start..stop-1`` from prior ``P0``."""
    n = stop - start
    nx = mats["A"].shape[1]
    ny = mats["C"].shape[1]
    K = np.empty((n, nx, ny))
    L = np.empty((n, nx, ny))
    Pp = np.empty((n, nx, nx))
    Pq = np.empty((n, nx, nx))
    Om = np.empty((n, ny, ny))
    cond = np.empty(n)
    P = _sym(np.asarray(P0, dtype=float))
    Q, S, R = noise.Q, noise.S, noise.R
    for j, k in enumerate(range(start, stop)):
        Pp[j] = P
        r = _step(mats["A"][k], mats["C"][k], mats["G"][k], mats["H"][k], Q, S, R, P, t0 + k)
        K[j], L[j], Pq[j], Om[j], cond[j] = r.K, r.L, r.P_post, r.Omega, r.cond
        P = r.P_next
    return K, L, Pp, Pq, Om, P, cond


def compute_trace(model, traj, P_init=None, mats=None):
    """Run the Riccati recursion along ``traj``.

    Parameters
    ----------
    model : LpvSsModel
    traj : SchedulingTrajectory
    P_init : ndarray, optional
        ``P[t0|t0-1]``. Defaults to zero, i.e. a known initial state.
    mats : dict, optional
        Pre-evaluated matrices from ``model.evaluate(traj)``.

    Returns
    -------
    FilterTrace
    """
    if not isinstance(traj, SchedulingTrajectory):
        traj = SchedulingTrajectory(traj)
    if mats is None:
        mats = model.evaluate(traj)
    mode = "known-state" if P_init is None else "explicit"
    if P_init is None:
        P_init = np.zeros((model.nx, model.nx))
    K, L, Pp, Pq, Om, Pf, cond = _run_recursion(mats, model.noise, 0, len(traj), P_init, traj.t0)
    if cond.size and cond.max() > 1e8:
        log.warning("innovation covariance poorly conditioned (max cond %.3g)", cond.max())
    return FilterTrace(K, L, Pp, Pq, Om, Pf, traj.t0, mode, cond)


def posterior_to_prior(model, p, P_post):
    """Prior from posterior in decorrelated coordinates: ``Abar P Abar^T + G Qbar G^T``."""
    from .core import decorrelate

    d = decorrelate(model, p)
    G = model.matrices(p)[4]
    return _sym(d.Abar @ P_post @ d.Abar.T + G @ d.Qbar @ G.T)


@dataclass(frozen=True)
class FilterRun:
    """State predictions ``xc[t]`` and innovations ``xi[t]`` from :func:`run_filter`."""

    x_hat: np.ndarray
    xi: np.ndarray
    omega_cond: np.ndarray

    def normalized_innovations(self, trace):
        """``Omega[t]^{-1/2} xi[t]`` using the Cholesky factor of ``Omega[t]``."""
        out = np.empty_like(self.xi)
        for k, (Om, e) in enumerate(zip(trace.Omega, self.xi)):
            Lc = np.linalg.cholesky(Om)
            out[k] = np.linalg.solve(Lc, e)
        return out


def run_filter(model, trace, traj, u, y, x0=None, mats=None):
    """Run the innovation recursion on data.

    ``xi[t] = y[t] - C xc[t] - D u[t]`` and
    ``xc[t+1] = A xc[t] + B u[t] + K[t] xi[t]``.
    """
    N = len(trace)
    u = np.zeros((N, model.nu)) if u is None else np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if len(traj) != N or u.shape[0] != N or y.shape[0] != N:
        raise ModelError(
            f"length mismatch: trace {N}, scheduling {len(traj)}, u {u.shape[0]}, y {y.shape[0]}")
    if mats is None:
        mats = model.evaluate(traj)
    x = np.zeros(model.nx) if x0 is None else np.asarray(x0, dtype=float).copy()
    xs = np.empty((N + 1, model.nx))
    xi = np.empty((N, model.ny))
    for k in range(N):
        xs[k] = x
        xi[k] = y[k] - mats["C"][k] @ x - mats["D"][k] @ u[k]
        x = mats["A"][k] @ x + mats["B"][k] @ u[k] + trace.K[k] @ xi[k]
    xs[N] = x
    return FilterRun(xs, xi, trace.omega_cond)


def suboptimal_covariance(model, traj, gains, P_init=None, mats=None):
    """Prior error covariance of a predictor that uses arbitrary ``gains``.

    Uses the full (Joseph-type) expansion, valid for any gain::

        P+ = (A - K C) P (A - K C)^T + G Q G^T + K H R H^T K^T
             - G S H^T K^T - K H S^T G^T

    Returns an array of shape ``(N + 1, n_x, n_x)``; entry ``k`` is
    ``P[t0+k | t0+k-1]``.
    """
    gains = np.asarray(gains, dtype=float)
    N = len(traj)
    if gains.shape != (N, model.nx, model.ny):
        raise ModelError(f"gain sequence has shape {gains.shape}, expected {(N, model.nx, model.ny)}")
    if mats is None:
        mats = model.evaluate(traj)
    Q, S, R = model.noise.Q, model.noise.S, model.noise.R
    P = np.zeros((model.nx, model.nx)) if P_init is None else _sym(np.asarray(P_init, dtype=float))
    out = np.empty((N + 1, model.nx, model.nx))
    for k in range(N):
        out[k] = P
        A, C, G, H, K = mats["A"][k], mats["C"][k], mats["G"][k], mats["H"][k], gains[k]
        F = A - K @ C
        GSHK = G @ S @ H.T @ K.T
        P = _sym(F @ P @ F.T + G @ Q @ G.T + K @ H @ R @ H.T @ K.T - GSHK - GSHK.T)
    out[N] = P
    return out


def whiteness(e, max_lag=10, level=0.99):
    """Sample cross-correlations of a normalized sequence against a white-noise band.

    Parameters
    ----------
    e : ndarray, shape (N, n)
        Normalized innovations.
    max_lag : int
    level : float
        Two-sided confidence level of the band ``+-z / sqrt(N)``.

    Returns
    -------
    inside : ndarray of bool, shape (max_lag, n, n)
        Whether each lag/entry correlation lies inside the band.
    """
    from scipy.stats import norm

    e = np.asarray(e, dtype=float)
    N = e.shape[0]
    if N <= max_lag:
        raise ModelError(f"sequence of length {N} too short for {max_lag} lags")
    z = e - e.mean(axis=0)
    z = z / z.std(axis=0)
    band = norm.ppf(0.5 + level / 2) / np.sqrt(N)
    r = np.array([z[lag:].T @ z[:-lag] / N for lag in range(1, max_lag + 1)])
    return np.abs(r) <= band


def write_trace_csv(trace, path):
    """Write ``t, K, P_prior, Omega`` per row, each matrix flattened column-major.

    Header names are ``K_i_j`` etc. with 1-based row ``i`` and column ``j``.
    """
    nx, ny = trace.K.shape[1:]

    def names(prefix, r, c):
        return [f"{prefix}_{i + 1}_{j + 1}" for j in range(c) for i in range(r)]

    header = ["t"] + names("K", nx, ny) + names("P", nx, nx) + names("Omega", ny, ny)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(trace)):
            row = [trace.t0 + k]
            for M in (trace.K[k], trace.P_prior[k], trace.Omega[k]):
                row.extend(repr(float(v)) for v in M.ravel(order="F"))
            w.writerow(row)
