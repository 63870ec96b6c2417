"""Signal generation and forward simulation.

Random streams come from numpy's ``PCG64`` bit generator. A run seed is a
64-bit unsigned integer; Monte Carlo run ``k`` of a study seeded with ``s``
uses ``SeedSequence([s, k])`` (see :func:`derive_rng`), so runs are
independent and can be executed in any order.

Noise draws are taken as one standard normal vector of length ``n_x + n_y``
per time step, multiplied by the lower Cholesky factor of ``Sigma``; the
first ``n_x`` entries are ``w[t]`` and the rest ``v[t]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ModelError, NumericalError, SchedulingTrajectory, min_eig_ok

__all__ = [
    "SimConfig",
    "SimRecord",
    "derive_rng",
    "gen_scheduling",
    "gen_input",
    "sample_noise",
    "simulate_general",
    "simulate_innovation",
    "monte_carlo_outputs",
    "output_moments",
    "write_signals_csv",
    "read_signals_csv",
]

SCHEDULING_KINDS = ("constant", "sinusoid", "uniform-random-walk", "uniform", "file")
INPUT_KINDS = ("zero", "prbs", "sinusoid", "file")


def derive_rng(seed, run=None):
    """Generator for ``seed``, or for Monte Carlo run ``run`` of that seed."""
    key = [int(seed)] if run is None else [int(seed), int(run)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class SimConfig:
    """Settings for trajectory generation.

    ``scheduling_value`` is used by the constant kind (default: box midpoint),
    ``scheduling_amplitude`` / ``scheduling_omega`` by the sinusoid kind
    (amplitude is a fraction of the box half-width) and ``scheduling_step``
    by the random walk (fraction of the box width per step).
    """

    horizon: int
    seed: int = 0
    x0: tuple | None = None
    input_kind: str = "zero"
    scheduling_kind: str = "constant"
    scheduling_value: tuple | None = None
    scheduling_amplitude: float = 1.0
    scheduling_omega: float = 0.1
    scheduling_step: float = 0.2
    input_amplitude: float = 1.0
    input_omega: float = 0.3
    input_hold: int = 1
    scheduling_file: str | None = None
    input_file: str | None = None

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ModelError(f"horizon must be >= 1, got {self.horizon}")
        if self.scheduling_kind not in SCHEDULING_KINDS:
            raise ModelError(f"unknown scheduling kind {self.scheduling_kind!r}")
        if self.input_kind not in INPUT_KINDS:
            raise ModelError(f"unknown input kind {self.input_kind!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ModelError("seed must be a 64-bit unsigned integer")


def gen_scheduling(config, box, extra=0):
    """Scheduling trajectory of length ``horizon + extra`` inside ``box``."""
    N = int(config.horizon) + extra
    lo, hi = box.lo, box.hi
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    kind = config.scheduling_kind
    t = np.arange(N)[:, None]
    if kind == "constant":
        val = mid if config.scheduling_value is None else np.asarray(config.scheduling_value, float)
        s = np.broadcast_to(val, (N, box.n_p)).copy()
    elif kind == "sinusoid":
        s = mid + config.scheduling_amplitude * half * np.sin(config.scheduling_omega * t)
    elif kind == "uniform":
        s = derive_rng(config.seed).uniform(lo, hi, size=(N, box.n_p))
    elif kind == "uniform-random-walk":
        rng = derive_rng(config.seed)
        steps = rng.uniform(-1.0, 1.0, size=(N, box.n_p)) * config.scheduling_step * (hi - lo)
        s = np.empty((N, box.n_p))
        cur = mid.copy()
        for k in range(N):
            s[k] = cur
            cur = np.clip(cur + steps[k], lo, hi)
    else:
        s = read_signals_csv(config.scheduling_file)["p"][:N]
        if s.shape[0] < N:
            raise ModelError(f"scheduling file has {s.shape[0]} rows, need {N}")
    s = np.clip(s, lo, hi)
    return SchedulingTrajectory(s).check_inside(box)


def gen_input(config, nu):
    """Input sequence of shape ``(horizon, nu)``."""
    N = int(config.horizon)
    kind = config.input_kind
    if kind == "zero" or nu == 0:
        return np.zeros((N, nu))
    if kind == "prbs":
        rng = derive_rng(config.seed, 2**32 + 1)
        hold = max(int(config.input_hold), 1)
        n_blocks = -(-N // hold)
        bits = rng.integers(0, 2, size=(n_blocks, nu)) * 2.0 - 1.0
        return config.input_amplitude * np.repeat(bits, hold, axis=0)[:N]
    if kind == "sinusoid":
        t = np.arange(N)[:, None]
        phase = np.arange(nu)[None, :] * np.pi / max(nu, 1)
        return config.input_amplitude * np.sin(config.input_omega * t + phase)
    u = read_signals_csv(config.input_file)["u"][:N]
    if u.shape != (N, nu):
        raise ModelError(f"input file gives shape {u.shape}, need {(N, nu)}")
    return u


def _sigma_factor(noise):
    sigma = noise.sigma
    if not min_eig_ok(sigma):
        lam = np.linalg.eigvalsh(sigma)[0]
        raise NumericalError(f"noise covariance not positive definite (min eigenvalue {lam:.6g})")
    return np.linalg.cholesky(sigma)


def sample_noise(noise, N, seed=0, rng=None, runs=None):
    """Draw i.i.d. ``(w[t], v[t]) ~ N(0, Sigma)``.

    Returns ``(w, v)`` with shapes ``(N, n_x)`` and ``(N, n_y)``, or with a
    leading ``runs`` axis when ``runs`` is given.
    """
    Lc = _sigma_factor(noise)
    if rng is None:
        rng = derive_rng(seed)
    nx = noise.Q.shape[0]
    shape = (N, Lc.shape[0]) if runs is None else (runs, N, Lc.shape[0])
    z = rng.standard_normal(shape) @ Lc.T
    return z[..., :nx], z[..., nx:]


@dataclass
class SimRecord:
    """Stored signals of one simulation; row ``k`` is time ``t0 + k``.

    ``x`` has ``N + 1`` rows (the final state is kept), all others ``N``.
    ``xi`` is only set for innovation-form runs, ``w``/``v`` only for
    general-form runs.
    """

    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    y: np.ndarray
    w: np.ndarray | None = None
    v: np.ndarray | None = None
    xi: np.ndarray | None = None
    t0: int = 0

    def __len__(self):
        return self.y.shape[0]

    def replay(self, model):
        """Recompute ``y`` from the stored ``x``, ``u``, ``v`` (or ``xi``)."""
        y = np.empty_like(self.y)
        for k in range(len(self)):
            _, _, C, D, _, H = model.matrices(self.p[k])
            noise = H @ self.v[k] if self.xi is None else self.xi[k]
            y[k] = C @ self.x[k] + D @ self.u[k] + noise
        return y


def _check_lengths(N, **seqs):
    for name, s in seqs.items():
        if s is not None and np.shape(s)[0] != N:
            raise ModelError(f"{name} has length {np.shape(s)[0]}, expected {N}")


def _as_input(u, N, nu):
    if u is None:
        return np.zeros((N, nu))
    u = np.asarray(u, dtype=float)
    return u.reshape(u.shape[0], -1) if u.ndim < 2 else u


def simulate_general(model, traj, u, w, v, x0=None, mats=None):
    """Forward recursion of the general-noise model.

    Parameters
    ----------
    model : LpvSsModel
    traj : SchedulingTrajectory
    u : array_like, shape (N, n_u)
    w, v : array_like, shapes (N, n_x), (N, n_y)
        Noise realizations, e.g. from :func:`sample_noise`.
    x0 : array_like, optional
        Initial state, zero by default.

    Returns
    -------
    SimRecord
    """
    N = len(traj)
    u = _as_input(u, N, model.nu)
    w = np.asarray(w, dtype=float).reshape(-1, model.nx)
    v = np.asarray(v, dtype=float).reshape(-1, model.ny)
    _check_lengths(N, u=u, w=w, v=v)
    if mats is None:
        mats = model.evaluate(traj)
    x = np.empty((N + 1, model.nx))
    x[0] = 0.0 if x0 is None else x0
    y = np.empty((N, model.ny))
    for k in range(N):
        y[k] = mats["C"][k] @ x[k] + mats["D"][k] @ u[k] + mats["H"][k] @ v[k]
        x[k + 1] = mats["A"][k] @ x[k] + mats["B"][k] @ u[k] + mats["G"][k] @ w[k]
    return SimRecord(x, u, np.array(traj.samples), y, w=w, v=v, t0=traj.t0)


def simulate_innovation(model, traj, u, trace, xi=None, seed=0, x0=None, mats=None):
    """Forward recursion of the innovation form driven by ``xi[t] ~ N(0, Omega[t])``.

    ``xi`` may be given explicitly; otherwise it is drawn from ``seed`` using
    a Cholesky factor of each ``Omega[t]``.
    """
    N = len(traj)
    if len(trace) != N:
        raise ModelError(f"trace has length {len(trace)}, trajectory {N}")
    u = _as_input(u, N, model.nu)
    _check_lengths(N, u=u)
    if xi is None:
        z = derive_rng(seed).standard_normal((N, model.ny))
        xi = np.einsum("tij,tj->ti", _omega_factors(trace), z)
    xi = np.asarray(xi, dtype=float).reshape(N, model.ny)
    if mats is None:
        mats = model.evaluate(traj)
    x = np.empty((N + 1, model.nx))
    x[0] = 0.0 if x0 is None else x0
    y = np.empty((N, model.ny))
    for k in range(N):
        y[k] = mats["C"][k] @ x[k] + mats["D"][k] @ u[k] + xi[k]
        x[k + 1] = mats["A"][k] @ x[k] + mats["B"][k] @ u[k] + trace.K[k] @ xi[k]
    return SimRecord(x, u, np.array(traj.samples), y, xi=xi, t0=traj.t0)


def _omega_factors(trace):
    out = np.empty_like(trace.Omega)
    for k, Om in enumerate(trace.Omega):
        try:
            out[k] = np.linalg.cholesky(Om)
        except np.linalg.LinAlgError:
            raise NumericalError(f"Omega singular at t={trace.t0 + k}") from None
    return out


def monte_carlo_outputs(model, traj, u, runs, seed, form="general", trace=None, x0=None):
    """Outputs of ``runs`` independent simulations, shape ``(runs, N, n_y)``.

    Vectorized over runs; all runs share ``(u, p)``. ``form`` is
    ``"general"`` or ``"innovation"`` (the latter needs ``trace``).
    """
    N = len(traj)
    u = _as_input(u, N, model.nu)
    mats = model.evaluate(traj)
    rng = derive_rng(seed)
    X = np.zeros((runs, model.nx)) if x0 is None else np.tile(x0, (runs, 1)).astype(float)
    Y = np.empty((runs, N, model.ny))
    if form == "general":
        w, v = sample_noise(model.noise, N, rng=rng, runs=runs)
        for k in range(N):
            Y[:, k] = X @ mats["C"][k].T + mats["D"][k] @ u[k] + v[:, k] @ mats["H"][k].T
            X = X @ mats["A"][k].T + mats["B"][k] @ u[k] + w[:, k] @ mats["G"][k].T
    elif form == "innovation":
        if trace is None:
            raise ModelError("innovation form needs a filter trace")
        F = _omega_factors(trace)
        z = rng.standard_normal((runs, N, model.ny))
        for k in range(N):
            xi = z[:, k] @ F[k].T
            Y[:, k] = X @ mats["C"][k].T + mats["D"][k] @ u[k] + xi
            X = X @ mats["A"][k].T + mats["B"][k] @ u[k] + xi @ trace.K[k].T
    else:
        raise ModelError(f"unknown form {form!r}")
    return Y


def output_moments(Y):
    """Per-time sample mean and covariance of ``Y`` with standard errors.

    Returns ``(mean, mean_se, cov, cov_se)``; ``cov[t]`` is the sample
    covariance at time ``t`` and ``cov_se`` the standard error of each entry,
    estimated from the spread of the centred products.
    """
    n = Y.shape[0]
    mean = Y.mean(axis=0)
    mean_se = Y.std(axis=0, ddof=1) / np.sqrt(n)
    Z = Y - mean
    prod = np.einsum("rti,rtj->rtij", Z, Z)
    cov = prod.sum(axis=0) / (n - 1)
    cov_se = prod.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, mean_se, cov, cov_se


def write_signals_csv(path, p, u, y, t0=0):
    """Write ``t,p_1..,u_1..,y_1..`` rows with round-trip decimal formatting."""
    p, u, y = (np.asarray(a, dtype=float) for a in (p, u, y))
    N = y.shape[0]
    p, u, y = p.reshape(N, -1), u.reshape(N, -1), y.reshape(N, -1)
    header = (["t"] + [f"p_{i + 1}" for i in range(p.shape[1])]
              + [f"u_{i + 1}" for i in range(u.shape[1])]
              + [f"y_{i + 1}" for i in range(y.shape[1])])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for k in range(N):
            wr.writerow([t0 + k] + [repr(float(a)) for a in (*p[k], *u[k], *y[k])])


def read_signals_csv(path):
    """Read a signals CSV back into ``{"t", "p", "u", "y"}`` arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ModelError(f"{path}: empty signals file")
    header, body = rows[0], rows[1:]
    data = np.array([[float(a) for a in r] for r in body], dtype=float).reshape(len(body), len(header))
    if not np.all(np.isfinite(data)):
        raise ModelError(f"{path}: non-finite value in signals file")
    out = {"t": data[:, 0].astype(int)}
    for prefix in ("p", "u", "y"):
        cols = [k for k, h in enumerate(header) if h.startswith(prefix + "_")]
        out[prefix] = data[:, cols]
    return out
