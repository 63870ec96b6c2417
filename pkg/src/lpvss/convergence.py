"""Forgetting of covariance initialization errors in the Riccati recursion.

The recursion of :mod:`lpvss.innovation` is restarted ``tau`` steps in the
past from a small static posterior ``P0`` and compared with the reference
recursion started at ``t0``. Uniform controllability/observability constants
estimated from scheduling trajectories give an upper bound on the spectral
norm of the difference that decays like ``xi ** tau``.

Conventions used throughout:

* ``Abar[t] = A - G S R^-1 H^-1 C`` and ``Qbar = Q - S R^-1 S^T`` are the
  decorrelated matrices; the prior follows from the posterior as
  ``P[t+1|t] = Abar[t] P[t|t] Abar[t]^T + G Qbar G^T``.
* A restart at window start ``s = t - tau`` replaces the posterior ``P[s|s]``
  with ``P0``, so the restarted gain at ``t`` reads only ``p[s], ..., p[t]``.
* ``W[t] = (I - L[t+1] C[t+1]) Abar[t]`` propagates the posterior error, with
  ``L`` the filter gain ``P C^T Omega^-1``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ModelError, SchedulingTrajectory
from .innovation import _step, _sym, compute_trace

__all__ = [
    "ConditionConstants",
    "estimate_condition_constants",
    "covariance_bound",
    "restart_upper_limit",
    "restarted_covariances",
    "RestartExperiment",
    "restart_experiment",
    "LyapunovReport",
    "lyapunov_decay_check",
    "default_burn_in",
    "decorrelated_matrices",
    "error_propagators",
]

CONST_TOL = 1e-12


def default_burn_in(nx):
    return max(20, 5 * nx)


def decorrelated_matrices(model, mats):
    """``(Abar, GQbarG)`` stacked along time for evaluated matrices ``mats``."""
    n = model.noise
    SRinv = np.linalg.solve(n.R.T, n.S.T).T
    Qbar = _sym(n.Qbar)
    N = mats["A"].shape[0]
    Abar = np.empty_like(mats["A"])
    GQG = np.empty_like(mats["A"])
    for k in range(N):
        G, H, C = mats["G"][k], mats["H"][k], mats["C"][k]
        Abar[k] = mats["A"][k] - G @ SRinv @ np.linalg.solve(H, C)
        GQG[k] = _sym(G @ Qbar @ G.T)
    return Abar, GQG


def error_propagators(model, mats, trace, Abar=None):
    """``W[t] = (I - L[t+1] C[t+1]) Abar[t]`` for ``t = 0..N-2``."""
    if Abar is None:
        Abar, _ = decorrelated_matrices(model, mats)
    N = len(trace)
    eye = np.eye(model.nx)
    return np.array([(eye - trace.L[k + 1] @ mats["C"][k + 1]) @ Abar[k] for k in range(N - 1)])


@dataclass
class ConditionConstants:
    """Spectral bounds of the stochastic controllability/observability conditions.

    ``alpha1 I >= G Qbar G^T >= alpha2 I``,
    ``beta1 I <= C^T (H R H^T)^-1 C <= beta2 I`` and
    ``delta1 I >= Abar^T Abar >= delta2 I``. ``beta3``, ``beta5`` and
    ``beta6`` bound two-step observability, innovation covariance and the
    inverse error dynamics respectively.
    """

    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    delta1: float
    delta2: float
    beta3: float
    beta5: float
    beta6: float
    violations: list = field(default_factory=list)

    @property
    def gamma1(self):
        return self.beta1 / (1.0 + self.alpha1 * self.beta1)

    @property
    def gamma2(self):
        return 1.0 / self.alpha2 + self.beta2

    @property
    def gamma3(self):
        return -self.beta3 ** 2 * self.beta6 / self.beta5

    @property
    def xi_squared(self):
        """``gamma2 / (gamma2 - gamma3)``, with ``beta3`` squared inside ``gamma3``."""
        return self.gamma2 / (self.gamma2 - self.gamma3)

    @property
    def xi_linear(self):
        """Closed form with ``beta3`` to the first power."""
        a = self.beta5 * (self.alpha2 * self.beta2 + 1.0)
        return a / (a + self.alpha2 * self.beta3 * self.beta6)

    @property
    def xi(self):
        """The larger (more conservative) of the two contraction rates."""
        return max(self.xi_squared, self.xi_linear)

    @property
    def valid(self):
        return not self.violations and self._check() == []

    def _check(self):
        bad = []
        vals = asdict(self)
        vals.pop("violations")
        for k, v in vals.items():
            if not np.isfinite(v) or v <= CONST_TOL:
                bad.append(f"{k} = {v:.6g} not in (0, inf)")
        if bad:
            return bad
        for lo, hi in (("alpha2", "alpha1"), ("beta1", "beta2"), ("delta2", "delta1")):
            if vals[lo] > vals[hi] * (1 + 1e-12):
                bad.append(f"{lo} > {hi}")
        if not 0.0 < self.xi < 1.0:
            bad.append(f"xi = {self.xi} not in (0, 1)")
        return bad

    def to_dict(self):
        d = asdict(self)
        d.update(gamma1=self.gamma1 if self.alpha2 > 0 else None,
                 gamma2=self.gamma2 if self.alpha2 > 0 else None,
                 gamma3=self.gamma3 if self.beta5 > 0 else None,
                 valid=self.valid)
        if self.valid:
            d.update(xi=self.xi, xi_squared=self.xi_squared, xi_linear=self.xi_linear)
        return d


def _eig_range(M):
    lam = np.linalg.eigvalsh(_sym(M))
    return lam[0], lam[-1]


def estimate_condition_constants(model, trajectories, margin=0.01, traces=None):
    """Estimate the condition constants as extremes over a trajectory ensemble.

    Upper bounds are inflated and lower bounds deflated by ``margin``. A
    lower bound at or below zero is reported in ``violations`` (the
    convergence bound is then inapplicable); nothing is raised.

    Parameters
    ----------
    model : LpvSsModel
    trajectories : sequence of SchedulingTrajectory
    margin : float
        Relative safety margin.
    traces : sequence of FilterTrace, optional
        Reference traces matching ``trajectories``; computed if omitted.
    """
    if isinstance(trajectories, SchedulingTrajectory):
        trajectories = [trajectories]
    if not trajectories:
        raise ModelError("no trajectories given")
    lo = dict(alpha2=np.inf, beta1=np.inf, delta2=np.inf, beta3=np.inf, beta6=np.inf)
    hi = dict(alpha1=-np.inf, beta2=-np.inf, delta1=-np.inf, beta5=-np.inf)
    R = model.noise.R
    violations = []
    for j, traj in enumerate(trajectories):
        mats = model.evaluate(traj)
        trace = compute_trace(model, traj, mats=mats) if traces is None else traces[j]
        Abar, GQG = decorrelated_matrices(model, mats)
        N = len(traj)
        C, H = mats["C"], mats["H"]
        for k in range(N):
            a = _eig_range(GQG[k])
            Rk = H[k] @ R @ H[k].T
            b = _eig_range(C[k].T @ np.linalg.solve(Rk, C[k]))
            d = _eig_range(Abar[k].T @ Abar[k])
            lo["alpha2"] = min(lo["alpha2"], a[0]); hi["alpha1"] = max(hi["alpha1"], a[1])
            lo["beta1"] = min(lo["beta1"], b[0]); hi["beta2"] = max(hi["beta2"], b[1])
            lo["delta2"] = min(lo["delta2"], d[0]); hi["delta1"] = max(hi["delta1"], d[1])
        for i in range(2, N):
            # two-step observability of e[i-2]
            obs = np.vstack([C[i] @ Abar[i - 1] @ Abar[i - 2], C[i - 1] @ Abar[i - 2]])
            lo["beta3"] = min(lo["beta3"], np.linalg.svd(obs, compute_uv=False)[-1])
            ny = C.shape[1]
            Lw = np.block([[C[i], C[i] @ Abar[i - 1]],
                           [np.zeros_like(C[i - 1]), C[i - 1]]])
            Pd = np.block([[trace.P_prior[i], np.zeros_like(trace.P_prior[i])],
                           [np.zeros_like(trace.P_prior[i]), trace.P_prior[i - 1]]])
            Rd = np.zeros((2 * ny, 2 * ny))
            Rd[:ny, :ny] = H[i] @ R @ H[i].T
            Rd[ny:, ny:] = H[i - 1] @ R @ H[i - 1].T
            hi["beta5"] = max(hi["beta5"], _eig_range(Rd + Lw @ Pd @ Lw.T)[1])
        W = error_propagators(model, mats, trace, Abar)
        for k in range(len(W)):
            if np.linalg.svd(W[k], compute_uv=False)[-1] <= CONST_TOL:
                violations.append(f"W singular at t={traj.t0 + k}; beta6 inapplicable")
        for k in range(1, len(W)):
            # smallest singular value of W[k-1]^-1 W[k]^-1 is 1/||W[k] W[k-1]||
            s = np.linalg.norm(W[k] @ W[k - 1], 2)
            lo["beta6"] = min(lo["beta6"], 1.0 / s if s > 0 else np.inf)
    out = {k: float(v) * (1 - margin) if v > 0 else float(v) for k, v in lo.items()}
    out.update({k: float(v) * (1 + margin) if v > 0 else float(v) for k, v in hi.items()})
    c = ConditionConstants(**out, violations=sorted(set(violations)))
    c.violations.extend(c._check())
    return c


def covariance_bound(c, nx, tau):
    """Upper bound on ``max_t ||P[t|t-1] - Phat[t|t-1]||_2`` after ``tau`` steps.

    ``xi**tau * delta1 * nx * (alpha1 beta1 + 1)**2 (alpha2 beta2 + 1) / (alpha2 beta1**2)``
    with ``xi`` the conservative rate :attr:`ConditionConstants.xi`.
    """
    if not c.valid:
        raise ModelError("condition constants invalid: " + "; ".join(c.violations or c._check()))
    if tau < 0:
        raise ModelError("tau must be non-negative")
    return (c.xi ** tau * c.delta1 * nx * (c.alpha1 * c.beta1 + 1) ** 2
            * (c.alpha2 * c.beta2 + 1) / (c.alpha2 * c.beta1 ** 2))


def restart_upper_limit(c):
    """Open upper limit ``alpha2 / (alpha2 beta2 + 1)`` for the restart matrix."""
    return c.alpha2 / (c.alpha2 * c.beta2 + 1.0)


def restarted_covariances(model, mats, s, t, P0, Abar=None, GQG=None):
    """Recursion restarted with posterior ``P[s|s] = P0`` and run up to time index ``t``.

    Returns ``(P_prior_t, P_post_t, K_t, L_hist)`` where ``L_hist`` lists the
    restarted filter gains at ``s+1..t``. For ``t == s`` the prior is ``None``
    and the posterior is ``P0``.
    """
    if Abar is None:
        Abar, GQG = decorrelated_matrices(model, mats)
    if t < s:
        raise ModelError("restart time after measurement time")
    P0 = _sym(np.asarray(P0, dtype=float))
    if t == s:
        return None, P0, None, []
    n = model.noise
    P = _sym(Abar[s] @ P0 @ Abar[s].T + GQG[s])
    L_hist = []
    for k in range(s + 1, t + 1):
        r = _step(mats["A"][k], mats["C"][k], mats["G"][k], mats["H"][k], n.Q, n.S, n.R, P, k)
        L_hist.append(r.L)
        if k == t:
            return P, r.P_post, r.K, L_hist
        P = r.P_next


@dataclass
class RestartExperiment:
    """Outcome of one restart run for a single ``tau``.

    ``times`` are the measured time indices; ``diff_norms[j]`` is
    ``||P[t|t-1] - Phat[t|t-1]||_2`` and ``sandwich_min_eig[j]`` the smallest
    eigenvalue of ``P[t|t] - Phat[t|t]`` at ``times[j]``.
    """

    tau: int
    P0: np.ndarray
    times: np.ndarray
    diff_norms: np.ndarray
    sandwich_min_eig: np.ndarray
    upper_sandwich_ok: np.ndarray
    bound: float | None
    p0_admissible: bool

    @property
    def max_diff(self):
        return float(self.diff_norms.max()) if self.diff_norms.size else 0.0

    @property
    def bound_ok(self):
        return self.bound is None or self.max_diff <= self.bound

    def sandwich_ok(self, tol=1e-9):
        return bool(np.all(self.sandwich_min_eig >= -tol))


def restart_experiment(model, traj, tau, P0_scale=0.5, constants=None, burn_in=None,
                       P0=None, trace=None, mats=None):
    """Compare the reference recursion with recursions restarted ``tau`` steps back.

    Parameters
    ----------
    model : LpvSsModel
    traj : SchedulingTrajectory
    tau : int
        Window length, ``>= 1``.
    P0_scale : float
        ``P0 = P0_scale * alpha2 / (alpha2 beta2 + 1) * I``; must be in (0, 1).
    constants : ConditionConstants, optional
        Estimated from ``traj`` alone if omitted.
    burn_in : int, optional
        First admissible window start; default ``max(20, 5 n_x)``.
    P0 : ndarray, optional
        Explicit restart matrix, overrides ``P0_scale``.
    """
    tau = int(tau)
    if tau < 1:
        raise ModelError("tau must be >= 1")
    if burn_in is None:
        burn_in = default_burn_in(model.nx)
    N = len(traj)
    if N <= burn_in + tau:
        raise ModelError(f"trajectory of length {N} too short for burn-in {burn_in} and tau {tau}")
    if mats is None:
        mats = model.evaluate(traj)
    if trace is None:
        trace = compute_trace(model, traj, mats=mats)
    if constants is None:
        constants = estimate_condition_constants(model, [traj], traces=[trace])
    upper = restart_upper_limit(constants) if constants.alpha2 > 0 else 0.0
    if P0 is None:
        if not 0.0 < P0_scale < 1.0:
            raise ModelError("P0_scale must lie in (0, 1)")
        P0 = P0_scale * upper * np.eye(model.nx)
    P0 = np.asarray(P0, dtype=float)
    lam = np.linalg.eigvalsh(P0)
    admissible = bool(lam[0] > 0 and lam[-1] < upper)
    Abar, GQG = decorrelated_matrices(model, mats)
    times = np.arange(burn_in + tau, N)
    diffs = np.empty(times.size)
    sand = np.empty(times.size)
    upper_ok = np.empty(times.size, dtype=bool)
    eye = np.eye(model.nx)
    for j, t in enumerate(times):
        s = t - tau
        Pp, Pq, _, L_hist = restarted_covariances(model, mats, s, t, P0, Abar, GQG)
        diffs[j] = np.linalg.norm(trace.P_prior[t] - Pp, 2)
        D = _sym(trace.P_post[t] - Pq)
        sand[j] = np.linalg.eigvalsh(D)[0]
        # informational upper sandwich with restarted error propagators
        Pi = eye
        for k, Lk in zip(range(s, t), L_hist):
            Pi = (eye - Lk @ mats["C"][k + 1]) @ Abar[k] @ Pi
        U = _sym(Pi @ (trace.P_post[s] - P0) @ Pi.T)
        upper_ok[j] = np.linalg.eigvalsh(U - D)[0] >= -1e-9 * max(1.0, np.trace(U))
    bound = covariance_bound(constants, model.nx, tau) if constants.valid else None
    return RestartExperiment(tau, P0, times + traj.t0, diffs, sand, upper_ok, bound, admissible)


@dataclass
class LyapunovReport:
    tau: int
    n_checks: int
    violations: int
    max_ratio: float
    limit: float | None

    @property
    def ok(self):
        return self.limit is not None and self.violations == 0


def lyapunov_decay_check(model, traj, tau, constants, n_vectors=20, seed=0,
                         trace=None, mats=None):
    """Check ``||W[s+tau-1] ... W[s] e||^2 <= xi**tau gamma2/gamma1 ||e||^2``.

    Every window start ``s`` along ``traj`` is checked with ``n_vectors``
    random unit vectors ``e``; ``max_ratio`` is the largest observed
    ``||Pi e||^2`` (for unit ``e``).
    """
    if mats is None:
        mats = model.evaluate(traj)
    if trace is None:
        trace = compute_trace(model, traj, mats=mats)
    W = error_propagators(model, mats, trace)
    if not constants.valid:
        return LyapunovReport(tau, 0, 0, float("nan"), None)
    limit = constants.xi ** tau * constants.gamma2 / constants.gamma1
    rng = np.random.default_rng(seed)
    E = rng.standard_normal((model.nx, n_vectors))
    E /= np.linalg.norm(E, axis=0)
    checks = viol = 0
    worst = 0.0
    for s in range(0, len(W) - tau + 1):
        Pi = np.eye(model.nx)
        for k in range(s, s + tau):
            Pi = W[k] @ Pi
        r = np.sum((Pi @ E) ** 2, axis=0)
        worst = max(worst, float(r.max()))
        viol += int(np.sum(r > limit))
        checks += n_vectors
    return LyapunovReport(tau, checks, viol, worst, float(limit))
