"""Scheduling-dependent matrix functions and the LPV-SS model with general noise.

A model is the sextuple ``(A, B, C, D, G, H)`` of affine matrix functions of
the scheduling variable ``p`` together with a joint noise covariance::

    x[t+1] = A(p[t]) x[t] + B(p[t]) u[t] + G(p[t]) w[t]
    y[t]   = C(p[t]) x[t] + D(p[t]) u[t] + H(p[t]) v[t]

    [w; v] ~ N(0, [[Q, S], [S^T, R]])

Each matrix function has the form ``M(p) = M0 + sum_i M_i psi_i(p)`` where the
scalar basis functions ``psi_i`` are shared by all six matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ModelError",
    "NumericalError",
    "PD_TOL",
    "BasisFunction",
    "identity_basis",
    "monomial_basis",
    "constant_basis",
    "AffineMatrixFunction",
    "NoiseSpec",
    "SchedulingSet",
    "SchedulingTrajectory",
    "LpvSsModel",
    "ValidationReport",
    "Decorrelated",
    "eval_matrix",
    "validate_model",
    "decorrelate",
    "min_eig_ok",
]

#: Global tolerance for PD/PSD checks, relative to the trace of the matrix.
PD_TOL = 1e-10


class ModelError(ValueError):
    """Structural problem: inconsistent shapes, lengths or indices."""


class NumericalError(ArithmeticError):
    """Numerical precondition violated (singular or indefinite matrix)."""


def min_eig_ok(M, tol=PD_TOL, strict=True):
    """Check the smallest eigenvalue of symmetric ``M`` against ``tol * trace``.

    With ``strict`` the test is ``min_eig > tol * |trace|`` (positive definite),
    otherwise ``min_eig >= -tol * |trace|`` (positive semidefinite).
    """
    M = np.asarray(M, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    scale = max(abs(np.trace(M)), np.finfo(float).tiny)
    if strict:
        return bool(lam > tol * scale)
    return bool(lam >= -tol * scale)


@dataclass(frozen=True)
class BasisFunction:
    """Bounded scalar function ``psi_i`` on the scheduling set.

    Attributes
    ----------
    index : int
        1-based index ``i`` referenced by the coefficient terms.
    fn : callable
        Maps a scheduling point (1-D array of length ``n_p``) to a float.
    kind, params : str, dict
        Serializable description, used when writing model files.
    bound : float or None
        Declared bound ``|psi(p)| <= bound`` checked by :func:`validate_model`.
    """

    index: int
    fn: Callable[[np.ndarray], float] = field(compare=False)
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    bound: float | None = None

    def __call__(self, p):
        return float(self.fn(np.atleast_1d(np.asarray(p, dtype=float))))


def identity_basis(index, component=0, bound=None):
    """``psi(p) = p[component]``."""
    return BasisFunction(index, lambda p: p[component], "identity",
                         {"component": component}, bound)


def monomial_basis(index, component=0, degree=1, bound=None):
    """``psi(p) = p[component] ** degree``."""
    return BasisFunction(index, lambda p: p[component] ** degree, "monomial",
                         {"component": component, "degree": degree}, bound)


def constant_basis(index, value, bound=None):
    """``psi(p) = value`` for every ``p``."""
    value = float(value)
    return BasisFunction(index, lambda p: value, "constant", {"value": value}, bound)


@dataclass(frozen=True)
class AffineMatrixFunction:
    """``M(p) = M0 + sum_i M_i psi_i(p)``.

    ``terms`` is a tuple of ``(basis_index, M_i)`` pairs; every ``M_i`` must
    have the shape of ``M0``.
    """

    M0: np.ndarray
    terms: tuple = ()

    def __post_init__(self):
        M0 = np.atleast_2d(np.asarray(self.M0, dtype=float))
        terms = []
        for i, Mi in self.terms:
            Mi = np.atleast_2d(np.asarray(Mi, dtype=float))
            if Mi.shape != M0.shape:
                raise ModelError(
                    f"coefficient for basis {i} has shape {Mi.shape}, expected {M0.shape}")
            if int(i) < 1:
                raise ModelError(f"basis index must be >= 1, got {i}")
            Mi.setflags(write=False)
            terms.append((int(i), Mi))
        M0.setflags(write=False)
        object.__setattr__(self, "M0", M0)
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def constant(cls, M):
        return cls(M)

    @property
    def shape(self):
        return self.M0.shape

    def is_constant(self):
        return not any(np.any(Mi) for _, Mi in self.terms)

    def __call__(self, basis, p):
        return eval_matrix(self, basis, p)


def eval_matrix(fn, basis, p):
    """Evaluate an affine matrix function at scheduling point ``p``.

    Parameters
    ----------
    fn : AffineMatrixFunction
    basis : sequence of BasisFunction
        Looked up by their 1-based ``index``.
    p : array_like, shape (n_p,)

    Returns
    -------
    ndarray
        ``M0 + sum_i M_i psi_i(p)``, exactly, no regularization.
    """
    lookup = {b.index: b for b in basis}
    out = np.array(fn.M0, dtype=float)
    for i, Mi in fn.terms:
        if i not in lookup:
            raise ModelError(f"basis index {i} out of range")
        out = out + Mi * lookup[i](p)
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Joint covariance of ``(w, v)``: ``Sigma = [[Q, S], [S^T, R]]``."""

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        S = np.asarray(self.S, dtype=float).reshape(Q.shape[0], R.shape[0])
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise ModelError("Q and R must be square")
        for M in (Q, S, R):
            M.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "R", R)

    @property
    def sigma(self):
        return np.block([[self.Q, self.S], [self.S.T, self.R]])

    def is_pd(self, tol=PD_TOL):
        return min_eig_ok(self.sigma, tol)

    @property
    def Qbar(self):
        """Schur complement ``Q - S R^-1 S^T``."""
        return self.Q - self.S @ np.linalg.solve(self.R, self.S.T)


@dataclass(frozen=True)
class SchedulingSet:
    """Axis-aligned box ``[lo, hi]`` in ``R^n_p``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ModelError("scheduling box bounds differ in length")
        if np.any(lo > hi):
            raise ModelError(f"empty scheduling box: min {lo} > max {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_p(self):
        return self.lo.size

    def contains(self, p, atol=0.0):
        p = np.atleast_1d(p)
        return bool(np.all(p >= self.lo - atol) and np.all(p <= self.hi + atol))

    def clip(self, p):
        return np.clip(p, self.lo, self.hi)

    def grid(self, n=11):
        """Tensor grid with ``n`` points per axis."""
        axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class SchedulingTrajectory:
    """Samples ``p[t0], ..., p[t0 + N - 1]``, stored as an ``(N, n_p)`` array."""

    samples: np.ndarray
    t0: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]

    def __getitem__(self, k):
        return self.samples[k]

    def check_inside(self, box):
        for k, p in enumerate(self.samples):
            if not box.contains(p, atol=1e-12):
                raise ModelError(f"scheduling sample at t={self.t0 + k} outside box: {p}")
        return self


_NAMES = ("A", "B", "C", "D", "G", "H")


@dataclass(frozen=True)
class LpvSsModel:
    """LPV-SS representation with general (cross-correlated) Gaussian noise."""

    A: AffineMatrixFunction
    B: AffineMatrixFunction
    C: AffineMatrixFunction
    D: AffineMatrixFunction
    G: AffineMatrixFunction
    H: AffineMatrixFunction
    noise: NoiseSpec
    basis: tuple = ()
    scheduling_set: SchedulingSet | None = None

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        if self.scheduling_set is None:
            object.__setattr__(self, "scheduling_set", SchedulingSet([-1.0], [1.0]))
        nx = self.A.shape[0]
        nu = self.B.shape[1]
        ny = self.C.shape[0]
        expected = {"A": (nx, nx), "B": (nx, nu), "C": (ny, nx), "D": (ny, nu),
                    "G": (nx, nx), "H": (ny, ny)}
        for name in _NAMES:
            shape = getattr(self, name).shape
            if shape != expected[name]:
                raise ModelError(f"{name} has shape {shape}, expected {expected[name]}")
        if self.noise.Q.shape != (nx, nx) or self.noise.R.shape != (ny, ny):
            raise ModelError("noise covariance dimensions do not match the model")
        known = {b.index for b in self.basis}
        for name in _NAMES:
            for i, _ in getattr(self, name).terms:
                if i not in known:
                    raise ModelError(f"{name} references basis index {i} out of range")

    @property
    def dims(self):
        """``(n_x, n_u, n_y, n_p)``."""
        return (self.A.shape[0], self.B.shape[1], self.C.shape[0],
                self.scheduling_set.n_p)

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def nu(self):
        return self.B.shape[1]

    @property
    def ny(self):
        return self.C.shape[0]

    def matrices(self, p):
        """Evaluate all six matrices at ``p``; returns ``(A, B, C, D, G, H)``."""
        return tuple(eval_matrix(getattr(self, n), self.basis, p) for n in _NAMES)

    def evaluate(self, traj):
        """Evaluate the six matrices along a trajectory.

        Returns a dict mapping ``"A"``..``"H"`` to stacked arrays of shape
        ``(N, rows, cols)``.
        """
        samples = traj.samples if isinstance(traj, SchedulingTrajectory) else np.atleast_2d(traj)
        psi = np.array([[b(p) for b in self.basis] for p in samples]).reshape(len(samples), -1)
        col = {b.index: k for k, b in enumerate(self.basis)}
        out = {}
        for name in _NAMES:
            fn = getattr(self, name)
            M = np.broadcast_to(fn.M0, (len(samples),) + fn.shape).copy()
            for i, Mi in fn.terms:
                M += psi[:, col[i], None, None] * Mi
            out[name] = M
        return out

    @classmethod
    def lti(cls, A, B, C, D, G, H, Q, S, R):
        """Model with constant matrices (no basis functions)."""
        mats = [AffineMatrixFunction(M) for M in (A, B, C, D, G, H)]
        return cls(*mats, NoiseSpec(Q, S, R))


@dataclass
class ValidationReport:
    sigma_pd: bool
    sigma_min_eig: float
    h_min_sv: np.ndarray
    h_invertible: bool
    basis_bounded: dict
    violations: list

    @property
    def ok(self):
        return not self.violations


def validate_model(model, grid, sv_tol=1e-10):
    """Check the structural preconditions of a model on sampled scheduling points.

    Returns a :class:`ValidationReport`; nothing is raised, violations are
    listed in ``report.violations``.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 0:
        raise ModelError("validation grid is empty")
    if grid.shape[1] != model.scheduling_set.n_p and grid.shape[0] == model.scheduling_set.n_p:
        grid = grid.T
    violations = []
    sigma = model.noise.sigma
    lam = float(np.linalg.eigvalsh(0.5 * (sigma + sigma.T))[0])
    pd = model.noise.is_pd()
    if not pd:
        violations.append(f"noise covariance not positive definite (min eigenvalue {lam:.6g})")
    h_sv = np.array([np.linalg.svd(eval_matrix(model.H, model.basis, p), compute_uv=False)[-1]
                     for p in grid])
    bad = np.flatnonzero(h_sv <= sv_tol)
    for k in bad:
        violations.append(f"H(p) singular at p={grid[k].tolist()} (min singular value {h_sv[k]:.3g})")
    bounded = {}
    for b in model.basis:
        vals = np.array([b(p) for p in grid])
        ok = bool(np.all(np.isfinite(vals)))
        if b.bound is not None:
            ok = ok and bool(np.all(np.abs(vals) <= b.bound))
        bounded[b.index] = ok
        if not ok:
            violations.append(f"basis function {b.index} unbounded on grid")
    return ValidationReport(pd, lam, h_sv, bad.size == 0, bounded, violations)


@dataclass(frozen=True)
class Decorrelated:
    """Noise-decorrelated state equation at one scheduling point.

    ``x[t+1] = Abar x[t] + Bbar [u[t]; y[t]] + G wbar[t]``, with
    ``wbar ~ N(0, Qbar)`` independent of ``v``.
    """

    Abar: np.ndarray
    Bbar: np.ndarray
    Qbar: np.ndarray
    ubar: np.ndarray | None


def decorrelate(model, p, u=None, y=None):
    """Rewrite the state equation so process and measurement noise decouple.

    ``Abar = A - G S R^-1 H^-1 C``,
    ``Bbar = [B - G S R^-1 H^-1 D, G S R^-1 H^-1]`` and
    ``Qbar = Q - S R^-1 S^T``.
    """
    A, B, C, D, G, H = model.matrices(p)
    sv = np.linalg.svd(H, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise NumericalError(f"H(p) singular at p={np.atleast_1d(p).tolist()}")
    n = model.noise
    # G S R^-1 H^-1
    F = G @ n.S @ np.linalg.solve(n.R, np.linalg.inv(H))
    Abar = A - F @ C
    Bbar = np.hstack([B - F @ D, F])
    Qbar = n.Qbar
    Qbar = 0.5 * (Qbar + Qbar.T)
    ubar = None
    if u is not None and y is not None:
        ubar = np.concatenate([np.atleast_1d(u), np.atleast_1d(y)])
    return Decorrelated(Abar, Bbar, Qbar, ubar)
