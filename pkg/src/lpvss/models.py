"""Ready-made models used by the experiments, demos and tests."""
from __future__ import annotations

import numpy as np

from .core import (AffineMatrixFunction, LpvSsModel, NoiseSpec, SchedulingSet,
                   identity_basis)

__all__ = ["scalar_lti", "two_state_lpv", "random_model", "random_stable_lti"]


def scalar_lti(a=0.5, c=1.0, g=1.0, h=1.0, q=1.0, s=0.0, r=1.0, b=1.0, d=0.0):
    """Scalar model with constant matrices, one input and one output."""
    return LpvSsModel.lti([[a]], [[b]], [[c]], [[d]], [[g]], [[h]], [[q]], [[s]], [[r]])


def two_state_lpv():
    """Two-state, two-output model with affine dependence on ``p`` in ``[-1, 1]``.

    ``A(p)`` is a damped rotation plus a diagonal ``p`` term, ``C(p)`` is
    full rank on the whole box and the noise is cross-correlated. The
    decorrelated transition matrix stays well conditioned, so the
    convergence constants are all finite and positive.
    """
    c, s = np.cos(0.5), np.sin(0.5)
    basis = [identity_basis(1, 0, bound=1.0)]
    return LpvSsModel(
        AffineMatrixFunction(0.7 * np.array([[c, -s], [s, c]]),
                             [(1, [[0.15, 0.0], [0.0, -0.1]])]),
        AffineMatrixFunction([[1.0], [0.5]]),
        AffineMatrixFunction([[1.0, 0.2], [0.0, 1.0]], [(1, [[0.2, 0.0], [0.0, 0.1]])]),
        AffineMatrixFunction([[0.0], [0.0]]),
        AffineMatrixFunction(np.eye(2)),
        AffineMatrixFunction(np.eye(2)),
        NoiseSpec([[0.5, 0.1], [0.1, 0.4]], [[0.1, 0.0], [0.0, 0.05]], [[0.3, 0.0], [0.0, 0.2]]),
        basis,
        SchedulingSet([-1.0], [1.0]),
    )


def _random_cov(rng, n, floor=0.3):
    M = rng.standard_normal((n, n))
    return M @ M.T / n + floor * np.eye(n)


def _scaled(rng, shape, radius):
    M = rng.standard_normal(shape)
    return radius * M / max(np.linalg.norm(M, 2), 1e-12)


def random_model(rng, nx=2, ny=1, nu=1, radius=0.8, p_gain=0.3):
    """Random model with ``A(p) = A0 + p A1`` and ``||A(p)||_2 <= radius + p_gain``.

    ``C`` also depends on ``p``; ``G`` and ``H`` are near the identity and
    the joint noise covariance is a random positive definite matrix.
    """
    basis = [identity_basis(1, 0, bound=1.0)]
    sigma = _random_cov(rng, nx + ny)
    return LpvSsModel(
        AffineMatrixFunction(_scaled(rng, (nx, nx), radius), [(1, _scaled(rng, (nx, nx), p_gain))]),
        AffineMatrixFunction(rng.standard_normal((nx, nu))),
        AffineMatrixFunction(rng.standard_normal((ny, nx)), [(1, 0.3 * rng.standard_normal((ny, nx)))]),
        AffineMatrixFunction(rng.standard_normal((ny, nu))),
        AffineMatrixFunction(np.eye(nx) + 0.1 * rng.standard_normal((nx, nx))),
        AffineMatrixFunction(np.eye(ny) + 0.1 * rng.standard_normal((ny, ny))),
        NoiseSpec(sigma[:nx, :nx], sigma[:nx, nx:], sigma[nx:, nx:]),
        basis,
        SchedulingSet([-1.0], [1.0]),
    )


def random_stable_lti(rng, nx=2, ny=1, nu=1, radius=0.9):
    """Random model with constant matrices and spectral radius of ``A`` below ``radius``."""
    A = rng.standard_normal((nx, nx))
    A *= radius * rng.uniform(0.3, 1.0) / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    sigma = _random_cov(rng, nx + ny)
    return LpvSsModel.lti(A, rng.standard_normal((nx, nu)), rng.standard_normal((ny, nx)),
                          np.zeros((ny, nu)), np.eye(nx), np.eye(ny),
                          sigma[:nx, :nx], sigma[:nx, nx:], sigma[nx:, nx:])
