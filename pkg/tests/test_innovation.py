import numpy as np
import pytest
from scipy.linalg import solve_discrete_are

from lpvss.core import ModelError, NumericalError, SchedulingTrajectory
from lpvss.innovation import (compute_trace, posterior_to_prior, riccati_step,
                              run_filter, suboptimal_covariance, whiteness,
                              write_trace_csv)
from lpvss.models import random_model, random_stable_lti, scalar_lti
from lpvss.simulate import (SimConfig, gen_input, gen_scheduling, sample_noise,
                            simulate_general)

P_STAR_SCALAR = (0.25 + np.sqrt(0.25 ** 2 + 4.0)) / 2  # root of P^2 - 0.25 P - 1


def test_scalar_step_by_hand(scalar):
    r = riccati_step(scalar, [0.0], [[1.0]])
    assert r.Omega[0, 0] == pytest.approx(2.0)
    assert r.K[0, 0] == pytest.approx(0.25)
    assert r.P_next[0, 0] == pytest.approx(1.125)


def test_noise_free_state(two_state):
    from lpvss.core import AffineMatrixFunction, LpvSsModel, NoiseSpec

    m = two_state
    m = LpvSsModel(m.A, m.B, m.C, m.D, AffineMatrixFunction(np.zeros((2, 2))), m.H,
                   NoiseSpec(m.noise.Q, np.zeros((2, 2)), m.noise.R), m.basis, m.scheduling_set)
    r = riccati_step(m, [0.3], np.zeros((2, 2)))
    H = m.matrices([0.3])[5]
    np.testing.assert_array_equal(r.K, 0.0)
    np.testing.assert_allclose(r.Omega, H @ m.noise.R @ H.T)
    np.testing.assert_array_equal(r.P_next, 0.0)


def test_scalar_fixed_point(scalar):
    P = np.zeros((1, 1))
    for _ in range(200):
        P = riccati_step(scalar, [0.0], P).P_next
    assert P[0, 0] == pytest.approx(P_STAR_SCALAR, abs=1e-10)
    assert P[0, 0] == pytest.approx(1.1328, abs=1e-4)


def test_singular_omega_reports_time():
    m = scalar_lti(h=0.0, c=0.0)
    with pytest.raises(NumericalError, match="t=0"):
        compute_trace(m, SchedulingTrajectory(np.zeros(3)))


def test_horizon_one(two_state):
    tr = compute_trace(two_state, SchedulingTrajectory([[0.1]]))
    assert len(tr) == 1 and tr.K.shape == (1, 2, 2) and tr.Omega.shape == (1, 2, 2)


def test_constant_p_gain_converges(two_state):
    tr = compute_trace(two_state, SchedulingTrajectory(np.full(300, 0.4)))
    dK = np.linalg.norm(np.diff(tr.K, axis=0), axis=(1, 2))
    assert np.all(dK[100:] < 1e-10)


def test_causality(two_state, rng):
    p = rng.uniform(-1, 1, 60)
    q = p.copy()
    q[31:] = rng.uniform(-1, 1, 29)
    a = compute_trace(two_state, SchedulingTrajectory(p))
    b = compute_trace(two_state, SchedulingTrajectory(q))
    for name in ("K", "P_prior", "Omega"):
        np.testing.assert_array_equal(getattr(a, name)[:31], getattr(b, name)[:31])
    assert not np.allclose(a.K[31:], b.K[31:])


@pytest.mark.parametrize("seed", range(10))
def test_psd_preservation(seed):
    m = random_model(np.random.default_rng(seed), nx=3, ny=2)
    traj = gen_scheduling(SimConfig(80, seed=seed, scheduling_kind="uniform"), m.scheduling_set)
    tr = compute_trace(m, traj, P_init=np.eye(3))
    for P in np.concatenate([tr.P_prior, tr.P_post]):
        assert np.linalg.eigvalsh(P)[0] >= -1e-10 * np.trace(P)
    assert all(np.linalg.eigvalsh(O)[0] > 0 for O in tr.Omega)


@pytest.mark.parametrize("seed", range(5))
def test_posterior_prior_round_trip(seed):
    m = random_model(np.random.default_rng(seed), nx=3, ny=2)
    traj = gen_scheduling(SimConfig(40, seed=seed, scheduling_kind="uniform"), m.scheduling_set)
    tr = compute_trace(m, traj)
    mats = m.evaluate(traj)
    nxt = np.concatenate([tr.P_prior[1:], tr.P_final[None]])
    for k in range(len(tr)):
        np.testing.assert_allclose(
            tr.P_post[k], (np.eye(3) - tr.L[k] @ mats["C"][k]) @ tr.P_prior[k], atol=1e-12)
        np.testing.assert_allclose(posterior_to_prior(m, traj[k], tr.P_post[k]), nxt[k],
                                   rtol=1e-12, atol=1e-12)


def test_round_trip_without_cross_covariance(rng):
    from lpvss.core import NoiseSpec, LpvSsModel

    m = random_model(rng, nx=2, ny=2)
    m = LpvSsModel(m.A, m.B, m.C, m.D, m.G, m.H, NoiseSpec(m.noise.Q, np.zeros((2, 2)), m.noise.R),
                   m.basis, m.scheduling_set)
    traj = gen_scheduling(SimConfig(30, seed=1, scheduling_kind="uniform"), m.scheduling_set)
    tr = compute_trace(m, traj)
    for k in range(len(tr) - 1):
        np.testing.assert_allclose(posterior_to_prior(m, traj[k], tr.P_post[k]),
                                   tr.P_prior[k + 1], atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_lti_reduction_matches_dare(seed):
    m = random_stable_lti(np.random.default_rng(seed), nx=3, ny=2)
    A, _, C, _, G, H = m.matrices([0.0])
    n = m.noise
    P_star = solve_discrete_are(A.T, C.T, G @ n.Q @ G.T, H @ n.R @ H.T, s=G @ n.S @ H.T)
    tr = compute_trace(m, SchedulingTrajectory(np.zeros(400)))
    err = np.linalg.norm(tr.P_prior[200:] - P_star, 2, axis=(1, 2))
    assert err.max() <= 1e-8


def test_filter_noise_free_data_gives_zero_innovations(two_state, rng):
    traj = gen_scheduling(SimConfig(50, seed=2, scheduling_kind="uniform-random-walk"),
                          two_state.scheduling_set)
    u = rng.standard_normal((50, 1))
    x0 = np.array([0.3, -0.2])
    rec = simulate_general(two_state, traj, u, np.zeros((50, 2)), np.zeros((50, 2)), x0)
    run = run_filter(two_state, compute_trace(two_state, traj), traj, u, rec.y, x0)
    assert np.max(np.abs(run.xi)) < 1e-12


def test_filter_zero_gain_is_open_loop(two_state, rng):
    traj = gen_scheduling(SimConfig(20, seed=2, scheduling_kind="sinusoid"), two_state.scheduling_set)
    tr = compute_trace(two_state, traj)
    tr0 = type(tr)(np.zeros_like(tr.K), tr.L, tr.P_prior, tr.P_post, tr.Omega, tr.P_final)
    u = rng.standard_normal((20, 1))
    y = rng.standard_normal((20, 2))
    run = run_filter(two_state, tr0, traj, u, y)
    clean = simulate_general(two_state, traj, u, np.zeros((20, 2)), np.zeros((20, 2)))
    np.testing.assert_allclose(run.x_hat, clean.x)
    np.testing.assert_allclose(run.xi, y - clean.y)


def test_filter_length_mismatch(two_state):
    traj = SchedulingTrajectory(np.zeros(5))
    tr = compute_trace(two_state, traj)
    with pytest.raises(ModelError):
        run_filter(two_state, tr, traj, np.zeros((5, 1)), np.zeros((4, 2)))


def test_innovation_definition(two_state, rng):
    traj = gen_scheduling(SimConfig(30, seed=8, scheduling_kind="uniform"), two_state.scheduling_set)
    u = rng.standard_normal((30, 1))
    w, v = sample_noise(two_state.noise, 30, seed=8)
    rec = simulate_general(two_state, traj, u, w, v)
    run = run_filter(two_state, compute_trace(two_state, traj), traj, u, rec.y)
    mats = two_state.evaluate(traj)
    for k in range(30):
        assert np.array_equal(run.xi[k], rec.y[k] - mats["C"][k] @ run.x_hat[k] - mats["D"][k] @ u[k])


def test_whiteness_of_filter_innovations(two_state):
    inside = []
    for run in range(40):
        cfg = SimConfig(200, seed=run, scheduling_kind="uniform-random-walk", input_kind="prbs")
        traj = gen_scheduling(cfg, two_state.scheduling_set)
        u = gen_input(cfg, 1)
        w, v = sample_noise(two_state.noise, 200, seed=1000 + run)
        rec = simulate_general(two_state, traj, u, w, v)
        tr = compute_trace(two_state, traj)
        e = run_filter(two_state, tr, traj, u, rec.y).normalized_innovations(tr)
        inside.append(whiteness(e))
    assert np.mean(inside) >= 0.95


def test_whiteness_detects_colored_noise(rng):
    e = rng.standard_normal((500, 1))
    colored = e + 0.9 * np.roll(e, 1, axis=0)
    assert whiteness(colored)[0].all() == False  # noqa: E712


def test_suboptimal_with_optimal_gains(two_state):
    traj = gen_scheduling(SimConfig(60, seed=3, scheduling_kind="uniform"), two_state.scheduling_set)
    tr = compute_trace(two_state, traj)
    P = suboptimal_covariance(two_state, traj, tr.K)
    np.testing.assert_allclose(P[:-1], tr.P_prior, atol=1e-12)
    np.testing.assert_allclose(P[-1], tr.P_final, atol=1e-12)


def test_suboptimal_perturbed_gain_is_worse(two_state):
    traj = gen_scheduling(SimConfig(60, seed=3, scheduling_kind="uniform"), two_state.scheduling_set)
    tr = compute_trace(two_state, traj)
    K = tr.K.copy()
    K[25, 0, 1] += 0.1
    P = suboptimal_covariance(two_state, traj, K)
    diffs = [np.linalg.eigvalsh(P[k] - tr.P_prior[k])[0] for k in range(26, 60)]
    assert min(diffs) >= -1e-9
    assert np.linalg.norm(P[26] - tr.P_prior[26]) > 1e-4


def test_suboptimal_zero_gains_open_loop(two_state):
    traj = gen_scheduling(SimConfig(10, seed=3, scheduling_kind="uniform"), two_state.scheduling_set)
    mats = two_state.evaluate(traj)
    P = suboptimal_covariance(two_state, traj, np.zeros((10, 2, 2)), P_init=np.eye(2))
    ref = np.eye(2)
    for k in range(10):
        ref = mats["A"][k] @ ref @ mats["A"][k].T + mats["G"][k] @ two_state.noise.Q @ mats["G"][k].T
        np.testing.assert_allclose(P[k + 1], ref, atol=1e-12)


def test_suboptimal_shape_check(two_state):
    with pytest.raises(ModelError):
        suboptimal_covariance(two_state, SchedulingTrajectory(np.zeros(4)), np.zeros((4, 2, 1)))


@pytest.mark.parametrize("seed", range(20))
def test_optimality_random_gains(seed):
    rng = np.random.default_rng(seed)
    nx = int(rng.integers(1, 4))
    m = random_model(rng, nx=nx, ny=int(rng.integers(1, 3)))
    traj = gen_scheduling(SimConfig(40, seed=seed, scheduling_kind="uniform"), m.scheduling_set)
    tr = compute_trace(m, traj)
    K = tr.K + 0.3 * rng.standard_normal(tr.K.shape)
    P = suboptimal_covariance(m, traj, K)
    for k in range(40):
        assert np.linalg.eigvalsh(P[k] - tr.P_prior[k])[0] >= -1e-9


def test_trace_csv_header(tmp_path, two_state):
    tr = compute_trace(two_state, SchedulingTrajectory(np.zeros(3), t0=5))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("t,K_1_1,K_2_1,K_1_2,K_2_2,P_1_1")
    assert lines[1].startswith("5,") and len(lines) == 4
    row = [float(v) for v in lines[2].split(",")]
    assert row[1:5] == list(tr.K[1].ravel(order="F"))
