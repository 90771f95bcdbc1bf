import warnings

import numpy as np
import pytest

from mimo_wsrm.exceptions import SolverError
from mimo_wsrm.rate_engine import mmse_filters
from mimo_wsrm.subproblem import (
    DegenerateCovarianceWarning, SolverOptions, SubproblemData, build_subproblem, gradient,
    initial_covariances, objective, project_euclidean, project_feasible, recover_beamformer,
    recover_beamformers, solve, write_solver_trace)

from conftest import crandn, random_psd

LN2 = np.log(2)
TIGHT = SolverOptions(objective_tol=1e-14, max_inner_iters=5000)


def make_data(A, P, w, budget):
    A = np.asarray(A, dtype=complex)
    return SubproblemData(cell=0, signal_maps=A, weights=np.asarray(w, dtype=float),
                          penalty=np.asarray(P, dtype=complex), budget=float(budget))


def scalar_data(a, c, w=1.0, budget=100.0):
    return make_data([[[np.sqrt(a)]]], [[[c]]], [w], budget)


def random_data(rng, N=2, Nt=4, Nr=2, budget=10.0):
    A = crandn(rng, N, Nr, Nt)
    P = np.stack([random_psd(rng, Nt) * 0.1 for _ in range(N)])
    return make_data(A, P, rng.uniform(0.2, 1.0, N), budget)


def random_feasible_covs(rng, data, N=2, Nt=4):
    W = np.stack([random_psd(rng, Nt) for _ in range(N)])
    return W * (0.9 * data.budget / np.trace(W, axis1=1, axis2=2).real.sum())


def hermitian_basis(n):
    """Real basis of n x n Hermitian matrices (real and imaginary components)."""
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = E[j, i] = 1
            yield E
            if i != j:
                E = np.zeros((n, n), dtype=complex)
                E[i, j], E[j, i] = 1j, -1j
                yield E


# ---- build_subproblem --------------------------------------------------------

def test_two_cells_use_filter_gram_only(instance):
    cfg, ch, V = instance(seed=1)
    U = mmse_filters(ch, V)
    data = build_subproblem(ch, V, U, cfg, 0)
    assert data.victims == (1,)
    for n in range(4):
        np.testing.assert_allclose(data.leakage_noise[0, n], U[1, n].conj().T @ U[1, n], atol=1e-12)
    np.testing.assert_allclose(data.signal_maps[2], U[0, 2].conj().T @ ch.link(0, 0, 2))


def test_single_cell_has_no_penalty(instance):
    cfg, ch, V = instance(num_cells=1)
    data = build_subproblem(ch, V, mmse_filters(ch, V), cfg, 0)
    assert data.victims == ()
    assert np.all(data.penalty == 0)


def test_penalty_matches_termwise_oracle(instance):
    cfg, ch, V = instance(seed=7, num_cells=3, user_weights=(1, 2, 3, 4, 5, 6))
    U = mmse_filters(ch, V)
    users = ch.assignment.user_of
    w = cfg.weights
    for m in range(3):
        data = build_subproblem(ch, V, U, cfg, m)
        for n in range(4):
            P = np.zeros((4, 4), dtype=complex)
            for v in range(3):
                if v == m:
                    continue
                u = U[v, n]
                N_leak = u.conj().T @ u
                for i in range(3):
                    if i not in (m, v):
                        T = u.conj().T @ ch.H[i, v, users[v, n], n] @ V[i, n]
                        N_leak = N_leak + T @ T.conj().T
                B = u.conj().T @ ch.H[m, v, users[v, n], n]
                P += w[v, users[v, n]] * B.conj().T @ np.linalg.inv(N_leak) @ B
            np.testing.assert_allclose(data.penalty[n], P, atol=1e-12)
            assert np.linalg.eigvalsh(data.penalty[n]).min() > -1e-12
        assert data.weights.tolist() == [w[m, users[m, n]] for n in range(4)]


# ---- objective and gradient -------------------------------------------------

def test_objective_zero_at_identity_signal():
    A = np.eye(2, dtype=complex)[None]
    data = make_data(A, np.zeros((1, 2, 2)), [1.0], 10)
    assert objective(data, np.eye(2, dtype=complex)[None], eps=0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("W", [0.5, 2.0, 7.0])
def test_objective_scalar(W):
    a, c, w = 1.7, 0.3, 0.6
    data = scalar_data(a, c, w)
    expected = w * np.log2(a * W) - c * W / LN2
    assert objective(data, np.array([[[W]]]), eps=0) == pytest.approx(expected, rel=1e-13)


def test_objective_matches_independent_evaluation(rng):
    for _ in range(5):
        data = random_data(rng, N=3, Nt=4, Nr=2)
        W = random_feasible_covs(rng, data, N=3)
        eps = 1e-9
        total = 0.0
        for n in range(3):
            A = data.signal_maps[n]
            S = A @ W[n] @ A.conj().T + eps * np.eye(2)
            total += data.weights[n] * np.log(np.linalg.det(S).real) / np.log(2)
            total -= sum(data.penalty[n][i, j] * W[n][j, i] for i in range(4) for j in range(4)).real / np.log(2)
        assert objective(data, W, eps) == pytest.approx(total, abs=1e-10)


def test_objective_singular_without_regulariser():
    data = scalar_data(1.0, 0.0)
    with pytest.raises(SolverError):
        objective(data, np.zeros((1, 1, 1)), eps=0)


def test_gradient_scalar():
    W, w, a, c = 1.5, 0.8, 2.0, 0.4
    g = gradient(scalar_data(a, c, w), np.array([[[W]]]), eps=0)
    assert g[0, 0, 0].real == pytest.approx(w / (W * LN2) - c / LN2, rel=1e-13)


def test_gradient_identity_signal(rng):
    A = crandn(rng, 1, 2, 4)
    W = np.linalg.pinv(A[0]) @ np.linalg.pinv(A[0]).conj().T  # A W A^H = I
    data = make_data(A, np.zeros((1, 4, 4)), [0.7], 10)
    np.testing.assert_allclose(A[0] @ W @ A[0].conj().T, np.eye(2), atol=1e-12)
    g = gradient(data, W[None], eps=0)
    np.testing.assert_allclose(g[0], 0.7 / LN2 * A[0].conj().T @ A[0], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    data = random_data(rng, N=2, Nt=3, Nr=2)
    W = random_feasible_covs(rng, data, N=2, Nt=3)
    G = gradient(data, W)
    h = 1e-6
    fd, an = [], []
    for n in range(2):
        for E in hermitian_basis(3):
            D = np.zeros_like(W)
            D[n] = E
            fd.append((objective(data, W + h * D) - objective(data, W - h * D)) / (2 * h))
            an.append(np.real(np.trace(G[n] @ E)))
    fd, an = np.array(fd), np.array(an)
    assert np.linalg.norm(fd - an) / np.linalg.norm(an) < 1e-5
    np.testing.assert_allclose(G, np.conj(np.swapaxes(G, -1, -2)), atol=1e-14)


# ---- projections ----------------------------------------------------------

def test_projection_keeps_feasible_point(rng):
    W = np.stack([random_psd(rng, 3) for _ in range(2)])
    budget = 2 * np.trace(W, axis1=1, axis2=2).real.sum()
    np.testing.assert_allclose(project_feasible(W, budget), W, atol=1e-12)
    np.testing.assert_allclose(project_euclidean(W, budget), W, atol=1e-12)


def test_projection_clips_negative_eigenvalues():
    out = project_feasible(np.diag([1.0, -1.0]).astype(complex)[None], 100.0)
    np.testing.assert_allclose(out[0], np.diag([1.0, 0.0]), atol=1e-15)


def test_projection_uniform_scaling():
    W = np.stack([np.diag([30.0, 30.0]), np.diag([40.0, 20.0])]).astype(complex)
    out = project_feasible(W, 100.0)
    np.testing.assert_allclose(out, W * 5 / 6, atol=1e-12)
    np.testing.assert_allclose(np.trace(out, axis1=1, axis2=2).real, [50.0, 50.0])


@pytest.mark.parametrize("project", [project_feasible, project_euclidean])
def test_projection_outputs_feasible(project, rng):
    for _ in range(100):
        X = crandn(rng, 3, 4, 4) * rng.uniform(0.1, 10)
        budget = rng.uniform(0.1, 20)
        Y = project(X, budget)
        np.testing.assert_allclose(Y, np.conj(np.swapaxes(Y, -1, -2)), atol=1e-12)
        assert np.linalg.eigvalsh(Y).min() >= -1e-10
        assert np.trace(Y, axis1=1, axis2=2).real.sum() <= budget * (1 + 1e-9)


def test_euclidean_projection_is_nearest_point(rng):
    # variational inequality: <X - P(X), Y - P(X)> <= 0 for every feasible Y
    for _ in range(30):
        X = crandn(rng, 2, 3, 3) * 3
        X = X + np.conj(np.swapaxes(X, -1, -2))
        budget = rng.uniform(0.5, 5)
        PX = project_euclidean(X, budget)
        for _ in range(20):
            Y = np.stack([random_psd(rng, 3) for _ in range(2)])
            Y *= rng.uniform(0, 1) * budget / np.trace(Y, axis1=1, axis2=2).real.sum()
            assert np.real(np.vdot(X - PX, Y - PX)) <= 1e-9
        np.testing.assert_allclose(project_euclidean(PX, budget), PX, atol=1e-10)


# ---- solve ------------------------------------------------------------------

def test_solve_interference_free_scalar_uses_full_budget():
    data = scalar_data(1.0, 0.0, budget=100.0)
    W = solve(data, np.array([[[1.0]]], dtype=complex), TIGHT)
    assert W[0, 0, 0].real == pytest.approx(100.0, rel=1e-9)
    assert objective(data, W) == pytest.approx(np.log2(100.0), abs=1e-9)


def test_solve_scalar_stationary_point():
    data = scalar_data(1.0, 0.5, w=1.0, budget=100.0)
    W = solve(data, np.array([[[10.0]]], dtype=complex), TIGHT)
    assert W[0, 0, 0].real == pytest.approx(2.0, abs=1e-6)


def grid_optimum(a, c, w, budget, step=1e-3):
    d = np.arange(0.0, budget + step / 2, step)
    best = -np.inf
    for d1 in d:
        d2 = d[d <= budget - d1 + 1e-12]
        f = w * np.log2((a[0] * d1 + 1e-9) * (a[1] * d2 + 1e-9)) - (c[0] * d1 + c[1] * d2) / LN2
        best = max(best, f.max())
    return best


@pytest.mark.parametrize("a, c, budget", [
    ((1.0, 0.3), (0.2, 0.05), 3.0),
    ((2.0, 0.5), (1.5, 0.1), 4.0),   # penalty keeps the first mode below its unconstrained peak
])
def test_solve_diagonal_matches_grid_search(a, c, budget):
    A = np.diag(np.sqrt(a)).astype(complex)[None]
    data = make_data(A, np.diag(c)[None], [1.0], budget)
    W = solve(data, initial_covariances(np.eye(2, dtype=complex)[None] * 0.1, budget), TIGHT)
    assert objective(data, W) == pytest.approx(grid_optimum(a, c, 1.0, budget), abs=1e-3)
    assert objective(data, W) >= grid_optimum(a, c, 1.0, budget) - 1e-9


def test_solve_ascends_and_stays_feasible(rng):
    for _ in range(5):
        data = random_data(rng, N=3, budget=rng.uniform(1, 50))
        init = project_feasible(np.stack([random_psd(rng, 4) for _ in range(3)]), data.budget)
        trace = []
        W = solve(data, init, trace=trace)
        objs = [t[1] for t in trace]
        assert objs[0] == pytest.approx(objective(data, init))
        assert all(b >= a for a, b in zip(objs, objs[1:]))
        assert objective(data, W) >= objective(data, init) - 1e-12
        for k in (1, 2, 5, 10):
            Wk = solve(data, init, SolverOptions(max_inner_iters=k))
            assert np.linalg.eigvalsh(Wk).min() >= -1e-10
            assert np.trace(Wk, axis1=1, axis2=2).real.sum() <= data.budget * (1 + 1e-9)


def test_solve_with_scaled_projection_is_feasible(rng):
    data = random_data(rng, N=2, budget=5.0)
    init = project_feasible(np.stack([random_psd(rng, 4) for _ in range(2)]), 5.0)
    W = solve(data, init, SolverOptions(projection="scaled"))
    assert objective(data, W) >= objective(data, init)
    assert np.trace(W, axis1=1, axis2=2).real.sum() <= 5.0 * (1 + 1e-9)


def test_solve_rejects_infinite_start():
    data = scalar_data(1.0, 0.0)
    with pytest.raises(SolverError):
        solve(data, np.zeros((1, 1, 1), dtype=complex), SolverOptions(eps=0.0))


@pytest.mark.parametrize("bad", [dict(backtrack=1.0), dict(armijo=0.0), dict(step_init=0.0),
                                 dict(projection="exact"), dict(max_inner_iters=0)])
def test_solver_options_validation(bad):
    with pytest.raises(ValueError):
        SolverOptions(**bad)


def test_objective_is_concave(rng):
    for _ in range(20):
        data = random_data(rng, N=2)
        W1, W2 = random_feasible_covs(rng, data), random_feasible_covs(rng, data)
        f1, f2 = objective(data, W1), objective(data, W2)
        for t in (0.25, 0.5, 0.75):
            assert objective(data, t * W1 + (1 - t) * W2) >= t * f1 + (1 - t) * f2 - 1e-9


# ---- recovery ---------------------------------------------------------------

def test_recover_exact_rank(rng):
    V0 = crandn(rng, 4, 2)
    W = V0 @ V0.conj().T
    V = recover_beamformer(W, 2)
    np.testing.assert_allclose(V @ V.conj().T, W, atol=1e-10)


def test_recover_identity_truncation():
    V = recover_beamformer(np.eye(4, dtype=complex), 2)
    R = V @ V.conj().T
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(R)), [0, 0, 1, 1], atol=1e-12)
    assert np.linalg.norm(np.eye(4) - R) == pytest.approx(np.sqrt(2))


def test_recover_eckart_young(rng):
    for _ in range(100):
        W = random_psd(rng, 4)
        V = recover_beamformer(W, 2)
        sigma = np.sort(np.linalg.eigvalsh(W))[::-1]
        assert np.linalg.norm(W - V @ V.conj().T) ** 2 == pytest.approx(np.sum(sigma[2:] ** 2), abs=1e-10)


def test_recover_degenerate_warns():
    W = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    with pytest.warns(DegenerateCovarianceWarning):
        V = recover_beamformer(W, 2)
    assert np.all(V[:, 1] == 0)


def test_recover_batched_power(rng):
    W = np.stack([random_psd(rng, 4, rank=2) for _ in range(3)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        V = recover_beamformers(W, 2)
    np.testing.assert_allclose(np.sum(np.abs(V) ** 2), np.trace(W, axis1=1, axis2=2).real.sum())


def test_solver_trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    write_solver_trace([(0, 1, 0, 1.5, 0.0), (0, 1, 1, 2.5, 0.25)], path)
    assert path.read_text().splitlines() == [
        "cell,outer_iter,inner_iter,objective,step", "0,1,0,1.5,0.0", "0,1,1,2.5,0.25"]
