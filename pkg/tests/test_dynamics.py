import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from spikerank.dynamics import (
    ModelParams,
    expected_iteration,
    fit_decay,
    half_life,
    katz_vector,
    residual,
    scores_to_csv,
    simulate,
    steady_state,
    step_probabilities,
)
from spikerank.errors import ConvergenceError, DomainError
from spikerank.graph import SparseAdjacency, degree_bounds, spectral_radius
from spikerank.synth import erdos_renyi, k_regular_ring

from conftest import random_adjacency

TWO_NODE = SparseAdjacency.from_dense([[0, 1], [0, 0]])
TWO_CYCLE = SparseAdjacency.from_dense([[0, 1], [1, 0]])


def test_step_probabilities_without_response():
    params = ModelParams(alpha=0.0, b=[0.2, 1.5])
    assert step_probabilities(TWO_NODE, params, np.array([1, 1])).tolist() == [0.2, 1.0]


def test_step_probabilities_hand_example():
    params = ModelParams(alpha=0.3, b=[0.1, 0.1])
    np.testing.assert_allclose(step_probabilities(TWO_NODE, params, np.array([0, 1])), [0.4, 0.1])


def test_step_probabilities_unclamped_matches_dense(rng):
    A, dense = random_adjacency(rng, 30, 0.3)
    b = rng.uniform(0, 0.5, 30)
    s = rng.integers(0, 2, 30)
    params = ModelParams(alpha=0.2, b=b)
    raw = step_probabilities(A, params, s, clamp=False)
    np.testing.assert_allclose(raw, b + 0.2 * dense @ s, rtol=0, atol=1e-14)
    np.testing.assert_allclose(step_probabilities(A, params, s), np.clip(b + 0.2 * dense @ s, 0, 1))


def test_simulate_certain_activity():
    A = k_regular_ring(10, 4)
    traj = simulate(A, ModelParams(0.0, np.ones(10)), np.zeros(10, dtype=int), 5, seed=123)
    assert traj.states.min() == 1
    assert traj.total_per_step.tolist() == [10] * 5


def test_simulate_absorbing_zero():
    A = k_regular_ring(10, 4)
    traj = simulate(A, ModelParams(0.25, np.zeros(10)), np.zeros(10, dtype=int), 8, seed=5)
    assert not traj.states.any()


def test_simulate_is_seed_deterministic():
    A = erdos_renyi(40, 0.1, seed=1)
    params = ModelParams(0.05, np.full(40, 0.1))
    s0 = np.zeros(40, dtype=int)
    a = simulate(A, params, s0, 20, seed=99).states
    b = simulate(A, params, s0, 20, seed=99).states
    c = simulate(A, params, s0, 20, seed=100).states
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert set(np.unique(a)) <= {0, 1}


def test_simulate_draw_order():
    # one generator, n uniforms per step, compared in node order
    A = k_regular_ring(6, 2)
    params = ModelParams(0.1, np.full(6, 0.3))
    traj = simulate(A, params, np.ones(6, dtype=int), 3, seed=7)
    rng = np.random.default_rng(7)
    s = np.ones(6)
    for k in range(3):
        p = np.clip(0.3 + 0.1 * (A.to_dense() @ s), 0, 1)
        s = (rng.random(6) < p).astype(int)
        assert traj.states[k].tolist() == s.tolist()


def test_simulate_mean_tracks_expectation():
    A = k_regular_ring(12, 4)
    b = np.linspace(0.02, 0.2, 12)
    params = ModelParams.from_alpha_star(0.6, b, 4.0)
    s0 = np.zeros(12, dtype=int)
    s0[:3] = 1
    runs = 2000
    mean = sum(simulate(A, params, s0, 6, seed=s).states.astype(float) for s in range(runs)) / runs
    expect = expected_iteration(A, params, s0.astype(float), 6).states
    se = np.sqrt(expect * (1 - expect) / runs)
    assert np.mean(np.abs(mean - expect) <= 3 * se) >= 0.97
    # with clamping never binding in expectation, the chain mean sits below the linear one
    assert np.all(mean <= expect + 4 * se)


def test_expected_iteration_zero_response(rng):
    A, _ = random_adjacency(rng, 15, 0.3)
    b = rng.uniform(0, 1, 15)
    traj = expected_iteration(A, ModelParams(0.0, b), rng.uniform(0, 5, 15), 4)
    for row in traj.states:
        np.testing.assert_array_equal(row, b)


def test_expected_iteration_first_step_from_zero(rng):
    A, _ = random_adjacency(rng, 15, 0.3)
    b = rng.uniform(0, 1, 15)
    traj = expected_iteration(A, ModelParams(0.3, b), np.zeros(15), 1)
    np.testing.assert_array_equal(traj.states[0], b)


def test_expected_iteration_matches_series_expansion(rng):
    for _ in range(10):
        n = int(rng.integers(2, 40))
        A, dense = random_adjacency(rng, n, 0.2)
        b = rng.uniform(0, 1, n)
        e0 = rng.uniform(0, 3, n)
        alpha = 0.15
        M = alpha * dense.astype(float)
        power = np.linalg.matrix_power
        oracle = b + M @ b + power(M, 2) @ b + power(M, 3) @ e0
        traj = expected_iteration(A, ModelParams(alpha, b), e0, 3)
        np.testing.assert_allclose(traj.states[-1], oracle, rtol=0, atol=1e-12)
        np.testing.assert_allclose(traj.total_per_step, traj.states.sum(axis=1))


@pytest.mark.parametrize("A", [k_regular_ring(30, 4), erdos_renyi(30, 0.25, seed=3)])
def test_spike_decay_ratio_approaches_alpha_lambda(A):
    lam = spectral_radius(A).rho
    alpha = 0.7 / lam
    traj = expected_iteration(A, ModelParams(alpha, np.zeros(A.n)), np.full(A.n, 1e6), 51)
    tot = traj.total_per_step
    assert tot[50] / tot[49] == pytest.approx(alpha * lam, rel=0.01)


def test_steady_state_zero_response_is_b(rng):
    A, _ = random_adjacency(rng, 20, 0.3)
    b = rng.uniform(0, 10, 20)
    out = steady_state(A, b, 0.0)
    assert np.array_equal(out, b)


def test_steady_state_two_cycle():
    oracle = np.linalg.solve(np.eye(2) - 0.5 * np.array([[0, 1], [1, 0]]), [1, 1])
    out = steady_state(TWO_CYCLE, np.ones(2), 0.5, rho=1.0)
    np.testing.assert_allclose(out, oracle, atol=1e-10)
    np.testing.assert_allclose(out, [2, 2], atol=1e-10)


@pytest.mark.parametrize("alpha_star", [0.1, 0.5, 0.9])
def test_steady_state_matches_lu(rng, alpha_star):
    for _ in range(8):
        n = int(rng.integers(2, 201))
        A, dense = random_adjacency(rng, n, rng.uniform(0.005, 0.05))
        b = rng.uniform(0, 1, n)
        rho = spectral_radius(A).rho
        alpha = alpha_star / rho if rho > 0 else 0.0
        oracle = scipy.linalg.lu_solve(scipy.linalg.lu_factor(np.eye(n) - alpha * dense), b)
        out = steady_state(A, b, alpha_star, rho=rho)
        assert np.max(np.abs(out - oracle)) < 1e-10


def test_steady_state_domain_errors():
    with pytest.raises(DomainError):
        steady_state(TWO_CYCLE, np.ones(2), 1.0)
    with pytest.raises(DomainError):
        steady_state(TWO_CYCLE, np.ones(2), -0.1)


def test_steady_state_reports_nonconvergence():
    with pytest.raises(ConvergenceError) as info:
        steady_state(TWO_CYCLE, np.ones(2), 0.99, rho=1.0, max_iter=5)
    assert info.value.residual > 0
    assert info.value.iterations == 5


def test_steady_state_large_basal_counts_converge():
    A = k_regular_ring(500, 6)
    b = np.arange(500, dtype=float) * 40.0
    out = steady_state(A, b, 0.99, rho=6.0)
    assert residual(A, b, 0.99 / 6.0, out) < 1e-8 * np.max(out)


def _fixture(seed, n=40):
    rng = np.random.default_rng(seed)
    A, _ = random_adjacency(rng, n, 0.1)
    return A, spectral_radius(A).rho


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.95))
def test_steady_state_residual_bound(seed, alpha_star):
    A, rho = _fixture(seed)
    b = np.random.default_rng(seed + 1).uniform(0, 5, A.n)
    tol = 1e-10
    out = steady_state(A, b, alpha_star, rho=rho, tol=tol)
    alpha = alpha_star / rho if rho > 0 else 0.0
    assert residual(A, b, alpha, out) < tol * (1 + alpha * degree_bounds(A)[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.9), st.floats(0.001, 0.09))
def test_steady_state_monotone_in_alpha_star(seed, low, step):
    A, rho = _fixture(seed)
    b = np.random.default_rng(seed).uniform(0, 5, A.n)
    lo = steady_state(A, b, low, rho=rho)
    hi = steady_state(A, b, low + step, rho=rho)
    assert np.all(hi >= lo - 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.95))
def test_steady_state_linear_in_b(seed, alpha_star):
    A, rho = _fixture(seed)
    r = np.random.default_rng(seed)
    b1, b2 = r.uniform(0, 3, A.n), r.uniform(0, 3, A.n)
    both = steady_state(A, b1 + b2, alpha_star, rho=rho)
    split = steady_state(A, b1, alpha_star, rho=rho) + steady_state(A, b2, alpha_star, rho=rho)
    assert np.max(np.abs(both - split)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.95), st.floats(0.01, 100.0))
def test_steady_state_scaling_covariance(seed, alpha_star, c):
    A, rho = _fixture(seed)
    b = np.random.default_rng(seed).integers(0, 20, A.n).astype(float)
    base = steady_state(A, b, alpha_star, rho=rho)
    scaled = steady_state(A, c * b, alpha_star, rho=rho)
    # each solve is within the absolute tolerance 1e-10 of its exact answer
    np.testing.assert_allclose(scaled, c * base, rtol=1e-9, atol=1e-10 * (1 + c))


def test_katz_on_empty_graph():
    A = SparseAdjacency.from_edges(5, [], [])
    np.testing.assert_array_equal(katz_vector(A, 0.3), np.ones(5))


def _walk_sum(dense, alpha, terms=20):
    """Sum over k <= terms of alpha**k * (number of length-k walks out of each node)."""
    n = dense.shape[0]
    counts = np.ones(n)
    total = np.ones(n)
    for k in range(1, terms + 1):
        # walks of length k from i: sum over first step j of walks of length k-1 from j
        counts = np.array([sum(counts[j] for j in range(n) if dense[i, j]) for i in range(n)])
        total = total + alpha**k * counts
    return total


def test_katz_directed_path():
    n = 8
    dense = np.zeros((n, n), dtype=int)
    for i in range(n - 1):
        dense[i, i + 1] = 1  # 0 <- 1 <- 2 ...
    c = katz_vector(SparseAdjacency.from_dense(dense), 0.2)
    expected = [sum(0.2**k for k in range(n - i)) for i in range(n)]
    np.testing.assert_allclose(c, expected, atol=1e-12)
    np.testing.assert_allclose(c, _walk_sum(dense, 0.2), atol=1e-9)


def walk_tail(dense, alpha, terms=20):
    """Size of what a ``terms``-term walk sum leaves out: (alpha A)^(terms+1) (I - alpha A)^-1 1."""
    M = alpha * dense.astype(float)
    rest = np.linalg.solve(np.eye(len(M)) - M, np.ones(len(M)))
    return np.abs(np.linalg.matrix_power(M, terms + 1) @ rest).max()


def test_katz_matches_walk_count(rng):
    checked = 0
    while checked < 20:
        n = int(rng.integers(2, 9))
        A, dense = random_adjacency(rng, n, 0.3)
        gamma = 0.2 * spectral_radius(A).rho
        if gamma >= 1 or walk_tail(dense, 0.2) > 1e-10:
            continue
        np.testing.assert_allclose(katz_vector(A, 0.2), _walk_sum(dense, 0.2), rtol=0, atol=1e-9)
        checked += 1


def test_katz_is_steady_state_with_unit_basal():
    A = erdos_renyi(50, 0.08, seed=11)
    rho = spectral_radius(A).rho
    alpha = 0.5 / rho
    np.testing.assert_allclose(katz_vector(A, alpha, rho=rho), steady_state(A, np.ones(50), 0.5, rho=rho),
                               rtol=0, atol=1e-12)


def test_katz_rejects_divergent_alpha():
    with pytest.raises(DomainError):
        katz_vector(TWO_CYCLE, 1.0)


@pytest.mark.parametrize(
    "gamma, expected",
    [(0.5, 1.0), (2 ** (-1 / 10), 10.0), (2 ** (-1 / 20), 20.0)],
)
def test_half_life_values(gamma, expected):
    assert half_life(gamma / 4.0, 4.0) == pytest.approx(expected, rel=1e-12)


def test_half_life_ten_minutes_gamma():
    assert 2 ** (-1 / 10) == pytest.approx(0.93303, abs=5e-6)


@pytest.mark.parametrize("alpha, lam", [(0.0, 3.0), (0.5, 2.0), (0.5, 3.0), (-0.1, 2.0)])
def test_half_life_domain(alpha, lam):
    with pytest.raises(DomainError):
        half_life(alpha, lam)


def test_fit_decay_exact_halving():
    fit = fit_decay([64, 32, 16, 8])
    assert fit.gamma == pytest.approx(0.5, rel=1e-14)
    assert fit.half_life == pytest.approx(1.0, rel=1e-14)
    assert fit.decaying


def test_fit_decay_recovers_geometric_rate():
    fit = fit_decay(37.5 * 0.8 ** np.arange(12))
    assert abs(fit.gamma - 0.8) < 1e-12
    assert fit.half_life == pytest.approx(math.log(2) / -math.log(0.8), rel=1e-10)


def test_fit_decay_errors_and_flags():
    with pytest.raises(DomainError):
        fit_decay([10, 0, 3])
    with pytest.raises(ValueError):
        fit_decay([4, 2])
    grow = fit_decay([1, 2, 4, 8])
    assert not grow.decaying and grow.gamma == pytest.approx(2.0)
    assert not fit_decay([5, 5, 5]).decaying


def test_trajectory_and_scores_csv():
    traj = expected_iteration(TWO_NODE, ModelParams(0.5, [1.0, 0.0]), np.array([0.0, 2.0]), 2)
    assert traj.to_csv() == "step,total\n1,2.0\n2,1.0\n"
    assert traj.to_wide_csv(["a", "b"]).splitlines()[1] == "1,2.0,0.0"
    assert scores_to_csv([1.0, 3.0, 3.0], ["x", "y", "z"]) == "user,score\ny,3.0\nz,3.0\nx,1.0\n"
