import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultimatum_empathy.game_core import payoff_matrix_empathetic, payoff_matrix_independent
from ultimatum_empathy.replicator import (NonConvergenceError, ReplicatorSystem, SolverConfig,
                                          StrategyDistribution, mean_offer_demand, rhs_empathetic,
                                          rhs_independent, solve_stationary,
                                          stationary_distribution)


def random_simplex(rng, n):
    x = rng.exponential(size=n)
    return x / x.sum()


@pytest.mark.parametrize("S, layout", [(5, "empathetic"), (40, "empathetic"), (4, "independent")])
def test_rhs_sums_to_zero(S, layout):
    A = payoff_matrix_empathetic(S) if layout == "empathetic" else payoff_matrix_independent(S)
    rng = np.random.default_rng(0)
    for _ in range(300):
        u = rng.random()
        x = random_simplex(rng, A.shape[0])
        assert abs(ReplicatorSystem(A, u)(x).sum()) <= 1e-12


def test_s2_empathetic_hand_oracle():
    # pi = (1, 1/2), phi = 3/4, selection (2/3, 1/3)
    rhs = rhs_empathetic(np.array([0.5, 0.5]), 0.1, payoff_matrix_empathetic(2))
    np.testing.assert_allclose(rhs, [0.15, -0.15], atol=1e-15)


def test_s2_independent_hand_oracle():
    # rows (0,0),(0,1) earn 1 on average against uniform, rows (1,0),(1,1) earn 1/2
    rhs = rhs_independent(np.full(4, 0.25), 0.2, payoff_matrix_independent(2))
    np.testing.assert_allclose(rhs, [1 / 15, 1 / 15, -1 / 15, -1 / 15], atol=1e-15)


def test_shape_checks():
    with pytest.raises(ValueError):
        rhs_independent(np.full(5, 0.2), 0.1, np.eye(5))
    with pytest.raises(ValueError):
        rhs_empathetic(np.full(3, 1 / 3), 0.1, np.eye(4))
    with pytest.raises(ValueError):
        StrategyDistribution(np.full(5, 0.2), "independent", 2)
    with pytest.raises(ValueError):
        SolverConfig(damping=0.0)


def test_zero_mean_payoff_falls_back_and_flags():
    system = ReplicatorSystem(np.zeros((3, 3)), 0.3)
    x = np.array([0.5, 0.3, 0.2])
    np.testing.assert_allclose(system(x), 0.3 * (1 / 3 - x))
    assert system.degenerate


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0), st.floats(0.05, 1.0))
def test_damped_step_stays_in_simplex(seed, u, d):
    rng = np.random.default_rng(seed)
    A = payoff_matrix_empathetic(12)
    x = random_simplex(rng, 12)
    y = x + d * ReplicatorSystem(A, u)(x)
    assert y.min() >= -1e-12
    assert y.sum() == pytest.approx(1.0, abs=1e-12)


def test_analytic_jacobian_matches_finite_differences():
    A = payoff_matrix_independent(3)
    system = ReplicatorSystem(A, 0.15)
    x = random_simplex(np.random.default_rng(2), 9)
    h = 1e-7
    fd = np.column_stack([(system(x + h * e) - system(x - h * e)) / (2 * h) for e in np.eye(9)])
    np.testing.assert_allclose(system.jacobian(x), fd, atol=1e-6)


@pytest.mark.parametrize("S, layout", [(100, "empathetic"), (6, "independent")])
def test_full_mutation_gives_uniform(S, layout):
    dist, res = stationary_distribution(S, 1.0, layout)
    n = S if layout == "empathetic" else S * S
    np.testing.assert_allclose(dist.freqs, 1.0 / n, atol=1e-15)
    assert res.residual <= 1e-12
    assert mean_offer_demand(dist) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_mean_offer_demand_examples():
    for layout in ("empathetic", "independent"):
        assert mean_offer_demand(StrategyDistribution.uniform(9, layout)) == pytest.approx((0.5, 0.5))
    x = np.zeros(5)
    x[-1] = 1.0
    assert mean_offer_demand(StrategyDistribution(x, "empathetic", 5)) == (1.0, 1.0)
    y = np.zeros(25)
    y[4 * 5 + 1] = 1.0  # offer index S, demand index 2
    assert mean_offer_demand(StrategyDistribution(y, "independent", 5)) == (1.0, 0.25)


def test_solution_is_stationary_positive_and_stable():
    dist, res = stationary_distribution(30, 0.2, "empathetic")
    system = ReplicatorSystem(payoff_matrix_empathetic(30), 0.2)
    assert np.max(np.abs(system(dist.freqs))) <= 1e-10
    assert dist.freqs.min() > 0
    assert dist.freqs.sum() == pytest.approx(1.0, abs=1e-12)
    assert res.max_eigenvalue < 0


def test_newton_polish_agrees_with_plain_iteration():
    A = payoff_matrix_independent(5)
    system = ReplicatorSystem(A, 0.1)
    x0 = np.full(25, 1 / 25)
    polished = solve_stationary(system, x0, SolverConfig(tol=1e-11))
    plain = solve_stationary(system, x0, SolverConfig(tol=1e-11, newton_start=0.0))
    assert not plain.newton
    np.testing.assert_allclose(polished.x, plain.x, atol=1e-9)


def test_reflected_system_gives_reflected_solution():
    S, u = 25, 0.2
    A = payoff_matrix_empathetic(S)
    perm = np.arange(S)[::-1]
    B = A[np.ix_(perm, perm)]
    x, _ = stationary_distribution(S, u, "empathetic", A=A)
    y, _ = stationary_distribution(S, u, "empathetic", A=B)
    np.testing.assert_allclose(y.freqs, x.freqs[perm], atol=1e-9)


def test_nonconvergence_carries_best_iterate():
    A = payoff_matrix_empathetic(50)
    with pytest.raises(NonConvergenceError) as info:
        solve_stationary(ReplicatorSystem(A, 0.2), np.full(50, 0.02),
                         SolverConfig(max_steps=5, newton_start=0.0))
    err = info.value
    assert err.steps == 5
    assert err.best.shape == (50,)
    assert err.residual > 1e-10


def test_oscillating_map_switches_to_integration():
    c = np.array([0.3, 0.3, 0.4])

    def rhs(x):
        # the damped step x + 0.5 * rhs overshoots c by a factor -0.9 every time
        return -3.8 * (x - c)

    res = solve_stationary(rhs, np.full(3, 1 / 3), SolverConfig(newton_start=0.0, check_stability=False))
    assert res.method == "ode_integration"
    np.testing.assert_allclose(res.x, c, atol=1e-9)


def test_small_mutation_independent_point():
    dist, res = stationary_distribution(7, 0.1, "independent")
    offer, demand = mean_offer_demand(dist)
    assert 0.0 < demand < offer < 0.5
    assert res.residual <= 1e-10
