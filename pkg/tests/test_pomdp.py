import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqdec.pomdp import (
    DiscretePomdp,
    ImpossibleObservationError,
    PomdpError,
    ProblemSizeError,
    belief_update,
    brute_force_value,
    fixed_action_value,
    observation_likelihood,
    random_pomdp,
    simplex_grid,
    solve_belief_grid,
    solve_exact_reachable,
    transition_matrix_from_function,
)


def tiger(accuracy=0.85, T=3):
    """Classic tiger problem: states (left, right); actions (listen, open-left, open-right)."""
    I = np.eye(2)
    U = np.full((2, 2), 0.5)
    P = np.stack([I, U, U])
    hear = np.array([[accuracy, 1 - accuracy], [1 - accuracy, accuracy]])
    O = np.stack([hear, U, U])
    C = np.array([[-1.0, -100.0, 10.0], [-1.0, 10.0, -100.0]])
    return DiscretePomdp(P, O, C, T, ("left", "right"), ("listen", "open-left", "open-right"), ("hear-left", "hear-right"))


def test_tiger_values_by_hand():
    m = tiger()
    b = [0.5, 0.5]
    assert solve_exact_reachable(m, b, 1).value == pytest.approx(-1.0, abs=1e-12)
    assert solve_exact_reachable(m, b, 2).value == pytest.approx(-2.0, abs=1e-12)
    # listen twice, open when the two readings agree
    assert solve_exact_reachable(m, b, 3).value == pytest.approx(-2 + 7.225 - 2.25 - 0.255, abs=1e-12)
    assert solve_exact_reachable(m, b, 3).action == 0


def test_tiger_update_by_hand():
    m = tiger()
    b = belief_update(m, [0.5, 0.5], 0, 0)
    np.testing.assert_allclose(b, [0.85, 0.15], atol=1e-15)
    b = belief_update(m, b, 0, 0)
    np.testing.assert_allclose(b, [0.7225 / 0.745, 0.0225 / 0.745], atol=1e-15)


def test_zero_horizon():
    sol = solve_exact_reachable(tiger(), [0.5, 0.5], 0)
    assert sol.value == 0.0 and sol.action is None
    assert brute_force_value(tiger(), [0.5, 0.5], 0) == 0.0


def test_impossible_observation():
    m = tiger(accuracy=1.0)
    with pytest.raises(ImpossibleObservationError):
        belief_update(m, [1.0, 0.0], 0, 1)


def test_invalid_row_named():
    P = np.array([[[0.5, 0.6], [0.5, 0.5]]])
    with pytest.raises(PomdpError, match=r"transition\[0, 0\]"):
        DiscretePomdp(P, np.ones((1, 2, 1)), np.zeros((2, 1)))


def test_json_round_trip():
    m = tiger()
    m2 = DiscretePomdp.from_json(m.to_json())
    assert m2.to_dict() == m.to_dict()
    d = m.to_dict()
    d["extra"] = 1
    with pytest.raises(PomdpError, match="unknown"):
        DiscretePomdp.from_dict(d)


def test_transition_matrix_from_function():
    # inventory 0..2, order x in {0,1}, demand w in {0,1} with probability 1/2 each
    step = lambda s, x, w: min(2, max(0, s + x - w))
    P = transition_matrix_from_function(step, {0: 0.5, 1: 0.5}, [0, 1, 2], [0, 1])
    np.testing.assert_allclose(P[0], [[1, 0, 0], [0.5, 0.5, 0], [0, 0.5, 0.5]])
    np.testing.assert_allclose(P[1], [[0.5, 0.5, 0], [0, 0.5, 0.5], [0, 0, 1]])
    with pytest.raises(PomdpError):
        transition_matrix_from_function(lambda s, x, w: 9, {0: 1.0}, [0], [0])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_bayes_matches_enumeration(K, A, O, seed):
    rng = np.random.default_rng(seed)
    m = random_pomdp(rng, K, A, O, sparse=0.2)
    b = rng.dirichlet(np.ones(K))
    x = int(rng.integers(A))
    total = 0.0
    for w in range(O):
        joint = np.zeros(K)
        for s in range(K):
            for s2 in range(K):
                joint[s2] += b[s] * m.transition[x, s, s2] * m.observation[x, s2, w]
        p = observation_likelihood(m, b, x, w)
        total += p
        assert p == pytest.approx(joint.sum(), abs=1e-12)
        if joint.sum() > 0:
            np.testing.assert_allclose(belief_update(m, b, x, w), joint / joint.sum(), atol=1e-12)
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_exact_equals_brute_force(K, A, O, T, seed):
    rng = np.random.default_rng(seed)
    m = random_pomdp(rng, K, A, O, T)
    b = rng.dirichlet(np.ones(K))
    assert solve_exact_reachable(m, b).value == pytest.approx(brute_force_value(m, b), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_dominates_open_loop(seed):
    rng = np.random.default_rng(seed)
    m = random_pomdp(rng, 3, 2, 2, 3)
    b = rng.dirichlet(np.ones(3))
    v = solve_exact_reachable(m, b).value
    assert all(v >= fixed_action_value(m, b, x) - 1e-12 for x in range(2))


def test_tree_cap():
    m = random_pomdp(np.random.default_rng(0), 2, 3, 4, 8)
    with pytest.raises(ProblemSizeError):
        solve_exact_reachable(m, [0.5, 0.5], cap=1000)


def test_simplex_grid_sizes():
    assert simplex_grid(2, 4).shape == (5, 2)
    assert simplex_grid(3, 4).shape == (15, 3)
    np.testing.assert_allclose(simplex_grid(3, 5).sum(axis=1), 1.0)
    with pytest.raises(ProblemSizeError):
        simplex_grid(4, 2)


def test_grid_matches_exact_on_tiger():
    m = tiger()
    gs = solve_belief_grid(m, 1 / 200, 3)
    budget = 0.02 * 3 * np.abs(m.contribution).max()
    for p in np.linspace(0, 1, 11):
        b = [1 - p, p]
        assert abs(gs.value(b) - solve_exact_reachable(m, b).value) <= budget


def test_grid_exact_at_grid_points_for_one_step():
    m = random_pomdp(np.random.default_rng(3), 3, 2, 2, 1)
    gs = solve_belief_grid(m, 0.25, 1)
    for b in gs.grid:
        assert gs.value(b) == pytest.approx(solve_exact_reachable(m, b).value, abs=1e-12)


def test_grid_rejects_bad_spacing():
    with pytest.raises(PomdpError):
        solve_belief_grid(tiger(), 0.3, 2)
