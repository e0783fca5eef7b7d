import numpy as np
import pytest

from src.fg.factors import LandmarkFactor, LinearFactor, PriorFactor, landmark_key, state_key
from src.fg.graph import FactorGraph, ordering, solve_lm
from src.fg.marginalization import marginalize, schur_complement
from src.fg.schemas import FgConfig
from src.geom.navstate import NavState
from src.geom.transforms import Pose

TIGHT = FgConfig(initial_lambda=1e-10, gradient_tolerance=1e-12)


def test_schur_complement_example():
    H = np.array([[2.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, 1.0])

    h, g = schur_complement(H, b, 1)

    assert np.allclose(h, [[1.5]])
    assert np.allclose(g, [0.5])


def test_schur_complement_damps_singular_block():
    H = np.array([[0.0, 0.0], [0.0, 2.0]])
    h, g = schur_complement(H, np.array([0.0, 1.0]), 1, damping=1e-6)
    assert np.allclose(h, [[2.0]]) and np.allclose(g, [1.0])


def test_linearize_builds_normal_equations():
    a = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]])
    factor = LinearFactor((state_key(0),), [a], np.array([1.0, 0.0, 2.0]), sigma=2.0)
    x = np.array([0.5, -0.5])
    graph = FactorGraph([factor])

    system = graph.linearize({state_key(0): x})

    assert np.allclose(system.H, a.T @ a / 4.0)
    assert np.allclose(system.b, -a.T @ (a @ x - [1.0, 0.0, 2.0]) / 4.0)
    assert graph.count() == 3 and graph.count("linear") == 3 and graph.count("prior") == 0


def test_solve_lm_trilaterates_a_landmark():
    # Arrange: four pinned states measure exact ranges to one landmark
    truth = np.array([2.0, 1.5, 0.5])
    positions = [np.zeros(3), np.array([4.0, 0.0, 1.0]), np.array([0.0, 4.0, -1.0]), np.array([4.0, 4.0, 2.0])]
    lm = landmark_key(0)
    values = {lm: truth + [0.3, -0.2, 0.1]}
    graph = FactorGraph()
    for i, p in enumerate(positions):
        nav = NavState(p=p)
        values[state_key(i)] = nav
        graph.add(PriorFactor.from_covariance(state_key(i), nav, np.eye(15) * 1e-8))
        graph.add(LandmarkFactor(state_key(i), [lm], np.array([np.linalg.norm(truth - p)]), 0.01,
                                 Pose.identity(), kernel=None))

    # Act
    solved, summary = solve_lm(graph, values, TIGHT)

    # Assert
    assert summary.iterations < TIGHT.max_iterations, summary.reason
    assert np.allclose(solved[lm], truth, atol=1e-6)
    assert all(b <= a for a, b in zip(summary.costs, summary.costs[1:])), "Accepted costs never increase"
    assert summary.final_cost < 1e-10
    assert np.array_equal(values[lm], truth + [0.3, -0.2, 0.1]), "Input values are left alone"


def test_solve_lm_on_empty_graph():
    values = {state_key(0): np.zeros(2)}
    solved, summary = solve_lm(FactorGraph(), values)
    assert summary.converged and summary.reason == "empty graph"
    assert solved is values


@pytest.mark.parametrize("offset, iterates", [(0.4e-8, False), (0.6e-8, True)])
def test_gradient_stop_uses_the_euclidean_norm(offset, iterates):
    # Every gradient entry is below 1e-8; only the 2-norm of four of them can exceed it
    key = state_key(0)
    graph = FactorGraph([LinearFactor((key,), [np.eye(4)], np.full(4, offset))])

    _, summary = solve_lm(graph, {key: np.zeros(4)}, FgConfig(gradient_tolerance=1e-8))

    assert (summary.iterations > 0) == iterates
    if not iterates:
        assert summary.reason == "gradient"


def test_solve_lm_rejects_missing_variables():
    graph = FactorGraph([LinearFactor((state_key(3),), [np.eye(1)], np.zeros(1))])
    with pytest.raises(KeyError):
        solve_lm(graph, {state_key(0): np.zeros(1)})


def _chain(rng, n):
    """Noisy odometry and absolute fixes on a 2D chain; returns the factors per step."""
    steps = []
    for k in range(n):
        factors = [LinearFactor((state_key(k),), [np.eye(2)], rng.normal(size=2) + k, sigma=0.5)]
        if k == 0:
            factors.append(LinearFactor((state_key(0),), [np.eye(2)], np.zeros(2), sigma=0.1))
        else:
            factors.append(LinearFactor((state_key(k - 1), state_key(k)), [-np.eye(2), np.eye(2)],
                                        np.ones(2) + 0.1 * rng.normal(size=2), sigma=0.2))
        steps.append(factors)
    return steps


def test_marginalization_matches_batch_solution(rng):
    # Arrange
    steps = _chain(rng, 10)
    batch_graph = FactorGraph([f for factors in steps for f in factors])
    batch, _ = solve_lm(batch_graph, {state_key(k): np.zeros(2) for k in range(10)}, TIGHT)

    # Act: three-state window, oldest state marginalized after each solve
    graph, values = FactorGraph(), {}
    for k, factors in enumerate(steps):
        values[state_key(k)] = np.zeros(2)
        graph.extend(factors)
        values, _ = solve_lm(graph, values, TIGHT)
        if k >= 2:
            marginalize(graph, values, [state_key(k - 2)])

    # Assert
    assert set(values) == {state_key(8), state_key(9)}
    for key, value in values.items():
        assert np.allclose(value, batch[key], atol=1e-9), f"{key}: {value} vs {batch[key]}"


def test_window_matches_kalman_filter(rng):
    # Arrange: scalar random walk with known inputs
    q, r = 0.04, 0.25
    mean, var = 0.0, 1.0
    graph = FactorGraph([LinearFactor((state_key(0),), [np.eye(1)], [mean], sigma=np.sqrt(var))])
    values = {state_key(0): np.zeros(1)}

    for k in range(12):
        key = state_key(k)
        if k > 0:
            u = 0.5 + 0.1 * rng.normal()
            graph.add(LinearFactor((state_key(k - 1), key), [-np.eye(1), np.eye(1)], [u], sigma=np.sqrt(q)))
            values[key] = values[state_key(k - 1)] + u
            marginalize(graph, values, [state_key(k - 1)])
            mean, var = mean + u, var + q
        z = k * 0.5 + rng.normal(scale=np.sqrt(r))
        graph.add(LinearFactor((key,), [np.eye(1)], [z], sigma=np.sqrt(r)))

        # Act
        values, _ = solve_lm(graph, values, TIGHT)

        # Assert
        gain = var / (var + r)
        mean, var = mean + gain * (z - mean), (1.0 - gain) * var
        system = graph.linearize(values, ordering(values))
        assert values[key][0] == pytest.approx(mean, abs=1e-8)
        assert 1.0 / system.H[0, 0] == pytest.approx(var, rel=1e-8)


def test_marginalize_returns_prior_on_blanket():
    a, b, c = state_key(0), state_key(1), state_key(2)
    graph = FactorGraph([
        LinearFactor((a,), [np.eye(1)], [0.0]),
        LinearFactor((a, b), [-np.eye(1), np.eye(1)], [1.0]),
        LinearFactor((b, c), [-np.eye(1), np.eye(1)], [1.0]),
    ])
    values = {a: np.zeros(1), b: np.ones(1), c: np.full(1, 2.0)}

    prior, removed = marginalize(graph, values, [a])

    assert prior is not None and prior.keys == (b,)
    assert len(removed) == 2 and a not in values
    assert prior in graph.factors and len(graph) == 2
    assert not prior.frozen[b].flags.writeable


def test_marginalizing_an_isolated_variable_adds_nothing():
    a = state_key(0)
    graph = FactorGraph([LinearFactor((a,), [np.eye(1)], [0.0])])
    values = {a: np.zeros(1)}

    prior, removed = marginalize(graph, values, [a])

    assert prior is None and len(removed) == 1
    assert len(graph) == 0 and values == {}
