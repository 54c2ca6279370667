import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dodwda.errors import InvalidTopology, MixingEstimationError
from dodwda.topology import (
    NetworkMatrix,
    build_ring,
    estimate_mixing,
    mixing_envelope_holds,
    stationary_distribution,
    validate,
)


def test_ring_of_three_is_uniform():
    P = build_ring(3, 1 / 3)
    np.testing.assert_allclose(P.entries, np.full((3, 3), 1 / 3))


def test_ring_of_five_rows():
    P = build_ring(5, 1 / 3)
    third = 1 / 3
    np.testing.assert_allclose(P.entries[0], [third, third, 0, 0, third])
    for i in range(5):
        np.testing.assert_allclose(P.entries[i], np.roll(P.entries[0], i))
    assert P.p_max == pytest.approx(1 / 3)


def test_ring_rejects_two_agents():
    with pytest.raises(InvalidTopology):
        build_ring(2, 0.5)


@pytest.mark.parametrize("w", [0.0, 1.0, -0.2])
def test_ring_rejects_bad_self_weight(w):
    with pytest.raises(InvalidTopology):
        build_ring(4, w)


def test_ring_passes_validation():
    report = validate(build_ring(5, 1 / 3))
    assert report.ok, report.summary()
    assert set(report.checks) >= {
        "row_stochastic", "nonnegative", "min_degree_2",
        "strongly_connected", "aperiodic", "max_entry_below_one",
    }


def test_identity_fails_connectivity_and_degree():
    report = validate(NetworkMatrix(np.eye(3)))
    assert not report.checks["strongly_connected"]
    assert not report.checks["min_degree_2"]
    assert not report.checks["max_entry_below_one"]


def test_path_graph_fails_min_degree():
    P = np.array([
        [0.5, 0.5, 0.0, 0.0],
        [1 / 3, 1 / 3, 1 / 3, 0.0],
        [0.0, 1 / 3, 1 / 3, 1 / 3],
        [0.0, 0.0, 0.5, 0.5],
    ])
    report = validate(NetworkMatrix(P))
    assert not report.checks["min_degree_2"]
    assert report.failures() == ["min_degree_2"]
    assert "[0, 3]" in report.messages["min_degree_2"]


def test_periodic_matrix_detected():
    # bipartite 4-cycle without self loops has period 2
    P = np.array([
        [0, 0.5, 0, 0.5],
        [0.5, 0, 0.5, 0],
        [0, 0.5, 0, 0.5],
        [0.5, 0, 0.5, 0],
    ])
    report = validate(NetworkMatrix(P))
    assert report.checks["strongly_connected"]
    assert not report.checks["aperiodic"]


def test_non_stochastic_and_negative_flagged():
    P = build_ring(4).entries.copy()
    P[0, 0] += 0.1
    P[1, 0] = -0.1
    report = validate(NetworkMatrix(P))
    assert not report.checks["row_stochastic"]
    assert not report.checks["nonnegative"]


def test_non_square_rejected():
    with pytest.raises(InvalidTopology):
        NetworkMatrix(np.ones((2, 3)))


@pytest.mark.parametrize("n", [3, 5])
def test_stationary_of_rings_is_uniform(n):
    pi = stationary_distribution(build_ring(n, 1 / 3))
    np.testing.assert_allclose(pi, np.full(n, 1 / n), atol=1e-12)


def test_stationary_three_agent_lazy_matrix():
    rows = [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]]
    pi = stationary_distribution(NetworkMatrix(rows))
    # direct multiplication, no library solve
    prod = [sum(pi[i] * rows[i][j] for i in range(3)) for j in range(3)]
    np.testing.assert_allclose(prod, pi, atol=1e-12)
    np.testing.assert_allclose(pi, [1 / 3] * 3, atol=1e-12)


def test_stationary_non_symmetric():
    P = np.array([[0.2, 0.5, 0.3], [0.4, 0.2, 0.4], [0.6, 0.3, 0.1]])
    pi = stationary_distribution(NetworkMatrix(P))
    assert abs(pi.sum() - 1) <= 1e-12
    assert np.max(np.abs(pi @ P - pi)) <= 1e-10
    assert np.all((pi > 0) & (pi < 1))
    assert not np.allclose(pi, 1 / 3)


def _brute_gamma(P, pi, horizon, floor=1e-12):
    best = floor
    for k in range(1, horizon + 1):
        dev = np.max(np.abs(np.linalg.matrix_power(P, k) - pi[None, :]))
        if dev > floor:
            best = max(best, dev ** (1 / k))
    return best


def test_mixing_ring_three():
    P = build_ring(3, 1 / 3)
    params = estimate_mixing(P, stationary_distribution(P), 50)
    assert 0 < params.gamma < 1
    assert params.nu == 1


def test_mixing_ring_five_matches_matrix_powers():
    P = build_ring(5, 1 / 3)
    pi = stationary_distribution(P)
    params = estimate_mixing(P, pi, 100)
    # the maximum sits near the noise floor, where the two product orders differ in roundoff
    assert params.gamma == pytest.approx(_brute_gamma(P.entries, pi, 100), rel=1e-5)
    # asymptotic rate is the second eigenvalue 1/3 + (2/3) cos(2 pi / 5)
    lam2 = 1 / 3 + 2 / 3 * np.cos(2 * np.pi / 5)
    assert params.gamma <= lam2 + 1e-9
    assert params.p_max == pytest.approx(1 / 3)


@pytest.mark.parametrize("P", [build_ring(5, 1 / 3), build_ring(7, 0.5), NetworkMatrix(
    [[0.2, 0.5, 0.3], [0.4, 0.2, 0.4], [0.6, 0.3, 0.1]])])
def test_mixing_stable_under_longer_horizon(P):
    pi = stationary_distribution(P)
    short = estimate_mixing(P, pi, 100)
    long = estimate_mixing(P, pi, 200)
    assert long.gamma <= short.gamma + 1e-9
    assert abs(long.gamma - short.gamma) <= 1e-9
    assert long.nu == short.nu
    assert mixing_envelope_holds(P, pi, long, 400)


def test_mixing_horizon_precondition():
    P = build_ring(5)
    with pytest.raises(MixingEstimationError):
        estimate_mixing(P, stationary_distribution(P), 9)


def test_mixing_rejects_periodic_chain():
    P = NetworkMatrix([[0, 0.5, 0, 0.5], [0.5, 0, 0.5, 0], [0, 0.5, 0, 0.5], [0.5, 0, 0.5, 0]])
    with pytest.raises(MixingEstimationError):
        estimate_mixing(P, np.full(4, 0.25), 40)


@given(n=st.integers(3, 25), w=st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_every_ring_validates(n, w):
    assert validate(build_ring(n, w)).ok


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 8))
@settings(max_examples=40, deadline=None)
def test_stationary_permutation_equivariant(seed, n):
    rng = np.random.default_rng(seed)
    base = build_ring(n, 1 / 3).entries
    # perturb a valid ring into a non-doubly-stochastic matrix on the same support
    M = base * rng.uniform(0.5, 1.5, size=base.shape)
    M /= M.sum(axis=1, keepdims=True)
    P = NetworkMatrix(M)
    perm = rng.permutation(n)
    pi = stationary_distribution(P)
    pi_perm = stationary_distribution(P.permuted(perm))
    np.testing.assert_allclose(pi_perm, pi[perm], atol=1e-11)
