import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dodwda import core
from dodwda.core import (
    QUADRATIC,
    DecisionSet,
    EngineConfig,
    FunctionOracle,
    ProximalFunction,
    check_proximal,
    dual_update,
    primal_update,
    regularized_projection,
    spot_check_convexity,
)
from dodwda.errors import ContractViolation, InvalidTopology, NumericFailure, OracleError
from dodwda.regret import lemma2_bound, lemma3_bound, lemma_violations
from dodwda.topology import NetworkMatrix, build_ring, estimate_mixing, stationary_distribution

# 1-strongly convex, smooth with constant 2, no closed-form box projection
LOGCOSH = ProximalFunction(
    value=lambda x: 0.5 * float(x @ x) + float(np.sum(np.log(np.cosh(x)))),
    gradient=lambda x: x + np.tanh(x),
    smoothness=2.0,
    name="logcosh",
)


def box(m, lo=-1.0, hi=1.0):
    return DecisionSet(np.full(m, lo), np.full(m, hi))


def test_projection_of_zero_is_zero():
    np.testing.assert_array_equal(regularized_projection(np.zeros(3), 0.7, QUADRATIC, box(3)), 0)


def test_projection_interior_closed_form():
    X = DecisionSet.interval(-3, 3)
    assert regularized_projection([5.0], 0.2, QUADRATIC, X)[0] == pytest.approx(-1.0)


def test_projection_boundary_closed_form():
    X = DecisionSet.interval(-3, 3)
    assert regularized_projection([5.0], 2.0, QUADRATIC, X)[0] == -3.0


def test_projection_rejects_bad_inputs():
    X = box(2)
    with pytest.raises(ContractViolation):
        regularized_projection([np.nan, 0], 1.0, QUADRATIC, X)
    with pytest.raises(ContractViolation):
        regularized_projection([0, 0], 0.0, QUADRATIC, X)
    with pytest.raises(ContractViolation):
        regularized_projection([0, 0, 0], 1.0, QUADRATIC, X)


def test_generic_solver_matches_closed_form_for_quadratic():
    quad_generic = ProximalFunction(lambda x: 0.5 * float(x @ x), lambda x: x, smoothness=1.0)
    rng = np.random.default_rng(3)
    X = DecisionSet(np.array([-1.0, -2.0, 0.0]), np.array([2.0, 0.5, 1.0]))
    for _ in range(50):
        y = rng.normal(scale=5, size=3)
        alpha = rng.uniform(0.05, 3)
        np.testing.assert_allclose(
            regularized_projection(y, alpha, quad_generic, X),
            regularized_projection(y, alpha, QUADRATIC, X), atol=1e-9,
        )


def test_generic_solver_satisfies_first_order_conditions():
    rng = np.random.default_rng(4)
    X = box(2, -1.5, 1.5)
    for _ in range(30):
        y = rng.normal(scale=3, size=2)
        alpha = rng.uniform(0.1, 2)
        x = regularized_projection(y, alpha, LOGCOSH, X)
        grad = y + LOGCOSH.gradient(x) / alpha
        for k in range(2):
            if X.lower[k] + 1e-9 < x[k] < X.upper[k] - 1e-9:
                assert abs(grad[k]) <= 1e-8
            elif x[k] <= X.lower[k] + 1e-9:
                assert grad[k] >= -1e-8
            else:
                assert grad[k] <= 1e-8
        # brute-force objective comparison on a grid
        g = np.linspace(-1.5, 1.5, 301)
        G1, G2 = np.meshgrid(g, g, indexing="ij")
        obj = (y[0] * G1 + y[1] * G2 + (0.5 * (G1**2 + G2**2) + np.log(np.cosh(G1)) + np.log(np.cosh(G2))) / alpha)
        best = y @ x + LOGCOSH(x) / alpha
        assert best <= obj.min() + 1e-9


def test_generic_solver_nonconvergence_raises():
    with pytest.raises(NumericFailure):
        LOGCOSH.project(np.array([0.3, -0.2]), 1.0, box(2), tol=1e-30, max_iter=5)


@pytest.mark.parametrize("psi", [QUADRATIC, LOGCOSH])
def test_proximal_functions_pass_spot_checks(psi):
    assert check_proximal(psi, dim=3, rng=0)


def test_spot_check_rejects_weakly_convex():
    weak = ProximalFunction(lambda x: 0.25 * float(x @ x), lambda x: 0.5 * x, smoothness=1.0)
    assert not check_proximal(weak, dim=2, rng=0)


@given(
    seed=st.integers(0, 2**32 - 1),
    m=st.integers(1, 6),
    eta=st.floats(1e-3, 50),
)
@settings(max_examples=300, deadline=None)
def test_projection_non_expansive(seed, m, eta):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-5, 0, m)
    X = DecisionSet(lo, lo + rng.uniform(0, 10, m))
    v, w = rng.normal(scale=10, size=(2, m))
    diff = regularized_projection(v, eta, QUADRATIC, X) - regularized_projection(w, eta, QUADRATIC, X)
    assert np.linalg.norm(diff) <= eta * np.linalg.norm(v - w) * (1 + 1e-12) + 1e-12


def test_dual_update_from_zero_is_gradient():
    G = np.array([[1.0], [-2.0], [0.5]])
    np.testing.assert_array_equal(dual_update(np.zeros((3, 1)), build_ring(3), G), G)


def test_dual_update_uniform_averaging():
    P = NetworkMatrix(np.full((3, 3), 1 / 3))
    out = dual_update(np.array([[3.0], [6.0], [9.0]]), P, np.zeros((3, 1)))
    np.testing.assert_allclose(out, 6.0, atol=1e-14)


def test_dual_update_matches_double_loop():
    rng = np.random.default_rng(11)
    P = build_ring(5, 1 / 3)
    Y = rng.normal(size=(5, 3))
    G = rng.normal(size=(5, 3))
    expected = np.zeros((5, 3))
    for i in range(5):
        for k in range(3):
            acc = 0.0
            for j in range(5):
                acc += P.entries[i, j] * Y[j, k]
            expected[i, k] = acc + G[i, k]
    np.testing.assert_allclose(dual_update(Y, P, G), expected, atol=1e-14)


def test_dual_update_dimension_mismatch():
    with pytest.raises(ContractViolation):
        dual_update(np.zeros((5, 2)), build_ring(5), np.zeros((5, 3)))
    with pytest.raises(ContractViolation):
        dual_update(np.zeros((4, 1)), build_ring(5), np.zeros((4, 1)))


def test_primal_update_cases():
    cfg = EngineConfig(beta=1.0, T=10)
    X = DecisionSet.interval(-3, 3)
    np.testing.assert_array_equal(primal_update(np.zeros((4, 1)), cfg, QUADRATIC, X), 0)
    assert primal_update(np.array([[10.0]]), cfg, QUADRATIC, X)[0, 0] == pytest.approx(-1.0)
    Y = np.array([[4.0], [-25.0], [0.3]])
    np.testing.assert_array_equal(
        primal_update(Y, cfg, QUADRATIC, X),
        np.stack([regularized_projection(y, cfg.alpha, QUADRATIC, X) for y in Y]),
    )


def test_engine_config():
    cfg = EngineConfig(beta=200, T=1000)
    assert cfg.alpha == 200 / 1000
    for bad in [dict(beta=0, T=5), dict(beta=1, T=0), dict(beta=1, T=2.5)]:
        with pytest.raises(ContractViolation):
            EngineConfig(**bad)


def _quadratic_oracle(target=1.0, L=6.0):
    return FunctionOracle(
        value=lambda i, t, x: float((x[0] - target) ** 2),
        gradient=lambda i, t, x: [2 * (x[0] - target)],
        lipschitz=L,
    )


def test_run_zero_horizon_has_single_round():
    P = build_ring(3)
    oracle = FunctionOracle(lambda i, t, x: 0.0, lambda i, t, x: [0.0], 1.0)
    cfg = EngineConfig(beta=1.0, T=1)
    trace = core.run(cfg, P, stationary_distribution(P), QUADRATIC, DecisionSet.interval(-1, 1), oracle)
    assert trace.x.shape == (2, 3, 1)
    # T = 0 is not an admissible step-size horizon; the smallest run still records the initial round
    np.testing.assert_array_equal(trace.x[0], 0)


def test_run_single_agent_matches_scalar_recursion():
    T, beta = 50, 10.0
    cfg = EngineConfig(beta=beta, T=T)
    X = DecisionSet.interval(-2, 2)
    trace = core.run(cfg, NetworkMatrix([[1.0]]), np.array([1.0]), QUADRATIC, X, _quadratic_oracle(),
                     n=1, check_network=False)
    alpha = beta / T
    y, x, xs = 0.0, 0.0, []
    for _ in range(T + 1):
        xs.append(x)
        y = y + 2 * (x - 1)
        x = min(max(-alpha * y, -2.0), 2.0)
    np.testing.assert_allclose(trace.x[:, 0, 0], xs, atol=1e-14)
    assert abs(trace.x[-1, 0, 0] - 1) < abs(trace.x[0, 0, 0] - 1)
    assert abs(trace.x[-1, 0, 0] - 1) < 1e-6


def test_run_refuses_invalid_network():
    oracle = _quadratic_oracle()
    with pytest.raises(InvalidTopology):
        core.run(EngineConfig(1.0, 5), NetworkMatrix([[1.0]]), np.array([1.0]), QUADRATIC,
                 DecisionSet.interval(-2, 2), oracle, n=1)


def test_symmetric_agents_have_identical_trajectories():
    P = build_ring(6, 0.4)
    cfg = EngineConfig(beta=5.0, T=40)
    oracle = FunctionOracle(
        value=lambda i, t, x: float(np.sum((x - np.sin(t / 5)) ** 2)),
        gradient=lambda i, t, x: 2 * (x - np.sin(t / 5)),
        lipschitz=2 * (2 + 1) * np.sqrt(2),
    )
    trace = core.run(cfg, P, stationary_distribution(P), QUADRATIC, box(2, -2, 2), oracle)
    # rows of P @ Y sum in different orders, so equality holds up to roundoff
    for i in range(1, 6):
        np.testing.assert_allclose(trace.x[:, i], trace.x[:, 0], rtol=0, atol=1e-12)


def test_zero_gradients_are_a_fixed_point():
    P = build_ring(4)
    oracle = FunctionOracle(lambda i, t, x: 0.0, lambda i, t, x: np.zeros(2), 1.0)
    X = DecisionSet(np.array([0.5, -1.0]), np.array([2.0, 1.0]))
    trace = core.run(EngineConfig(1.0, 20), P, stationary_distribution(P), QUADRATIC, X, oracle)
    np.testing.assert_array_equal(trace.y, 0)
    # argmin of psi over this box is its closest point to the origin
    np.testing.assert_array_equal(trace.x, np.broadcast_to([0.5, 0.0], trace.x.shape))


def test_lipschitz_violation_aborts_with_round():
    P = build_ring(3)
    oracle = FunctionOracle(lambda i, t, x: 0.0, lambda i, t, x: [5.0 if t == 3 else 0.1], 1.0)
    with pytest.raises(ContractViolation, match="round 3"):
        core.run(EngineConfig(1.0, 10), P, stationary_distribution(P), QUADRATIC, box(1), oracle)


def test_oracle_failure_carries_round():
    def value(i, t, x):
        if t == 4 and i == 1:
            raise RuntimeError("sensor offline")
        return 0.0

    P = build_ring(3)
    oracle = FunctionOracle(value, lambda i, t, x: [0.0], 1.0)
    with pytest.raises(OracleError) as info:
        core.run(EngineConfig(1.0, 10), P, stationary_distribution(P), QUADRATIC, box(1), oracle)
    assert info.value.round == 4 and info.value.agent == 1


def test_gradients_queried_at_implemented_decisions():
    seen = []

    def gradient(i, t, x):
        seen.append((t, i, float(x[0])))
        return [1.0 if i == 0 else -0.5]

    P = build_ring(3)
    oracle = FunctionOracle(lambda i, t, x: 0.0, gradient, 1.0)
    trace = core.run(EngineConfig(2.0, 6), P, stationary_distribution(P), QUADRATIC, box(1, -3, 3), oracle)
    for t, i, x in seen:
        assert x == trace.x[t, i, 0]


def test_trace_diagnostics_and_trajectory_bounds_on_random_losses():
    rng = np.random.default_rng(5)
    n, T = 5, 300
    targets = rng.uniform(-1, 1, size=(T + 1, n, 2))
    L = 2 * np.sqrt(2) * 3
    oracle = FunctionOracle(
        value=lambda i, t, x: float(np.sum((x - targets[t, i]) ** 2)),
        gradient=lambda i, t, x: 2 * (x - targets[t, i]),
        lipschitz=L,
    )
    P = build_ring(n)
    pi = stationary_distribution(P)
    X = box(2, -2, 2)
    trace = core.run(EngineConfig(20.0, T), P, pi, QUADRATIC, X, oracle)
    assert all(X.contains(x) for x in trace.x.reshape(-1, 2))
    np.testing.assert_allclose(trace.ybar, np.einsum("i,tim->tm", pi, trace.y))
    np.testing.assert_allclose(trace.gbar[3], pi @ trace.grads[3])
    np.testing.assert_allclose(trace.consensus_error[7, 2], np.linalg.norm(trace.ybar[7] - trace.y[7, 2]))
    mix = estimate_mixing(P, pi)
    counts = lemma_violations(trace, L, mix.gamma, mix.nu, mix.p_max)
    assert counts == {"lemma2": 0, "lemma3": 0}
    assert trace.consensus_error.max() <= lemma2_bound(n, L, mix.gamma)
    assert trace.ybar_norm.max() <= lemma3_bound(n, L, mix.p_max)


def test_convexity_spot_check():
    assert spot_check_convexity(_quadratic_oracle(), 0, 0, DecisionSet.interval(-2, 2), rng=0)
    concave = FunctionOracle(lambda i, t, x: -float(x[0] ** 2), lambda i, t, x: [-2 * x[0]], 4.0)
    assert not spot_check_convexity(concave, 0, 0, DecisionSet.interval(-2, 2), rng=0)


def test_decision_set_validation():
    with pytest.raises(ContractViolation):
        DecisionSet(np.array([1.0]), np.array([0.0]))
    with pytest.raises(ContractViolation):
        DecisionSet(np.array([-np.inf]), np.array([0.0]))
