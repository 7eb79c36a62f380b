import numpy as np
import pytest

from gossipgrad.config import from_dict
from gossipgrad.engine import (
    DivergenceError,
    EngineError,
    GlobalState,
    MetricsTrace,
    StepSchedule,
    average_projection,
    consensus_distance,
    feasibility_distance,
    gradient_step,
    optimality_distance,
    run_serial,
    step_size,
)
from gossipgrad.graph import Graph, build_k_regular
from gossipgrad.losses import LossModel, Sample


def path_graph():
    return Graph(2, frozenset({(0, 1)}))


def test_gradient_step_zero_subgradient():
    # hinge with margin > 1 has zero subgradient (lam = 0)
    m = LossModel(kind="hinge_svm", d=1)
    state = GlobalState(beta=np.array([[2.0], [0.5]]))
    v = Sample(x=np.array([1.0]), y=1)
    gradient_step(state, 0, v, alpha=1.0, model=m)
    assert np.array_equal(state.beta, [[2.0], [0.5]])


def test_gradient_step_single_node_lasso():
    m = LossModel(kind="lasso", d=1)
    state = GlobalState(beta=np.zeros((1, 1)))
    gradient_step(state, 0, Sample(x=np.array([1.0]), y=1.0), alpha=1.0, model=m)
    assert state.beta[0, 0] == pytest.approx(1.0)


def test_gradient_step_scales_with_node_count():
    m = LossModel(kind="lasso", d=1)
    state = GlobalState(beta=np.zeros((2, 1)))
    gradient_step(state, 0, Sample(x=np.array([1.0]), y=1.0), alpha=1.0, model=m)
    assert state.beta[0, 0] == pytest.approx(0.5)
    assert state.beta[1, 0] == 0.0


def test_gradient_step_touches_only_one_node():
    m = LossModel(kind="multinomial", d=3, n_classes=2)
    rng = np.random.default_rng(0)
    state = GlobalState(beta=rng.normal(size=(4, 3, 2)))
    before = state.beta.copy()
    gradient_step(state, 2, Sample(x=rng.normal(size=3), y=1), alpha=0.5, model=m)
    for i in (0, 1, 3):
        assert np.array_equal(state.beta[i], before[i])
    assert not np.array_equal(state.beta[2], before[2])


def test_gradient_step_divergence_guard():
    m = LossModel(kind="lasso", d=1)
    state = GlobalState(beta=np.zeros((1, 1)))
    with pytest.raises(DivergenceError):
        gradient_step(state, 0, Sample(x=np.array([1.0]), y=1e9), alpha=1.0,
                      model=m, max_norm=1e6)


def test_average_projection_two_point():
    state = GlobalState(beta=np.array([[0.0], [2.0]]))
    average_projection(state, 0, path_graph())
    assert np.allclose(state.beta, 1.0)


def test_average_projection_idempotent_on_consensus():
    g = build_k_regular(5, 2)
    state = GlobalState(beta=np.full((5, 3), 1.7))
    before = state.beta.copy()
    average_projection(state, 3, g)
    assert np.array_equal(state.beta, before)


def test_average_projection_triangle_preserves_mean():
    g = build_k_regular(3, 2)
    state = GlobalState(beta=np.array([[0.0], [3.0], [6.0]]))
    average_projection(state, 1, g)
    assert np.allclose(state.beta, 3.0)


def test_average_projection_restates_neighborhood_mean():
    g = build_k_regular(8, 4, seed=0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        state = GlobalState(beta=rng.normal(size=(8, 2)))
        m = int(rng.integers(8))
        nb = g.closed_neighborhood(m)
        expected = state.beta[nb].mean(axis=0)
        before = state.beta.copy()
        average_projection(state, m, g)
        assert np.allclose(state.beta[nb], expected)
        outside = np.setdiff1d(np.arange(8), nb)
        assert np.array_equal(state.beta[outside], before[outside])


def test_average_projection_never_increases_feasibility_distance():
    g = build_k_regular(10, 4, seed=0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        state = GlobalState(beta=rng.normal(size=(10, 3)))
        df0 = feasibility_distance(state)
        average_projection(state, int(rng.integers(10)), g)
        assert feasibility_distance(state) <= df0 + 1e-12


from conftest import kkt_projection as brute_force_projection


def test_average_projection_matches_quadratic_oracle():
    g = Graph(4, frozenset({(0, 1), (1, 2), (2, 3)}))  # path, irregular
    rng = np.random.default_rng(3)
    for _ in range(100):
        beta = rng.normal(size=(4, 2))
        m = int(rng.integers(4))
        state = GlobalState(beta=beta.copy())
        average_projection(state, m, g)
        expected = brute_force_projection(beta, g.closed_neighborhood(m))
        assert np.allclose(state.beta, expected, atol=1e-9)


def test_step_schedules():
    assert step_size(StepSchedule("constant", 0.1), 7) == pytest.approx(0.1)
    assert step_size(StepSchedule("inverse_k", 1.0, 1.0), 0) == pytest.approx(1.0)
    assert step_size(StepSchedule("inverse_k", 1.0, 1.0), 9) == pytest.approx(0.1)
    assert step_size(StepSchedule("inverse_sqrt_k", 2.0, 4.0), 0) == pytest.approx(1.0)
    with pytest.raises(EngineError):
        StepSchedule("constant", 0.0)
    with pytest.raises(EngineError):
        StepSchedule("inverse_k", 1.0, -1.0)


def test_consensus_distance_values():
    assert consensus_distance(GlobalState(beta=np.full((4, 2), 3.0))) == 0.0
    assert consensus_distance(GlobalState(beta=np.array([[0.0], [2.0]]))) == pytest.approx(2.0)
    assert consensus_distance(GlobalState(beta=np.array([[0.0], [0.0], [3.0]]))) == pytest.approx(4.0)


def test_feasibility_distance_values():
    assert feasibility_distance(GlobalState(beta=np.full((3, 2), 1.0))) == 0.0
    assert feasibility_distance(GlobalState(beta=np.array([[0.0], [2.0]]))) == pytest.approx(2.0)
    assert feasibility_distance(GlobalState(beta=np.array([[0.0], [0.0], [3.0]]))) == pytest.approx(6.0)


def test_optimality_distance_values():
    star = np.array([1.0])
    assert optimality_distance(GlobalState(beta=np.array([[1.0], [1.0]])), star) == 0.0
    assert optimality_distance(GlobalState(beta=np.array([[3.0]])), star) == pytest.approx(4.0)
    assert optimality_distance(GlobalState(beta=np.array([[0.0], [2.0]])), star) == pytest.approx(2.0)
    with pytest.raises(EngineError):
        optimality_distance(GlobalState(beta=np.zeros((2, 3))), np.zeros(2))


def base_config(**over):
    d = {
        "topology": {"kind": "regular", "n": 10, "k": 4},
        "loss": {"kind": "multinomial", "d": 5, "n_classes": 3},
        "iterations": 2000,
        "record_every": 500,
        "master_seed": 0,
        "init": {"kind": "gaussian", "std": 1.0},
        "eval": {"test_samples": 0, "track_objective": False},
    }
    d.update(over)
    return from_dict(d)


def test_pure_gossip_drives_consensus():
    cfg = base_config(p_grad=0.0, iterations=10000, record_every=10000)
    trace = run_serial(cfg)
    assert trace.final().d_k < 1e-6 * trace.records[0].d_k
    # d^k nonincreasing for pure averaging
    cfg2 = base_config(p_grad=0.0, iterations=2000, record_every=100)
    ds = [r.d_k for r in run_serial(cfg2).records]
    assert all(b <= a + 1e-12 for a, b in zip(ds, ds[1:]))


def test_single_node_sgd_decreases_objective():
    cfg = from_dict({
        "topology": {"kind": "regular", "n": 1, "k": 1},
        "loss": {"kind": "lasso", "d": 3, "n_classes": 2},
        "iterations": 2000, "record_every": 2000, "p_grad": 1.0,
        "master_seed": 1,
        "eval": {"test_samples": 0},
    })
    trace = run_serial(cfg)
    assert trace.final().objective < trace.records[0].objective


def test_tiny_steps_reduce_to_pure_averaging():
    cfg = base_config(
        p_grad=0.5, iterations=10000, record_every=10000,
        schedule={"kind": "constant", "a": 1e-300, "b": 1.0},
    )
    trace = run_serial(cfg)
    assert trace.final().d_k < 1e-6 * trace.records[0].d_k


def test_replay_determinism():
    cfg = base_config()
    t1 = run_serial(cfg)
    t2 = run_serial(cfg)
    assert [r.__dict__ for r in t1.records] == [r.__dict__ for r in t2.records]


def test_counters_nondecreasing_and_consistent():
    cfg = base_config()
    trace = run_serial(cfg)
    for a, b in zip(trace.records, trace.records[1:]):
        assert b.grad_steps >= a.grad_steps and b.avg_steps >= a.avg_steps
        assert b.grad_steps + b.avg_steps == b.k


def test_trace_csv_round_trip(tmp_path):
    cfg = base_config(iterations=300, record_every=100)
    trace = run_serial(cfg)
    p = tmp_path / "trace.csv"
    trace.to_csv(p)
    back = MetricsTrace.from_csv(p)
    assert [r.__dict__ for r in back.records] == [r.__dict__ for r in trace.records]
