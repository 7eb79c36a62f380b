"""Serial reference engine: random node selection, coin flip between a local
(sub)gradient step and a neighborhood-average projection, plus step-size
schedules and convergence metrics.

RNG streams are split per purpose and per node so the serial and async
runners consume identical per-update randomness:

  SELECT   central node-selection stream (serial only)
  DECISION per-node gradient-vs-average coin
  ORACLE   per-node data sample stream
  CLOCK    per-node geometric countdown stream (async only)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import graph as graph_mod
from .config import ExperimentConfig
from .losses import LossModel, Sample, subgradient, batch_loss, prediction_error

# SeedSequence stream tags
STREAM_SELECT = 0
STREAM_DECISION = 1
STREAM_ORACLE = 2
STREAM_CLOCK = 3
STREAM_INIT = 4
STREAM_TEST = 5
STREAM_EVAL = 6
STREAM_POOL = 7


class DivergenceError(RuntimeError):
    """A node parameter norm exceeded the configured guard bound."""


class EngineError(ValueError):
    pass


@dataclass
class GlobalState:
    """Stacked per-node parameters: beta[i] is node i's local copy."""

    beta: np.ndarray  # (n_nodes, *param_shape)
    iteration: int = 0

    @property
    def n_nodes(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True)
class StepSchedule:
    """alpha_k = a (constant), a/(b+k), or a/sqrt(b+k)."""

    kind: str
    a: float
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "inverse_k", "inverse_sqrt_k"):
            raise EngineError(f"unknown schedule kind {self.kind!r}")
        if self.a <= 0 or self.b <= 0:
            raise EngineError("schedule parameters a and b must be positive")


def step_size(sched: StepSchedule, k: int) -> float:
    if k < 0:
        raise EngineError(f"iteration index must be >= 0, got {k}")
    if sched.kind == "constant":
        return sched.a
    if sched.kind == "inverse_k":
        return sched.a / (sched.b + k)
    return sched.a / np.sqrt(sched.b + k)


def gradient_step(
    state: GlobalState,
    node: int,
    v: Sample,
    alpha: float,
    model: LossModel,
    max_norm: float = np.inf,
) -> GlobalState:
    """beta_i <- beta_i - alpha * (1/N) * subgradient; other nodes untouched."""
    if alpha <= 0:
        raise EngineError(f"step size must be positive, got {alpha}")
    g = subgradient(model, state.beta[node], v)
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite subgradient at node {node}")
    state.beta[node] -= (alpha / state.n_nodes) * g
    if np.linalg.norm(state.beta[node]) > max_norm:
        raise DivergenceError(
            f"parameter norm at node {node} exceeded guard bound {max_norm:g}"
        )
    return state


def average_projection(state: GlobalState, node: int, g: graph_mod.Graph) -> GlobalState:
    """Exact Euclidean projection onto the set where node's closed
    neighborhood holds equal values: those entries become their mean."""
    nb = g.closed_neighborhood(node)
    state.beta[nb] = state.beta[nb].mean(axis=0)
    return state


def _flat(beta: np.ndarray) -> np.ndarray:
    return beta.reshape(beta.shape[0], -1)


def consensus_distance(state: GlobalState) -> float:
    """d^k = sum_i ||beta_i - mean(beta)||."""
    b = _flat(state.beta)
    dev = b - b.mean(axis=0)
    return float(np.linalg.norm(dev, axis=1).sum())


def feasibility_distance(state: GlobalState) -> float:
    """DF = sum_i ||beta_i - mean(beta)||^2 (squared distance to consensus)."""
    b = _flat(state.beta)
    dev = b - b.mean(axis=0)
    return float((dev * dev).sum())


def optimality_distance(state: GlobalState, beta_star: np.ndarray) -> float:
    """DO = sum_i ||beta_i - beta*||^2."""
    if beta_star.shape != state.beta.shape[1:]:
        raise EngineError(
            f"beta* shape {beta_star.shape} does not match state {state.beta.shape[1:]}"
        )
    dev = _flat(state.beta) - beta_star.reshape(-1)
    return float((dev * dev).sum())


@dataclass
class MetricsRecord:
    k: int
    d_k: float
    DF: float
    DO: float | None = None
    objective: float | None = None
    pred_error: float | None = None
    grad_steps: int = 0
    avg_steps: int = 0


CSV_HEADER = ["k", "d_k", "DF", "DO", "objective", "pred_error", "grad_steps", "avg_steps"]


@dataclass
class MetricsTrace:
    records: list = field(default_factory=list)

    def append(self, rec: MetricsRecord) -> None:
        self.records.append(rec)

    def final(self) -> MetricsRecord:
        return self.records[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.records:
                w.writerow(
                    [
                        r.k,
                        repr(r.d_k),
                        repr(r.DF),
                        "" if r.DO is None else repr(r.DO),
                        "" if r.objective is None else repr(r.objective),
                        "" if r.pred_error is None else repr(r.pred_error),
                        r.grad_steps,
                        r.avg_steps,
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "MetricsTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                trace.append(
                    MetricsRecord(
                        k=int(row["k"]),
                        d_k=float(row["d_k"]),
                        DF=float(row["DF"]),
                        DO=float(row["DO"]) if row["DO"] else None,
                        objective=float(row["objective"]) if row["objective"] else None,
                        pred_error=float(row["pred_error"]) if row["pred_error"] else None,
                        grad_steps=int(row["grad_steps"]),
                        avg_steps=int(row["avg_steps"]),
                    )
                )
        return trace


@dataclass
class Problem:
    """Everything a runner needs, built deterministically from a config."""

    cfg: ExperimentConfig
    graph: graph_mod.Graph
    model: LossModel
    oracles: list
    decision_rngs: list
    schedule: StepSchedule
    beta0: np.ndarray  # (n_nodes, *param_shape)
    eval_X: np.ndarray | None  # pooled empirical-objective samples
    eval_y: np.ndarray | None
    test_X: np.ndarray | None
    test_y: np.ndarray | None


def build_graph(cfg: ExperimentConfig) -> graph_mod.Graph:
    t = cfg.topology
    if t.kind == "complete":
        return graph_mod.build_complete(t.n)
    if t.n == 1:
        return graph_mod.Graph(1, frozenset())
    return graph_mod.build_k_regular(t.n, t.k, t.seed)


def build_model(cfg: ExperimentConfig) -> LossModel:
    lc = cfg.loss
    return LossModel(
        kind=lc.kind, d=lc.d, n_classes=lc.n_classes, lam=lc.lam, bias=lc.bias
    )


def build_problem(cfg: ExperimentConfig) -> Problem:
    g = build_graph(cfg)
    model = build_model(cfg)
    n = g.n
    seed = cfg.master_seed

    def rng(stream, node=0):
        return np.random.default_rng(data_mod.node_seed_sequence(seed, node, stream))

    decision_rngs = [rng(STREAM_DECISION, i) for i in range(n)]

    eval_X = eval_y = test_X = test_y = None
    if cfg.data.source == "synthetic":
        sc = cfg.data.synthetic
        dists = data_mod.synth_node_distributions(
            n, cfg.loss.d, max(cfg.loss.n_classes, 1), sc.divergence,
            seed=cfg.topology.seed + seed, noise_std=sc.noise_std,
            mean_scale=sc.mean_scale,
        )
        if sc.samples_per_node > 0:
            pools = [
                data_mod.sample_batch(dists[i], sc.samples_per_node, rng(STREAM_POOL, i))
                for i in range(n)
            ]
            oracles = [
                data_mod.PoolOracle(X, y, rng(STREAM_ORACLE, i))
                for i, (X, y) in enumerate(pools)
            ]
            eval_X = np.vstack([X for X, _ in pools])
            eval_y = np.concatenate([y for _, y in pools])
        else:
            oracles = [
                data_mod.SyntheticOracle(dists[i], rng(STREAM_ORACLE, i))
                for i in range(n)
            ]
            m = cfg.eval.objective_samples_per_node
            if m > 0:
                batches = [
                    data_mod.sample_batch(dists[i], m, rng(STREAM_EVAL, i))
                    for i in range(n)
                ]
                eval_X = np.vstack([X for X, _ in batches])
                eval_y = np.concatenate([y for _, y in batches])
        if cfg.eval.test_samples > 0:
            if cfg.eval.test_distribution == "base":
                # shared population the per-node offsets are drawn around
                base = data_mod.synth_node_distributions(
                    1, cfg.loss.d, max(cfg.loss.n_classes, 1), 0.0,
                    seed=cfg.topology.seed + seed, noise_std=sc.noise_std,
                    mean_scale=sc.mean_scale,
                )
                test_X, test_y = data_mod.sample_batch(
                    base[0], cfg.eval.test_samples, rng(STREAM_TEST)
                )
            else:
                test_X, test_y = data_mod.mixture_test_set(
                    dists, cfg.eval.test_samples, rng(STREAM_TEST)
                )
    else:
        fc = cfg.data.file
        ds = data_mod.load_delimited(
            fc.path, cfg.loss.d, max(cfg.loss.n_classes, 1),
            label_column=fc.label_column, header=fc.header, normalize=fc.normalize,
        )
        n_test = int(len(ds) * fc.test_fraction)
        train = data_mod.Dataset(X=ds.X[: len(ds) - n_test], y=ds.y[: len(ds) - n_test])
        train = data_mod.partition_round_robin(train, n)
        oracles = [
            data_mod.PoolOracle(
                train.X[train.partition[i]], train.y[train.partition[i]],
                rng(STREAM_ORACLE, i),
            )
            for i in range(n)
        ]
        eval_X, eval_y = train.X, train.y
        if n_test > 0:
            test_X, test_y = ds.X[len(ds) - n_test:], ds.y[len(ds) - n_test:]

    a = cfg.schedule.a if cfg.schedule.a > 0 else float(n)
    schedule = StepSchedule(kind=cfg.schedule.kind, a=a, b=cfg.schedule.b)

    beta0 = np.zeros((n, *model.param_shape))
    if cfg.init.kind == "gaussian":
        beta0 = cfg.init.std * rng(STREAM_INIT).normal(size=beta0.shape)

    return Problem(
        cfg=cfg, graph=g, model=model, oracles=oracles,
        decision_rngs=decision_rngs, schedule=schedule, beta0=beta0,
        eval_X=eval_X, eval_y=eval_y, test_X=test_X, test_y=test_y,
    )


def make_record(
    problem: Problem,
    state: GlobalState,
    k: int,
    grad_steps: int,
    avg_steps: int,
    beta_star: np.ndarray | None = None,
) -> MetricsRecord:
    cfg = problem.cfg
    model = problem.model
    beta_bar = state.beta.mean(axis=0)
    objective = None
    if cfg.eval.track_objective and problem.eval_X is not None:
        objective = batch_loss(model, beta_bar, problem.eval_X, problem.eval_y)
    pred_err = None
    if (
        cfg.eval.track_pred_error
        and problem.test_X is not None
        and model.kind != "lasso"
    ):
        pred_err = prediction_error(model, beta_bar, problem.test_X, problem.test_y)
    return MetricsRecord(
        k=k,
        d_k=consensus_distance(state),
        DF=feasibility_distance(state),
        DO=None if beta_star is None else optimality_distance(state, beta_star),
        objective=objective,
        pred_error=pred_err,
        grad_steps=grad_steps,
        avg_steps=avg_steps,
    )


def run_serial(
    cfg: ExperimentConfig,
    beta_star: np.ndarray | None = None,
    problem: Problem | None = None,
) -> MetricsTrace:
    """Reference sequential loop: uniform node selection, then a p_grad coin
    deciding between a gradient step (fresh local sample) and a neighborhood
    average.  Fully deterministic given cfg.master_seed."""
    if problem is None:
        problem = build_problem(cfg)
    if not graph_mod.is_connected(problem.graph):
        raise EngineError("topology must be connected")
    state = GlobalState(beta=problem.beta0.copy())
    select_rng = np.random.default_rng(
        data_mod.node_seed_sequence(cfg.master_seed, 0, STREAM_SELECT)
    )
    trace = MetricsTrace()
    grad_steps = avg_steps = 0
    trace.append(make_record(problem, state, 0, 0, 0, beta_star))
    for k in range(cfg.iterations):
        i = int(select_rng.integers(problem.graph.n))
        r = problem.decision_rngs[i].random()
        if r <= cfg.p_grad:
            alpha = step_size(problem.schedule, k)
            v = problem.oracles[i].draw()
            gradient_step(state, i, v, alpha, problem.model, cfg.max_param_norm)
            grad_steps += 1
        else:
            average_projection(state, i, problem.graph)
            avg_steps += 1
        state.iteration = k + 1
        if (k + 1) % cfg.record_every == 0 or k + 1 == cfg.iterations:
            trace.append(make_record(problem, state, k + 1, grad_steps, avg_steps, beta_star))
    return trace
