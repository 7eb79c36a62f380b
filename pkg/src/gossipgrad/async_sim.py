"""Slotted discrete-event simulation of fully distributed execution.

Each node counts down an independent Geometric(p_fire) clock and fires when
it reaches zero.  A firing node locks its closed neighborhood before acting;
if any member of that neighborhood is already locked this slot, the node is
blocked, logs the conflict, and re-draws its countdown.  Lock acquisition is
resolved in node-index order, so the lowest-index node of any conflicting
group wins.  Winners then flip the p_grad coin and perform exactly the serial
engine's gradient or averaging update.

Metrics are indexed by effective updates (executed gradient/average actions),
so a conflict-free async run is update-for-update comparable with the serial
engine.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import data as data_mod
from . import engine as eng
from .config import ExperimentConfig
from .engine import (
    STREAM_CLOCK,
    GlobalState,
    MetricsTrace,
    average_projection,
    gradient_step,
    make_record,
    step_size,
)
from .graph import is_connected


class ProtocolError(ValueError):
    pass


@dataclass
class NodeClock:
    """Geometric countdown clock; fires when countdown hits 0."""

    node: int
    p_fire: float
    countdown: int = 0

    def __post_init__(self):
        if not 0.0 < self.p_fire < 1.0:
            raise ProtocolError(f"p_fire must be in (0, 1), got {self.p_fire}")


@dataclass
class EventRecord:
    slot: int
    node: int
    action: str  # gradient | average | blocked | lock_sent | lock_denied
    messages: int = 0


ACTIONS = ("gradient", "average", "blocked", "lock_sent", "lock_denied")

EVENT_HEADER = ["slot", "node", "action", "messages"]


@dataclass
class EventLog:
    records: list = field(default_factory=list)

    def append(self, rec: EventRecord) -> None:
        if rec.action not in ACTIONS:
            raise ProtocolError(f"unknown action {rec.action!r}")
        if self.records and rec.slot < self.records[-1].slot:
            raise ProtocolError("slots must be nondecreasing")
        self.records.append(rec)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(EVENT_HEADER)
            for r in self.records:
                w.writerow([r.slot, r.node, r.action, r.messages])


@dataclass
class CommStats:
    total_messages: int = 0
    lock_messages: int = 0
    data_messages: int = 0
    conflicts_detected: int = 0

    def add_lock(self, n: int) -> None:
        self.lock_messages += n
        self.total_messages += n

    def add_data(self, n: int) -> None:
        self.data_messages += n
        self.total_messages += n

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)


def draw_countdown(p_fire: float, rng: np.random.Generator) -> int:
    """Geometric on {0, 1, 2, ...} with P(c) = p (1-p)^c."""
    return int(rng.geometric(p_fire)) - 1


def init_clocks(
    n_nodes: int, p_fire, seed: int
) -> tuple[list[NodeClock], list[np.random.Generator]]:
    """One independently seeded clock per node; p_fire scalar or per-node list."""
    if np.isscalar(p_fire):
        p_fire = [float(p_fire)] * n_nodes
    if len(p_fire) != n_nodes:
        raise ProtocolError("p_fire list length must equal node count")
    rngs = [
        np.random.default_rng(data_mod.node_seed_sequence(seed, i, STREAM_CLOCK))
        for i in range(n_nodes)
    ]
    clocks = [
        NodeClock(node=i, p_fire=p, countdown=draw_countdown(p, rngs[i]))
        for i, p in enumerate(p_fire)
    ]
    return clocks, rngs


class AsyncRunner:
    """Holds all simulation state; advance_slot executes one time slot."""

    def __init__(self, cfg: ExperimentConfig, beta_star=None, problem=None):
        self.cfg = cfg
        self.problem = problem if problem is not None else eng.build_problem(cfg)
        if not is_connected(self.problem.graph):
            raise eng.EngineError("topology must be connected")
        self.state = GlobalState(beta=self.problem.beta0.copy())
        self.clocks, self.clock_rngs = init_clocks(
            self.problem.graph.n, cfg.p_fire, cfg.master_seed
        )
        self.beta_star = beta_star
        self.slot = 0
        self.effective_updates = 0
        self.grad_steps = 0
        self.avg_steps = 0
        self.comm = CommStats()
        self.events = EventLog()
        self.trace = MetricsTrace()
        self.trace.append(make_record(self.problem, self.state, 0, 0, 0, beta_star))

    def _record_if_due(self) -> None:
        k = self.effective_updates
        if k % self.cfg.record_every == 0 or k == self.cfg.iterations:
            self.trace.append(
                make_record(
                    self.problem, self.state, k, self.grad_steps, self.avg_steps,
                    self.beta_star,
                )
            )

    def advance_slot(self) -> list[EventRecord]:
        """Run one slot; returns the event records it produced."""
        g = self.problem.graph
        fired = [c.node for c in self.clocks if c.countdown == 0]
        for c in self.clocks:
            if c.countdown > 0:
                c.countdown -= 1
        produced = []
        locked: set[int] = set()
        for i in fired:  # ascending index: lowest conflicting node wins
            nb = g.closed_neighborhood(i)
            if locked.intersection(nb.tolist()):
                self.comm.conflicts_detected += 1
                rec = EventRecord(self.slot, i, "blocked", 0)
                self.events.append(rec)
                produced.append(rec)
            else:
                locked.update(nb.tolist())
                deg = g.degree(i)
                self.comm.add_lock(deg)
                rec = EventRecord(self.slot, i, "lock_sent", deg)
                self.events.append(rec)
                produced.append(rec)
                r = self.problem.decision_rngs[i].random()
                if r <= self.cfg.p_grad:
                    alpha = step_size(self.problem.schedule, self.effective_updates)
                    v = self.problem.oracles[i].draw()
                    gradient_step(
                        self.state, i, v, alpha, self.problem.model,
                        self.cfg.max_param_norm,
                    )
                    self.grad_steps += 1
                    rec = EventRecord(self.slot, i, "gradient", 0)
                else:
                    average_projection(self.state, i, g)
                    self.avg_steps += 1
                    self.comm.add_data(2 * deg)
                    rec = EventRecord(self.slot, i, "average", 2 * deg)
                self.events.append(rec)
                produced.append(rec)
                self.effective_updates += 1
                self.state.iteration = self.effective_updates
                self._record_if_due()
                if self.effective_updates >= self.cfg.iterations:
                    break
            # blocked and acted nodes both re-draw their countdown
            self.clocks[i].countdown = draw_countdown(
                self.clocks[i].p_fire, self.clock_rngs[i]
            )
        self.slot += 1
        return produced

    def run(self) -> tuple[MetricsTrace, EventLog, CommStats]:
        while self.effective_updates < self.cfg.iterations:
            self.advance_slot()
        return self.trace, self.events, self.comm


def run_async(
    cfg: ExperimentConfig, beta_star=None, problem=None
) -> tuple[MetricsTrace, EventLog, CommStats]:
    """Run the slot loop until the effective-update budget is met."""
    return AsyncRunner(cfg, beta_star=beta_star, problem=problem).run()
