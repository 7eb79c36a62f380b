"""gossipgrad: decentralized asynchronous SGD over undirected graphs.

A node network minimizes the average of per-node expected losses by purely
local actions: each update either takes a stochastic (sub)gradient step on
one node's local variable or replaces a closed neighborhood's variables by
their mean (the exact projection onto that neighborhood's consensus set).
The package also ships the spectral machinery relating topology to
convergence speed, a slotted discrete-event simulator of the distributed
protocol, independent verification oracles, and an experiment CLI.
"""

from .graph import (
    Graph,
    AveragingMatrix,
    SpectralReport,
    build_complete,
    build_k_regular,
    averaging_matrix,
    eta_lower_bound,
    is_connected,
    mean_matrix,
    second_largest_singular,
)
from .losses import LossModel, Sample, loss, subgradient, finite_difference_check
from .data import (
    Dataset,
    NodeDistribution,
    load_delimited,
    partition_round_robin,
    sample,
    synth_node_distributions,
)
from .engine import (
    GlobalState,
    MetricsRecord,
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
from .async_sim import CommStats, EventLog, NodeClock, init_clocks, run_async
from .verify import (
    RegularityEstimate,
    ReferenceOptimum,
    estimate_eta,
    psd_certificate,
    solve_reference,
    total_variance_identity,
    verify_lemma_bound,
)
from .config import ExperimentConfig

__version__ = "0.1.0"
