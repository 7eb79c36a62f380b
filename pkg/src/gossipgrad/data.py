"""Per-node sample oracles: synthetic class-conditional Gaussians with a
node-divergence knob, and delimited-file datasets partitioned across nodes.

Each node owns an independent RNG stream derived from (master_seed, node), so
oracles can be consumed concurrently and any run replays bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .losses import Sample


class DataError(ValueError):
    """Bad distribution parameters or unparseable dataset file."""


@dataclass(frozen=True)
class NodeDistribution:
    """Class-conditional Gaussian generator for one node."""

    node: int
    class_means: np.ndarray  # (C, d)
    noise_std: float
    class_prior: np.ndarray  # (C,)

    def __post_init__(self):
        means = np.asarray(self.class_means, dtype=float)
        prior = np.asarray(self.class_prior, dtype=float)
        if means.ndim != 2:
            raise DataError("class_means must be a (C, d) array")
        if prior.shape != (means.shape[0],):
            raise DataError("class_prior length must match number of classes")
        if abs(prior.sum() - 1.0) > 1e-12 or np.any(prior < 0):
            raise DataError("class_prior must be nonnegative and sum to 1")
        if self.noise_std <= 0:
            raise DataError(f"noise_std must be > 0, got {self.noise_std}")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "class_prior", prior)

    @property
    def n_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def d(self) -> int:
        return self.class_means.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix + labels, optionally partitioned across nodes."""

    X: np.ndarray
    y: np.ndarray
    partition: dict | None = None  # node -> np.ndarray of sample indices

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or len(y) != len(X):
            raise DataError("X must be (m, d) with matching label vector")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.partition is not None:
            idx = np.concatenate([np.asarray(v) for v in self.partition.values()])
            if sorted(idx.tolist()) != list(range(len(X))):
                raise DataError("partition must cover every sample exactly once")
            if any(len(v) == 0 for v in self.partition.values()):
                raise DataError("every node's partition share must be nonempty")

    def __len__(self) -> int:
        return len(self.y)


def node_seed_sequence(master_seed: int, node: int, stream: int) -> np.random.SeedSequence:
    """Stable per-(node, stream) seeding; stream ids are defined in engine."""
    return np.random.SeedSequence((master_seed, stream, node))


def synth_node_distributions(
    n_nodes: int,
    d: int,
    n_classes: int,
    divergence: float,
    seed: int,
    noise_std: float = 1.0,
    mean_scale: float = 1.0,
) -> list[NodeDistribution]:
    """Node distributions sharing base class means plus divergence-scaled,
    node-specific Gaussian offsets.  divergence = 0 makes all nodes identical.
    """
    if n_nodes < 1 or d < 1 or n_classes < 1:
        raise DataError("n_nodes, d and n_classes must be positive")
    if divergence < 0:
        raise DataError(f"divergence must be >= 0, got {divergence}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD157)))
    base = mean_scale * rng.normal(size=(n_classes, d))
    prior = np.full(n_classes, 1.0 / n_classes)
    dists = []
    for i in range(n_nodes):
        offset = rng.normal(size=(n_classes, d))
        dists.append(
            NodeDistribution(
                node=i,
                class_means=base + divergence * offset,
                noise_std=noise_std,
                class_prior=prior,
            )
        )
    return dists


def sample(dist: NodeDistribution, rng: np.random.Generator) -> Sample:
    """Draw one sample: class by prior, features = class mean + Gaussian noise."""
    c = int(rng.choice(dist.n_classes, p=dist.class_prior))
    x = dist.class_means[c] + dist.noise_std * rng.normal(size=dist.d)
    return Sample(x=x, y=float(c))


def sample_batch(
    dist: NodeDistribution, m: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """m i.i.d. draws from one node's distribution, as (X, y) arrays."""
    cs = rng.choice(dist.n_classes, size=m, p=dist.class_prior)
    X = dist.class_means[cs] + dist.noise_std * rng.normal(size=(m, dist.d))
    return X, cs.astype(float)


def mixture_test_set(
    dists: list[NodeDistribution], m: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Held-out samples from the uniform mixture of all node distributions."""
    nodes = rng.integers(len(dists), size=m)
    X = np.empty((m, dists[0].d))
    y = np.empty(m)
    for i, nd in enumerate(nodes):
        s = sample(dists[nd], rng)
        X[i] = s.x
        y[i] = s.y
    return X, y


def load_delimited(
    path,
    d: int,
    n_classes: int,
    label_column: int = -1,
    header: bool = False,
    normalize: bool = False,
    delimiter: str = ",",
) -> Dataset:
    """Parse a delimited numeric file of d features + 1 label per row.

    Errors report the offending 1-based line number.  Labels must lie in
    [0, n_classes) when n_classes > 1; with normalize=True each feature
    column is rescaled to [0, 1].
    """
    rows = []
    labels = []
    with open(path) as fh:
        lines = fh.readlines()
    start = 1 if header else 0
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.strip().split(delimiter)
        if len(parts) != d + 1:
            raise DataError(
                f"{path}:{lineno}: expected {d + 1} fields, got {len(parts)}"
            )
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        lab = vals.pop(label_column if label_column >= 0 else len(vals) + label_column)
        if n_classes > 1 and not (0 <= lab < n_classes and lab == int(lab)):
            raise DataError(
                f"{path}:{lineno}: label {lab} out of range [0, {n_classes})"
            )
        rows.append(vals)
        labels.append(lab)
    if not rows:
        raise DataError(f"{path}: no samples")
    X = np.array(rows)
    if normalize:
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        span[span == 0] = 1.0
        X = (X - lo) / span
    return Dataset(X=X, y=np.array(labels))


def partition_round_robin(ds: Dataset, n_nodes: int) -> Dataset:
    """Assign sample i to node i mod n_nodes."""
    if n_nodes > len(ds):
        raise DataError(f"cannot split {len(ds)} samples across {n_nodes} nodes")
    part = {i: np.arange(i, len(ds), n_nodes) for i in range(n_nodes)}
    return replace(ds, partition=part)


class SyntheticOracle:
    """Stream of i.i.d. samples from one node's distribution."""

    def __init__(self, dist: NodeDistribution, rng: np.random.Generator):
        self.dist = dist
        self.rng = rng

    def draw(self) -> Sample:
        return sample(self.dist, self.rng)


class PoolOracle:
    """Uniform-with-replacement draws from a node's finite sample pool.

    Models the empirical-loss setting where each node holds a fixed shard.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        if len(X) == 0:
            raise DataError("empty sample pool")
        self.X = X
        self.y = y
        self.rng = rng

    def draw(self) -> Sample:
        i = int(self.rng.integers(len(self.X)))
        return Sample(x=self.X[i], y=float(self.y[i]))
