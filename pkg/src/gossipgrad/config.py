"""Declarative experiment configuration: YAML file + dotted-path overrides.

Configs round-trip losslessly through to_dict/from_dict so the summary
written next to each run re-parses into an equal ExperimentConfig.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import yaml


class ConfigError(ValueError):
    """Invalid or missing configuration field; message names the field."""


@dataclass(frozen=True)
class TopologyConfig:
    kind: str = "regular"  # regular | complete
    n: int = 10
    k: int = 4
    seed: int = 0


@dataclass(frozen=True)
class LossConfig:
    kind: str = "multinomial"
    lam: float = 0.0
    d: int = 10
    n_classes: int = 2
    bias: bool = False


@dataclass(frozen=True)
class SyntheticDataConfig:
    divergence: float = 1.0
    noise_std: float = 1.0
    mean_scale: float = 1.0
    samples_per_node: int = 0  # 0 = unlimited stream; >0 = finite pool per node


@dataclass(frozen=True)
class FileDataConfig:
    path: str = ""
    label_column: int = -1
    header: bool = False
    normalize: bool = False
    test_fraction: float = 0.2


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # synthetic | file
    synthetic: SyntheticDataConfig = field(default_factory=SyntheticDataConfig)
    file: FileDataConfig = field(default_factory=FileDataConfig)


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "inverse_k"  # constant | inverse_k | inverse_sqrt_k
    a: float = 0.0  # 0 = default a = n_nodes
    b: float = 10.0


@dataclass(frozen=True)
class InitConfig:
    kind: str = "zeros"  # zeros | gaussian
    std: float = 1.0


@dataclass(frozen=True)
class EvalConfig:
    reference: bool = False  # solve for beta* and record DO
    reference_tolerance: float = 1e-6
    test_samples: int = 2000
    test_distribution: str = "mixture"  # mixture | base (synthetic data only)
    objective_samples_per_node: int = 200
    track_objective: bool = True
    track_pred_error: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    init: InitConfig = field(default_factory=InitConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    p_grad: float = 0.5
    mode: str = "serial"  # serial | async
    p_fire: float = 0.1
    iterations: int = 10000
    record_every: int = 100
    master_seed: int = 0
    output_dir: str = "out"
    max_param_norm: float = 1e6


_SECTIONS = {
    "topology": TopologyConfig,
    "loss": LossConfig,
    "schedule": ScheduleConfig,
    "init": InitConfig,
    "eval": EvalConfig,
}


def _build(cls, d: dict, prefix: str):
    fields = {f.name: f for f in cls.__dataclass_fields__.values()}
    kwargs = {}
    for key, val in d.items():
        if key not in fields:
            raise ConfigError(f"unknown field {prefix}{key}")
        ftype = fields[key].type
        if key == "synthetic":
            val = _build(SyntheticDataConfig, val or {}, f"{prefix}synthetic.")
        elif key == "file":
            val = _build(FileDataConfig, val or {}, f"{prefix}file.")
        kwargs[key] = val
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad section {prefix.rstrip('.')}: {exc}") from exc


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    kwargs = {}
    for key, val in d.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], val or {}, f"{key}.")
        elif key == "data":
            kwargs[key] = _build(DataConfig, val or {}, "data.")
        elif key in ExperimentConfig.__dataclass_fields__:
            kwargs[key] = val
        else:
            raise ConfigError(f"unknown field {key}")
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError naming the first offending field."""
    t = cfg.topology
    if t.kind not in ("regular", "complete"):
        raise ConfigError(f"topology.kind must be regular|complete, got {t.kind!r}")
    if t.n < 1:
        raise ConfigError(f"topology.n must be positive, got {t.n}")
    if t.kind == "regular" and t.n > 1 and not 0 < t.k < t.n:
        raise ConfigError(f"topology.k must satisfy 0 < k < n, got {t.k}")
    if cfg.loss.kind not in ("logistic", "hinge_svm", "lasso", "multinomial"):
        raise ConfigError(f"loss.kind unknown: {cfg.loss.kind!r}")
    if cfg.loss.lam < 0:
        raise ConfigError(f"loss.lam must be >= 0, got {cfg.loss.lam}")
    if cfg.loss.d < 1:
        raise ConfigError(f"loss.d must be positive, got {cfg.loss.d}")
    if cfg.data.source not in ("synthetic", "file"):
        raise ConfigError(f"data.source must be synthetic|file, got {cfg.data.source!r}")
    if cfg.data.source == "file" and not cfg.data.file.path:
        raise ConfigError("data.file.path is required when data.source = file")
    if cfg.data.synthetic.divergence < 0:
        raise ConfigError("data.synthetic.divergence must be >= 0")
    if cfg.data.synthetic.noise_std <= 0:
        raise ConfigError("data.synthetic.noise_std must be > 0")
    if cfg.schedule.kind not in ("constant", "inverse_k", "inverse_sqrt_k"):
        raise ConfigError(f"schedule.kind unknown: {cfg.schedule.kind!r}")
    if cfg.schedule.a < 0:
        raise ConfigError(f"schedule.a must be >= 0 (0 means default), got {cfg.schedule.a}")
    if cfg.schedule.b <= 0:
        raise ConfigError(f"schedule.b must be > 0, got {cfg.schedule.b}")
    if cfg.init.kind not in ("zeros", "gaussian"):
        raise ConfigError(f"init.kind must be zeros|gaussian, got {cfg.init.kind!r}")
    if cfg.init.std <= 0:
        raise ConfigError(f"init.std must be > 0, got {cfg.init.std}")
    if not 0.0 <= cfg.p_grad <= 1.0:
        raise ConfigError(f"p_grad must be in [0, 1], got {cfg.p_grad}")
    if not 0.0 < cfg.p_fire < 1.0:
        raise ConfigError(f"p_fire must be in (0, 1), got {cfg.p_fire}")
    if cfg.mode not in ("serial", "async"):
        raise ConfigError(f"mode must be serial|async, got {cfg.mode!r}")
    if cfg.iterations <= 0:
        raise ConfigError(f"iterations must be > 0, got {cfg.iterations}")
    if cfg.record_every <= 0:
        raise ConfigError(f"record_every must be > 0, got {cfg.record_every}")
    if cfg.max_param_norm <= 0:
        raise ConfigError(f"max_param_norm must be > 0, got {cfg.max_param_norm}")
    if cfg.eval.test_samples < 0:
        raise ConfigError("eval.test_samples must be >= 0")
    if cfg.eval.test_distribution not in ("mixture", "base"):
        raise ConfigError(
            f"eval.test_distribution must be mixture|base, got {cfg.eval.test_distribution!r}"
        )


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return from_dict(raw or {})


def save(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(to_dict(cfg), fh, sort_keys=False)


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply `dotted.path=value` overrides; values parse as YAML scalars."""
    d = to_dict(cfg)
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} must look like path=value")
        path, _, raw = ov.partition("=")
        keys = path.strip().split(".")
        node = d
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"unknown field {path.strip()}")
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ConfigError(f"unknown field {path.strip()}")
        val = yaml.safe_load(raw)
        if isinstance(val, str):
            # YAML needs a dot in floats; accept plain "1e-9" style too
            try:
                val = float(val)
            except ValueError:
                pass
        node[keys[-1]] = val
    return from_dict(d)
