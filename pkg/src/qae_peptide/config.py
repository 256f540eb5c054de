"""Run configuration: JSON sections, consistency checks, variant grids and per-job seeds."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .autoencoder import AnsatzConfig, TrainConfig
from .encoding import EncodingConfig
from .kernels import PSD_POLICIES

FULL_GRID = {"n_qubits": [8, 10], "depth": [10, 20, 30], "n_trash": [1, 2, 3]}
FULL_GRID_EPOCHS = {"8": 10, "10": 5}


class ConfigError(ValueError):
    pass


def job_seed(root_seed: int, job_id: str) -> int:
    """Stable 63-bit seed for one job, independent of scheduling order."""
    digest = hashlib.sha256(f"{int(root_seed)}:{job_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class EncodingSection:
    max_len: int = 12
    evolution_time: float = 1.0
    trotter_steps: int = 64
    n_qubits: int | None = None      # optional; must match every grid entry when given

    def for_qubits(self, n_qubits: int) -> EncodingConfig:
        return EncodingConfig(n_qubits, self.max_len, self.evolution_time, self.trotter_steps)


@dataclass
class AnsatzSection:
    n_qubits: list = field(default_factory=lambda: [8])
    depth: list = field(default_factory=lambda: [10])
    n_trash: list = field(default_factory=lambda: [1])

    def variants(self) -> list[AnsatzConfig]:
        return [AnsatzConfig(n, d, m) for n, d, m in
                itertools.product(self.n_qubits, self.depth, self.n_trash)]


@dataclass
class TrainingSection:
    batch_size: int = 64
    learning_rate: float = 1e-2
    epochs: int = 10
    epochs_by_qubits: dict = field(default_factory=dict)
    loss_log_stride: int = 1
    gradient: str = "adjoint"

    def train_config(self, n_qubits: int, seed: int) -> TrainConfig:
        epochs = int(self.epochs_by_qubits.get(str(n_qubits), self.epochs))
        return TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                           epochs=epochs, seed=seed, loss_log_stride=self.loss_log_stride,
                           gradient=self.gradient)


@dataclass
class ShadowSection:
    n_qubits: int = 6
    depth: int = 3
    n_trash: int = 1
    n_snapshots: int = 50_000
    groups: int = 10
    circuits: int = 10
    batch: int = 8
    tolerance: float = 0.02
    truncation_n: int = 4
    truncation_depth: int = 3
    truncation_k: list = field(default_factory=lambda: [2, 3])
    truncation_trials: int = 100


@dataclass
class SvmSection:
    C: float = 1.0
    tol: float = 1e-3
    folds: int = 5
    psd_policy: str | None = None    # None: per-kernel default
    protocol: str = "cv"             # "cv" or "holdout"
    test_fraction: float = 0.2


@dataclass
class DataSection:
    pretrain: dict = field(default_factory=lambda: {
        "synthetic": {"n": 2000, "length_range": [8, 12], "mode": "planted", "seed": 0}})
    datasets: list = field(default_factory=list)


SECTIONS = {"encoding": EncodingSection, "ansatz": AnsatzSection, "training": TrainingSection,
            "shadow": ShadowSection, "svm": SvmSection, "data": DataSection}


@dataclass
class RunConfig:
    encoding: EncodingSection = field(default_factory=EncodingSection)
    ansatz: AnsatzSection = field(default_factory=AnsatzSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    shadow: ShadowSection = field(default_factory=ShadowSection)
    svm: SvmSection = field(default_factory=SvmSection)
    data: DataSection = field(default_factory=DataSection)
    out_dir: str = "runs/default"
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - set(SECTIONS) - {"out_dir", "seed"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kwargs = {}
        for name, section in SECTIONS.items():
            values = raw.get(name, {})
            allowed = {f.name for f in fields(section)}
            bad = set(values) - allowed
            if bad:
                raise ConfigError(f"[{name}] unknown keys {sorted(bad)}")
            kwargs[name] = section(**values)
        cfg = cls(**kwargs, out_dir=raw.get("out_dir", "runs/default"), seed=int(raw.get("seed", 0)))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"{path}: no such config file") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        a = self.ansatz
        if not (a.n_qubits and a.depth and a.n_trash):
            raise ConfigError("[ansatz] grid lists must be non-empty")
        for n, m in itertools.product(a.n_qubits, a.n_trash):
            if not 1 <= m < n:
                raise ConfigError(f"[ansatz] n_trash={m} must satisfy 1 <= m < n_qubits={n}")
        if self.encoding.n_qubits is not None and set(a.n_qubits) != {self.encoding.n_qubits}:
            raise ConfigError(f"[encoding] n_qubits={self.encoding.n_qubits} disagrees with "
                              f"[ansatz] n_qubits={a.n_qubits}")
        if self.shadow.n_trash >= self.shadow.n_qubits:
            raise ConfigError("[shadow] n_trash must be below n_qubits")
        for n in a.n_qubits:
            self.encoding.for_qubits(n)
            self.training.train_config(n, 0)
        if self.svm.psd_policy is not None and self.svm.psd_policy not in PSD_POLICIES:
            raise ConfigError(f"[svm] unknown psd_policy {self.svm.psd_policy!r}")
        if self.svm.protocol not in ("cv", "holdout"):
            raise ConfigError(f"[svm] protocol must be cv or holdout, got {self.svm.protocol!r}")
        names = []
        for ds in self.data.datasets:
            if "name" not in ds or ("path" in ds) == ("synthetic" in ds):
                raise ConfigError("[data] each dataset needs a name and exactly one of path/synthetic")
            if "max_len" not in ds:
                raise ConfigError(f"[data] dataset {ds['name']!r} needs max_len")
            if ds["max_len"] > self.encoding.max_len:
                raise ConfigError(f"[data] dataset {ds['name']!r} max_len {ds['max_len']} exceeds "
                                  f"[encoding] max_len {self.encoding.max_len}")
            names.append(ds["name"])
        if len(set(names)) != len(names):
            raise ConfigError("[data] dataset names must be unique")
        pre = self.data.pretrain
        if ("path" in pre) == ("synthetic" in pre):
            raise ConfigError("[data] pretrain needs exactly one of path/synthetic")

    def variants(self, only: str | None = None) -> list[AnsatzConfig]:
        grid = self.ansatz.variants()
        if only is None:
            return grid
        chosen = AnsatzConfig.from_variant(only)
        if chosen not in grid:
            raise ConfigError(f"variant {only} is not in the configured grid")
        return [chosen]


def full_grid_config(**overrides) -> RunConfig:
    """The 18-variant grid with per-size epoch counts and batch size 1024."""
    raw = {"ansatz": dict(FULL_GRID),
           "training": {"batch_size": 1024, "epochs_by_qubits": dict(FULL_GRID_EPOCHS)},
           "encoding": {"max_len": 65}}
    raw.update(overrides)
    return RunConfig.from_dict(raw)
