"""Experiment configuration: JSON files, named presets and key overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .nets import ARCHS, TrainSchedule
from .signal_model import DatasetConfig

BASELINES = ("ista_gs", "nesterov_gs")


@dataclass
class ExperimentConfig:
    """Everything one experiment needs.

    Defaults follow the reference simulation setup: activity probability 0.1,
    lambda 0.1, K = 12 layers, P = 64 training samples per batch, 128 test
    samples, lr0 = 5e-4 and lr1 = 0.2 * lr0.
    """

    l: int = 20
    n: int = 40
    m: int = 8
    preamble_kind: str = "gaussian"
    condition_number: float | None = None
    snr_db: float = 15.0
    snr_sweep: list[float] | None = None
    device_sweep: list[int] | None = None
    activity_prob: float = 0.1
    lam: float = 0.1
    k_layers: int = 12
    baseline_iters: int | None = None
    p_train: int = 64
    n_test: int = 128
    lr0: float = 5e-4
    lr1_ratio: float = 0.2
    steps_phase_a: int = 400
    steps_phase_b: int = 400
    batch_mode: str = "stream"
    archs: list[str] = field(default_factory=lambda: list(ARCHS))
    weight_method: str = "pgd"
    seed: int = 0
    out: str = "runs"

    def validate(self) -> None:
        self.dataset_config().validate()
        bad = [a for a in self.archs if a not in ARCHS]
        if bad:
            raise ValueError(f"unknown architectures {bad}; choose from {ARCHS}")
        if self.k_layers < 1:
            raise ValueError("k_layers must be >= 1")
        if self.lam <= 0 or self.lr0 <= 0 or self.lr1_ratio <= 0:
            raise ValueError("lam, lr0 and lr1_ratio must be positive")
        if self.weight_method not in ("pgd", "minimax"):
            raise ValueError(f"unknown weight_method {self.weight_method!r}")
        if self.batch_mode not in ("stream", "full"):
            raise ValueError(f"unknown batch_mode {self.batch_mode!r}")

    @property
    def iters(self) -> int:
        return self.k_layers if self.baseline_iters is None else self.baseline_iters

    def dataset_config(self, **changes) -> DatasetConfig:
        cfg = DatasetConfig(
            l=self.l,
            n=self.n,
            m=self.m,
            preamble_kind=self.preamble_kind,
            condition_number=self.condition_number,
            snr_db=self.snr_db,
            activity_prob=self.activity_prob,
            p_train=self.p_train,
            n_test=self.n_test,
            seed=self.seed,
        )
        return replace(cfg, **changes)

    def schedule(self) -> TrainSchedule:
        return TrainSchedule(
            lr0=self.lr0,
            lr1_ratio=self.lr1_ratio,
            steps_phase_a=self.steps_phase_a,
            steps_phase_b=self.steps_phase_b,
            batch_mode=self.batch_mode,
            seed=self.seed,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


PRESETS: dict[str, dict] = {
    "desk": {"l": 20, "n": 40, "m": 8, "k_layers": 8},
    "paper-small": {"l": 100, "n": 200, "m": 30, "k_layers": 12},
    "paper-large": {"l": 90, "n": 300, "m": 100, "k_layers": 12},
}

_FIELDS = {f.name for f in fields(ExperimentConfig)}


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    unknown = set(overrides) - _FIELDS
    if unknown:
        raise KeyError(f"unknown config keys: {sorted(unknown)}")
    return replace(cfg, **overrides)


def parse_assignment(text: str) -> tuple[str, object]:
    """``key=value`` with ``value`` parsed as JSON when possible, else a string."""
    if "=" not in text:
        raise ValueError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().replace("-", "_"), value


def load_config(path=None, preset: str | None = None, overrides: dict | None = None):
    """Defaults, then the preset, then the JSON file, then explicit overrides."""
    cfg = ExperimentConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise KeyError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = apply_overrides(cfg, PRESETS[preset])
    if path is not None:
        cfg = apply_overrides(cfg, json.loads(Path(path).read_text()))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg
