"""Experiment pipelines shared by the CLI, the scripts and the acceptance tests."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import nets, theory
from .coherence_weights import cached_weight
from .config import ExperimentConfig
from .metrics import detect_activity, nmse
from .operators import spectral_norm_sq
from .signal_model import Dataset, dataset_sampler, sample_batch, synth_dataset
from .solvers import IterateTrace, ista_gs, nesterov_gs

log = logging.getLogger(__name__)

LONG_COLUMNS = [
    "method",
    "layer_or_iter",
    "nmse_db",
    "snr_db",
    "seed",
    "n_devices",
    "detection_error_prob",
    "miss_count",
    "false_alarm_count",
]
LOG_COLUMNS = ["stage", "layer", "phase", "step", "loss", "train_loss", "val_nmse", "final"]


class DimensionMismatch(ValueError):
    pass


# ---------------------------------------------------------------- methods


@dataclass
class Method:
    """A named recovery method: ``run(s_tilde, y_tilde) -> IterateTrace``."""

    name: str
    run: Callable[[np.ndarray, np.ndarray], IterateTrace]
    n_lifted: int | None = None
    l_lifted: int | None = None

    def fits(self, s_tilde: np.ndarray) -> bool:
        return self.n_lifted is None or (self.l_lifted, self.n_lifted) == s_tilde.shape


def init_with_lambda(arch: str, s_tilde, k_layers: int, lam: float, weight_method="pgd"):
    """Standard initialization with every threshold set to ``lam / C``."""
    w = cached_weight(s_tilde, weight_method).w if arch == "alista_gs" else None
    params = nets.init_params(arch, s_tilde, k_layers, w_fixed=w)
    params.set_thresholds(lam / spectral_norm_sq(s_tilde))
    return params


def resolve_method(spec: str, cfg: ExperimentConfig) -> Method:
    """``ista_gs``, ``nesterov_gs``, ``init:<arch>`` or a checkpoint directory."""
    if spec == "ista_gs":
        return Method(spec, lambda s, y: ista_gs(y, s, cfg.lam, cfg.iters))
    if spec == "nesterov_gs":
        return Method(spec, lambda s, y: nesterov_gs(y, s, cfg.lam, cfg.iters))
    if spec.startswith("init:"):
        arch = spec.split(":", 1)[1]

        def run_init(s, y):
            return nets.forward(init_with_lambda(arch, s, cfg.k_layers, cfg.lam,
                                                 cfg.weight_method), s, y)

        return Method(spec, run_init)
    path = Path(spec)
    params, meta = nets.load_checkpoint(path)
    return Method(
        meta.get("name", params.arch),
        lambda s, y: nets.forward(params, s, y),
        n_lifted=meta["n_lifted"],
        l_lifted=meta["l_lifted"],
    )


# ---------------------------------------------------------------- evaluation


def evaluate_method(method: Method, s_tilde, x_tilde, y_tilde, n_complex, snr_db, seed,
                    tau_rule=None) -> list[dict]:
    """One long-format row per iterate (``k = 0`` is the zero start)."""
    if not method.fits(s_tilde):
        raise DimensionMismatch(
            f"{method.name} expects a {method.l_lifted}x{method.n_lifted} system, "
            f"got {s_tilde.shape[0]}x{s_tilde.shape[1]}"
        )
    trace = method.run(s_tilde, y_tilde)
    truth_act = np.sum(x_tilde * x_tilde, axis=-1)
    truth_act = (truth_act[..., :n_complex] + truth_act[..., n_complex:]) > 0
    rows = []
    for k, it in enumerate(trace.iterates):
        det = detect_activity(it, n_complex, tau_rule).astype(bool)
        miss = int(np.count_nonzero(truth_act & ~det))
        fa = int(np.count_nonzero(~truth_act & det))
        rows.append({
            "method": method.name,
            "layer_or_iter": k,
            "nmse_db": nmse(it, x_tilde),
            "snr_db": snr_db,
            "seed": seed,
            "n_devices": n_complex,
            "detection_error_prob": (miss + fa) / truth_act.size,
            "miss_count": miss,
            "false_alarm_count": fa,
        })
    return rows


def evaluate_dataset(methods, ds: Dataset, cfg: ExperimentConfig, snr_values=None):
    """Long rows on the test split, optionally re-drawn at each SNR in ``snr_values``.

    Re-drawn test sets reuse the instance seeds, so signals are identical
    across SNR points and only the noise level changes.
    """
    s = ds.s_tilde
    n = ds.config.n
    points = [(ds.config.snr_db, ds.test)]
    if snr_values:
        points = [
            (float(snr), sample_batch(ds.preamble, ds.config.m, ds.config.activity_prob,
                                      float(snr), ds.test.seeds))
            for snr in snr_values
        ]
    rows = []
    for snr, batch in points:
        for m in methods:
            rows += evaluate_method(m, s, batch.x_tilde, batch.y_tilde, n, snr, cfg.seed)
    return rows


def evaluate_device_sweep(methods, cfg: ExperimentConfig, n_values):
    """Rebuild the dataset for each device count; skip methods whose dims differ."""
    rows = []
    for n in n_values:
        ds = synth_dataset(cfg.dataset_config(n=int(n)))
        for m in methods:
            if not m.fits(ds.s_tilde):
                log.warning("skipping %s at N=%d: trained for a different size", m.name, n)
                continue
            rows += evaluate_method(m, ds.s_tilde, ds.test.x_tilde, ds.test.y_tilde, int(n),
                                    ds.config.snr_db, cfg.seed)
    return rows


def wide_table(rows: list[dict]) -> tuple[list[str], list[list]]:
    """Pivot long rows: ``snr_db, seed`` then one NMSE column per (method, k >= 1)."""
    methods = list(dict.fromkeys(r["method"] for r in rows))
    depth = {m: max(r["layer_or_iter"] for r in rows if r["method"] == m) for m in methods}
    header = ["snr_db", "seed"] + [f"{m}@{k}" for m in methods for k in range(1, depth[m] + 1)]
    keyed: dict[tuple, dict] = {}
    for r in rows:
        if r["layer_or_iter"] == 0:
            continue
        point = (r["snr_db"], r["seed"], r["n_devices"])
        keyed.setdefault(point, {})[f"{r['method']}@{r['layer_or_iter']}"] = r["nmse_db"]
    table = [[p[0], p[1]] + [vals.get(col, "") for col in header[2:]]
             for p, vals in keyed.items()]
    return header, table


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if rows and isinstance(rows[0], dict):
            w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    return path


# ---------------------------------------------------------------- training


def train_arch(cfg: ExperimentConfig, ds: Dataset, arch: str) -> nets.TrainResult:
    s = ds.s_tilde
    w = cached_weight(s, cfg.weight_method).w if arch == "alista_gs" else None
    return nets.train_layerwise(
        arch,
        s,
        ds.train.x_tilde,
        ds.train.y_tilde,
        cfg.k_layers,
        cfg.schedule(),
        x_val=ds.test.x_tilde,
        y_val=ds.test.y_tilde,
        w_fixed=w,
        sampler=dataset_sampler(ds) if cfg.batch_mode == "stream" else None,
    )


# ---------------------------------------------------------------- theory


def coupling_report(params: nets.NetParams, s_tilde) -> theory.TheoryReport:
    res, th = theory.coupling_diagnostics(params, s_tilde)
    return theory.TheoryReport(coupling_residuals=res.tolist(), thresholds=th.tolist(),
                               arch=params.arch)


def oracle_report(arch: str, s_tilde, m: int, k_layers: int, sparsity: int = 2,
                  beta: float = 1.0, sigma: float = 0.0, batch: int = 64, seed: int = 0,
                  weight_method: str = "minimax") -> theory.TheoryReport:
    """Good-parameter network on an in-class batch, checked against its bound."""
    rng = np.random.default_rng(seed)
    x, z, _ = theory.sample_in_class(s_tilde, m, sparsity, beta, sigma, batch, rng)
    w = cached_weight(s_tilde, weight_method).w
    return theory.validate_bound(arch, x, z, s_tilde, w, sparsity, beta, k_layers)

