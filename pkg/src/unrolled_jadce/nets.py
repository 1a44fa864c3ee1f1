"""Unrolled group-sparse networks: LISTA-GS, LISTA-GSCP and ALISTA-GS.

Layer maps (``eta`` is row-wise shrinkage, S is the lifted preamble)::

    lista_gs    X+ = eta_th(W1 Y + W2 X)
    lista_gscp  X+ = eta_th(X + W^T (Y - S X))
    alista_gs   X+ = eta_th(X + gamma W^T (Y - S X)),  W fixed

Gradients are derived by hand for exactly these maps; there is no autodiff
engine. Batches of shape ``(P, rows, M)`` are transposed internally to
``(rows, P, M)`` so every weight product is one matrix multiply while the
shrinkage still groups the ``M`` entries of each row.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import container
from .coherence_weights import cached_weight
from .metrics import nmse
from .operators import msto_vjp, shrink, spectral_norm_sq
from .solvers import IterateTrace

log = logging.getLogger(__name__)

ARCHS = ("lista_gs", "lista_gscp", "alista_gs")
THETA_INIT = 0.1
GAMMA_INIT = 1.0

_SHAPES = {
    "lista_gs": ("w1", "w2", "theta"),
    "lista_gscp": ("w", "theta"),
    "alista_gs": ("theta", "gamma"),
}


def _check_arch(arch: str) -> None:
    if arch not in ARCHS:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")


@dataclass
class NetParams:
    """Per-layer trainables; scalars are stored as 0-d float arrays."""

    arch: str
    layers: list[dict[str, np.ndarray]]
    w_fixed: np.ndarray | None = None
    version: int = 0

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def thetas(self) -> np.ndarray:
        return np.array([float(layer["theta"]) for layer in self.layers])

    def gammas(self) -> np.ndarray:
        return np.array([float(layer["gamma"]) for layer in self.layers])

    def count_scalars(self) -> int:
        return sum(int(np.size(v)) for layer in self.layers for v in layer.values())

    def copy(self) -> NetParams:
        return NetParams(
            self.arch,
            [{k: np.array(v, copy=True) for k, v in layer.items()} for layer in self.layers],
            None if self.w_fixed is None else self.w_fixed.copy(),
            self.version,
        )

    def set_thresholds(self, theta) -> None:
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (self.n_layers,))
        if np.any(theta < 0):
            raise ValueError("thresholds must be nonnegative")
        for layer, th in zip(self.layers, theta):
            layer["theta"] = np.array(th)
        self.version += 1


def param_count(arch: str, n_lifted: int, l_lifted: int, k_layers: int) -> int:
    """Trainable scalar count for a ``k_layers`` network on lifted dims."""
    _check_arch(arch)
    if n_lifted <= 0 or l_lifted <= 0 or k_layers < 0:
        raise ValueError("dimensions must be positive")
    if arch == "lista_gs":
        return k_layers * (n_lifted**2 + l_lifted * n_lifted + 1)
    if arch == "lista_gscp":
        return k_layers * (l_lifted * n_lifted + 1)
    return 2 * k_layers


def init_params(
    arch: str,
    s_tilde: np.ndarray,
    k_layers: int,
    theta0: float = THETA_INIT,
    gamma0: float = GAMMA_INIT,
    w_fixed: np.ndarray | None = None,
) -> NetParams:
    """Standard initialization with ``C = ||S||_2^2``.

    ``W1 = S^T / C``, ``W2 = I - S^T S / C``, ``W = S / C``, ``theta = theta0``
    and ``gamma = gamma0``.

    ALISTA-GS uses ``w_fixed`` when given, otherwise the cached PGD weight
    for ``s_tilde``.
    """
    _check_arch(arch)
    if k_layers < 1:
        raise ValueError("k_layers must be >= 1")
    s = np.asarray(s_tilde, dtype=float)
    c = spectral_norm_sq(s)
    layers = []
    for _ in range(k_layers):
        if arch == "lista_gs":
            layer = {"w1": s.T / c, "w2": np.eye(s.shape[1]) - (s.T @ s) / c}
        elif arch == "lista_gscp":
            layer = {"w": s / c}
        else:
            layer = {"gamma": np.array(float(gamma0))}
        layer["theta"] = np.array(float(theta0))
        layers.append({k: np.array(v, dtype=float) for k, v in layer.items()})
    fixed = None
    if arch == "alista_gs":
        fixed = np.array(cached_weight(s).w if w_fixed is None else w_fixed, dtype=float)
        if fixed.shape != s.shape:
            raise ValueError(f"fixed weight has shape {fixed.shape}, expected {s.shape}")
    return NetParams(arch, layers, fixed)


# ---------------------------------------------------------------- layout helpers


def _to_internal(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        return np.ascontiguousarray(a[:, None, :])
    if a.ndim == 3:
        return np.ascontiguousarray(a.transpose(1, 0, 2))
    raise ValueError(f"expected a 2-D matrix or a (P, rows, M) batch, got ndim={a.ndim}")


def _to_external(a: np.ndarray, batched: bool) -> np.ndarray:
    return a.transpose(1, 0, 2) if batched else a[:, 0, :]


def _mm(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    r, p, m = x.shape
    return (w @ x.reshape(r, p * m)).reshape(w.shape[0], p, m)


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum_{p,m} a[i,p,m] b[j,p,m]``."""
    return a.reshape(a.shape[0], -1) @ b.reshape(b.shape[0], -1).T


def _layer_input(params: NetParams, k: int, s, y, x) -> np.ndarray:
    layer = params.layers[k]
    if params.arch == "lista_gs":
        return _mm(layer["w1"], y) + _mm(layer["w2"], x)
    resid = y - _mm(s, x)
    if params.arch == "lista_gscp":
        return x + _mm(layer["w"].T, resid)
    return x + float(layer["gamma"]) * _mm(params.w_fixed.T, resid)


# ---------------------------------------------------------------- forward / backward


def _forward_internal(params, s, y, x, start, stop):
    iterates = [x]
    pre = []
    for k in range(start, stop):
        u = _layer_input(params, k, s, y, x)
        x = shrink(u, float(params.layers[k]["theta"]))
        pre.append(u)
        iterates.append(x)
    return iterates, pre


def forward(
    params: NetParams,
    s_tilde,
    y_tilde,
    x0=None,
    upto_layer: int | None = None,
    start_layer: int = 0,
) -> IterateTrace:
    """Run layers ``start_layer .. upto_layer - 1`` and keep the full trace.

    ``y_tilde`` may be a single ``2L x M`` matrix or a ``(P, 2L, M)`` batch;
    the returned iterates have the same layout.
    """
    k_total = params.n_layers
    upto = k_total if upto_layer is None else upto_layer
    if not 0 <= start_layer <= upto <= k_total:
        raise IndexError(f"layer range [{start_layer}, {upto}) outside 0..{k_total}")
    s = np.asarray(s_tilde, dtype=float)
    y_ext = np.asarray(y_tilde, dtype=float)
    batched = y_ext.ndim == 3
    y = _to_internal(y_ext)
    if x0 is None:
        x = np.zeros((s.shape[1], y.shape[1], y.shape[2]))
    else:
        x = _to_internal(x0)
    iterates, pre = _forward_internal(params, s, y, x, start_layer, upto)
    return IterateTrace(
        iterates=[_to_external(it, batched) for it in iterates],
        pre_shrink=pre,
        arch=params.arch,
        params_version=params.version,
        start_layer=start_layer,
    )


def backward(
    params: NetParams,
    trace: IterateTrace,
    s_tilde,
    y_tilde,
    x_truth,
    layers=None,
) -> list[dict[str, np.ndarray]]:
    """Gradient of ``mean_p ||X^K_p - X_p||_F^2`` w.r.t. the trainables.

    ``layers`` restricts which layers receive gradients (default: every layer
    in the trace). Returns one dict per network layer; layers outside the
    request get empty dicts.
    """
    if trace.arch != params.arch or trace.params_version != params.version:
        raise ValueError("trace is stale: parameters changed since the forward pass")
    start = trace.start_layer
    stop = start + len(trace.pre_shrink)
    if len(trace.iterates) != len(trace.pre_shrink) + 1 or stop > params.n_layers:
        raise ValueError("trace is truncated or does not match the network depth")
    wanted = set(range(start, stop)) if layers is None else set(layers)
    if not wanted <= set(range(start, stop)):
        raise ValueError(f"requested layers {sorted(wanted)} not covered by the trace")
    grads: list[dict[str, np.ndarray]] = [{} for _ in range(params.n_layers)]
    if not wanted:
        return grads

    s = np.asarray(s_tilde, dtype=float)
    y = _to_internal(y_tilde)
    truth = _to_internal(x_truth)
    p = y.shape[1]
    final = _to_internal(trace.iterates[-1])
    g = (2.0 / p) * (final - truth)
    lowest = min(wanted)
    for k in range(stop - 1, lowest - 1, -1):
        layer = params.layers[k]
        u = trace.pre_shrink[k - start]
        x_prev = _to_internal(trace.iterates[k - start])
        gu, gtheta = msto_vjp(u, float(layer["theta"]), g)
        if k in wanted:
            gk = {"theta": np.array(gtheta)}
            if params.arch == "lista_gs":
                gk["w1"] = _outer(gu, y)
                gk["w2"] = _outer(gu, x_prev)
            elif params.arch == "lista_gscp":
                gk["w"] = _outer(y - _mm(s, x_prev), gu)
            else:
                resid = y - _mm(s, x_prev)
                gk["gamma"] = np.array(float(np.sum(gu * _mm(params.w_fixed.T, resid))))
            grads[k] = gk
        if k == lowest:
            break
        if params.arch == "lista_gs":
            g = _mm(layer["w2"].T, gu)
        elif params.arch == "lista_gscp":
            g = gu - _mm(s.T, _mm(layer["w"], gu))
        else:
            g = gu - float(layer["gamma"]) * _mm(s.T, _mm(params.w_fixed, gu))
    return grads


def loss(params: NetParams, s_tilde, y_tilde, x_truth, upto_layer=None) -> float:
    trace = forward(params, s_tilde, y_tilde, upto_layer=upto_layer)
    return trace_loss(trace, x_truth)


def trace_loss(trace: IterateTrace, x_truth) -> float:
    d = np.asarray(trace.final) - np.asarray(x_truth, dtype=float)
    p = d.shape[0] if d.ndim == 3 else 1
    return float(np.sum(d * d)) / p


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    state: AdamState, grads: list[dict], params: NetParams, lr: float
) -> tuple[AdamState, NetParams]:
    """One bias-corrected Adam update of every parameter present in ``grads``.

    Thresholds are clamped at zero afterwards. Updates happen in place; the
    same objects are returned for convenience.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for k, gk in enumerate(grads):
        for name, g in gk.items():
            key = (k, name)
            if key not in state.m:
                state.m[key] = np.zeros_like(g)
                state.v[key] = np.zeros_like(g)
            m = state.m[key] = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
            v = state.v[key] = state.beta2 * state.v[key] + (1.0 - state.beta2) * g * g
            step = lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
            params.layers[k][name] = params.layers[k][name] - step
        if "theta" in gk and params.layers[k]["theta"] < 0:
            params.layers[k]["theta"] = np.array(0.0)
    params.version += 1
    return state, params


# ---------------------------------------------------------------- training


class TrainingDiverged(RuntimeError):
    def __init__(self, message, log_rows, params):
        super().__init__(message)
        self.log_rows = log_rows
        self.params = params


@dataclass
class TrainSchedule:
    """Two-phase layer-wise schedule; phase B uses ``lr1_ratio * lr0``.

    ``batch_mode="stream"`` draws a fresh batch of P samples for every Adam
    step from the training distribution; ``"full"`` reuses the fixed P
    training samples as one full batch.
    """

    lr0: float = 5e-4
    lr1_ratio: float = 0.2
    steps_phase_a: int = 400
    steps_phase_b: int = 400
    batch_mode: str = "stream"
    seed: int = 0

    @property
    def lr1(self) -> float:
        return self.lr1_ratio * self.lr0


@dataclass
class TrainResult:
    params: NetParams
    log_rows: list[dict]
    schedule: TrainSchedule

    def stage_losses(self) -> list[dict]:
        return [r for r in self.log_rows if r["final"]]


def train_layerwise(
    arch: str,
    s_tilde,
    x_train,
    y_train,
    k_layers: int,
    schedule: TrainSchedule | None = None,
    x_val=None,
    y_val=None,
    params: NetParams | None = None,
    w_fixed=None,
    sampler=None,
) -> TrainResult:
    """Grow the network one layer at a time.

    For each depth k, phase A trains only layer k-1 at rate ``lr0`` with the
    earlier layers frozen, then phase B fine-tunes layers 0..k-1 at rate
    ``lr1``. Both minimize the mean squared error of the k-th iterate.

    ``sampler(rng) -> (x_batch, y_batch)`` supplies streaming batches and is
    required when ``schedule.batch_mode == "stream"``. The fixed training
    set is scored at the start and end of every phase (``train_loss``);
    validation data is only scored, never trained on.
    """
    schedule = schedule or TrainSchedule()
    if schedule.batch_mode not in ("stream", "full"):
        raise ValueError(f"unknown batch_mode {schedule.batch_mode!r}")
    if schedule.batch_mode == "stream" and sampler is None:
        raise ValueError("streaming batches need a sampler")
    s = np.asarray(s_tilde, dtype=float)
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    if x_train.ndim != 3 or x_train.shape[0] == 0:
        raise ValueError("training data must be a nonempty (P, 2N, M) batch")
    if params is None:
        params = init_params(arch, s, k_layers, w_fixed=w_fixed)
    elif params.n_layers != k_layers or params.arch != arch:
        raise ValueError("supplied params do not match arch/k_layers")
    if schedule.batch_mode == "full":
        # the training set never changes, so one closure serves every step
        sampler = lambda rng: (x_train, y_train)  # noqa: E731
    rng = np.random.default_rng(schedule.seed)
    ctx = _PhaseContext(params, s, x_train, y_train, x_val, y_val, sampler, rng, [])
    stage = 0
    for k in range(1, k_layers + 1):
        ctx.run(k, "A", stage, [k - 1], schedule.lr0, schedule.steps_phase_a)
        ctx.run(k, "B", stage + 1, list(range(k)), schedule.lr1, schedule.steps_phase_b)
        stage += 2
    return TrainResult(params, ctx.rows, schedule)


@dataclass
class _PhaseContext:
    params: NetParams
    s: np.ndarray
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray | None
    y_val: np.ndarray | None
    sampler: object
    rng: np.random.Generator
    rows: list

    def _train_loss(self, depth: int) -> float:
        return trace_loss(forward(self.params, self.s, self.y_train, upto_layer=depth),
                          self.x_train)

    def _row(self, depth, phase, stage, step, value, final=False, train=None, val=None):
        self.rows.append({"stage": stage, "layer": depth, "phase": phase, "step": step,
                          "loss": value, "train_loss": train, "val_nmse": val,
                          "final": final})

    def run(self, depth, phase, stage, train_layers, lr, n_steps):
        params, s = self.params, self.s
        frozen_prefix = phase == "A" and depth > 1
        state = AdamState()
        self._row(depth, phase, stage, -1, None, train=self._train_loss(depth))
        for step in range(n_steps):
            xb, yb = self.sampler(self.rng)
            if frozen_prefix:
                x_in = forward(params, s, yb, upto_layer=depth - 1).final
                tr = forward(params, s, yb, x0=x_in, start_layer=depth - 1, upto_layer=depth)
            else:
                tr = forward(params, s, yb, upto_layer=depth)
            value = trace_loss(tr, xb)
            self._row(depth, phase, stage, step, value)
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at stage {stage} step {step}", self.rows, params
                )
            adam_step(state, backward(params, tr, s, yb, xb, layers=train_layers), params, lr)
        train = self._train_loss(depth)
        val = None
        if self.x_val is not None and len(self.x_val):
            val = nmse(forward(params, s, self.y_val, upto_layer=depth).final, self.x_val)
        self._row(depth, phase, stage, n_steps, train, final=True, train=train, val=val)
        log.info("stage %d (layer %d, phase %s): train loss %.6g, val NMSE %s dB",
                 stage, depth, phase, train, val)
        if not math.isfinite(train):
            raise TrainingDiverged(f"non-finite loss at end of stage {stage}", self.rows,
                                   params)


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(result_or_params, path, extra: dict | None = None) -> Path:
    if isinstance(result_or_params, TrainResult):
        params = result_or_params.params
        schedule = asdict(result_or_params.schedule)
        stages = result_or_params.stage_losses()
    else:
        params, schedule, stages = result_or_params, None, []
    arrays = {}
    for k, layer in enumerate(params.layers):
        for name, val in layer.items():
            arrays[f"layer{k:03d}_{name}"] = val
    if params.w_fixed is not None:
        arrays["w_fixed"] = params.w_fixed
    if params.arch == "lista_gs":
        n2, l2 = params.layers[0]["w1"].shape
    elif params.arch == "lista_gscp":
        l2, n2 = params.layers[0]["w"].shape
    else:
        l2, n2 = params.w_fixed.shape
    meta = {
        "kind": "checkpoint",
        "arch": params.arch,
        "k_layers": params.n_layers,
        "n_lifted": int(n2),
        "l_lifted": int(l2),
        "schedule": schedule,
        "stage_losses": [
            {k: r[k] for k in ("stage", "layer", "phase", "train_loss", "val_nmse")}
            for r in stages
        ],
        **(extra or {}),
    }
    return container.write_container(path, arrays, meta)


def load_checkpoint(path) -> tuple[NetParams, dict]:
    arrays, meta = container.read_container(path)
    if meta.get("kind") != "checkpoint":
        raise container.ContainerError(f"{path} is not a checkpoint")
    arch = meta["arch"]
    layers = []
    for k in range(meta["k_layers"]):
        layers.append({name: arrays[f"layer{k:03d}_{name}"] for name in _SHAPES[arch]})
    return NetParams(arch, layers, arrays.get("w_fixed")), meta
