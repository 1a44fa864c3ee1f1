"""Proximal-gradient baselines for the group LASSO on the lifted system."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import nmse
from .operators import group_norms, shrink, spectral_norm_sq

DEFAULT_LAMBDA = 0.1


@dataclass
class IterateTrace:
    """Iterates ``X^0 .. X^K`` of a solver or network forward pass.

    ``pre_shrink[k]`` holds the input of the shrinkage that produced
    ``iterates[k + 1]``; networks keep it for the backward pass.
    """

    iterates: list[np.ndarray]
    objectives: list | None = None
    per_iter_nmse: list[float] | None = None
    pre_shrink: list[np.ndarray] = field(default_factory=list)
    arch: str | None = None
    params_version: int | None = None
    start_layer: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def batch_objective(y, s, x, lam: float):
    """Group-LASSO objective per matrix; scalar for 2-D input."""
    resid = y - s @ x
    val = 0.5 * np.sum(resid * resid, axis=(-2, -1)) + lam * group_norms(x).sum(axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def _check(y, s, lam, k_iters, step, x0):
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if k_iters < 0:
        raise ValueError("k_iters must be >= 0")
    if s.shape[0] != y.shape[-2]:
        raise ValueError(f"s{s.shape} incompatible with y{y.shape}")
    if step == "auto" or step is None:
        step = 1.0 / spectral_norm_sq(s)
    elif step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    shape = (*y.shape[:-2], s.shape[1], y.shape[-1])
    x0 = np.zeros(shape) if x0 is None else np.array(x0, dtype=float)
    if x0.shape != shape:
        raise ValueError(f"x0 has shape {x0.shape}, expected {shape}")
    return y, s, float(step), x0


def _finish(trace: IterateTrace, x_truth):
    if x_truth is not None:
        trace.per_iter_nmse = [nmse(x, x_truth) for x in trace.iterates]
    return trace


def ista_gs(
    y,
    s,
    lam: float = DEFAULT_LAMBDA,
    k_iters: int = 100,
    step="auto",
    x0=None,
    x_truth=None,
) -> IterateTrace:
    """ISTA for the row-group LASSO.

    ``X^{k+1} = shrink(X^k + step * S^T (Y - S X^k), lam * step)``. With
    ``step="auto"`` the step is ``1 / ||S||_2^2``. Leading batch axes on
    ``y`` are carried through.
    """
    y, s, step, x = _check(y, s, lam, k_iters, step, x0)
    theta = lam * step
    st = s.T
    iterates = [x]
    objectives = [batch_objective(y, s, x, lam)]
    for _ in range(k_iters):
        x = shrink(x + step * (st @ (y - s @ x)), theta)
        iterates.append(x)
        objectives.append(batch_objective(y, s, x, lam))
    return _finish(IterateTrace(iterates, objectives), x_truth)


def nesterov_gs(
    y,
    s,
    lam: float = DEFAULT_LAMBDA,
    k_iters: int = 100,
    step="auto",
    x0=None,
    x_truth=None,
) -> IterateTrace:
    """Accelerated proximal gradient (FISTA momentum) for the row-group LASSO."""
    y, s, step, x = _check(y, s, lam, k_iters, step, x0)
    theta = lam * step
    st = s.T
    z = x
    t = 1.0
    iterates = [x]
    objectives = [batch_objective(y, s, x, lam)]
    for _ in range(k_iters):
        x_new = shrink(z + step * (st @ (y - s @ z)), theta)
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        iterates.append(x)
        objectives.append(batch_objective(y, s, x, lam))
    return _finish(IterateTrace(iterates, objectives), x_truth)
