"""Analytic weight matrices with small cross-correlation against the preamble.

``pgd_weight`` solves::

    minimize ||W^T S||_F^2  subject to  W[:, i]^T S[:, i] = 1  for every i

by projected gradient descent; it supplies the fixed matrix of ALISTA-GS.
``minimax_weight`` solves the per-column linear program that minimizes the
largest off-diagonal ``|W[:, i]^T S[:, j]|`` directly, giving the smallest
certified generalized coherence.
"""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from . import container
from .operators import check_normalized, spectral_norm_sq

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8


@dataclass
class CoherenceWeight:
    w: np.ndarray
    objective: float
    constraint_violation: float
    mu_tilde_estimate: float
    n_iters: int = 0
    converged: bool = True
    method: str = "pgd"


def project_columns(w: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Project each column of ``w`` onto ``{v : v^T s_i = 1}`` (unit-norm ``s_i``)."""
    return w + (1.0 - np.sum(w * s, axis=0)) * s


def frobenius_objective(w: np.ndarray, s: np.ndarray) -> float:
    g = w.T @ s
    return float(np.sum(g * g))


def constraint_violation(w: np.ndarray, s: np.ndarray) -> float:
    return float(np.max(np.abs(np.sum(w * s, axis=0) - 1.0)))


def generalized_coherence(w: np.ndarray, s: np.ndarray, warn: bool = True) -> float:
    """``max_{i != j} |W[:, i]^T S[:, j]|`` for a feasible ``w``."""
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    if w.shape != s.shape:
        raise ValueError(f"w{w.shape} and s{s.shape} must have the same shape")
    viol = constraint_violation(w, s)
    if viol > FEASIBILITY_TOL:
        raise ValueError(f"w violates the unit-diagonal constraint by {viol:.3e}")
    cross = np.abs(w.T @ s)
    np.fill_diagonal(cross, 0.0)
    mu = float(cross.max()) if cross.size else 0.0
    if warn and mu >= 1.0:
        warnings.warn(
            f"generalized coherence {mu:.4f} >= 1 (coincident columns?)", stacklevel=2
        )
    return mu


def pgd_weight(
    s: np.ndarray,
    max_iters: int = 5000,
    step="auto",
    tol: float = 1e-10,
) -> CoherenceWeight:
    """Projected gradient descent on the Frobenius cross-correlation.

    Starts from ``W = S`` (feasible for unit-norm columns) and alternates a
    gradient step on ``||W^T S||_F^2`` with the per-column affine projection.
    Stops when the relative objective change drops below ``tol``.
    """
    s = np.asarray(s, dtype=float)
    check_normalized(s)
    if step == "auto" or step is None:
        step = 1.0 / (2.0 * spectral_norm_sq(s))
    elif step <= 0:
        raise ValueError("step must be positive")
    gram = s @ s.T
    w = project_columns(s.copy(), s)
    obj = frobenius_objective(w, s)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        w = project_columns(w - step * 2.0 * (gram @ w), s)
        new = frobenius_objective(w, s)
        if abs(obj - new) <= tol * max(new, 1e-300):
            obj = new
            converged = True
            break
        obj = new
    if not converged:
        log.warning("pgd_weight stopped after %d iterations without meeting tol=%g", it, tol)
    return CoherenceWeight(
        w=w,
        objective=obj,
        constraint_violation=constraint_violation(w, s),
        mu_tilde_estimate=generalized_coherence(w, s, warn=False),
        n_iters=it,
        converged=converged,
        method="pgd",
    )


def minimax_weight(s: np.ndarray) -> CoherenceWeight:
    """Column-wise LP for the smallest achievable cross-correlation.

    Column ``i`` solves ``min t`` s.t. ``|w^T s_j| <= t`` for ``j != i`` and
    ``w^T s_i = 1``; the largest optimal ``t`` over columns is the
    generalized coherence of ``s``.
    """
    s = np.asarray(s, dtype=float)
    check_normalized(s)
    m, n = s.shape
    w = np.empty_like(s)
    cost = np.r_[np.zeros(m), 1.0]
    bounds = [(None, None)] * m + [(0.0, None)]
    for i in range(n):
        others = np.delete(s, i, axis=1).T
        ones = np.ones((n - 1, 1))
        a_ub = np.vstack([np.hstack([others, -ones]), np.hstack([-others, -ones])])
        res = linprog(
            cost,
            A_ub=a_ub,
            b_ub=np.zeros(2 * (n - 1)),
            A_eq=np.r_[s[:, i], 0.0][None, :],
            b_eq=[1.0],
            bounds=bounds,
            method="highs",
        )
        if res.status != 0:
            raise RuntimeError(f"LP for column {i} failed: {res.message}")
        w[:, i] = res.x[:m]
    w = project_columns(w, s)
    return CoherenceWeight(
        w=w,
        objective=frobenius_objective(w, s),
        constraint_violation=constraint_violation(w, s),
        mu_tilde_estimate=generalized_coherence(w, s, warn=False),
        method="minimax",
    )


# ---------------------------------------------------------------- persistence


def matrix_key(s: np.ndarray) -> str:
    data = np.ascontiguousarray(s, dtype="<f8")
    h = hashlib.sha256(str(data.shape).encode() + data.tobytes())
    return h.hexdigest()[:16]


def save_weight(cw: CoherenceWeight, s: np.ndarray, root) -> Path:
    path = Path(root) / f"weight-{cw.method}-{matrix_key(s)}"
    meta = {
        "kind": "coherence_weight",
        "method": cw.method,
        "s_key": matrix_key(s),
        "objective": cw.objective,
        "constraint_violation": cw.constraint_violation,
        "mu_tilde_estimate": cw.mu_tilde_estimate,
        "n_iters": cw.n_iters,
        "converged": cw.converged,
    }
    return container.write_container(path, {"w": cw.w}, meta)


def load_weight(path) -> CoherenceWeight:
    arrays, meta = container.read_container(path)
    if meta.get("kind") != "coherence_weight":
        raise container.ContainerError(f"{path} is not a weight container")
    return CoherenceWeight(
        w=arrays["w"],
        objective=meta["objective"],
        constraint_violation=meta["constraint_violation"],
        mu_tilde_estimate=meta["mu_tilde_estimate"],
        n_iters=meta["n_iters"],
        converged=meta["converged"],
        method=meta["method"],
    )


_CACHE: dict[tuple[str, str], CoherenceWeight] = {}


def cached_weight(s: np.ndarray, method: str = "pgd", root=None) -> CoherenceWeight:
    """Weight for ``s``, memoized in-process and optionally under ``root`` on disk."""
    key = (method, matrix_key(s))
    if key in _CACHE:
        return _CACHE[key]
    path = None if root is None else Path(root) / f"weight-{method}-{key[1]}"
    if path is not None and (path / container.MANIFEST).exists():
        cw = load_weight(path)
    else:
        cw = pgd_weight(s) if method == "pgd" else minimax_weight(s)
        if path is not None:
            save_weight(cw, s, root)
    _CACHE[key] = cw
    return cw
