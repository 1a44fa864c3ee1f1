"""Row-group operators used by every solver and network in the package.

All functions accept a leading batch axis: a real array of shape
``(..., rows, M)`` is treated as a stack of ``rows x M`` matrices whose
groups are the rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import PreambleMatrix, normalize_columns

COLUMN_NORM_TOL = 1e-9


@dataclass
class ShrinkageResult:
    value: np.ndarray

    @property
    def active_rows(self) -> set[int]:
        """Row indices with nonzero output (last-matrix convention for 2-D input)."""
        if self.value.ndim != 2:
            raise ValueError("active_rows is defined for a single 2-D matrix")
        return set(np.flatnonzero(np.any(self.value != 0.0, axis=-1)).tolist())


def _shrink_factor(r: np.ndarray, theta: float) -> np.ndarray:
    # r <= theta (including r == 0) maps to a zero row
    safe = np.where(r > 0.0, r, 1.0)
    return np.where(r > theta, 1.0 - theta / safe, 0.0)


def shrink(x: np.ndarray, theta: float) -> np.ndarray:
    """Array-valued MSTO; see :func:`msto`."""
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    return _shrink_factor(r, theta) * x


def msto(x: np.ndarray, theta: float) -> ShrinkageResult:
    """Multidimensional shrinkage-thresholding of every row of ``x``.

    Row ``u`` with norm ``r`` becomes ``(1 - theta / r) * u`` when ``r > theta``
    and the zero row otherwise. This is the proximal operator of
    ``theta * sum_rows ||row||_2``.
    """
    return ShrinkageResult(shrink(np.asarray(x, dtype=float), theta))


def msto_vjp(
    x: np.ndarray, theta: float, upstream: np.ndarray
) -> tuple[np.ndarray, float]:
    """Vector-Jacobian product of :func:`shrink` w.r.t. its input and threshold.

    Returns ``(grad_x, grad_theta)`` where ``grad_theta`` is summed over all
    rows (and batch entries). Rows on or below the threshold contribute zero.
    """
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if x.shape != upstream.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {upstream.shape}")
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    live = r > theta
    safe = np.where(live, r, 1.0)
    ug = np.sum(x * upstream, axis=-1, keepdims=True)
    scale = np.where(live, 1.0 - theta / safe, 0.0)
    radial = np.where(live, theta * ug / safe**3, 0.0)
    grad_x = scale * upstream + radial * x
    grad_theta = -float(np.sum(np.where(live, ug / safe, 0.0)))
    return grad_x, grad_theta


def group_norms(x: np.ndarray) -> np.ndarray:
    """Euclidean norm of every row."""
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def mixed_norm_21(x: np.ndarray) -> np.ndarray | float:
    """Sum of row norms (per matrix when batched)."""
    out = group_norms(x).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def mixed_norm_20(x: np.ndarray, tol: float = 0.0) -> np.ndarray | int:
    """Number of rows with norm above ``tol`` (per matrix when batched)."""
    out = np.count_nonzero(group_norms(x) > tol, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def lasso_objective(y, s, x, lam: float) -> float:
    """``0.5 * ||y - s x||_F^2 + lam * ||x||_{2,1}`` for a single instance."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    y, s, x = (np.asarray(a, dtype=float) for a in (y, s, x))
    if s.shape[1] != x.shape[0] or s.shape[0] != y.shape[0] or x.shape[1] != y.shape[1]:
        raise ValueError(f"incompatible shapes y{y.shape} s{s.shape} x{x.shape}")
    resid = y - s @ x
    return 0.5 * float(np.sum(resid * resid)) + lam * float(group_norms(x).sum())


def spectral_norm_sq(s: np.ndarray) -> float:
    """Largest squared singular value, the Lipschitz constant of the data term."""
    return float(np.linalg.norm(s, 2) ** 2)


def check_normalized(s: np.ndarray, tol: float = COLUMN_NORM_TOL) -> None:
    norms = np.linalg.norm(s, axis=0)
    bad = np.abs(norms - 1.0) > tol
    if np.any(bad):
        raise ValueError(
            f"{int(bad.sum())} column(s) not unit-norm (worst deviation "
            f"{np.max(np.abs(norms - 1.0)):.3e})"
        )


def mutual_coherence(s: np.ndarray) -> float:
    """Largest absolute inner product between two distinct columns."""
    s = np.asarray(s)
    check_normalized(s)
    gram = np.abs(s.conj().T @ s)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max()) if gram.size else 0.0


def set_condition_number(a: np.ndarray, kappa: float) -> PreambleMatrix:
    """Replace the singular values of ``a`` by a log-spaced ladder.

    The new spectrum runs from ``sigma_max`` down to ``sigma_max / kappa``;
    the rebuilt matrix is then column-normalized. The matrix before
    normalization is kept on ``pre_normalization``.
    """
    if kappa < 1:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    a = np.asarray(a, dtype=complex)
    l, n = a.shape
    if l > n:
        raise ValueError("expected a wide matrix (L <= N)")
    u, sv, vh = np.linalg.svd(a, full_matrices=False)
    if sv[-1] <= sv[0] * l * np.finfo(float).eps:
        raise ValueError("input matrix is rank deficient")
    ladder = np.geomspace(sv[0], sv[0] / kappa, num=len(sv))
    raw = (u * ladder) @ vh
    return PreambleMatrix(
        normalize_columns(raw), kind="custom", pre_normalization=raw, allow_underloaded=True
    )
