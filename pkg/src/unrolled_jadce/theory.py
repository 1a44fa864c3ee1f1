"""Numerical diagnostics for the weight-coupling, error-bound and support results.

The suprema over the signal class are replaced by maxima over a finite
in-class batch, and the generalized coherence by the value certified by a
concrete feasible weight matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coherence_weights import generalized_coherence
from .nets import NetParams, forward
from .operators import group_norms, mixed_norm_21


class SparsityConditionError(ValueError):
    """Raised when ``2 mu s - mu`` is outside (0, 1), so no linear rate is certified."""


# ---------------------------------------------------------------- batches


def sample_in_class(
    s_tilde: np.ndarray,
    m: int,
    s: int,
    beta: float,
    sigma: float,
    size: int,
    rng: np.random.Generator,
    paired: bool = True,
):
    """Draw ``size`` samples from X(beta, s, sigma) on the lifted system.

    Each sample has exactly ``s`` nonzero rows with norms in ``[beta/2, beta]``
    and noise of Frobenius norm ``sigma``. With ``paired`` the rows come in
    real/imaginary pairs ``(n, N + n)`` of the same device where possible.
    Returns ``(x, z, y)`` batches.
    """
    two_l, two_n = s_tilde.shape
    n = two_n // 2
    if not 1 <= s <= two_n:
        raise ValueError(f"need 1 <= s <= {two_n}")
    x = np.zeros((size, two_n, m))
    for b in range(size):
        if paired:
            devices = rng.choice(n, size=(s + 1) // 2, replace=False)
            pairs = devices[: s // 2]
            rows = np.concatenate([pairs, pairs + n, devices[s // 2 :][: s % 2]])
        else:
            rows = rng.choice(two_n, size=s, replace=False)
        vals = rng.standard_normal((len(rows), m))
        target = beta * rng.uniform(0.5, 1.0, size=len(rows))
        x[b, rows] = vals * (target / np.linalg.norm(vals, axis=1))[:, None]
    z = rng.standard_normal((size, two_l, m))
    if sigma > 0:
        z *= sigma / np.linalg.norm(z, axis=(1, 2))[:, None, None]
    else:
        z[:] = 0.0
    return x, z, s_tilde @ x + z


# ---------------------------------------------------------------- coupling


def coupling_diagnostics(params: NetParams, s_tilde) -> tuple[np.ndarray, np.ndarray]:
    """Per-layer ``||W2 - (I - W1 S)||_F`` and thresholds of a LISTA-GS net."""
    if params.arch != "lista_gs":
        raise ValueError(f"coupling diagnostics need a lista_gs network, got {params.arch}")
    s = np.asarray(s_tilde, dtype=float)
    eye = np.eye(s.shape[1])
    res = np.array(
        [np.linalg.norm(layer["w2"] - (eye - layer["w1"] @ s)) for layer in params.layers]
    )
    return res, params.thetas()


# ---------------------------------------------------------------- good parameters


@dataclass
class GoodParameters:
    params: NetParams
    thetas: np.ndarray
    mu_tilde: float
    sigma: float
    c_w: float


def _weight_stats(w_or_params, s):
    if isinstance(w_or_params, NetParams):
        p = w_or_params
        if p.arch == "lista_gscp":
            mats = [layer["w"] for layer in p.layers]
        elif p.arch == "alista_gs":
            mats = [p.w_fixed]
        else:
            raise ValueError("good parameters are defined for lista_gscp and alista_gs")
    else:
        mats = [np.asarray(w_or_params, dtype=float)]
    mu = max(generalized_coherence(w, s) for w in mats)
    c_w = max(mixed_norm_21(w) for w in mats)
    return mu, c_w


def good_thresholds(
    arch: str,
    x_batch,
    z_batch,
    s_tilde,
    w_or_params,
    k_layers: int | None = None,
    gamma=None,
    mu_tilde: float | None = None,
) -> GoodParameters:
    """Thresholds of the 'good' parameter schedules, layer by layer.

    ``lista_gscp``: ``theta_k = mu * max_b ||X^k - X||_{2,1} + sigma * C_W``;
    ``alista_gs``: ``theta_k = mu * gamma_k * max_b ||X^k - X||_{2,1}``.
    ``sigma`` is the largest noise Frobenius norm in the batch and ``C_W``
    the largest ``||W^k||_{2,1}``. Each threshold depends on the iterate it
    produces, so the forward pass is interleaved with the computation.
    """
    s = np.asarray(s_tilde, dtype=float)
    x_batch = np.asarray(x_batch, dtype=float)
    z_batch = np.asarray(z_batch, dtype=float)
    if x_batch.ndim != 3 or x_batch.shape[0] == 0:
        raise ValueError("need a nonempty (P, 2N, M) batch")
    if arch not in ("lista_gscp", "alista_gs"):
        raise ValueError(f"good parameters are defined for lista_gscp and alista_gs, not {arch}")
    y = s @ x_batch + z_batch
    if isinstance(w_or_params, NetParams):
        params = w_or_params.copy()
        k_layers = params.n_layers
    else:
        w = np.asarray(w_or_params, dtype=float)
        if k_layers is None:
            raise ValueError("k_layers is required when passing a weight matrix")
        if arch == "lista_gscp":
            layers = [{"w": w.copy(), "theta": np.array(0.0)} for _ in range(k_layers)]
            params = NetParams(arch, layers)
        else:
            gam = np.ones(k_layers) if gamma is None else np.broadcast_to(gamma, (k_layers,))
            layers = [{"theta": np.array(0.0), "gamma": np.array(float(g))} for g in gam]
            params = NetParams(arch, layers, w_fixed=w.copy())
    mu, c_w = _weight_stats(params, s)
    if mu_tilde is not None:
        mu = mu_tilde
    sigma = float(np.max(np.linalg.norm(z_batch, axis=(1, 2))))
    thetas = np.zeros(k_layers)
    x = np.zeros_like(x_batch)
    for k in range(k_layers):
        sup21 = float(np.max(mixed_norm_21(x - x_batch)))
        if arch == "lista_gscp":
            th = mu * sup21 + sigma * c_w
        else:
            th = mu * float(params.layers[k]["gamma"]) * sup21
        thetas[k] = th
        params.layers[k]["theta"] = np.array(th)
        params.version += 1
        x = forward(params, s, y, x0=x, start_layer=k, upto_layer=k + 1).final
    return GoodParameters(params, thetas, mu, sigma, c_w)


# ---------------------------------------------------------------- bounds


def _rate_factor(mu_tilde: float, s: int) -> float:
    if mu_tilde <= 0:
        raise ValueError("mu_tilde must be positive")
    if s < 1:
        raise ValueError("s must be >= 1")
    return 2.0 * mu_tilde * s - mu_tilde


def error_bound_curve(
    s: int, beta: float, mu_tilde: float, c_w: float, sigma: float, k_max: int
) -> np.ndarray:
    """``s beta exp(-c k) + C sigma`` for ``k = 0..k_max``.

    ``c = -log(2 mu s - mu)`` and ``C = (s + 1) C_W / (1 + mu - 2 mu s)``.
    """
    rho = _rate_factor(mu_tilde, s)
    if not 0.0 < rho < 1.0:
        raise SparsityConditionError(
            f"2*mu*s - mu = {rho:.4f} is not in (0, 1) for mu={mu_tilde:.4f}, s={s}"
        )
    c = -math.log(rho)
    big_c = (s + 1) * c_w / (1.0 + mu_tilde - 2.0 * mu_tilde * s)
    k = np.arange(k_max + 1)
    return s * beta * np.exp(-c * k) + big_c * sigma


def alista_rate_factors(gammas, mu_tilde: float, s: int) -> np.ndarray:
    """Per-layer factors ``-log(gamma (2 mu s - mu) + |1 - gamma|)``."""
    rho = _rate_factor(mu_tilde, s)
    g = np.asarray(gammas, dtype=float)
    return -np.log(g * rho + np.abs(1.0 - g))


def alista_bound_curve(gammas, s: int, beta: float, mu_tilde: float) -> np.ndarray:
    """``s beta exp(-sum_{t<k} c_t)`` for ``k = 0..K`` (noiseless)."""
    c = alista_rate_factors(gammas, mu_tilde, s)
    return s * beta * np.exp(-np.concatenate([[0.0], np.cumsum(c)]))


def no_false_positive_check(trace, true_support, tol: float = 1e-12) -> int:
    """Count rows outside the true support whose norm exceeds ``tol`` at some layer.

    ``true_support`` is a set of row indices for a single-sample trace, or a
    boolean ``(P, 2N)`` mask for a batched one. Each offending (sample, row)
    pair is counted once.
    """
    first = np.asarray(trace.iterates[0])
    n_rows = first.shape[-2]
    if isinstance(true_support, (set, frozenset, list, tuple)):
        mask = np.zeros(n_rows, dtype=bool)
        mask[list(true_support)] = True
    else:
        mask = np.asarray(true_support, dtype=bool)
    offending = np.zeros(first.shape[:-1], dtype=bool)
    for it in trace.iterates:
        offending |= (group_norms(it) > tol) & ~mask
    return int(np.count_nonzero(offending))


def log_linear_fit(errors) -> tuple[float, float]:
    """Least-squares slope and R^2 of ``log(error)`` against layer index."""
    e = np.asarray(errors, dtype=float)
    k = np.arange(len(e))
    keep = e > 0
    k, le = k[keep], np.log(e[keep])
    if len(k) < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(k, le, 1)
    fit = slope * k + intercept
    ss_res = float(np.sum((le - fit) ** 2))
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


# ---------------------------------------------------------------- report


@dataclass
class TheoryReport:
    coupling_residuals: list[float] = field(default_factory=list)
    thresholds: list[float] = field(default_factory=list)
    empirical_errors: dict = field(default_factory=dict)
    analytic_bounds: list[float] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    nfp_violations: int = 0
    exceed_layers: list[int] = field(default_factory=list)
    fit: dict = field(default_factory=dict)
    arch: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> TheoryReport:
        return cls(**json.loads(text))


def validate_bound(
    arch: str,
    x_batch,
    z_batch,
    s_tilde,
    w,
    s: int,
    beta: float,
    k_layers: int,
    gamma=None,
    support_tol: float = 1e-12,
) -> TheoryReport:
    """Run the good-parameter network on an in-class batch and compare to the bound.

    Records the per-layer batch-maximum errors, the analytic curve, any
    layer where the empirical error exceeds it, false-positive rows and a
    log-linear fit of the Frobenius error.
    """
    s_mat = np.asarray(s_tilde, dtype=float)
    x_batch = np.asarray(x_batch, dtype=float)
    z_batch = np.asarray(z_batch, dtype=float)
    row_norms = group_norms(x_batch)
    if np.max(row_norms) > beta * (1 + 1e-12):
        raise ValueError(f"batch has a row norm {np.max(row_norms):.4f} > beta={beta}")
    if np.max(np.count_nonzero(row_norms > 0, axis=-1)) > s:
        raise ValueError(f"batch has more than s={s} nonzero rows")
    good = good_thresholds(arch, x_batch, z_batch, s_mat, w, k_layers, gamma)
    mu, sigma = good.mu_tilde, good.sigma
    rho = _rate_factor(mu, s)
    if s > (1.0 + 1.0 / mu) / 2.0 or rho >= 1.0:
        raise SparsityConditionError(
            f"s={s} violates s <= (1 + 1/mu)/2 = {(1 + 1 / mu) / 2:.4f} (mu={mu:.4f})"
        )
    if arch == "alista_gs":
        if sigma > 0:
            raise ValueError("the ALISTA-GS bound is stated for noiseless batches")
        gammas = good.params.gammas()
        hi = 2.0 / (1.0 + rho)
        if np.any(gammas <= 0) or np.any(gammas >= hi):
            raise ValueError(f"step sizes must lie in (0, {hi:.4f})")
        bounds = alista_bound_curve(gammas, s, beta, mu)
        c_const = float(alista_rate_factors(gammas, mu, s).min())
        big_c = 0.0
    else:
        bounds = error_bound_curve(s, beta, mu, good.c_w, sigma, k_layers)
        c_const = -math.log(rho)
        big_c = (s + 1) * good.c_w / (1.0 + mu - 2.0 * mu * s)

    y = s_mat @ x_batch + z_batch
    trace = forward(good.params, s_mat, y)
    diffs = [it - x_batch for it in trace.iterates]
    err_f = [float(np.max(np.linalg.norm(d, axis=(1, 2)))) for d in diffs]
    err_21 = [float(np.max(mixed_norm_21(d))) for d in diffs]
    exceed = [k for k, (e, b) in enumerate(zip(err_f, bounds)) if e > b]
    slope, r2 = log_linear_fit(err_f)
    nfp = no_false_positive_check(trace, row_norms > 0, tol=support_tol)
    return TheoryReport(
        thresholds=good.thetas.tolist(),
        empirical_errors={"fro": err_f, "l21": err_21},
        analytic_bounds=np.asarray(bounds).tolist(),
        constants={"mu_tilde": mu, "s": s, "beta": beta, "sigma": sigma,
                   "c_w": good.c_w, "c": c_const, "C": big_c},
        nfp_violations=nfp,
        exceed_layers=exceed,
        fit={"slope": slope, "r2": r2},
        arch=arch,
    )
