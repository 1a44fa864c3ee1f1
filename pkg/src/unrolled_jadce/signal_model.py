"""Synthetic grant-free access instances and their real-valued lifting.

The complex model is ``Y = S X + Z`` with ``X = diag(a) H``. Everything
downstream works on the lifted real system::

    S_t = [[Re S, -Im S], [Im S, Re S]],  X_t = [Re X; Im X],  Y_t = [Re Y; Im Y]
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import container

PREAMBLE_KINDS = ("gaussian", "binary", "zadoff_chu", "custom")
_NORM_TOL = 1e-9


def normalize_columns(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero column")
    return a / norms


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


@dataclass
class PreambleMatrix:
    entries: np.ndarray
    kind: str = "custom"
    pre_normalization: np.ndarray | None = None
    allow_underloaded: bool = False

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.kind not in PREAMBLE_KINDS:
            raise ValueError(f"unknown preamble kind {self.kind!r}")
        l, n = self.entries.shape
        if l >= n and not self.allow_underloaded:
            raise ValueError(f"expected L < N, got L={l}, N={n}")
        dev = np.abs(np.linalg.norm(self.entries, axis=0) - 1.0)
        if np.any(dev > _NORM_TOL):
            raise ValueError(f"preamble columns not unit-norm (max dev {dev.max():.2e})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def lifted(self) -> np.ndarray:
        return lift_matrix(self.entries)


@dataclass
class GroupSparseSignal:
    entries: np.ndarray
    activity: np.ndarray
    channel: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.activity)


@dataclass
class ProblemInstance:
    preamble: PreambleMatrix
    signal: GroupSparseSignal
    noise: np.ndarray
    observation: np.ndarray
    snr_db: float
    seed: int


@dataclass
class RealLiftedSystem:
    s_tilde: np.ndarray
    x_tilde: np.ndarray
    y_tilde: np.ndarray
    z_tilde: np.ndarray
    n_complex: int
    l_complex: int


# ---------------------------------------------------------------- lifting


def lift_matrix(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    re, im = s.real, s.imag
    return np.block([[re, -im], [im, re]])


def lift_rows(x: np.ndarray) -> np.ndarray:
    """Stack real over imaginary parts along the row axis (batch-aware)."""
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag], axis=-2)


def unlift_rows(xt: np.ndarray) -> np.ndarray:
    xt = np.asarray(xt, dtype=float)
    n = xt.shape[-2] // 2
    return xt[..., :n, :] + 1j * xt[..., n:, :]


def unlift_matrix(st: np.ndarray) -> np.ndarray:
    st = np.asarray(st, dtype=float)
    l, n = st.shape[0] // 2, st.shape[1] // 2
    return st[:l, :n] + 1j * st[l:, :n]


def lift_to_real(instance: ProblemInstance) -> RealLiftedSystem:
    s = instance.preamble.entries
    return RealLiftedSystem(
        s_tilde=lift_matrix(s),
        x_tilde=lift_rows(instance.signal.entries),
        y_tilde=lift_rows(instance.observation),
        z_tilde=lift_rows(instance.noise),
        n_complex=s.shape[1],
        l_complex=s.shape[0],
    )


# ---------------------------------------------------------------- generators


def _is_prime(k: int) -> bool:
    if k < 2:
        return False
    return all(k % d for d in range(2, math.isqrt(k) + 1))


def _next_prime(k: int) -> int:
    while not _is_prime(k):
        k += 1
    return k


def zadoff_chu_columns(l: int, n: int) -> np.ndarray:
    """First ``n`` (root, cyclic shift) ZC columns, truncated to ``l`` samples.

    Base length is the smallest prime ``>= l``; roots run over 1, 2, ...
    and shifts over 0..Nzc-1 in lexicographic order.
    """
    nzc = _next_prime(l)
    budget = (nzc - 1) * nzc
    if n > budget:
        raise ValueError(f"n={n} exceeds the ZC column budget {budget} for Nzc={nzc}")
    k = np.arange(nzc)
    cols = np.empty((l, n), dtype=complex)
    j = 0
    for u in range(1, nzc):
        base = np.exp(-1j * np.pi * u * k * (k + 1) / nzc)
        for shift in range(nzc):
            if j == n:
                return cols
            cols[:, j] = np.roll(base, -shift)[:l]
            j += 1
    return cols


def gen_preamble(
    kind: str, l: int, n: int, seed: int, allow_underloaded: bool = False
) -> PreambleMatrix:
    """Column-normalized L x N preamble of the requested family."""
    if l < 2 or n < 2:
        raise ValueError("need l >= 2 and n >= 2")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        raw = complex_normal(rng, (l, n))
    elif kind == "binary":
        raw = rng.choice([-1.0, 1.0], size=(l, n)).astype(complex)
    elif kind == "zadoff_chu":
        raw = zadoff_chu_columns(l, n)
    else:
        raise ValueError(f"unsupported preamble kind {kind!r}")
    return PreambleMatrix(normalize_columns(raw), kind=kind, allow_underloaded=allow_underloaded)


def gen_ill_conditioned(l: int, n: int, kappa: float, seed: int) -> PreambleMatrix:
    """Gaussian draw whose spectrum is replaced by a ladder of condition ``kappa``."""
    from .operators import set_condition_number

    rng = np.random.default_rng(seed)
    return set_condition_number(complex_normal(rng, (l, n)), kappa)


def gen_signal(n: int, m: int, activity_prob: float, seed: int) -> GroupSparseSignal:
    if not 0.0 <= activity_prob <= 1.0:
        raise ValueError(f"activity_prob must be in [0, 1], got {activity_prob}")
    if n < 1 or m < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    activity = (rng.random(n) < activity_prob).astype(np.int64)
    channel = complex_normal(rng, (n, m))
    return GroupSparseSignal(activity[:, None] * channel, activity, channel)


def gen_noise_for_snr(
    clean: np.ndarray,
    snr_db: float,
    seed: int,
    reference_power: float | None = None,
) -> np.ndarray:
    """Complex Gaussian noise calibrated to hit ``snr_db`` on this instance.

    The drawn noise is rescaled by its own norm, so
    ``10 log10(||clean||^2 / ||Z||^2)`` equals ``snr_db`` up to rounding.
    ``reference_power`` replaces ``||clean||^2`` when given.
    """
    clean = np.asarray(clean)
    if math.isinf(snr_db) and snr_db > 0:
        return np.zeros(clean.shape, dtype=complex)
    power = float(np.sum(np.abs(clean) ** 2)) if reference_power is None else reference_power
    if power <= 0:
        raise ValueError("cannot calibrate noise against an all-zero signal")
    rng = np.random.default_rng(seed)
    z = complex_normal(rng, clean.shape)
    target = power / 10.0 ** (snr_db / 10.0)
    return z * math.sqrt(target / float(np.sum(np.abs(z) ** 2)))


def make_instance(
    preamble: PreambleMatrix,
    m: int,
    activity_prob: float,
    snr_db: float,
    seed: int,
) -> ProblemInstance:
    """One draw of ``Y = S diag(a) H + Z``.

    Instances with no active device are calibrated against the expected
    signal power ``activity_prob * N * M`` instead of their own (zero) power.
    """
    seq = np.random.SeedSequence(seed)
    sig_seed, noise_seed = (int(v) for v in seq.generate_state(2, dtype=np.uint64))
    l, n = preamble.shape
    signal = gen_signal(n, m, activity_prob, sig_seed)
    clean = preamble.entries @ signal.entries
    ref = None
    if not np.any(clean):
        ref = activity_prob * n * m
    if ref == 0.0:
        noise = np.zeros((l, m), dtype=complex)
    else:
        noise = gen_noise_for_snr(clean, snr_db, noise_seed, reference_power=ref)
    return ProblemInstance(preamble, signal, noise, clean + noise, snr_db, seed)


def draw_batch(
    preamble: PreambleMatrix,
    m: int,
    activity_prob: float,
    snr_db: float,
    size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized draw of ``size`` lifted samples ``(X_t, Y_t)``.

    Same distribution and per-instance SNR calibration as
    :func:`make_instance`, without per-instance seeds; used for streaming
    training batches.
    """
    l, n = preamble.shape
    activity = rng.random((size, n)) < activity_prob
    x = activity[:, :, None] * complex_normal(rng, (size, n, m))
    clean = preamble.entries @ x
    z = complex_normal(rng, (size, l, m))
    if not (math.isinf(snr_db) and snr_db > 0):
        power = np.sum(np.abs(clean) ** 2, axis=(1, 2))
        power = np.where(power > 0, power, activity_prob * n * m)
        target = power / 10.0 ** (snr_db / 10.0)
        z *= np.sqrt(target / np.sum(np.abs(z) ** 2, axis=(1, 2)))[:, None, None]
    else:
        z[:] = 0.0
    return lift_rows(x), lift_rows(clean + z)


# ---------------------------------------------------------------- datasets


@dataclass
class DatasetConfig:
    l: int = 20
    n: int = 40
    m: int = 8
    preamble_kind: str = "gaussian"
    condition_number: float | None = None
    snr_db: float = 15.0
    activity_prob: float = 0.1
    p_train: int = 64
    n_test: int = 128
    seed: int = 0

    def validate(self) -> None:
        if self.l < 2 or self.n < 2 or self.m < 1:
            raise ValueError(f"invalid dims (L, N, M) = ({self.l}, {self.n}, {self.m})")
        if self.l >= self.n:
            raise ValueError(f"overloaded regime requires L < N, got L={self.l}, N={self.n}")
        if self.p_train < 1 or self.n_test < 0:
            raise ValueError("need p_train >= 1 and n_test >= 0")
        if not 0.0 <= self.activity_prob <= 1.0:
            raise ValueError("activity_prob must be in [0, 1]")
        if self.preamble_kind not in PREAMBLE_KINDS[:3]:
            raise ValueError(f"unsupported preamble kind {self.preamble_kind!r}")
        if self.condition_number is not None and self.condition_number < 1:
            raise ValueError("condition_number must be >= 1")


@dataclass
class SampleBatch:
    """Stack of instances sharing one preamble (complex arrays, leading batch axis)."""

    x: np.ndarray  # (P, N, M)
    noise: np.ndarray  # (P, L, M)
    y: np.ndarray  # (P, L, M)
    activity: np.ndarray  # (P, N)
    seeds: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def x_tilde(self) -> np.ndarray:
        return lift_rows(self.x)

    @property
    def y_tilde(self) -> np.ndarray:
        return lift_rows(self.y)

    @property
    def z_tilde(self) -> np.ndarray:
        return lift_rows(self.noise)


@dataclass
class Dataset:
    preamble: PreambleMatrix
    train: SampleBatch
    test: SampleBatch
    config: DatasetConfig
    preamble_seed: int = 0

    @property
    def s_tilde(self) -> np.ndarray:
        return self.preamble.lifted


def build_preamble(cfg: DatasetConfig, seed: int) -> PreambleMatrix:
    if cfg.condition_number is not None:
        if cfg.preamble_kind != "gaussian":
            raise ValueError("condition_number surgery applies to gaussian preambles only")
        return gen_ill_conditioned(cfg.l, cfg.n, cfg.condition_number, seed)
    return gen_preamble(cfg.preamble_kind, cfg.l, cfg.n, seed)


def sample_batch(
    preamble: PreambleMatrix, m: int, activity_prob: float, snr_db: float, seeds
) -> SampleBatch:
    l, n = preamble.shape
    insts = [make_instance(preamble, m, activity_prob, snr_db, int(s)) for s in seeds]
    if not insts:
        empty = lambda *shape: np.zeros((0, *shape), dtype=complex)  # noqa: E731
        return SampleBatch(empty(n, m), empty(l, m), empty(l, m), np.zeros((0, n)), [])
    return SampleBatch(
        x=np.stack([i.signal.entries for i in insts]),
        noise=np.stack([i.noise for i in insts]),
        y=np.stack([i.observation for i in insts]),
        activity=np.stack([i.signal.activity for i in insts]).astype(float),
        seeds=[int(s) for s in seeds],
    )


def synth_dataset(cfg: DatasetConfig, path=None) -> Dataset:
    """Draw a train/test dataset sharing one fixed preamble; persist if ``path``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    preamble_seed = int(rng.integers(2**63))
    seeds = rng.integers(2**63, size=cfg.p_train + cfg.n_test)
    preamble = build_preamble(cfg, preamble_seed)
    train = sample_batch(preamble, cfg.m, cfg.activity_prob, cfg.snr_db, seeds[: cfg.p_train])
    test = sample_batch(preamble, cfg.m, cfg.activity_prob, cfg.snr_db, seeds[cfg.p_train :])
    ds = Dataset(preamble, train, test, cfg, preamble_seed)
    if path is not None:
        save_dataset(ds, path)
    return ds


def save_dataset(ds: Dataset, path) -> Path:
    arrays = {"preamble": ds.preamble.entries}
    for split, batch in (("train", ds.train), ("test", ds.test)):
        arrays[f"{split}_x"] = batch.x
        arrays[f"{split}_noise"] = batch.noise
        arrays[f"{split}_y"] = batch.y
        arrays[f"{split}_activity"] = batch.activity
    meta = {
        "kind": "dataset",
        "config": asdict(ds.config),
        "preamble_kind": ds.preamble.kind,
        "preamble_seed": ds.preamble_seed,
        "seeds": {"train": ds.train.seeds, "test": ds.test.seeds},
    }
    return container.write_container(path, arrays, meta)


def load_dataset(path) -> Dataset:
    arrays, meta = container.read_container(path)
    if meta.get("kind") != "dataset":
        raise container.ContainerError(f"{path} is not a dataset container")
    cfg = DatasetConfig(**meta["config"])
    preamble = PreambleMatrix(arrays["preamble"], kind=meta["preamble_kind"])
    batches = {
        split: SampleBatch(
            x=arrays[f"{split}_x"],
            noise=arrays[f"{split}_noise"],
            y=arrays[f"{split}_y"],
            activity=arrays[f"{split}_activity"],
            seeds=list(meta["seeds"][split]),
        )
        for split in ("train", "test")
    }
    return Dataset(preamble, batches["train"], batches["test"], cfg, meta["preamble_seed"])


def dataset_sampler(ds: Dataset):
    """Streaming sampler over the dataset's generating distribution."""
    cfg = ds.config

    def sample(rng: np.random.Generator):
        return draw_batch(ds.preamble, cfg.m, cfg.activity_prob, cfg.snr_db, cfg.p_train, rng)

    return sample
