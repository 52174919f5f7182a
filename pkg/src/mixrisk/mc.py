"""Deterministic Monte-Carlo oracle for mixture-elliptic P&L.

Each chunk of draws owns a Philox (counter-based) stream keyed by
(seed, chunk index), so the batch is bit-identical whatever the number of
worker threads.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import TailSampleError, UnsupportedModelError
from .generators import Normal, StudentT
from .model import MixtureModel, Portfolio, check_portfolio, validate

CHUNK_SIZE = 1 << 16
MIN_TAIL = 100
BOOTSTRAP_RESAMPLES = 200

BATCH_MAGIC = b"MIXRISK1"
_HEADER = struct.Struct("<8sQQ8x")  # magic, N, seed, padding -> 32 bytes


@dataclass(frozen=True, eq=False)
class SampleBatch:
    pnl: np.ndarray
    labels: np.ndarray
    seed: int
    chunks: int
    chunk_size: int
    model_hash: str

    @property
    def size(self) -> int:
        return int(self.pnl.size)


def worker_count() -> int:
    raw = os.environ.get("MIXRISK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def _batch_hash(model: MixtureModel, p: Portfolio) -> str:
    text = json.dumps({"model": model.to_dict(), "portfolio": p.to_dict()},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _draw_chunk(model, p, size, seed, chunk):
    rng = chunk_rng(seed, chunk)
    weights = model.weights
    labels = rng.choice(len(weights), size=size, p=weights / weights.sum()).astype(np.int16)
    pnl = np.empty(size)
    shift = p.theta_shift
    for j, comp in enumerate(model.components):
        idx = np.flatnonzero(labels == j)
        k = idx.size
        z = rng.standard_normal((k, model.dimension)) @ comp.cholesky.T
        gen = comp.generator
        if isinstance(gen, StudentT):
            w = rng.chisquare(gen.nu, k) / gen.nu
            z /= np.sqrt(w)[:, None]
        x = comp.mean + z
        pnl[idx] = x @ p.delta + shift
    return pnl, labels


def sample_mixture(model: MixtureModel, p: Portfolio, n_draws: int, seed: int,
                   chunk_size: int = CHUNK_SIZE, workers: int | None = None) -> SampleBatch:
    """Draw ``n_draws`` P&L values δ·X (+ Θ·t) from the mixture."""
    model = validate(model)
    check_portfolio(p, model)
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    for c in model.components:
        if not isinstance(c.generator, (StudentT, Normal)):
            raise UnsupportedModelError("sampling supports Student-t and normal generators only")
    sizes = [chunk_size] * (n_draws // chunk_size)
    if n_draws % chunk_size:
        sizes.append(n_draws % chunk_size)
    workers = workers or worker_count()
    jobs = [(size, i) for i, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _draw_chunk(model, p, job[0], seed, job[1]), jobs))
    else:
        parts = [_draw_chunk(model, p, size, seed, i) for size, i in jobs]
    pnl = np.concatenate([part[0] for part in parts])
    labels = np.concatenate([part[1] for part in parts])
    return SampleBatch(pnl, labels, seed, len(sizes), chunk_size, _batch_hash(model, p))


def _tail_count(n, alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n * alpha < MIN_TAIL:
        raise TailSampleError(f"N*alpha = {n * alpha:g} < {MIN_TAIL}; draw more samples")
    return max(1, math.ceil(n * alpha - 1e-9))


def _lower(pnl, count):
    """The ``count`` smallest values, sorted ascending."""
    count = min(count, pnl.size)
    part = np.partition(pnl, count - 1)[:count]
    part.sort()
    return part


def empirical_var(batch: SampleBatch, alpha: float) -> float:
    """Minus the ⌈αN⌉-th smallest P&L (lower order statistic, no interpolation)."""
    k = _tail_count(batch.size, alpha)
    return -float(_lower(batch.pnl, k)[-1])


def empirical_es(batch: SampleBatch, alpha: float) -> float:
    """Mean loss over the worst ⌈αN⌉ draws."""
    k = _tail_count(batch.size, alpha)
    return -float(_lower(batch.pnl, k).mean())


def var_standard_error(batch: SampleBatch, alpha: float) -> float:
    """Order-statistic standard error: half the spread of ranks k ± √(Nα(1-α))."""
    n = batch.size
    k = _tail_count(n, alpha)
    j = max(1, math.ceil(math.sqrt(n * alpha * (1 - alpha))))
    low = _lower(batch.pnl, min(n, k + j))
    return 0.5 * float(low[min(n, k + j) - 1] - low[max(0, k - j - 1)])


def es_standard_error(batch: SampleBatch, alpha: float, resamples: int = BOOTSTRAP_RESAMPLES,
                      seed: int = 0) -> float:
    """Poisson-bootstrap standard error of :func:`empirical_es`.

    Every draw gets an independent Poisson(1) multiplicity, which only needs
    to be realized for the lower tail: the resample size is completed with
    one Poisson draw for the remaining mass.
    """
    n = batch.size
    k = _tail_count(n, alpha)
    m = min(n, 3 * k + 1000)
    tail = _lower(batch.pnl, m)
    rng = chunk_rng(seed, 2**31 - 1)
    estimates = np.empty(resamples)
    for b in range(resamples):
        counts = rng.poisson(1.0, m)
        total = counts.sum() + (rng.poisson(n - m) if n > m else 0)
        kb = max(1, math.ceil(alpha * total - 1e-9))
        cum = np.cumsum(counts)
        if cum[-1] < kb:
            # tail reservoir too short; fall back to an explicit resample
            sample = rng.choice(batch.pnl, n)
            estimates[b] = -_lower(sample, k).mean()
            continue
        stop = int(np.searchsorted(cum, kb))
        used = counts[:stop + 1].astype(float)
        used[-1] -= cum[stop] - kb
        estimates[b] = -float(used @ tail[:stop + 1]) / kb
    return float(estimates.std(ddof=1))


def dump_batch(batch: SampleBatch, path) -> None:
    """Raw dump: 32-byte header (magic, N, seed) then little-endian float64 P&L."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BATCH_MAGIC, batch.size, batch.seed & (2**64 - 1)))
        fh.write(batch.pnl.astype("<f8").tobytes())


def load_batch(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        magic, n, seed = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != BATCH_MAGIC:
            raise ValueError(f"{path}: not a mixrisk batch file")
        pnl = np.frombuffer(fh.read(), dtype="<f8")
    if pnl.size != n:
        raise ValueError(f"{path}: header says {n} draws, found {pnl.size}")
    return pnl, seed
