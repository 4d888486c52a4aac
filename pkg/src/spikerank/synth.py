"""Synthetic listening networks and model-driven event logs.

Every send by user j in a bin becomes one event per listener of j (all i
with a_ij = 1), all sharing one timestamp drawn uniformly inside the bin.
Node j is named ``u{j}`` in the generated log.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import alpha_from_star
from .errors import DomainError
from .events import EventLog
from .graph import SparseAdjacency, spectral_radius

FAMILIES = ("k_regular_ring", "erdos_renyi", "star")

# above this many off-diagonal cells, ER edges are sampled sparsely
_DENSE_ER_LIMIT = 20_000_000


def k_regular_ring(n: int, k: int) -> SparseAdjacency:
    """Each node listens to its k nearest ring neighbours (k/2 on each side)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if k < 1 or k >= n:
        raise ValueError(f"ring degree must satisfy 1 <= k < n, got k={k}, n={n}")
    if k % 2:
        raise ValueError(f"ring degree must be even, got k={k}")
    nodes = np.arange(n)
    offsets = np.r_[np.arange(1, k // 2 + 1), -np.arange(1, k // 2 + 1)]
    rows = np.repeat(nodes, offsets.size)
    cols = (rows + np.tile(offsets, n)) % n
    return SparseAdjacency.from_edges(n, rows, cols)


def erdos_renyi(n: int, p: float, seed=None) -> SparseAdjacency:
    """Every ordered pair i != j is an edge independently with probability p."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    cells = n * (n - 1)
    if cells <= _DENSE_ER_LIMIT:
        keys = np.flatnonzero(rng.random(cells) < p)
    else:
        # same law: a binomial edge count, then a uniform subset of that size
        m = int(rng.binomial(cells, p))
        keys = np.unique(rng.integers(0, cells, size=m))
        while keys.size < m:
            extra = rng.integers(0, cells, size=m - keys.size)
            keys = np.union1d(keys, extra)
    rows, off = np.divmod(keys, n - 1)
    cols = off + (off >= rows)
    return SparseAdjacency.from_edges(n, rows, cols)


def star(n: int, hubs: int = 1) -> SparseAdjacency:
    """Hubs 0..hubs-1 and leaves listen to each other in both directions.

    The spectral radius is sqrt(hubs * (n - hubs)).
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 1 <= hubs < n:
        raise ValueError(f"hubs must satisfy 1 <= hubs < n, got {hubs}")
    h = np.arange(hubs)
    leaves = np.arange(hubs, n)
    hh, ll = np.meshgrid(h, leaves, indexing="ij")
    rows = np.r_[ll.ravel(), hh.ravel()]
    cols = np.r_[hh.ravel(), ll.ravel()]
    return SparseAdjacency.from_edges(n, rows, cols)


@dataclass(frozen=True)
class SynthConfig:
    family: str
    n: int
    params: dict = field(default_factory=dict)
    alpha_star_true: float = 0.5
    b_scale: float = 0.01
    bau_bins: int = 300
    spike_bins: int = 60
    spike_boost: float = 0.5
    seed: int = 0
    bin_width: float = 60.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0 <= self.alpha_star_true < 1:
            raise DomainError(f"alpha_star_true must lie in [0, 1), got {self.alpha_star_true}")
        if not 0 <= self.spike_boost <= 1:
            raise ValueError(f"spike_boost must lie in [0, 1], got {self.spike_boost}")
        if self.b_scale < 0:
            raise ValueError("b_scale must be non-negative")
        if self.bau_bins < 1 or self.spike_bins < 1:
            raise ValueError("bau_bins and spike_bins must be >= 1")

    def seeds(self):
        """Independent child seeds for the network, basal rates and log."""
        return np.random.SeedSequence(self.seed).spawn(3)


def generate_network(config: SynthConfig, seed=None) -> SparseAdjacency:
    p = config.params
    if config.family == "k_regular_ring":
        return k_regular_ring(config.n, int(p.get("k", 4)))
    if config.family == "erdos_renyi":
        return erdos_renyi(config.n, float(p.get("p", 0.01)), seed if seed is not None else config.seeds()[0])
    return star(config.n, int(p.get("hubs", 1)))


def heterogeneous_basal(n: int, b_scale: float, seed=None) -> np.ndarray:
    """Log-normal basal probabilities with mean about ``b_scale``, capped at 1."""
    rng = np.random.default_rng(seed)
    w = rng.lognormal(0.0, 1.0, size=n)
    return np.minimum(1.0, b_scale * w / np.exp(0.5))


class SyntheticLog(NamedTuple):
    log: EventLog
    bau_window: tuple
    spike_window: tuple
    alpha: float
    metadata: dict


def generate_spike_log(
    A: SparseAdjacency,
    b_prob,
    alpha_star_true: float,
    bau_bins: int,
    spike_bins: int,
    spike_boost: float,
    seed,
    bin_width: float = 60.0,
    rho: float | None = None,
) -> SyntheticLog:
    """Run the chain through a quiet period and a forced spike, emitting events.

    The chain runs with the true response rate throughout. At the first
    spike bin a random ``spike_boost`` fraction of users is forced to send
    on top of the regular draw; the spike then relaxes for the remaining
    ``spike_bins - 1`` bins.
    """
    b = np.asarray(b_prob, dtype=np.float64)
    if b.shape != (A.n,):
        raise ValueError(f"b_prob has shape {b.shape}, expected ({A.n},)")
    if (b < 0).any() or (b > 1).any():
        raise DomainError("b_prob must lie in [0, 1]")
    if not 0 <= alpha_star_true < 1:
        raise DomainError(f"alpha_star_true must lie in [0, 1), got {alpha_star_true}")
    if not 0 <= spike_boost <= 1:
        raise ValueError(f"spike_boost must lie in [0, 1], got {spike_boost}")
    if bau_bins < 1 or spike_bins < 1:
        raise ValueError("bau_bins and spike_bins must be >= 1")
    if rho is None:
        rho = spectral_radius(A).rho
    alpha = alpha_from_star(alpha_star_true, rho)

    rng = np.random.default_rng(seed)
    listeners = A.csr.T.tocsr()
    n = A.n
    n_forced = int(round(spike_boost * n))
    s = np.zeros(n)
    chunks_t, chunks_s, chunks_r = [], [], []
    for k in range(bau_bins + spike_bins):
        p = np.clip(b + alpha * (A.csr @ s), 0.0, 1.0)
        active = rng.random(n) < p
        if k == bau_bins and n_forced:
            active[rng.choice(n, size=n_forced, replace=False)] = True
        senders = np.flatnonzero(active)
        s = active.astype(np.float64)
        if senders.size == 0:
            continue
        stamps = (k + rng.random(senders.size)) * bin_width
        sub = listeners[senders]
        fan = np.diff(sub.indptr)
        chunks_t.append(np.repeat(stamps, fan))
        chunks_s.append(np.repeat(senders, fan))
        chunks_r.append(sub.indices.astype(np.int64))

    names = np.array([f"u{i}" for i in range(n)], dtype=object)
    if chunks_t:
        times = np.concatenate(chunks_t)
        snd = names[np.concatenate(chunks_s)]
        rcv = names[np.concatenate(chunks_r)]
    else:
        times, snd, rcv = np.zeros(0), names[:0], names[:0]
    log = EventLog.from_columns(times, snd.tolist(), rcv.tolist())

    bau_end = bau_bins * bin_width
    spike_end = (bau_bins + spike_bins) * bin_width
    meta = {
        "bau_start": 0.0,
        "bau_end": bau_end,
        "spike_start": bau_end,
        "spike_end": spike_end,
        "alpha_star": float(alpha_star_true),
        "alpha": alpha,
        "rho": float(rho),
        "bin_width": float(bin_width),
        "seed": seed if isinstance(seed, (int, np.integer)) else repr(seed),
    }
    return SyntheticLog(log, (0.0, bau_end), (bau_end, spike_end), alpha, meta)


def generate(config: SynthConfig) -> tuple[SparseAdjacency, np.ndarray, SyntheticLog]:
    """Network, basal probabilities and event log for ``config``."""
    net_seed, b_seed, log_seed = config.seeds()
    A = generate_network(config, seed=net_seed)
    b = heterogeneous_basal(config.n, config.b_scale, b_seed)
    out = generate_spike_log(
        A, b, config.alpha_star_true, config.bau_bins, config.spike_bins,
        config.spike_boost, log_seed, bin_width=config.bin_width,
    )
    meta = dict(out.metadata)
    meta.update(seed=config.seed, family=config.family, n=config.n, b_scale=config.b_scale,
                spike_boost=config.spike_boost)
    meta.update({f"param_{k}": v for k, v in sorted(config.params.items())})
    return A, b, out._replace(metadata=meta)


def format_metadata(meta: dict) -> str:
    lines = []
    for key, value in meta.items():
        text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def parse_metadata(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"metadata line without '=': {line!r}")
        out[key.strip()] = value.strip()
    return out
