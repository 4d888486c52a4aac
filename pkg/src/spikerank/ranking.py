"""Top-r activity prediction and the business-as-usual -> spike evaluation."""
from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import steady_state
from .errors import DomainError
from .events import EventLog, _check_window, basal_rates
from .graph import build_adjacency, spectral_radius

THREADS_ENV = "SPIKERANK_THREADS"


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def default_grid(points: int = 25) -> np.ndarray:
    """0 followed by ``points`` log-spaced values from 1e-16 to 0.99."""
    return np.r_[0.0, np.logspace(-16, np.log10(0.99), points)]


@dataclass(frozen=True, eq=False)
class Ranking:
    users: np.ndarray
    scores: np.ndarray
    requested: int

    @property
    def short(self) -> bool:
        """True when fewer users exist than were requested."""
        return len(self.users) < self.requested

    def __len__(self):
        return len(self.users)

    def __iter__(self):
        return zip(self.users.tolist(), self.scores.tolist())

    def to_csv(self, users=None) -> str:
        out = io.StringIO()
        out.write("rank,user,score\n")
        for pos, (i, s) in enumerate(self, start=1):
            name = users[i] if users is not None else str(i)
            out.write(f"{pos},{name},{s!r}\n")
        return out.getvalue()


def rank_users(sstar, r: int) -> Ranking:
    """Top ``r`` users by descending score; equal scores go to the lower index."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    scores = np.asarray(sstar, dtype=np.float64)
    order = np.lexsort((np.arange(scores.size), -scores))[:r]
    return Ranking(users=order, scores=scores[order], requested=r)


def received_before_send(log: EventLog, lookback: float = 60.0) -> np.ndarray:
    """For every event, how many events its sender received in (t - lookback, t]."""
    if not lookback > 0:
        raise ValueError(f"lookback must be positive, got {lookback}")
    if log.n_events == 0:
        return np.zeros(0, dtype=np.int64)
    # integer keys (receiver, rank of time) keep the window comparisons exact
    uniq = np.unique(log.times)
    width = uniq.size + 1
    recv_key = np.sort(log.receivers * width + np.searchsorted(uniq, log.times))
    base = log.senders * width

    def received_up_to(bound):
        q = np.searchsorted(uniq, bound, side="right")
        return np.searchsorted(recv_key, base + q, side="left")

    return received_up_to(log.times) - received_up_to(log.times - lookback)


def responsiveness(log: EventLog, bin_width: float = 60.0, lookback: float = 60.0) -> np.ndarray:
    """Mean messages received in the preceding ``lookback`` seconds, per send, per bin.

    Bins start at the log epoch, matching volume_series. Bins without any
    sends hold NaN.
    """
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    rec = received_before_send(log, lookback)
    if rec.size == 0:
        return np.zeros(0)
    k = np.floor(log.times / bin_width).astype(np.int64)
    n_bins = int(k[-1]) + 1
    sends = np.bincount(k, minlength=n_bins)
    total = np.bincount(k, weights=rec, minlength=n_bins)
    out = np.full(n_bins, np.nan)
    nz = sends > 0
    out[nz] = total[nz] / sends[nz]
    return out


@dataclass(frozen=True, eq=False)
class SweepResult:
    grid: np.ndarray
    totals: np.ndarray
    baseline: int
    r: int
    rankings: tuple
    rho: float
    empty_graph: bool

    @property
    def deltas(self) -> np.ndarray:
        return self.totals - self.baseline

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("alpha_star,total,delta\n")
        for a, t, d in zip(self.grid.tolist(), self.totals.tolist(), self.deltas.tolist()):
            out.write(f"{a:.6g},{t},{d}\n")
        return out.getvalue()


def _normalize_grid(grid) -> np.ndarray:
    g = np.asarray(list(grid), dtype=np.float64)
    if g.size and (not np.isfinite(g).all() or g.min() < 0 or g.max() >= 1):
        raise DomainError("grid values must lie in [0, 1)")
    return np.unique(np.r_[0.0, g])


def evaluate_spike(log: EventLog, bau, spike, grid=None, r: int = 100, tol: float = 1e-10) -> SweepResult:
    """Rank users on business-as-usual data and score the ranking on the spike.

    For every alpha_star in ``grid`` (0 is always included) the top ``r``
    users of the steady state are summed over their spike-window sends.
    """
    t0, t1 = _check_window(bau)
    t2, t3 = _check_window(spike)
    if t1 > t2:
        raise ValueError(f"business-as-usual window must end by the spike start ({t1} > {t2})")
    grid = _normalize_grid(default_grid() if grid is None else grid)

    A = build_adjacency(log, (t0, t1))
    b = basal_rates(log, (t0, t1))
    spike_counts = basal_rates(log, (t2, t3)).astype(np.int64)
    rho = spectral_radius(A).rho

    def one(alpha_star):
        ranking = rank_users(steady_state(A, b, alpha_star, rho=rho, tol=tol), r)
        return ranking, int(spike_counts[ranking.users].sum())

    workers = min(max_workers(), len(grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, grid.tolist()))
    else:
        results = [one(a) for a in grid.tolist()]

    totals = np.array([t for _, t in results], dtype=np.int64)
    return SweepResult(
        grid=grid,
        totals=totals,
        baseline=int(totals[0]),
        r=r,
        rankings=tuple(rk for rk, _ in results),
        rho=rho,
        empty_graph=A.nnz == 0,
    )


class SpikeWindow(NamedTuple):
    peak_bin: int
    end_bin: int
    reached: bool


def detect_spike(volume, decay_factor: float = 4.0) -> SpikeWindow:
    """Peak bin and first later bin at or below peak / decay_factor.

    If activity never falls that far the last bin is returned with
    ``reached`` False.
    """
    v = np.asarray(volume, dtype=np.float64)
    if v.size == 0:
        raise ValueError("volume series is empty")
    if not decay_factor > 1:
        raise ValueError(f"decay_factor must exceed 1, got {decay_factor}")
    peak = int(np.argmax(v))
    below = np.flatnonzero(v[peak + 1:] <= v[peak] / decay_factor)
    if below.size:
        return SpikeWindow(peak, peak + 1 + int(below[0]), True)
    return SpikeWindow(peak, v.size - 1, False)
