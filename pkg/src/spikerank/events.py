"""Time-stamped directed message events: parsing, indexing and binning.

Times are seconds since the log epoch. Users get dense integer indices in
order of first appearance (time order, input order on ties, sender before
receiver within an event).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .errors import ParseError

HEADER = "time,sender,receiver"


class Event(NamedTuple):
    time: float
    sender: str
    receiver: str


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventLog:
    """Time-sorted events stored column-wise.

    ``senders`` and ``receivers`` hold user indices into ``users``.
    """

    times: np.ndarray
    senders: np.ndarray
    receivers: np.ndarray
    users: tuple[str, ...]
    user_index: dict = field(repr=False)

    @classmethod
    def from_columns(cls, times, sender_names, receiver_names) -> "EventLog":
        """Build a log from parallel columns in arbitrary time order."""
        times = np.asarray(times, dtype=np.float64)
        if not (len(times) == len(sender_names) == len(receiver_names)):
            raise ValueError("column lengths differ")
        order = np.argsort(times, kind="stable")
        index: dict[str, int] = {}
        senders = np.empty(len(order), dtype=np.int64)
        receivers = np.empty(len(order), dtype=np.int64)
        setdefault = index.setdefault
        for pos, e in enumerate(order.tolist()):
            senders[pos] = setdefault(sender_names[e], len(index))
            receivers[pos] = setdefault(receiver_names[e], len(index))
        return cls(
            times=_frozen(times[order], np.float64),
            senders=_frozen(senders, np.int64),
            receivers=_frozen(receivers, np.int64),
            users=tuple(index),
            user_index=index,
        )

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventLog":
        events = list(events)
        for ev in events:
            if not (math.isfinite(ev.time) and ev.time >= 0):
                raise ValueError(f"event time must be finite and non-negative: {ev.time!r}")
        return cls.from_columns(
            [float(ev.time) for ev in events],
            [ev.sender for ev in events],
            [ev.receiver for ev in events],
        )

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[Event]:
        u = self.users
        return [
            Event(t, u[s], u[r])
            for t, s, r in zip(self.times.tolist(), self.senders.tolist(), self.receivers.tolist())
        ]

    def window_slice(self, window) -> slice:
        """Index range of events with ``t0 <= time < t1``."""
        t0, t1 = window
        lo = int(np.searchsorted(self.times, t0, side="left"))
        hi = int(np.searchsorted(self.times, t1, side="left"))
        return slice(lo, max(lo, hi))

    def __len__(self):
        return self.n_events

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return (
            self.users == other.users
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.senders, other.senders)
            and np.array_equal(self.receivers, other.receivers)
        )

    __hash__ = None


def _lines(text):
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_events(text: str | TextIO) -> EventLog:
    """Parse the ``time,sender,receiver`` CSV format into an EventLog.

    Raises ParseError (with the offending line number) on a bad header,
    wrong field count, empty identifier, or a time that is not a finite
    non-negative number. Blank lines are skipped.
    """
    stream = _lines(text)
    times: list[float] = []
    senders: list[str] = []
    receivers: list[str] = []
    header_seen = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not header_seen:
            if line.lstrip("\ufeff") != HEADER:
                raise ParseError(lineno, f"expected header {HEADER!r}, got {line!r}")
            header_seen = True
            continue
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 fields, got {len(parts)}")
        t_str, s, r = parts
        try:
            t = float(t_str)
        except ValueError:
            raise ParseError(lineno, f"non-numeric time {t_str!r}") from None
        if not math.isfinite(t):
            raise ParseError(lineno, f"non-finite time {t_str!r}")
        if t < 0:
            raise ParseError(lineno, f"negative time {t_str!r}")
        if not s or not r:
            raise ParseError(lineno, "empty user identifier")
        times.append(t + 0.0)
        senders.append(s)
        receivers.append(r)
    return EventLog.from_columns(times, senders, receivers)


def read_events(path) -> EventLog:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_events(fh)


def serialize_events(log: EventLog) -> str:
    """Render ``log`` as event CSV; times use shortest round-trip repr."""
    u = log.users
    out = [HEADER]
    out.extend(
        f"{t!r},{u[s]},{u[r]}"
        for t, s, r in zip(log.times.tolist(), log.senders.tolist(), log.receivers.tolist())
    )
    return "\n".join(out) + "\n"


def _check_window(window):
    t0, t1 = window
    if not t0 < t1:
        raise ValueError(f"window start must precede end, got [{t0}, {t1})")
    return float(t0), float(t1)


@dataclass(frozen=True, eq=False)
class SendSeries:
    """Per-bin, per-user send counts; bin k covers [t0 + k*w, t0 + (k+1)*w)."""

    bin_width: float
    t0: float
    counts: np.ndarray  # shape (bins, n_users), int64

    @property
    def bins(self) -> int:
        return self.counts.shape[0]

    @property
    def indicator(self) -> np.ndarray:
        return (self.counts > 0).astype(np.int8)


def bin_sends(log: EventLog, bin_width: float, window) -> SendSeries:
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    t0, t1 = _check_window(window)
    n_bins = max(1, math.ceil((t1 - t0) / bin_width))
    n = log.n_users
    sl = log.window_slice((t0, t1))
    k = np.floor((log.times[sl] - t0) / bin_width).astype(np.int64)
    np.clip(k, 0, n_bins - 1, out=k)
    flat = np.bincount(k * n + log.senders[sl], minlength=n_bins * n)
    counts = flat.reshape(n_bins, n).astype(np.int64)
    counts.setflags(write=False)
    return SendSeries(bin_width=float(bin_width), t0=t0, counts=counts)


def volume_series(log: EventLog, bin_width: float) -> np.ndarray:
    """Total events per bin of width ``bin_width`` from the epoch to the last event."""
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if log.n_events == 0:
        return np.zeros(0, dtype=np.int64)
    k = np.floor(log.times / bin_width).astype(np.int64)
    return np.bincount(k, minlength=int(k[-1]) + 1).astype(np.int64)


def basal_rates(log: EventLog, bau_window) -> np.ndarray:
    """Number of events sent by each user inside ``bau_window`` (not normalized)."""
    sl = log.window_slice(_check_window(bau_window))
    return np.bincount(log.senders[sl], minlength=log.n_users).astype(np.float64)
