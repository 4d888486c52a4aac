"""Static "who listens to whom" adjacency and its spectral machinery.

Row i of the adjacency lists the users j that user i receives messages
from (a_ij = 1). Entries are presence-only; self-loops are never stored.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .events import EventLog, _check_window


@dataclass(frozen=True, eq=False)
class SparseAdjacency:
    """Row-compressed 0/1 matrix with sorted, distinct column indices per row."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, receivers, senders) -> "SparseAdjacency":
        """Build from (receiver, sender) pairs; duplicates and self-loops are dropped."""
        receivers = np.asarray(receivers, dtype=np.int64)
        senders = np.asarray(senders, dtype=np.int64)
        if receivers.shape != senders.shape:
            raise ValueError("receiver and sender arrays differ in length")
        if receivers.size and (
            min(receivers.min(), senders.min()) < 0 or max(receivers.max(), senders.max()) >= n
        ):
            raise ValueError(f"edge endpoint out of range for n={n}")
        keep = receivers != senders
        keys = np.unique(receivers[keep] * n + senders[keep])
        rows, cols = np.divmod(keys, n) if n else (keys, keys)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        indptr.setflags(write=False)
        cols = np.ascontiguousarray(cols, dtype=np.int64)
        cols.setflags(write=False)
        return cls(n=int(n), indptr=indptr, indices=cols)

    @classmethod
    def from_dense(cls, dense) -> "SparseAdjacency":
        dense = np.asarray(dense)
        r, c = np.nonzero(dense)
        return cls.from_edges(dense.shape[0], r, c)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(receiver, sender) arrays sorted by receiver then sender."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        return rows, self.indices

    @cached_property
    def csr(self) -> sp.csr_matrix:
        data = np.ones(self.nnz, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.int64)
        r, c = self.edges()
        out[r, c] = 1
        return out

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n)

    def __eq__(self, other):
        if not isinstance(other, SparseAdjacency):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None


def build_adjacency(log: EventLog, window) -> SparseAdjacency:
    """a_ij = 1 iff user i received at least one event from user j in ``window``."""
    sl = log.window_slice(_check_window(window))
    return SparseAdjacency.from_edges(log.n_users, log.receivers[sl], log.senders[sl])


def matvec(A: SparseAdjacency, s) -> np.ndarray:
    """r = A s, i.e. r_i sums s_j over the users i listens to."""
    s = np.asarray(s)
    if s.shape != (A.n,):
        raise ValueError(f"vector of shape {s.shape} does not match n={A.n}")
    if np.issubdtype(s.dtype, np.integer) or s.dtype == bool:
        # float64 accumulation is exact for integer sums below 2**53
        return (A.csr @ s.astype(np.float64)).astype(np.int64)
    return A.csr @ s


def degree_bounds(A: SparseAdjacency) -> tuple[int, int]:
    """(max in-degree, max out-degree), i.e. the infinity- and 1-norms of A."""
    if A.n == 0:
        return 0, 0
    return int(A.in_degrees().max()), int(A.out_degrees().max())


@dataclass(frozen=True)
class SpectralEstimate:
    rho: float
    iterations: int
    residual: float
    max_in_degree: int
    max_out_degree: int
    tol: float

    @property
    def converged(self) -> bool:
        return self.residual < self.tol


def spectral_radius(A: SparseAdjacency, tol: float = 1e-10, max_iter: int = 10_000) -> SpectralEstimate:
    """Estimate rho(A) by power iteration from the all-ones vector.

    The iteration runs on A + I restricted to its strongly connected
    components. Each block is irreducible with a positive diagonal, so the
    Perron root strictly dominates even when A itself is periodic (as any
    bipartite or cyclic component is). Per-component Collatz-Wielandt
    quotients min/max (Bx)_i / x_i bracket each block's spectral radius;
    iteration stops when the bracket around the largest one is narrower
    than ``tol``. ``residual`` is that final bracket width.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    din, dout = degree_bounds(A)
    if A.nnz == 0:
        return SpectralEstimate(0.0, 0, 0.0, din, dout, tol)

    n_comp, labels = connected_components(A.csr, directed=True, connection="strong")
    rows, cols = A.edges()
    intra = labels[rows] == labels[cols]
    if not intra.any():
        # acyclic graph: A is nilpotent
        return SpectralEstimate(0.0, 0, 0.0, din, dout, tol)

    # only components carrying a cycle can have a nonzero spectral radius
    cyclic = np.zeros(n_comp, dtype=bool)
    cyclic[labels[rows[intra]]] = True
    nodes = np.flatnonzero(cyclic[labels])
    nodes = nodes[np.argsort(labels[nodes], kind="stable")]
    comp_labels = labels[nodes]
    starts = np.flatnonzero(np.r_[True, comp_labels[1:] != comp_labels[:-1]])
    sizes = np.diff(np.r_[starts, nodes.size])
    local = np.full(A.n, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    r, c = local[rows[intra]], local[cols[intra]]
    m = nodes.size
    B = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(m, m)) + sp.identity(m, format="csr")

    x = np.ones(m)
    it = 0
    width = np.inf
    upper = lower = 1.0
    for it in range(1, max_iter + 1):
        y = B @ x
        q = y / x
        # rho(A) + 1 lies in [max(lo), max(hi)]
        upper = np.maximum.reduceat(q, starts).max()
        lower = np.minimum.reduceat(q, starts).max()
        width = upper - lower
        x = y / np.repeat(np.add.reduceat(y, starts), sizes)
        if width < tol:
            break
    rho = 0.5 * (upper + lower) - 1.0
    return SpectralEstimate(max(float(rho), 0.0), it, float(width), din, dout, tol)


def adjacency_to_csv(A: SparseAdjacency, users=None) -> str:
    """``receiver,sender`` rows in (receiver index, sender index) order."""
    out = io.StringIO()
    out.write("receiver,sender\n")
    rows, cols = A.edges()
    for i, j in zip(rows.tolist(), cols.tolist()):
        if users is None:
            out.write(f"{i},{j}\n")
        else:
            out.write(f"{users[i]},{users[j]}\n")
    return out.getvalue()
