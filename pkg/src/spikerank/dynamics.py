"""Discrete-time activity model on a listening network.

A user sends in step k+1 with probability b_i + alpha * (A s^[k])_i. The
expected activity obeys the linear recursion e <- b + alpha A e, whose fixed
point (I - alpha A) s* = b drives the ranking. Rates are usually supplied
in normalized form alpha_star = alpha * rho(A), so alpha_star = 1 marks
the edge of convergence.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError
from .graph import SparseAdjacency, spectral_radius

DEFAULT_TOL = 1e-10


def alpha_from_star(alpha_star: float, rho: float) -> float:
    if alpha_star == 0 or rho <= 0:
        return 0.0
    return alpha_star / rho


@dataclass(frozen=True, eq=False)
class ModelParams:
    alpha: float
    b: np.ndarray
    alpha_star: float | None = None

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 1:
            raise ValueError("b must be a vector")
        if self.alpha < 0:
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")
        if (b < 0).any():
            raise DomainError("basal rates must be non-negative")
        object.__setattr__(self, "b", b)

    @classmethod
    def from_alpha_star(cls, alpha_star: float, b, rho: float) -> "ModelParams":
        return cls(alpha=alpha_from_star(alpha_star, rho), b=b, alpha_star=alpha_star)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States after each of ``steps`` updates; the initial state is not included."""

    states: np.ndarray

    @property
    def steps(self) -> int:
        return self.states.shape[0]

    @property
    def total_per_step(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("step,total\n")
        for k, tot in enumerate(self.total_per_step.tolist(), start=1):
            out.write(f"{k},{tot!r}\n")
        return out.getvalue()

    def to_wide_csv(self, users=None) -> str:
        n = self.states.shape[1]
        names = users if users is not None else [str(i) for i in range(n)]
        out = io.StringIO()
        out.write("step," + ",".join(names) + "\n")
        for k, row in enumerate(self.states.tolist(), start=1):
            out.write(f"{k}," + ",".join(repr(v) for v in row) + "\n")
        return out.getvalue()


def _check_vector(A: SparseAdjacency, v, name):
    v = np.asarray(v)
    if v.shape != (A.n,):
        raise ValueError(f"{name} has shape {v.shape}, expected ({A.n},)")
    return v


def step_probabilities(A: SparseAdjacency, params: ModelParams, s, clamp: bool = True) -> np.ndarray:
    """Next-step send probabilities b + alpha A s, clipped to [0, 1] unless ``clamp`` is False."""
    s = _check_vector(A, s, "state")
    b = _check_vector(A, params.b, "b")
    p = b + params.alpha * (A.csr @ s.astype(np.float64))
    if clamp:
        np.clip(p, 0.0, 1.0, out=p)
    return p


def simulate(A: SparseAdjacency, params: ModelParams, s0, steps: int, seed) -> Trajectory:
    """Sample the chain for ``steps`` updates from binary state ``s0``.

    All uniforms come from one generator seeded with ``seed``, drawn per
    step in ascending node order, so a seed fixes the whole trajectory.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    s = _check_vector(A, s0, "s0")
    if not np.isin(s, (0, 1)).all():
        raise ValueError("s0 must be a 0/1 vector")
    rng = np.random.default_rng(seed)
    s = s.astype(np.int8)
    states = np.empty((steps, A.n), dtype=np.int8)
    for k in range(steps):
        p = step_probabilities(A, params, s)
        s = (rng.random(A.n) < p).astype(np.int8)
        states[k] = s
    return Trajectory(states)


def expected_iteration(A: SparseAdjacency, params: ModelParams, e0, steps: int) -> Trajectory:
    """Iterate e <- b + alpha A e without clamping."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    e = _check_vector(A, e0, "e0").astype(np.float64)
    b = _check_vector(A, params.b, "b")
    states = np.empty((steps, A.n))
    for k in range(steps):
        e = b + params.alpha * (A.csr @ e)
        states[k] = e
    return Trajectory(states)


def default_max_iter(alpha_star: float, tol: float = DEFAULT_TOL, scale: float = 1.0) -> int:
    """Iterations for a geometric sequence with ratio alpha_star to fall from ``scale`` to ``tol``."""
    if alpha_star <= 0:
        return 1000
    need = math.log(tol / max(scale, 1.0)) / math.log(alpha_star)
    return max(1000, math.ceil(need) + 50)


def _neumann(A: SparseAdjacency, b: np.ndarray, alpha: float, contraction: float, tol: float,
             max_iter: int | None = None):
    """Fixed-point iteration x <- b + alpha A x started from x = b."""
    x = b.copy()
    if alpha == 0 or A.nnz == 0 or x.size == 0:
        return x
    # the tail left after a step is about diff * q / (1 - q) where q is the
    # per-step shrink ratio; q is at least the contraction, and the observed
    # ratio guards against slower transients (e.g. non-diagonalizable A)
    target = 0.5 * tol
    eps = np.finfo(np.float64).eps
    diff = prev = np.inf
    it = 0
    while max_iter is None or it < max_iter:
        it += 1
        x_new = b + alpha * (A.csr @ x)
        diff = float(np.max(np.abs(x_new - x)))
        x = x_new
        # differences cannot fall below rounding noise of the iterate itself
        if diff < 8 * eps * float(np.max(np.abs(x))):
            return x
        if np.isfinite(prev):
            q = max(contraction, diff / prev)
            if q < 1 and diff * q <= target * (1.0 - q):
                return x
        prev = diff
        if max_iter is None:
            stop = target * (1.0 - contraction) / max(contraction, 1e-3)
            max_iter = max(default_max_iter(contraction, stop, diff), A.n + 1)
    raise ConvergenceError("steady-state iteration did not converge", diff, max_iter)


def steady_state(
    A: SparseAdjacency,
    b,
    alpha_star: float,
    rho: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> np.ndarray:
    """Solve (I - alpha A) s = b with alpha = alpha_star / rho(A).

    ``rho`` is estimated when not supplied. The default iteration budget is
    sized from the first update so that large-valued ``b`` still converges.
    Raises DomainError unless 0 <= alpha_star < 1, and ConvergenceError if
    the budget runs out.
    """
    if not 0 <= alpha_star < 1:
        raise DomainError(f"alpha_star must lie in [0, 1), got {alpha_star}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    b = _check_vector(A, b, "b").astype(np.float64)
    if alpha_star == 0:
        return b.copy()
    if rho is None:
        rho = spectral_radius(A).rho
    alpha = alpha_from_star(alpha_star, rho)
    return _neumann(A, b, alpha, alpha_star, tol, max_iter)


def residual(A: SparseAdjacency, b, alpha: float, x) -> float:
    """max |x - b - alpha A x|."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - np.asarray(b) - alpha * (A.csr @ x))))


def katz_vector(A: SparseAdjacency, alpha: float, rho: float | None = None, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve (I - alpha A) c = 1: walks out of each node, length-k walks weighted alpha**k."""
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    if rho is None:
        rho = spectral_radius(A).rho
    gamma = alpha * rho
    if gamma >= 1:
        raise DomainError(f"alpha * rho(A) must be below 1, got {gamma}")
    # alpha is used as given: on an acyclic graph rho = 0 but the walk sum is not trivial
    return _neumann(A, np.ones(A.n), alpha, gamma, tol)


def half_life(alpha: float, lambda1: float) -> float:
    """Bins for activity to halve when it decays by gamma = alpha * lambda1 per bin."""
    gamma = alpha * lambda1
    if not 0 < gamma < 1:
        raise DomainError(f"decay factor alpha*lambda1 must lie in (0, 1), got {gamma}")
    return abs(math.log(2) / math.log(gamma))


class DecayFit(NamedTuple):
    gamma: float
    half_life: float
    decaying: bool


def fit_decay(volume) -> DecayFit:
    """Least-squares fit of log(volume) against bin index.

    ``decaying`` is False when the fitted slope is not negative; the half
    life is then a growth doubling time (or infinite for a flat series).
    """
    v = np.asarray(volume, dtype=np.float64)
    if v.ndim != 1 or v.size < 3:
        raise ValueError("need at least 3 bins to fit a decay")
    if (v <= 0).any():
        raise DomainError("all volumes must be positive to take logs")
    k = np.arange(v.size, dtype=np.float64)
    y = np.log(v)
    kc = k - k.mean()
    slope = float(kc @ (y - y.mean()) / (kc @ kc))
    hl = math.inf if slope == 0 else abs(math.log(2) / slope)
    return DecayFit(math.exp(slope), hl, slope < 0)


def scores_to_csv(scores, users=None) -> str:
    """``user,score`` rows sorted by descending score (ties by index)."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(scores.size), -scores))
    out = io.StringIO()
    out.write("user,score\n")
    for i in order.tolist():
        name = users[i] if users is not None else str(i)
        out.write(f"{name},{float(scores[i])!r}\n")
    return out.getvalue()
