"""Finite time-homogeneous Markov chain models.

This module holds the chain representation used everywhere else: validation,
marginals, forward and backward conditionals over a time gap, the spectral
quantities of the multiplicative reversiblization (stationary distribution,
time reversal, eigenvalues, eigen-gap), and seeded trajectory sampling.

Conventions
-----------
States are indices ``0..k-1`` with string labels kept alongside for file IO.
Time indices are 1-based: ``X_1`` is the first node of a trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import (
    BadInitial,
    DuplicateLabel,
    InvalidTime,
    MquiltError,
    NegativeEntry,
    NonStochasticRow,
    NotAperiodic,
    NotIrreducible,
    ZeroStationaryEntry,
)

__all__ = [
    "ChainModel",
    "StateSequence",
    "SpectralInfo",
    "validate",
    "marginal",
    "forward_conditional",
    "backward_conditional",
    "transition_power",
    "spectral",
    "sample",
    "random_model",
]

STOCHASTIC_TOL = 1e-9
"""Tolerance on row sums and sign checks at validation time."""

EIGEN_ONE_TOL = 1e-8
"""Eigenvalues within this distance of 1 count as the unit eigenvalue."""

_STATIONARY_RESIDUAL = 1e-13
_STATIONARY_MAX_ITER = 10**6
_JACOBI_OFF_TOL = 1e-12


@dataclass(frozen=True)
class ChainModel:
    """A finite Markov chain: state labels, initial law, transition matrix.

    Construction performs no checking beyond array conversion; call
    :func:`validate` to enforce the probabilistic invariants and obtain a
    row-normalized copy.

    Attributes
    ----------
    states : tuple of str
        Distinct labels, one per state, in index order.
    initial : ndarray of shape (k,)
        Distribution of ``X_1``.
    transition : ndarray of shape (k, k)
        Row-stochastic matrix, ``transition[u, v] = P(X_{t+1}=v | X_t=u)``.
    """

    states: tuple[str, ...]
    initial: NDArray[np.float64]
    transition: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        q = np.array(self.initial, dtype=np.float64)
        P = np.array(self.transition, dtype=np.float64)
        q.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "initial", q)
        object.__setattr__(self, "transition", P)

    @property
    def k(self) -> int:
        """Number of states."""
        return len(self.states)

    @classmethod
    def from_arrays(
        cls,
        initial: Sequence[float],
        transition: Sequence[Sequence[float]],
        states: Sequence[str] | None = None,
    ) -> "ChainModel":
        """Build a model, defaulting labels to ``"0", "1", ...``."""
        q = np.asarray(initial, dtype=np.float64)
        if states is None:
            states = tuple(str(i) for i in range(q.shape[-1]))
        return cls(tuple(states), q, np.asarray(transition, dtype=np.float64))

    def state_index(self, label: str) -> int:
        """Index of a state label, raising ``BadState`` style errors upstream."""
        try:
            return self.states.index(str(label))
        except ValueError:
            from .errors import BadState

            raise BadState(f"unknown state label {label!r}") from None

    def equal_to(self, other: "ChainModel") -> bool:
        """Exact equality of labels and parameter arrays."""
        return (
            self.states == other.states
            and np.array_equal(self.initial, other.initial)
            and np.array_equal(self.transition, other.transition)
        )


@dataclass(frozen=True)
class StateSequence:
    """An observed trajectory of state indices, 1-based in time.

    ``values[t-1]`` is the state at time ``t``.
    """

    values: NDArray[np.int64]

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.int64)
        if v.ndim != 1 or v.size < 1:
            raise MquiltError("a state sequence must be a nonempty 1-D array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)

    def __iter__(self):
        return iter(self.values.tolist())

    def check_against(self, model: ChainModel) -> None:
        """Raise if any index falls outside the model's state range."""
        if self.values.min() < 0 or self.values.max() >= model.k:
            raise MquiltError(
                f"sequence mentions state indices outside 0..{model.k - 1}"
            )


def validate(model: ChainModel, tol: float = STOCHASTIC_TOL) -> ChainModel:
    """Check model invariants and return a row-normalized copy.

    Checks run in a fixed order and the first failure wins: duplicate
    labels, array shapes, negative entries, transition row sums, initial
    sum. After all checks pass, rows and the initial law are rescaled to
    sum to exactly 1.0 so that tiny input drift does not propagate.

    Raises
    ------
    DuplicateLabel, NegativeEntry, NonStochasticRow, BadInitial
    """
    if len(set(model.states)) != len(model.states):
        seen: set[str] = set()
        for s in model.states:
            if s in seen:
                raise DuplicateLabel(f"state label {s!r} appears more than once")
            seen.add(s)
    k = model.k
    q, P = model.initial, model.transition
    if P.ndim != 2 or P.shape != (k, k):
        raise MquiltError(
            f"transition matrix must be {k}x{k} to match the labels, got {P.shape}"
        )
    if q.ndim != 1 or q.shape != (k,):
        raise BadInitial(f"initial distribution must have length {k}, got {q.shape}")
    if np.any(P < -tol):
        u, v = np.argwhere(P < -tol)[0]
        raise NegativeEntry(f"transition[{u}][{v}] = {P[u, v]} is negative")
    if np.any(q < -tol):
        (u,) = np.argwhere(q < -tol)[0]
        raise NegativeEntry(f"initial[{u}] = {q[u]} is negative")
    row_sums = P.sum(axis=1)
    bad = np.abs(row_sums - 1.0) > tol
    if np.any(bad):
        u = int(np.argmax(bad))
        raise NonStochasticRow(f"transition row {u} sums to {row_sums[u]}, not 1")
    if abs(q.sum() - 1.0) > tol:
        raise BadInitial(f"initial distribution sums to {q.sum()}, not 1")
    P = np.clip(P, 0.0, None)
    q = np.clip(q, 0.0, None)
    return ChainModel(model.states, q / q.sum(), P / P.sum(axis=1, keepdims=True))


def transition_power(P: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    """``P`` raised to a nonnegative integer power by repeated squaring.

    Entries are clamped back into ``[0, 1]`` after every multiply so that
    long products cannot drift outside the simplex.
    """
    if n < 0:
        raise InvalidTime(f"matrix power must be nonnegative, got {n}")
    k = P.shape[0]
    result = np.eye(k)
    base = np.clip(P, 0.0, 1.0)
    e = n
    while e > 0:
        if e & 1:
            result = np.clip(result @ base, 0.0, 1.0)
        base_next = base @ base
        base = np.clip(base_next, 0.0, 1.0)
        e >>= 1
    return result


def marginal(model: ChainModel, t: int) -> NDArray[np.float64]:
    """Distribution of ``X_t``, i.e. ``initial @ transition^(t-1)``.

    Parameters
    ----------
    t : int
        1-based time index, ``t >= 1``.
    """
    if t < 1:
        raise InvalidTime(f"time index must be >= 1, got {t}")
    return model.initial @ transition_power(model.transition, t - 1)


def forward_conditional(model: ChainModel, b: int) -> NDArray[np.float64]:
    """Matrix ``M[v, u] = P(X_{i+b} = u | X_i = v)``, which is ``P^b``.

    The chain is time homogeneous so the result does not depend on ``i``.
    """
    if b < 1:
        raise InvalidTime(f"forward gap must be >= 1, got {b}")
    return transition_power(model.transition, b)


def backward_conditional(model: ChainModel, i: int, a: int) -> NDArray[np.float64]:
    """Matrix ``M[v, u] = P(X_{i-a} = u | X_i = v)`` via Bayes inversion.

    Rows ``v`` with ``P(X_i = v) = 0`` are undefined and returned as NaN;
    downstream maximizations skip them.

    Parameters
    ----------
    i : int
        1-based node being conditioned on.
    a : int
        Backward gap, ``1 <= a <= i - 1``.
    """
    if a < 1:
        raise InvalidTime(f"backward gap must be >= 1, got {a}")
    if i - a < 1:
        raise InvalidTime(f"node {i} has no ancestor at gap {a}")
    m_past = marginal(model, i - a)
    m_now = marginal(model, i)
    Pa = transition_power(model.transition, a)
    out = np.full((model.k, model.k), np.nan)
    defined = m_now > 0.0
    # joint[u, v] = P(X_{i-a}=u, X_i=v); divide columns by P(X_i=v).
    joint = m_past[:, None] * Pa
    out[defined, :] = (joint[:, defined] / m_now[defined]).T
    return out


def _positive_adjacency(P: NDArray[np.float64]) -> NDArray[np.bool_]:
    return P > 0.0


def _strongly_connected(adj: NDArray[np.bool_]) -> bool:
    k = adj.shape[0]

    def reaches_all(a: NDArray[np.bool_]) -> bool:
        seen = np.zeros(k, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            u = frontier.pop()
            for v in np.nonzero(a[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    frontier.append(int(v))
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


def _period(adj: NDArray[np.bool_]) -> int:
    """Period of a strongly connected digraph via BFS level differences."""
    k = adj.shape[0]
    depth = np.full(k, -1)
    depth[0] = 0
    order = [0]
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v in np.nonzero(adj[u])[0]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                order.append(int(v))
    g = 0
    for u in range(k):
        for v in np.nonzero(adj[u])[0]:
            g = math.gcd(g, int(depth[u] + 1 - depth[v]))
    return g


def _stationary_distribution(P: NDArray[np.float64]) -> NDArray[np.float64]:
    """Stationary law by power iteration with a linear-solve fallback.

    Iterates ``pi <- pi P`` from the uniform vector until the l1 residual
    falls below a tight threshold (stalls included), then falls back to
    solving ``pi (P - I) = 0`` with the normalization constraint if the
    iteration cap is hit without convergence.
    """
    k = P.shape[0]
    pi = np.full(k, 1.0 / k)
    best = pi
    best_res = float(np.abs(pi @ P - pi).sum())
    stall = 0
    for _ in range(_STATIONARY_MAX_ITER):
        nxt = pi @ P
        total = nxt.sum()
        if total > 0:
            nxt = nxt / total
        res = float(np.abs(nxt @ P - nxt).sum())
        if res < best_res:
            best, best_res = nxt, res
            stall = 0
        else:
            stall += 1
        pi = nxt
        if best_res <= _STATIONARY_RESIDUAL or stall > 64:
            break
    if best_res <= 1e-10:
        return best
    # Slow mixing: solve the balance equations directly instead.
    A = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    sol = np.clip(sol, 0.0, None)
    s = sol.sum()
    if s <= 0:
        raise ZeroStationaryEntry("stationary solve produced a zero vector")
    return sol / s


def _jacobi_eigenvalues(S: NDArray[np.float64]) -> NDArray[np.float64]:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm drops below
    ``1e-12``. Quadratic convergence makes a generous sweep cap safe.
    """
    A = np.array(S, dtype=np.float64)
    k = A.shape[0]
    if k == 1:
        return A.diagonal().copy()
    for _ in range(200):
        off = math.sqrt(max(0.0, (A**2).sum() - (A.diagonal() ** 2).sum()))
        if off <= _JACOBI_OFF_TOL:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[p, q]
                if abs(apq) <= _JACOBI_OFF_TOL / (k * k):
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.eye(k)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
                A = (A + A.T) / 2.0
    return np.sort(A.diagonal().copy())


@dataclass(frozen=True)
class SpectralInfo:
    """Spectral summary of a chain's multiplicative reversiblization.

    Attributes
    ----------
    stationary : ndarray
        Stationary distribution ``pi`` of the transition matrix.
    reversal : ndarray
        Time-reversed transition matrix
        ``P*[u, v] = pi[v] P[v, u] / pi[u]``.
    eigenvalues : ndarray
        Eigenvalues of ``P P*`` sorted ascending; all real in ``[0, 1]``
        with the largest equal to 1 up to numerical tolerance.
    gap : float
        ``min(1 - |lam|)`` over eigenvalues with ``|lam| < 1 - 1e-8``.
    """

    stationary: NDArray[np.float64]
    reversal: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    gap: float

    @property
    def pi_min(self) -> float:
        return float(self.stationary.min())


def spectral(model: ChainModel) -> SpectralInfo:
    """Stationary law, time reversal, and eigen-gap of ``P P*``.

    Requires an irreducible, aperiodic transition matrix; otherwise the
    multiplicative reversiblization need not have a well-defined gap.

    Raises
    ------
    NotIrreducible
        If the positive-entry digraph is not strongly connected.
    NotAperiodic
        If the gcd of cycle lengths exceeds one.
    ZeroStationaryEntry
        If the stationary distribution has a numerically zero entry.
    """
    model = validate(model)
    P = model.transition
    adj = _positive_adjacency(P)
    if not _strongly_connected(adj):
        raise NotIrreducible("transition graph is not strongly connected")
    if _period(adj) != 1:
        raise NotAperiodic(f"chain has period {_period(adj)}")
    pi = _stationary_distribution(P)
    if pi.min() <= 0.0:
        raise ZeroStationaryEntry("stationary distribution touches zero")
    reversal = (pi[None, :] * P.T) / pi[:, None]
    M = P @ reversal
    # Similarity transform D^(1/2) M D^(-1/2) is symmetric; use it so a
    # symmetric eigensolver applies.
    root = np.sqrt(pi)
    sym = (root[:, None] * M) / root[None, :]
    sym = (sym + sym.T) / 2.0
    eigenvalues = _jacobi_eigenvalues(sym)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    if abs(eigenvalues[-1] - 1.0) > EIGEN_ONE_TOL:
        raise MquiltError(
            f"largest eigenvalue of P P* is {eigenvalues[-1]}, expected 1"
        )
    below = eigenvalues[np.abs(eigenvalues) < 1.0 - EIGEN_ONE_TOL]
    gap = 1.0 if below.size == 0 else float(1.0 - np.abs(below).max())
    return SpectralInfo(pi, reversal, eigenvalues, gap)


def sample(model: ChainModel, T: int, seed: int) -> StateSequence:
    """Draw a length-``T`` trajectory deterministically from a seed.

    Uses inverse-CDF draws against one uniform variate per step so the
    output depends only on the seed and the model.
    """
    if T < 1:
        raise InvalidTime(f"trajectory length must be >= 1, got {T}")
    model = validate(model)
    rng = np.random.default_rng(seed)
    u = rng.random(T)
    out = np.empty(T, dtype=np.int64)
    cum = np.cumsum(model.initial)
    out[0] = min(int(np.searchsorted(cum, u[0], side="right")), model.k - 1)
    cum_rows = np.cumsum(model.transition, axis=1)
    for t in range(1, T):
        row = cum_rows[out[t - 1]]
        out[t] = min(int(np.searchsorted(row, u[t], side="right")), model.k - 1)
    return StateSequence(out)


def random_model(
    k: int, rng: np.random.Generator, floor: float = 0.05
) -> ChainModel:
    """A random chain with entries bounded away from zero.

    Every entry of the initial law and transition matrix is at least
    ``floor`` before normalization, which forces irreducibility and
    aperiodicity. Handy for randomized testing and soundness sweeps.
    """
    if k < 1:
        raise MquiltError(f"need at least one state, got k={k}")
    P = rng.random((k, k)) + floor
    q = rng.random(k) + floor
    return validate(
        ChainModel.from_arrays(q / q.sum(), P / P.sum(axis=1, keepdims=True))
    )
