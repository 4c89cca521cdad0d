"""Noise calibration by quilt search, and the Laplace release itself.

For every candidate model and every node in the release window, the search
scans candidate quilts, bounds the node's influence on each, and converts
the bound into a score: nearby-node count divided by leftover budget. The
worst best-score across nodes and models becomes the Laplace scale. The
empty quilt (whole window nearby, zero influence) is always a candidate,
so the scale never exceeds ``window length / epsilon``.

Scores depend only on the framework, the budget, and the variant, never on
the observed data, so records can be replayed and audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from numpy.typing import NDArray

from .chains import ChainModel, StateSequence, marginal, spectral, validate
from .errors import (
    BadShape,
    BadState,
    EmptyThetaSet,
    InvalidEpsilon,
    LengthMismatch,
    MixedFrameworks,
    MquiltError,
)
from .influence import InfluenceValue, QuiltShape, Variant, _spectral_term, nearby_size

__all__ = [
    "Window",
    "Framework",
    "LipschitzQuery",
    "count_state_query",
    "ActiveQuilt",
    "ReleaseRecord",
    "enumerate_quilts",
    "score",
    "quilt_scores",
    "release",
    "unit_laplace",
]

DEFAULT_CAP_THRESHOLD = 512
"""Window length beyond which the offset search is capped."""

DEFAULT_MAX_OFFSET = 64
"""Offset cap used once the window exceeds the threshold."""


@dataclass(frozen=True, order=True)
class Window:
    """A 1-based inclusive stretch of trajectory nodes."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 1 or self.end < self.start:
            raise MquiltError(f"bad window [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, d: dict) -> "Window":
        return cls(int(d["start"]), int(d["end"]))


@dataclass(frozen=True)
class Framework:
    """What is being protected: horizon, release window, candidate models.

    The secrets are the values of every node inside ``window``; the
    adversary's belief is one of ``models``, all over the same state space.
    """

    horizon: int
    window: Window
    models: tuple[ChainModel, ...]

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise MquiltError(f"horizon must be >= 1, got {self.horizon}")
        if not self.models:
            raise EmptyThetaSet("a framework needs at least one chain model")
        models = tuple(validate(m) for m in self.models)
        first = models[0]
        for m in models[1:]:
            if m.states != first.states:
                raise MixedFrameworks("models disagree on the state space")
        if self.window.end > self.horizon:
            raise MquiltError(
                f"window [{self.window.start}, {self.window.end}] exceeds "
                f"horizon {self.horizon}"
            )
        object.__setattr__(self, "models", models)

    @property
    def k(self) -> int:
        return self.models[0].k

    @property
    def states(self) -> tuple[str, ...]:
        return self.models[0].states

    def full_window(self) -> bool:
        return self.window.start == 1 and self.window.end == self.horizon

    def window_model(self, model: ChainModel) -> ChainModel:
        """The window's own chain: same transitions, initial law at start."""
        return ChainModel(model.states, marginal(model, self.window.start), model.transition)


@dataclass(frozen=True)
class LipschitzQuery:
    """A numeric query with a known sensitivity to one-node changes.

    ``evaluate`` maps a window's worth of state indices to a float;
    changing a single node moves the value by at most ``lipschitz_constant``.
    """

    identifier: str
    evaluate: Callable[[NDArray[np.int64]], float]
    lipschitz_constant: float = 1.0

    def __post_init__(self) -> None:
        if not (self.lipschitz_constant > 0 and math.isfinite(self.lipschitz_constant)):
            raise MquiltError(
                f"Lipschitz constant must be positive and finite, got "
                f"{self.lipschitz_constant}"
            )


def count_state_query(state: int, k: int, label: str | None = None) -> LipschitzQuery:
    """How many window nodes sit in one state. Sensitivity 1."""
    if not 0 <= state < k:
        raise BadState(f"state index {state} outside 0..{k - 1}")
    name = label if label is not None else str(state)

    def evaluate(values: NDArray[np.int64]) -> float:
        return float(np.count_nonzero(np.asarray(values) == state))

    return LipschitzQuery(f"count:{name}", evaluate, 1.0)


@dataclass(frozen=True)
class ActiveQuilt:
    """The quilt that won the score minimization at one node."""

    node: int
    shape: QuiltShape
    score: float

    def to_dict(self) -> dict:
        d = self.shape.to_dict()
        d["node"] = self.node
        d["score"] = self.score
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActiveQuilt":
        shape = QuiltShape.from_dict(d)
        return cls(int(d["node"]), shape, float(d["score"]))


@dataclass(frozen=True)
class ReleaseRecord:
    """Everything needed to audit one noisy release (the data excluded).

    ``active_quilts`` maps a model's index in the framework to the winning
    quilt of every window node, in node order and with global node indices.
    ``output`` already includes the noise; the raw query value is not kept.
    """

    variant: Variant
    epsilon: float
    sigma_max: float
    output: float
    query_id: str
    lipschitz_constant: float
    seed: int
    window: Window
    active_quilts: Mapping[int, tuple[ActiveQuilt, ...]]
    scope: str = "window"

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "epsilon": self.epsilon,
            "sigma_max": self.sigma_max,
            "output": self.output,
            "query": self.query_id,
            "lipschitz_constant": self.lipschitz_constant,
            "seed": self.seed,
            "window": self.window.to_dict(),
            "active_quilts": {
                str(idx): [aq.to_dict() for aq in quilts]
                for idx, quilts in self.active_quilts.items()
            },
            "scope": self.scope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReleaseRecord":
        return cls(
            variant=Variant(d["variant"]),
            epsilon=float(d["epsilon"]),
            sigma_max=float(d["sigma_max"]),
            output=float(d["output"]),
            query_id=str(d["query"]),
            lipschitz_constant=float(d["lipschitz_constant"]),
            seed=int(d["seed"]),
            window=Window.from_dict(d["window"]),
            active_quilts={
                int(idx): tuple(ActiveQuilt.from_dict(a) for a in quilts)
                for idx, quilts in d["active_quilts"].items()
            },
            scope=str(d.get("scope", "window")),
        )


def enumerate_quilts(T_window: int, i: int) -> list[QuiltShape]:
    """All candidate quilts around node ``i`` in a window of ``T_window``.

    Two-sided shapes for every offset pair, each one-sided shape, and the
    empty quilt, so the count is
    ``(i-1)(T-i) + (i-1) + (T-i) + 1``.
    """
    if not 1 <= i <= T_window:
        raise BadShape(f"node {i} outside window of length {T_window}")
    shapes: list[QuiltShape] = []
    for a in range(1, i):
        for b in range(1, T_window - i + 1):
            shapes.append(QuiltShape(i, a, b))
    for a in range(1, i):
        shapes.append(QuiltShape(i, a, None))
    for b in range(1, T_window - i + 1):
        shapes.append(QuiltShape(i, None, b))
    shapes.append(QuiltShape(i, None, None))
    return shapes


def score(
    shape: QuiltShape,
    e: InfluenceValue | float,
    epsilon: float,
    T_window: int,
) -> float:
    """Noise-scale score of one quilt: nearby count over leftover budget.

    Infinite whenever the influence bound meets or exceeds the budget.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InvalidEpsilon(f"budget must be positive and finite, got {epsilon}")
    value = e.value if isinstance(e, InfluenceValue) else float(e)
    if value < 0:
        raise MquiltError(f"influence cannot be negative, got {value}")
    if value >= epsilon:
        return math.inf
    return nearby_size(shape, T_window) / (epsilon - value)


def unit_laplace(rng: np.random.Generator) -> float:
    """One Laplace(0, 1) draw by inverting the CDF at a uniform variate.

    The uniform is built from 53 random bits and excludes both endpoints,
    so the result is always finite and reproducible from the seed.
    """
    u = float(rng.integers(1, 2**53)) / 2**53
    c = u - 0.5
    return -math.copysign(1.0, c) * math.log1p(-2.0 * abs(c)) if c != 0 else 0.0


# --------------------------------------------------------------- quilt search


def _pair_indices(live: NDArray[np.bool_]) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    idx = np.nonzero(live)[0]
    if idx.size < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    uu, vv = np.meshgrid(idx, idx, indexing="ij")
    keep = uu != vv
    return uu[keep], vv[keep]


def _select(
    cands: list[tuple[float, int, int, int, int, QuiltShape]]
) -> tuple[float, int, int, int, int, QuiltShape]:
    # Tuple order: score, nearby, kind rank (two-sided first), left, right.
    return min(cands, key=lambda c: c[:5])


def _search_node(
    i: int,
    L: int,
    epsilon: float,
    exact_parts: tuple | None,
    approx_terms: NDArray[np.float64] | None,
    max_offset: int | None,
    two_sided_only: bool,
) -> tuple[float, QuiltShape]:
    """Minimize the score over candidate quilts at local node ``i``."""
    na_full, nb_full = i - 1, L - i
    na = na_full if max_offset is None else min(na_full, max_offset)
    nb = nb_full if max_offset is None else min(nb_full, max_offset)

    if exact_parts is not None:
        c_left, c_right = exact_parts  # arrays (na, P) and (nb, P)
        if c_left.shape[1] == 0:
            e_left = np.zeros(na)
            e_right = np.zeros(nb)
            e_two = np.zeros((na, nb))
        else:
            e_left = c_left.max(axis=1) if na else np.zeros(0)
            e_right = c_right.max(axis=1) if nb else np.zeros(0)
            if na and nb:
                # Blocked over the left offsets to bound the temporary at a
                # few million floats regardless of window size.
                pairs = c_left.shape[1]
                e_two = np.empty((na, nb))
                block = max(1, int(4_000_000 // max(1, nb * pairs)))
                for lo in range(0, na, block):
                    hi = min(na, lo + block)
                    e_two[lo:hi] = (
                        c_left[lo:hi, None, :] + c_right[None, :, :]
                    ).max(axis=2)
            else:
                e_two = np.zeros((na, nb))
    else:
        t = approx_terms  # t[x-1] = spectral term at offset x
        e_left = 2.0 * t[:na]
        e_right = t[:nb]
        e_two = 2.0 * t[:na, None] + t[None, :nb]

    def scores(e: NDArray[np.float64], nearby: NDArray[np.float64]):
        s = np.full(e.shape, np.inf)
        ok = e < epsilon
        s[ok] = nearby[ok] / (epsilon - e[ok])
        return s

    cands: list[tuple[float, int, int, int, int, QuiltShape]] = []
    if na and nb:
        aa = np.arange(1, na + 1)
        bb = np.arange(1, nb + 1)
        nearby2 = aa[:, None] + bb[None, :] - 1
        s2 = scores(e_two, nearby2.astype(float))
        flat = np.lexsort(
            (
                np.broadcast_to(bb[None, :], s2.shape).ravel(),
                np.broadcast_to(aa[:, None], s2.shape).ravel(),
                nearby2.ravel(),
                s2.ravel(),
            )
        )[0]
        ai, bi = divmod(int(flat), nb)
        cands.append(
            (float(s2[ai, bi]), int(nearby2[ai, bi]), 0, ai + 1, bi + 1,
             QuiltShape(i, ai + 1, bi + 1))
        )
    if not two_sided_only:
        if na:
            aa = np.arange(1, na + 1)
            nearby_l = (L - i + aa).astype(float)
            sl = scores(e_left, nearby_l)
            j = int(np.lexsort((aa, nearby_l, sl))[0])
            cands.append(
                (float(sl[j]), int(nearby_l[j]), 1, int(aa[j]), 0,
                 QuiltShape(i, int(aa[j]), None))
            )
        if nb:
            bb = np.arange(1, nb + 1)
            nearby_r = (i + bb - 1).astype(float)
            sr = scores(e_right, nearby_r)
            j = int(np.lexsort((bb, nearby_r, sr))[0])
            cands.append(
                (float(sr[j]), int(nearby_r[j]), 1, 0, int(bb[j]),
                 QuiltShape(i, None, int(bb[j])))
            )
    cands.append((L / epsilon, L, 2, 0, 0, QuiltShape(i, None, None)))
    best = _select(cands)
    return best[0], best[5]


def _exact_node_parts(
    margs: NDArray[np.float64],
    log_powers: list[NDArray[np.float64]],
    right_max: NDArray[np.float64],
    i: int,
    na: int,
    nb: int,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Backward and forward log-ratio maxima for all offsets at node ``i``.

    Returns arrays of shape (na, P) and (nb, P) over live ordered value
    pairs at the node. The backward part folds in the marginal ratio that
    Bayes inversion contributes per pair.
    """
    m_i = margs[i - 1]
    live = m_i > 0.0
    uu, vv = _pair_indices(live)
    if uu.size == 0:
        return np.zeros((na, 0)), np.zeros((nb, 0))
    with np.errstate(divide="ignore"):
        log_m = np.log(m_i)
    d_pair = log_m[vv] - log_m[uu]
    c_left = np.empty((na, uu.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(1, na + 1):
            log_m_past = np.log(margs[i - a - 1])
            # log of joint(x, u) = m_past[x] * P^a[x, u], columns compared.
            log_joint = log_m_past[:, None] + log_powers[a]
            c_left[a - 1] = (
                np.nanmax(log_joint[:, uu] - log_joint[:, vv], axis=0) + d_pair
            )
    c_right = right_max[1 : nb + 1, uu, vv] if nb else np.zeros((0, uu.size))
    return c_left, c_right


def quilt_scores(
    framework: Framework,
    epsilon: float,
    variant: Variant,
    *,
    scope: str = "window",
    approx_two_sided_only: bool = False,
    cap_threshold: int = DEFAULT_CAP_THRESHOLD,
    max_offset: int = DEFAULT_MAX_OFFSET,
) -> tuple[float, dict[int, tuple[ActiveQuilt, ...]]]:
    """Run the per-model, per-node quilt search and return the noise scale.

    Returns ``(sigma_max, active)`` where ``active[model_index]`` holds the
    winning quilt of every searched node with global node indices.

    ``scope`` chooses the node loop: ``"window"`` treats the release window
    as its own chain (initial law advanced to the window start), while
    ``"chain"`` searches every node of the full horizon, which can only
    raise the noise scale. Windows longer than ``cap_threshold`` restrict
    all offsets to ``max_offset``; the empty quilt keeps the search total.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InvalidEpsilon(f"budget must be positive and finite, got {epsilon}")
    if scope not in ("window", "chain"):
        raise MquiltError(f"scope must be 'window' or 'chain', got {scope!r}")
    if scope == "window":
        L = framework.window.length
        offset = framework.window.start - 1
        search_models = [framework.window_model(m) for m in framework.models]
    else:
        L = framework.horizon
        offset = 0
        search_models = list(framework.models)
    cap = max_offset if L > cap_threshold else None
    max_power = L - 1 if cap is None else min(L - 1, cap)

    sigma_max = 0.0
    active: dict[int, tuple[ActiveQuilt, ...]] = {}
    for idx, model in enumerate(search_models):
        exact = variant is Variant.EXACT
        if exact:
            margs = np.empty((L, model.k))
            margs[0] = model.initial
            for t in range(1, L):
                nxt = np.clip(margs[t - 1] @ model.transition, 0.0, None)
                margs[t] = nxt / nxt.sum()
            log_powers: list[NDArray[np.float64]] = []
            right_max = np.zeros((max_power + 1, model.k, model.k))
            power = np.eye(model.k)
            with np.errstate(divide="ignore", invalid="ignore"):
                log_powers.append(np.log(power))
                for j in range(1, max_power + 1):
                    power = np.clip(power @ model.transition, 0.0, 1.0)
                    log_powers.append(np.log(power))
                    diff = log_powers[j][:, None, :] - log_powers[j][None, :, :]
                    right_max[j] = np.nanmax(diff, axis=2)
            approx_terms = None
        else:
            info = spectral(model)
            xs = np.arange(1, max(max_power, 1) + 1)
            approx_terms = np.array([_spectral_term(info, int(x)) for x in xs])

        quilts: list[ActiveQuilt] = []
        model_sigma = 0.0
        for i in range(1, L + 1):
            na = i - 1 if cap is None else min(i - 1, cap)
            nb = L - i if cap is None else min(L - i, cap)
            parts = (
                _exact_node_parts(margs, log_powers, right_max, i, na, nb)
                if exact
                else None
            )
            sigma_i, shape = _search_node(
                i, L, epsilon, parts, approx_terms, cap,
                two_sided_only=(not exact) and approx_two_sided_only,
            )
            global_shape = QuiltShape(i + offset, shape.left, shape.right)
            quilts.append(ActiveQuilt(i + offset, global_shape, sigma_i))
            model_sigma = max(model_sigma, sigma_i)
        active[idx] = tuple(quilts)
        sigma_max = max(sigma_max, model_sigma)
    return sigma_max, active


def release(
    data: StateSequence,
    query: LipschitzQuery,
    epsilon: float,
    framework: Framework,
    variant: Variant,
    seed: int,
    *,
    scope: str = "window",
    approx_two_sided_only: bool = False,
    cap_threshold: int = DEFAULT_CAP_THRESHOLD,
    max_offset: int = DEFAULT_MAX_OFFSET,
) -> ReleaseRecord:
    """Release a noisy query value over the framework's window.

    The query value is rescaled to sensitivity 1, then Laplace noise at the
    searched scale is added. The returned record carries the noisy output,
    the scale, and the winning quilts; consumers un-scale on read.
    """
    values = data.values if isinstance(data, StateSequence) else np.asarray(data)
    if values.ndim != 1 or values.size != framework.window.length:
        raise LengthMismatch(
            f"data has length {values.size}, window needs {framework.window.length}"
        )
    if values.size and (values.min() < 0 or values.max() >= framework.k):
        raise BadState(f"data mentions states outside 0..{framework.k - 1}")
    sigma_max, active = quilt_scores(
        framework,
        epsilon,
        variant,
        scope=scope,
        approx_two_sided_only=approx_two_sided_only,
        cap_threshold=cap_threshold,
        max_offset=max_offset,
    )
    rng = np.random.default_rng(seed)
    noise = unit_laplace(rng)
    scaled = float(query.evaluate(values)) / query.lipschitz_constant
    return ReleaseRecord(
        variant=variant,
        epsilon=float(epsilon),
        sigma_max=float(sigma_max),
        output=scaled + sigma_max * noise,
        query_id=query.identifier,
        lipschitz_constant=float(query.lipschitz_constant),
        seed=int(seed),
        window=framework.window,
        active_quilts=active,
        scope=scope,
    )
