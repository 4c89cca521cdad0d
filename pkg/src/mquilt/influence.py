"""Max-influence of one node on surrounding node sets.

The central quantity is the largest log ratio, over realizations and over
pairs of values at the protected node, between conditional laws of a set of
observed nodes. Two routes compute it for quilt-shaped sets:

``exact``
    Direct computation from forward and backward conditionals. The quilt
    factorizes across the protected node, so the maximization separates
    into a backward part and a forward part per value pair.

``approx``
    A spectral upper bound that only needs the stationary minimum and the
    eigen-gap of the multiplicative reversiblization. It is finite once
    the offsets clear a mixing threshold, and it never undershoots the
    exact value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .chains import (
    ChainModel,
    SpectralInfo,
    backward_conditional,
    forward_conditional,
    marginal,
    spectral,
    validate,
)
from .errors import BadShape, EmptyThetaSet

__all__ = [
    "Variant",
    "QuiltShape",
    "InfluenceValue",
    "nearby_size",
    "exact_max_influence",
    "approx_max_influence",
    "approx_offset_threshold",
    "influence_over_set",
]


class Variant(str, enum.Enum):
    """Which influence route a value came from (or a mechanism ran with)."""

    EXACT = "exact"
    APPROX = "approx"


@dataclass(frozen=True, order=True)
class QuiltShape:
    """A candidate quilt around a protected node.

    ``left`` and ``right`` are offsets: the quilt contains ``X_{node-left}``
    and/or ``X_{node+right}``. Either may be ``None``; both ``None`` is the
    empty quilt, under which the whole trajectory counts as nearby.
    """

    node: int
    left: int | None = None
    right: int | None = None

    @property
    def is_empty(self) -> bool:
        return self.left is None and self.right is None

    @property
    def is_two_sided(self) -> bool:
        return self.left is not None and self.right is not None

    def check(self, T: int) -> None:
        """Raise ``BadShape`` unless the shape fits a horizon of ``T``."""
        if not 1 <= self.node <= T:
            raise BadShape(f"node {self.node} outside horizon 1..{T}")
        if self.left is not None and not 1 <= self.left <= self.node - 1:
            raise BadShape(f"left offset {self.left} invalid for node {self.node}")
        if self.right is not None and not 1 <= self.right <= T - self.node:
            raise BadShape(
                f"right offset {self.right} invalid for node {self.node}, T={T}"
            )

    def to_dict(self) -> dict:
        return {"node": self.node, "left": self.left, "right": self.right}

    @classmethod
    def from_dict(cls, d: dict) -> "QuiltShape":
        return cls(int(d["node"]), _opt_int(d.get("left")), _opt_int(d.get("right")))


def _opt_int(x) -> int | None:
    return None if x is None else int(x)


@dataclass(frozen=True)
class InfluenceValue:
    """An influence number tagged with the route that produced it."""

    value: float
    method: Variant

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


def nearby_size(shape: QuiltShape, T: int) -> int:
    """Number of trajectory nodes not separated from ``X_node`` by the quilt.

    Two-sided quilts leave the open span between the quilt nodes; one-sided
    quilts leave everything on the unshielded side plus the span; the empty
    quilt leaves the whole trajectory.
    """
    shape.check(T)
    i = shape.node
    if shape.is_two_sided:
        return shape.left + shape.right - 1
    if shape.left is not None:
        return T - (i - shape.left)
    if shape.right is not None:
        return (i + shape.right) - 1
    return T


def _pairwise_log_ratio_max(rows: np.ndarray) -> np.ndarray:
    """``out[u, v] = max_x log(rows[u, x] / rows[v, x])`` skipping 0/0 slots.

    ``rows`` must contain conditional distributions (each row sums to 1),
    so every output entry is at least 0 and never minus infinity.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(rows)
        diff = logs[:, None, :] - logs[None, :, :]
    return np.nanmax(diff, axis=2)


def exact_max_influence(model: ChainModel, shape: QuiltShape) -> InfluenceValue:
    """Exact max-influence of ``X_node`` on the quilt nodes.

    Conditioned on ``X_node``, the node to its left and the node to its
    right are independent, so the max over joint realizations splits into
    a backward term plus a forward term for each ordered value pair. Value
    pairs whose marginal probability at the node is zero are skipped; if
    fewer than two values are reachable there are no secret pairs to
    separate and the influence is 0. The result is ``inf`` when some
    realization is possible under one value and impossible under another.
    """
    model = validate(model)
    if shape.is_empty:
        return InfluenceValue(0.0, Variant.EXACT)
    if shape.left is not None and shape.node - shape.left < 1:
        raise BadShape(f"left offset {shape.left} invalid for node {shape.node}")
    if shape.right is not None and shape.right < 1:
        raise BadShape(f"right offset {shape.right} must be >= 1")
    m_now = marginal(model, shape.node)
    live = np.nonzero(m_now > 0.0)[0]
    if live.size < 2:
        return InfluenceValue(0.0, Variant.EXACT)
    n = live.size
    total = np.zeros((n, n))
    if shape.left is not None:
        B = backward_conditional(model, shape.node, shape.left)
        total = total + _pairwise_log_ratio_max(B[live])
    if shape.right is not None:
        F = forward_conditional(model, shape.right)
        total = total + _pairwise_log_ratio_max(F[live])
    np.fill_diagonal(total, 0.0)
    return InfluenceValue(float(total.max()), Variant.EXACT)


def approx_offset_threshold(info: SpectralInfo) -> float:
    """Offset above which the spectral bound is guaranteed finite."""
    return 2.0 * math.log(1.0 / info.pi_min) / info.gap


def _spectral_term(info: SpectralInfo, offset: int) -> float:
    decay = math.exp(-info.gap * offset / 2.0)
    if info.pi_min - decay <= 0.0:
        return math.inf
    return math.log((info.pi_min + decay) / (info.pi_min - decay))


def approx_max_influence(info: SpectralInfo, shape: QuiltShape) -> InfluenceValue:
    """Spectral upper bound on max-influence for a quilt shape.

    The two-sided bound charges its backward offset twice and its forward
    offset once; one-sided shapes keep just the matching term. Offsets
    below the mixing threshold (equivalently, ``pi_min <= exp(-g a / 2)``)
    give ``inf``.
    """
    if shape.is_empty:
        return InfluenceValue(0.0, Variant.APPROX)
    value = 0.0
    if shape.left is not None:
        if shape.left < 1:
            raise BadShape(f"left offset {shape.left} must be >= 1")
        value += 2.0 * _spectral_term(info, shape.left)
    if shape.right is not None:
        if shape.right < 1:
            raise BadShape(f"right offset {shape.right} must be >= 1")
        value += _spectral_term(info, shape.right)
    return InfluenceValue(value, Variant.APPROX)


def influence_over_set(
    models: Sequence[ChainModel] | Iterable[ChainModel],
    shape: QuiltShape,
    method: Variant = Variant.EXACT,
) -> InfluenceValue:
    """Largest influence over a collection of candidate chain models.

    This is the quantity a quilt must control when the adversary's belief
    is only known to lie in the collection.
    """
    models = list(models)
    if not models:
        raise EmptyThetaSet("need at least one chain model")
    if method is Variant.EXACT:
        worst = max(exact_max_influence(m, shape).value for m in models)
    else:
        worst = max(approx_max_influence(spectral(m), shape).value for m in models)
    return InfluenceValue(float(worst), method)
