"""Brute-force privacy verification on small instances.

Everything here works by exhaustive enumeration of the k^T trajectories,
so results are exact up to floating point rather than sampled. Output laws
of Laplace releases are finite mixtures; the log ratio of two such
mixtures is piecewise monotone between mixture centers (substituting
t = exp(2w/sigma) turns each piece into a Mobius function of t), so suprema
over the real line are attained at the centers or in the two tail limits.
Joint releases extend this coordinate by coordinate: the supremum over the
plane sits on the grid of per-release centers plus limit rays.

Ratio evaluations rescale each kernel by a reference anchored to the
evaluation point, which cancels in matched ratios and keeps everything
inside floating range even for tiny noise scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .chains import ChainModel, marginal, validate
from .errors import SupportMismatch, TooLarge
from .influence import QuiltShape, Variant
from .mechanism import Framework, LipschitzQuery, ReleaseRecord, Window, quilt_scores

__all__ = [
    "enumerate_sequences",
    "sequence_probs",
    "OutputDensity",
    "conditional_density",
    "MixtureDensity",
    "joint_conditional_mixture",
    "product_of_marginals",
    "estimate_max_divergence",
    "max_divergence_over_secrets",
    "EmpiricalEpsilon",
    "Witness",
    "empirical_epsilon",
    "reevaluate_witness",
    "release_values",
    "enumerated_max_influence",
    "RemoteBoundReport",
    "check_joint_remote_bound",
    "CounterexampleReport",
    "verify_counterexample",
]

ENUMERATION_LIMIT = 10**6
"""Refuse to enumerate more trajectories than this."""


def enumerate_sequences(k: int, T: int, limit: int = ENUMERATION_LIMIT) -> NDArray[np.int64]:
    """All k^T trajectories, one per row, in lexicographic order.

    The last time step varies fastest. Raises ``TooLarge`` when the table
    would exceed ``limit`` rows.
    """
    total = k**T
    if total > limit:
        raise TooLarge(f"{k}^{T} = {total} trajectories exceeds limit {limit}")
    idx = np.arange(total)
    seqs = np.empty((total, T), dtype=np.int64)
    for t in range(T):
        seqs[:, t] = (idx // k ** (T - 1 - t)) % k
    return seqs


def sequence_probs(model: ChainModel, seqs: NDArray[np.int64]) -> NDArray[np.float64]:
    """Probability of each enumerated trajectory under the model."""
    model = validate(model)
    probs = model.initial[seqs[:, 0]].copy()
    for t in range(1, seqs.shape[1]):
        probs *= model.transition[seqs[:, t - 1], seqs[:, t]]
    return probs


def _infer_horizon(n_values: int, k: int) -> int:
    """Recover T from a value table of size k^T."""
    T, total = 0, 1
    while total < n_values:
        total *= k
        T += 1
    if total != n_values or T == 0:
        raise SupportMismatch(
            f"value table of size {n_values} is not a positive power of {k}"
        )
    return T


# ----------------------------------------------------------- output densities


@dataclass(frozen=True)
class OutputDensity:
    """Law of one Laplace release conditioned on a secret.

    A finite mixture: ``breakpoints`` are the distinct query values over
    trajectories consistent with the secret, ``weights`` the posterior
    mass on each, ``scale`` the Laplace scale.
    """

    breakpoints: NDArray[np.float64]
    weights: NDArray[np.float64]
    scale: float

    def density(self, w: float) -> float:
        """Exact density value at a point."""
        kerns = np.exp(-np.abs(w - self.breakpoints) / self.scale) / (2 * self.scale)
        return float(self.weights @ kerns)


def conditional_density(
    model: ChainModel,
    values: NDArray[np.float64],
    sigma: float,
    node: int,
    state: int,
    limit: int = ENUMERATION_LIMIT,
) -> OutputDensity:
    """Output law of ``values(X) + Laplace(sigma)`` given ``X_node = state``.

    ``values`` holds the (already scaled) query value of every enumerated
    trajectory, in :func:`enumerate_sequences` order.
    """
    model = validate(model)
    values = np.asarray(values, dtype=float)
    seqs = enumerate_sequences(model.k, _infer_horizon(values.size, model.k), limit)
    probs = sequence_probs(model, seqs)
    mask = seqs[:, node - 1] == state
    mass = probs[mask].sum()
    if mass <= 0:
        raise SupportMismatch(f"secret X_{node}={state} has probability zero")
    centers, inverse = np.unique(values[mask], return_inverse=True)
    weights = np.zeros(centers.size)
    np.add.at(weights, inverse, probs[mask] / mass)
    return OutputDensity(centers, weights, float(sigma))


@dataclass(frozen=True)
class MixtureDensity:
    """Joint law of several Laplace releases as a finite mixture.

    Atom ``x`` contributes weight ``weights[x]`` at center vector
    ``centers[x, :]``; coordinate ``j`` carries scale ``scales[j]``.
    Weights may sum to less than one when the mixture is a joint law with
    a discrete event rather than a conditional law.
    """

    weights: NDArray[np.float64]
    centers: NDArray[np.float64]
    scales: NDArray[np.float64]

    @property
    def m(self) -> int:
        return int(self.scales.size)


def _factor_rows(
    centers: NDArray[np.float64],
    sigma: float,
    points: Sequence[float],
    anchor: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Kernel factors per evaluation point, rescaled by a shared anchor.

    ``points`` may contain ``inf`` and ``-inf`` for the tail limits, where
    the kernel is replaced by its directional coefficient. The anchor set
    fixes the rescaling reference per point; ratios of mixtures evaluated
    with the same anchor are unaffected by it.
    """
    out = np.empty((len(points), centers.size))
    for g, w in enumerate(points):
        if w == math.inf:
            out[g] = np.exp((centers - anchor.max()) / sigma)
        elif w == -math.inf:
            out[g] = np.exp((anchor.min() - centers) / sigma)
        else:
            ref = np.abs(w - anchor).min()
            out[g] = np.exp(-(np.abs(w - centers) - ref) / sigma)
    return out


def _grid_points(center_sets: Sequence[NDArray[np.float64]]) -> list[float]:
    merged = np.unique(np.concatenate([np.asarray(c, dtype=float) for c in center_sets]))
    return [-math.inf] + [float(v) for v in merged] + [math.inf]


def _mixture_on_grid(
    mix: MixtureDensity,
    grids: Sequence[Sequence[float]],
    anchors: Sequence[NDArray[np.float64]],
) -> NDArray[np.float64]:
    """Evaluate (up to per-point anchors) the mixture on a grid product."""
    factors = [
        _factor_rows(mix.centers[:, j], float(mix.scales[j]), grids[j], anchors[j])
        for j in range(mix.m)
    ]
    letters = [chr(ord("a") + j) for j in range(mix.m)]
    subs = ",".join(f"{letter}x" for letter in letters) + ",x->" + "".join(letters)
    return np.einsum(subs, *factors, mix.weights)


def joint_conditional_mixture(
    model: ChainModel,
    releases: Sequence[tuple[NDArray[np.float64], float]],
    node: int,
    state: int,
    limit: int = ENUMERATION_LIMIT,
) -> MixtureDensity:
    """Joint law of several releases given ``X_node = state``.

    Noise draws are independent given the trajectory, so the joint law is
    one mixture over trajectories with product-Laplace kernels, not the
    product of the per-release mixtures.
    """
    model = validate(model)
    values0 = np.asarray(releases[0][0], dtype=float)
    seqs = enumerate_sequences(model.k, _infer_horizon(values0.size, model.k), limit)
    probs = sequence_probs(model, seqs)
    mask = seqs[:, node - 1] == state
    mass = probs[mask].sum()
    if mass <= 0:
        raise SupportMismatch(f"secret X_{node}={state} has probability zero")
    centers = np.column_stack([np.asarray(v, dtype=float)[mask] for v, _ in releases])
    scales = np.array([s for _, s in releases], dtype=float)
    return MixtureDensity(probs[mask] / mass, centers, scales)


def product_of_marginals(mix: MixtureDensity) -> MixtureDensity:
    """The independent-coordinates counterpart of a two-release mixture."""
    if mix.m != 2:
        raise SupportMismatch(f"product construction needs 2 releases, got {mix.m}")
    w = np.outer(mix.weights, mix.weights).ravel()
    c1 = np.repeat(mix.centers[:, 0], mix.weights.size)
    c2 = np.tile(mix.centers[:, 1], mix.weights.size)
    return MixtureDensity(w, np.column_stack([c1, c2]), mix.scales.copy())


def estimate_max_divergence(
    joint: MixtureDensity, product: MixtureDensity
) -> float:
    """Exact max divergence (both directions) between two mixtures.

    Both mixtures must carry the same release count and scales; the grid
    is the union of their centers per coordinate plus tail limits, which
    is exactly where the piecewise-monotone ratio can peak.
    """
    if joint.m != product.m or not np.allclose(joint.scales, product.scales):
        raise SupportMismatch("mixtures disagree on release count or scales")
    anchors = [
        np.concatenate([joint.centers[:, j], product.centers[:, j]])
        for j in range(joint.m)
    ]
    grids = [_grid_points([a]) for a in anchors]
    top = _mixture_on_grid(joint, grids, anchors)
    bot = _mixture_on_grid(product, grids, anchors)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.abs(np.log(top) - np.log(bot))
    return float(np.nanmax(gap))


def max_divergence_over_secrets(
    framework: Framework,
    releases: Sequence[tuple[NDArray[np.float64], float]],
    secret_nodes: Sequence[int] | None = None,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """Worst-case joint-versus-product divergence over models and secrets."""
    nodes = (
        list(secret_nodes)
        if secret_nodes is not None
        else list(range(framework.window.start, framework.window.end + 1))
    )
    worst = 0.0
    for model in framework.models:
        for i in nodes:
            m_i = marginal(model, i)
            for state in range(model.k):
                if m_i[state] <= 0:
                    continue
                joint = joint_conditional_mixture(model, releases, i, state, limit)
                worst = max(
                    worst, estimate_max_divergence(joint, product_of_marginals(joint))
                )
    return worst


# ------------------------------------------------------- empirical epsilon


@dataclass(frozen=True)
class Witness:
    """Where the worst log ratio was found."""

    model_index: int
    node: int
    pair: tuple[int, int]
    point: tuple[float, ...]
    log_ratio: float

    def to_dict(self) -> dict:
        def enc(v: float):
            if v == math.inf:
                return "+inf"
            if v == -math.inf:
                return "-inf"
            return v

        return {
            "model_index": self.model_index,
            "node": self.node,
            "pair": list(self.pair),
            "point": [enc(v) for v in self.point],
            "log_ratio": self.log_ratio,
        }


@dataclass(frozen=True)
class EmpiricalEpsilon:
    """Exact privacy loss of a (joint) release and its witness."""

    value: float
    witness: Witness


def release_values(
    record: ReleaseRecord,
    query: LipschitzQuery,
    seqs: NDArray[np.int64],
) -> tuple[NDArray[np.float64], float]:
    """Scaled query values over full trajectories, plus the noise scale.

    Slices each trajectory to the record's window before evaluating, so
    the result plugs straight into the oracle as one release.
    """
    lo, hi = record.window.start - 1, record.window.end
    vals = np.array([float(query.evaluate(row[lo:hi])) for row in seqs])
    return vals / record.lipschitz_constant, record.sigma_max


def _pair_ratio_tensors(
    probs: NDArray[np.float64],
    seqs: NDArray[np.int64],
    node: int,
    factor_list: list[NDArray[np.float64]],
    m_i: NDArray[np.float64],
    letters_subs: str,
) -> dict[int, NDArray[np.float64]]:
    tensors: dict[int, NDArray[np.float64]] = {}
    for state in np.nonzero(m_i > 0)[0]:
        w = probs * (seqs[:, node - 1] == state) / m_i[state]
        tensors[int(state)] = np.einsum(letters_subs, *factor_list, w)
    return tensors


def empirical_epsilon(
    framework: Framework,
    releases: Sequence[tuple[NDArray[np.float64], float]],
    secret_nodes: Sequence[int] | None = None,
    limit: int = ENUMERATION_LIMIT,
) -> EmpiricalEpsilon:
    """Exact worst-case log ratio of the (joint) output law over secrets.

    ``releases`` pairs per-trajectory scaled values (in enumeration order
    over the full horizon) with noise scales. Secrets default to every
    node of the framework window, under every model; value pairs whose
    conditioning probability is zero are skipped.
    """
    seqs = enumerate_sequences(framework.k, framework.horizon, limit)
    value_arrays = [np.asarray(v, dtype=float) for v, _ in releases]
    sigmas = [float(s) for _, s in releases]
    nodes = (
        list(secret_nodes)
        if secret_nodes is not None
        else list(range(framework.window.start, framework.window.end + 1))
    )
    grids = [_grid_points([v]) for v in value_arrays]
    best = -math.inf
    best_witness: Witness | None = None
    letters = [chr(ord("a") + j) for j in range(len(releases))]
    subs = ",".join(f"{letter}x" for letter in letters) + ",x->" + "".join(letters)
    for mdx, model in enumerate(framework.models):
        probs = sequence_probs(model, seqs)
        factor_list = [
            _factor_rows(value_arrays[j], sigmas[j], grids[j], value_arrays[j])
            for j in range(len(releases))
        ]
        for i in nodes:
            m_i = marginal(model, i)
            tensors = _pair_ratio_tensors(probs, seqs, i, factor_list, m_i, subs)
            live = sorted(tensors.keys())
            for ai in range(len(live)):
                for bi in range(ai + 1, len(live)):
                    a, b = live[ai], live[bi]
                    with np.errstate(divide="ignore", invalid="ignore"):
                        gap = np.abs(np.log(tensors[a]) - np.log(tensors[b]))
                    flat = int(np.nanargmax(gap))
                    val = float(gap.ravel()[flat])
                    if val > best:
                        coords = np.unravel_index(flat, gap.shape)
                        point = tuple(
                            float(grids[j][c]) for j, c in enumerate(coords)
                        )
                        best = val
                        best_witness = Witness(mdx, i, (a, b), point, val)
    assert best_witness is not None, "no live secret pairs found"
    return EmpiricalEpsilon(best, best_witness)


def reevaluate_witness(
    framework: Framework,
    releases: Sequence[tuple[NDArray[np.float64], float]],
    witness: Witness,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """Recompute the log ratio at a witness point from scratch."""
    seqs = enumerate_sequences(framework.k, framework.horizon, limit)
    model = framework.models[witness.model_index]
    probs = sequence_probs(model, seqs)
    m_i = marginal(model, witness.node)
    a, b = witness.pair
    fac_prod = np.ones(seqs.shape[0])
    for j, (values, sigma) in enumerate(releases):
        values = np.asarray(values, dtype=float)
        fac_prod *= _factor_rows(values, float(sigma), [witness.point[j]], values)[0]
    wa = probs * (seqs[:, witness.node - 1] == a) / m_i[a]
    wb = probs * (seqs[:, witness.node - 1] == b) / m_i[b]
    return float(abs(math.log(float(fac_prod @ wa)) - math.log(float(fac_prod @ wb))))


# ------------------------------------------------- set influence by counting


def enumerated_max_influence(
    model: ChainModel,
    node: int,
    node_set: Sequence[int],
    limit: int = ENUMERATION_LIMIT,
    horizon: int | None = None,
) -> float:
    """Max-influence of ``X_node`` on arbitrary nodes, by joint counting.

    Groups trajectories by their realization on ``node_set`` and compares
    conditional masses across value pairs at ``node``. Realizations that
    are impossible under both values are skipped; possible under exactly
    one gives ``inf``.
    """
    model = validate(model)
    T = horizon if horizon is not None else max([node, *node_set])
    seqs = enumerate_sequences(model.k, T, limit)
    probs = sequence_probs(model, seqs)
    m_i = marginal(model, node)
    live = np.nonzero(m_i > 0)[0]
    if live.size < 2:
        return 0.0
    if not node_set:
        return 0.0
    cols = [n - 1 for n in sorted(node_set)]
    _, group = np.unique(seqs[:, cols], axis=0, return_inverse=True)
    n_groups = int(group.max()) + 1
    cond = np.zeros((live.size, n_groups))
    for row, state in enumerate(live):
        mask = seqs[:, node - 1] == state
        np.add.at(cond[row], group[mask], probs[mask] / m_i[state])
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(cond)
        diff = logs[:, None, :] - logs[None, :, :]
    return float(np.fmax(np.nanmax(diff), 0.0))


# ----------------------------------------------------- joint remote bound


@dataclass(frozen=True)
class RemoteBoundReport:
    """Outcome of checking the release jointly with far-away nodes.

    For every node, conditioning additionally on any realization of the
    nodes outside the winning quilt's nearby set must stay within the
    budget. ``margin`` is ``budget - worst log ratio`` (negative = failed).
    """

    passed: bool
    epsilon: float
    sigma_max: float
    worst_log_ratio: float
    witness: dict

    @property
    def margin(self) -> float:
        return self.epsilon - self.worst_log_ratio

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "epsilon": self.epsilon,
            "sigma_max": self.sigma_max,
            "worst_log_ratio": self.worst_log_ratio,
            "witness": self.witness,
        }


def _nearby_local_nodes(shape, L: int) -> set[int]:
    i = shape.node
    if shape.is_two_sided:
        return set(range(i - shape.left + 1, i + shape.right))
    if shape.left is not None:
        return set(range(i - shape.left + 1, L + 1))
    if shape.right is not None:
        return set(range(1, i + shape.right))
    return set(range(1, L + 1))


def check_joint_remote_bound(
    framework: Framework,
    query: LipschitzQuery,
    epsilon: float,
    variant: Variant = Variant.EXACT,
    tol: float = 1e-9,
    limit: int = ENUMERATION_LIMIT,
    check_epsilon: float | None = None,
) -> RemoteBoundReport:
    """Verify the budget holds jointly with every remote realization.

    Runs the quilt search, then for each model and node conditions on each
    realization of the nodes outside the winning quilt's nearby set and
    checks the output-law ratio against ``exp(epsilon)`` on the exact
    evaluation grid. ``check_epsilon`` verifies against a different budget
    than the one the noise was calibrated for (the bound is monotone in
    it); by default both are the same.
    """
    sigma_max, active = quilt_scores(framework, epsilon, variant)
    budget = epsilon if check_epsilon is None else check_epsilon
    L = framework.window.length
    offset = framework.window.start - 1
    worst = -math.inf
    witness: dict = {}
    for mdx, base in enumerate(framework.models):
        model = framework.window_model(base)
        seqs = enumerate_sequences(model.k, L, limit)
        probs = sequence_probs(model, seqs)
        values = (
            np.array([float(query.evaluate(row)) for row in seqs])
            / query.lipschitz_constant
        )
        for aq in active[mdx]:
            i_local = aq.node - offset
            shape = aq.shape
            local_shape_nodes = _nearby_local_nodes(
                QuiltShape(i_local, shape.left, shape.right), L
            )
            remote = sorted(set(range(1, L + 1)) - local_shape_nodes)
            m_i = probs @ (seqs[:, i_local - 1][:, None] == np.arange(model.k))
            live = np.nonzero(m_i > 0)[0]
            if live.size < 2:
                continue
            if remote:
                _, group = np.unique(
                    seqs[:, [n - 1 for n in remote]], axis=0, return_inverse=True
                )
            else:
                group = np.zeros(seqs.shape[0], dtype=np.int64)
            n_groups = int(group.max()) + 1
            anchor = values
            grid = _grid_points([values])
            fac = _factor_rows(values, sigma_max, grid, anchor)
            for g in range(n_groups):
                in_group = group == g
                masses = {}
                for state in live:
                    w = probs * ((seqs[:, i_local - 1] == state) & in_group)
                    masses[int(state)] = (w / m_i[state]) @ fac.T
                for ai in range(live.size):
                    for bi in range(live.size):
                        if ai == bi:
                            continue
                        a, b = int(live[ai]), int(live[bi])
                        top, bot = masses[a], masses[b]
                        both_zero = (top == 0) & (bot == 0)
                        with np.errstate(divide="ignore", invalid="ignore"):
                            ratio = np.log(top) - np.log(bot)
                        ratio[both_zero] = -math.inf
                        val = float(ratio.max())
                        if val > worst:
                            worst = val
                            gdx = int(ratio.argmax())
                            witness = {
                                "model_index": mdx,
                                "node": aq.node,
                                "pair": [a, b],
                                "remote_nodes": [n + offset for n in remote],
                                "realization_group": g,
                                "point": grid[gdx]
                                if math.isfinite(grid[gdx])
                                else ("+inf" if grid[gdx] > 0 else "-inf"),
                                "log_ratio": val,
                            }
    return RemoteBoundReport(
        passed=worst <= budget + tol,
        epsilon=float(budget),
        sigma_max=float(sigma_max),
        worst_log_ratio=float(worst),
        witness=witness,
    )


# ------------------------------------------------------------ counterexample


@dataclass(frozen=True)
class CounterexampleReport:
    """Two-node demonstration that budgets of dependent-data releases
    need not add.

    ``single_squared`` holds the two candidate values of the squared
    worst single-release ratio divided by ``e^2``; ``joint_diagonal`` the
    matching candidates for the joint of two releases. The verdict
    compares their maxima: when the joint maximum exceeds the squared
    single maximum, running the release twice leaks more than twice the
    single-run budget.
    """

    single_squared: tuple[float, float]
    joint_diagonal: tuple[float, float]
    oracle_single_squared: tuple[float, float]
    oracle_joint_diagonal: tuple[float, float]
    epsilon_single: float
    epsilon_joint: float
    violated: bool
    grid_beyond_corners: bool

    @property
    def closed_form_agrees(self) -> bool:
        pairs = list(zip(self.single_squared, self.oracle_single_squared)) + list(
            zip(self.joint_diagonal, self.oracle_joint_diagonal)
        )
        return all(abs(x - y) <= 1e-6 for x, y in pairs)

    def to_dict(self) -> dict:
        return {
            "single_squared": list(self.single_squared),
            "joint_diagonal": list(self.joint_diagonal),
            "oracle_single_squared": list(self.oracle_single_squared),
            "oracle_joint_diagonal": list(self.oracle_joint_diagonal),
            "epsilon_single": self.epsilon_single,
            "epsilon_joint": self.epsilon_joint,
            "violated": self.violated,
            "grid_beyond_corners": self.grid_beyond_corners,
            "closed_form_agrees": self.closed_form_agrees,
        }


def verify_counterexample(p: float = 0.9, q: float = 0.01) -> CounterexampleReport:
    """Check the two-node sequential-composition counterexample.

    The chain starts uniform over two states with transition rows
    ``[1-q, q]`` and ``[1-p, p]``; the released value is the number of
    time steps spent in state 1 with unit Laplace noise. Candidates for
    the worst ratios have closed forms in ``p`` and ``q``; the generic
    enumeration oracle recomputes them from the output laws and must
    agree to near machine precision.
    """
    e = math.e
    cf_single = (
        ((q + e * (1 - q)) / (p + e * (1 - p))) ** 2,
        ((e * p + (1 - p)) / (e * q + (1 - q))) ** 2,
    )
    cf_joint = (
        (q + e**2 * (1 - q)) / (p + e**2 * (1 - p)),
        (e**2 * p + (1 - p)) / (e**2 * q + (1 - q)),
    )
    model = ChainModel.from_arrays([0.5, 0.5], [[1 - q, q], [1 - p, p]])
    seqs = enumerate_sequences(2, 2)
    values = seqs.sum(axis=1).astype(float)
    probs = sequence_probs(model, seqs)
    m1 = marginal(model, 1)

    def tail_ratio(point: float, n_rel: int) -> float:
        """log [p(point... | X_1=1) / p(... | X_1=0)] at a diagonal point."""
        fac = _factor_rows(values, 1.0, [point], values)[0] ** n_rel
        w1 = probs * (seqs[:, 0] == 1) / m1[1]
        w0 = probs * (seqs[:, 0] == 0) / m1[0]
        return math.log(float(fac @ w1)) - math.log(float(fac @ w0))

    oracle_single = (
        math.exp(-2.0 * tail_ratio(-math.inf, 1)) / e**2,
        math.exp(2.0 * tail_ratio(math.inf, 1)) / e**2,
    )
    oracle_joint = (
        math.exp(-tail_ratio(-math.inf, 2)) / e**2,
        math.exp(tail_ratio(math.inf, 2)) / e**2,
    )
    fw = Framework(2, Window(1, 2), (model,))
    eps_single = empirical_epsilon(fw, [(values, 1.0)], secret_nodes=[1]).value
    eps_joint = empirical_epsilon(
        fw, [(values, 1.0), (values, 1.0)], secret_nodes=[1]
    ).value
    corner_max = math.log(e**2 * max(cf_joint))
    return CounterexampleReport(
        single_squared=cf_single,
        joint_diagonal=cf_joint,
        oracle_single_squared=oracle_single,
        oracle_joint_diagonal=oracle_joint,
        epsilon_single=float(eps_single),
        epsilon_joint=float(eps_joint),
        violated=max(cf_joint) > max(cf_single) + 1e-12,
        grid_beyond_corners=eps_joint > corner_max + 1e-9,
    )
