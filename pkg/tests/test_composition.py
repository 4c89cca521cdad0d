import math
from types import SimpleNamespace

import numpy as np
import pytest

from mquilt.chains import ChainModel, StateSequence
from mquilt.composition import (
    CompositionRule,
    compose_auto,
    compose_parallel_general,
    compose_parallel_mqm_approx,
    compose_sequential_general,
    compose_sequential_legacy,
    compose_sequential_mqm,
)
from mquilt.errors import (
    EmptyInput,
    MixedFrameworks,
    NegativeE,
    NotApproxVariant,
    OverlappingWindows,
    QuiltMismatch,
)
from mquilt.influence import QuiltShape, Variant, influence_over_set
from mquilt.mechanism import (
    ActiveQuilt,
    Framework,
    ReleaseRecord,
    Window,
    count_state_query,
    release,
)

IND = ChainModel.from_arrays([0.3, 0.7], [[0.3, 0.7], [0.3, 0.7]])
FAST = ChainModel.from_arrays([0.5, 0.5], [[0.6, 0.4], [0.4, 0.6]])
IDENT = ChainModel.from_arrays([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])


def _stub(eps, window=Window(1, 3), shape_args=(1, 1), node=2, variant=Variant.EXACT):
    """A minimal hand-built record for pure budget arithmetic tests."""
    shape = QuiltShape(node, *shape_args)
    return ReleaseRecord(
        variant=variant,
        epsilon=eps,
        sigma_max=1.0,
        output=0.0,
        query_id="count:0",
        lipschitz_constant=1.0,
        seed=0,
        window=window,
        active_quilts={0: (ActiveQuilt(node, shape, 1.0),)},
    )


def _released(eps, win, variant=Variant.EXACT, model=IND, T=5, seed=1):
    fw = Framework(T, Window(*win), (model,))
    data = StateSequence(np.zeros(fw.window.length, dtype=np.int64))
    return release(data, count_state_query(0, 2), eps, fw, variant, seed=seed)


def test_budget_sum_rule():
    recs = [_stub(0.3), _stub(0.5), _stub(0.2)]
    rep = compose_sequential_mqm(recs)
    assert rep.epsilon == pytest.approx(1.0)
    assert rep.rule is CompositionRule.MQM_SEQUENTIAL
    assert rep.rule.value == "thm6"
    assert all(c.passed for c in rep.checks)


def test_budget_sum_rejects_mixed_windows():
    recs = [_stub(0.3), _stub(0.5, window=Window(1, 4))]
    with pytest.raises(MixedFrameworks):
        compose_sequential_mqm(recs)
    with pytest.raises(EmptyInput):
        compose_sequential_mqm([])


def test_legacy_rule_count_times_max():
    recs = [_stub(0.3), _stub(0.5), _stub(0.2)]
    rep = compose_sequential_legacy(recs)
    assert rep.epsilon == pytest.approx(1.5)
    assert rep.rule.value == "thm1"
    rep = compose_sequential_legacy([_stub(0.5), _stub(0.5)])
    assert rep.epsilon == pytest.approx(1.0)


def test_legacy_rule_needs_identical_quilts():
    with pytest.raises(QuiltMismatch):
        compose_sequential_legacy([_stub(0.5), _stub(0.5, shape_args=(None, 1))])
    other = _stub(0.5)
    object.__setattr__(
        other, "active_quilts", {**other.active_quilts, 1: other.active_quilts[0]}
    )
    with pytest.raises(QuiltMismatch):
        compose_sequential_legacy([_stub(0.5), other])


def test_budget_sum_never_exceeds_legacy():
    rng = np.random.default_rng(17)
    for _ in range(30):
        budgets = rng.uniform(0.1, 2.0, size=int(rng.integers(1, 6)))
        recs = [_stub(float(b)) for b in budgets]
        assert (
            compose_sequential_mqm(recs).epsilon
            <= compose_sequential_legacy(recs).epsilon + 1e-12
        )


def test_general_sequential_rule():
    assert compose_sequential_general(0.5, 0.3, 0.0).epsilon == pytest.approx(0.8)
    rep = compose_sequential_general(0.5, 0.5, 0.25)
    assert rep.epsilon == pytest.approx(1.5)
    assert rep.rule.value == "thm5"
    assert math.isinf(compose_sequential_general(0.5, 0.5, math.inf).epsilon)
    with pytest.raises(NegativeE):
        compose_sequential_general(0.5, 0.5, -0.1)
    with pytest.raises(EmptyInput):
        compose_sequential_general(0.0, 0.5, 0.1)


def test_parallel_independent_chain_costs_worst_budget():
    fw = Framework(5, Window(1, 5), (IND,))
    ra = _released(0.5, (1, 2))
    rb = _released(0.7, (4, 5))
    rep = compose_parallel_general(ra, rb, fw)
    assert rep.epsilon == pytest.approx(0.7, abs=1e-12)
    assert rep.rule.value == "thm2"


def test_parallel_deterministic_chain_costs_budget_sum():
    fw = Framework(5, Window(1, 5), (IDENT,))
    ra = _released(0.5, (1, 2), model=IDENT)
    rb = _released(0.5, (4, 5), model=IDENT)
    rep = compose_parallel_general(ra, rb, fw)
    assert rep.epsilon == pytest.approx(1.0, abs=1e-12)


def test_parallel_general_is_order_insensitive():
    model = ChainModel.from_arrays([0.5, 0.5], [[0.7, 0.3], [0.5, 0.5]])
    fw = Framework(6, Window(1, 6), (model,))
    ra = _released(0.9, (1, 2), model=model, T=6)
    rb = _released(0.4, (4, 6), model=model, T=6)
    assert compose_parallel_general(ra, rb, fw).epsilon == pytest.approx(
        compose_parallel_general(rb, ra, fw).epsilon, abs=1e-12
    )


def test_parallel_general_rejects_overlap():
    fw = Framework(6, Window(1, 6), (IND,))
    ra = _released(0.5, (1, 3), T=6)
    rb = _released(0.5, (3, 5), T=6)
    with pytest.raises(OverlappingWindows):
        compose_parallel_general(ra, rb, fw)


def test_parallel_general_pairs_budget_with_crossing_influence():
    # The later window is charged through the backward influence and the
    # earlier one through the forward influence, each clipped by the other
    # record's own budget.
    model = ChainModel.from_arrays([0.5, 0.5], [[0.7, 0.3], [0.5, 0.5]])
    fw = Framework(2, Window(1, 2), (model,))
    ra = _released(12.0, (1, 1), model=model, T=2)
    rb = _released(6.0, (2, 2), model=model, T=2)
    fwd = influence_over_set((model,), QuiltShape(1, None, 1), Variant.EXACT).value
    bwd = influence_over_set((model,), QuiltShape(2, 1, None), Variant.EXACT).value
    assert fwd == pytest.approx(0.5108, abs=5e-4)
    assert bwd == pytest.approx(0.4418, abs=5e-4)
    rep = compose_parallel_general(ra, rb, fw)
    want = max(12.0 + min(6.0, fwd), 6.0 + min(12.0, bwd))
    assert rep.epsilon == pytest.approx(want, abs=1e-12)
    assert rep.epsilon == pytest.approx(12.0 + fwd, abs=1e-12)


def test_parallel_general_worked_numbers(monkeypatch):
    def fake_influence(models, shape, method):
        return SimpleNamespace(value=0.2 if shape.left is None else 0.1)

    monkeypatch.setattr("mquilt.composition.influence_over_set", fake_influence)
    fw = Framework(5, Window(1, 5), (IND,))
    ra = _released(0.5, (1, 2))
    rb = _released(0.5, (4, 5))
    rep = compose_parallel_general(ra, rb, fw)
    assert rep.epsilon == pytest.approx(0.7, abs=1e-12)


def test_approx_parallel_takes_max_when_conditions_hold():
    fw = Framework(60, Window(1, 60), (FAST,))
    ra = _released(8.0, (1, 20), Variant.APPROX, FAST, T=60)
    rb = _released(9.0, (41, 60), Variant.APPROX, FAST, T=60)
    assert any(q.shape.is_two_sided for q in ra.active_quilts[0])
    assert any(q.shape.is_two_sided for q in rb.active_quilts[0])
    rep = compose_parallel_mqm_approx(ra, rb, fw)
    assert rep.epsilon == pytest.approx(9.0, abs=1e-12)
    assert rep.rule.value == "thm3"
    assert all(c.passed for c in rep.checks)


def test_approx_parallel_falls_back_when_gap_is_short():
    fw = Framework(60, Window(1, 60), (FAST,))
    ra = _released(8.0, (1, 20), Variant.APPROX, FAST, T=60)
    rb = _released(9.0, (25, 44), Variant.APPROX, FAST, T=60)
    rep = compose_parallel_mqm_approx(ra, rb, fw)
    assert rep.rule.value == "thm2"
    assert rep.epsilon >= 9.0
    failed = [c.name for c in rep.checks if not c.passed]
    assert failed == ["windows-far-apart"]


def test_approx_parallel_falls_back_without_two_sided_quilts():
    # At this budget the spectral scores make the empty or one-sided quilt
    # win at every node, so the first qualifying condition fails.
    fw = Framework(60, Window(1, 60), (FAST,))
    ra = _released(0.4, (1, 20), Variant.APPROX, FAST, T=60)
    rb = _released(0.4, (41, 60), Variant.APPROX, FAST, T=60)
    assert not any(q.shape.is_two_sided for q in ra.active_quilts[0])
    rep = compose_parallel_mqm_approx(ra, rb, fw)
    assert rep.rule.value == "thm2"
    failed = {c.name for c in rep.checks if not c.passed}
    assert failed == {"two-sided-active-earlier", "two-sided-active-later"}


def test_approx_parallel_requires_approx_records():
    fw = Framework(60, Window(1, 60), (FAST,))
    ra = _released(1.0, (1, 20), Variant.EXACT, FAST, T=60)
    rb = _released(1.0, (41, 60), Variant.APPROX, FAST, T=60)
    with pytest.raises(NotApproxVariant):
        compose_parallel_mqm_approx(ra, rb, fw)


def test_auto_single_record():
    fw = Framework(5, Window(1, 5), (IND,))
    rep = compose_auto([_released(0.6, (1, 5))], fw)
    assert rep.epsilon == pytest.approx(0.6)
    assert rep.rule.value == "thm6"


def test_auto_same_window_sums():
    fw = Framework(5, Window(1, 5), (IND,))
    recs = [_released(0.3, (1, 5), seed=s) for s in (1, 2, 3)]
    rep = compose_auto(recs, fw)
    assert rep.epsilon == pytest.approx(0.9)
    assert rep.rule.value == "thm6"


def test_auto_two_disjoint_routes_by_variant():
    fw = Framework(60, Window(1, 60), (FAST,))
    ra = _released(8.0, (1, 20), Variant.APPROX, FAST, T=60)
    rb = _released(9.0, (41, 60), Variant.APPROX, FAST, T=60)
    assert compose_auto([ra, rb], fw).rule.value == "thm3"
    rc = _released(0.5, (1, 20), Variant.EXACT, FAST, T=60)
    rd = _released(0.5, (41, 60), Variant.EXACT, FAST, T=60)
    assert compose_auto([rc, rd], fw).rule.value == "thm2"


def test_auto_rejects_partial_overlap():
    fw = Framework(6, Window(1, 6), (IND,))
    ra = _released(0.5, (1, 3), T=6)
    rb = _released(0.5, (3, 6), T=6)
    with pytest.raises(OverlappingWindows):
        compose_auto([ra, rb], fw)
    with pytest.raises(EmptyInput):
        compose_auto([], fw)


def test_auto_folds_three_disjoint_windows():
    fw = Framework(5, Window(1, 5), (IND,))
    recs = [
        _released(0.3, (1, 1)),
        _released(0.4, (3, 3)),
        _released(0.5, (5, 5)),
    ]
    rep = compose_auto(recs, fw)
    assert rep.rule.value == "thm2"
    assert rep.checks[0].name == "pairwise-fold"
    # independent chain: nothing crosses windows, so the worst budget wins
    assert rep.epsilon == pytest.approx(0.5, abs=1e-12)


def test_composed_budget_never_below_worst_input():
    rng = np.random.default_rng(23)
    model = ChainModel.from_arrays([0.5, 0.5], [[0.7, 0.3], [0.5, 0.5]])
    fw = Framework(6, Window(1, 6), (model,))
    for _ in range(20):
        ea = float(rng.uniform(0.1, 2.0))
        eb = float(rng.uniform(0.1, 2.0))
        ra = _released(ea, (1, 2), model=model, T=6)
        rb = _released(eb, (5, 6), model=model, T=6)
        par = compose_parallel_general(ra, rb, fw)
        assert par.epsilon >= max(ea, eb) - 1e-12
        same = [_stub(ea), _stub(eb)]
        assert compose_sequential_mqm(same).epsilon >= max(ea, eb) - 1e-12
        assert compose_sequential_legacy(same).epsilon >= max(ea, eb) - 1e-12


def test_report_serialization():
    rep = compose_sequential_mqm([_stub(0.3), _stub(0.2)], ["a", "b"])
    d = rep.to_dict()
    assert d["epsilon"] == pytest.approx(0.5)
    assert d["rule"] == "thm6"
    assert d["inputs"] == ["a", "b"]
    assert all({"name", "passed", "evidence"} <= set(c) for c in d["checks"])
