import math
import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fats.casebase import DocumentStats
from fats.ontology import OntologyError
from fats.situation import (
    DimensionWeights,
    ExplorationBounds,
    RiskComponents,
    RiskModel,
    RiskWeights,
    Situation,
    exploration_rate,
    risk_concepts,
    risk_semantic,
    risk_variance,
    situation_risk,
    situation_similarity,
    update_dimension_weights,
    variance_risk,
)
from oracles import PROPERTY_RUNS, situation_triples

invariant = pytest.mark.invariant
UNIFORM = DimensionWeights()
DEFAULT_BOUNDS = ExplorationBounds(0.05, 0.5)


def test_identical_situations(toy):
    s = toy.situation("Office", "Morning", "Alone")
    assert situation_similarity(s, s, UNIFORM, toy) == pytest.approx(1.0, abs=1e-12)


def test_weighted_sum_by_hand(toy):
    a = toy.situation("Office", "Morning", "Alone")
    b = toy.situation("Office", "Afternoon", "Client")
    # per-dimension: 1, 2*2/(3+3), 2*1/(2+3)
    expected = (1.0 + 2 / 3 + 0.4) / 3
    assert situation_similarity(a, b, UNIFORM, toy) == pytest.approx(expected, abs=1e-12)
    assert round(expected, 4) == 0.6889


def test_degenerate_weights_isolate_location(toy):
    a = toy.situation("Home", "Morning", "Alone")
    b = toy.situation("Home", "Weekend", "Client")
    assert situation_similarity(a, b, (1.0, 0.0, 0.0), toy) == 1.0


def test_situation_slot_checks(toy):
    with pytest.raises(OntologyError):
        Situation(toy.time.concept("Morning"), toy.time.concept("Morning"), toy.social.concept("Alone"))


def test_weights_arithmetic_mean():
    w = DimensionWeights()
    w = update_dimension_weights(w, (1.0, 1.0, 1.0))
    w = update_dimension_weights(w, (0.5, 1.0, 1.0))
    assert w.history_count == 2  # t = 3
    assert w.raw[0] == pytest.approx(0.75)
    assert sum(w.alphas) == pytest.approx(1.0)


def test_identical_histories_give_uniform_weights():
    w = DimensionWeights()
    for y in (0.3, 0.9, 0.6):
        w = update_dimension_weights(w, (y, y, y))
    assert w.alphas == pytest.approx((1 / 3, 1 / 3, 1 / 3))


def test_empty_history_is_uniform():
    assert DimensionWeights().alphas == (1 / 3, 1 / 3, 1 / 3)


def test_out_of_range_similarity_is_clamped(caplog):
    w = update_dimension_weights(DimensionWeights(), (1.2, -0.1, 0.5))
    assert w.sums == (1.0, 0.0, 0.5)
    assert "clamped" in caplog.text


def test_risk_concepts(toy):
    assert risk_concepts(toy.situation("Home", "Weekend", "Friends"), toy) == 0.0
    assert risk_concepts(toy.situation("Meeting_Room", "Morning", "Client"), toy) == 1.0
    # Afternoon inherits 0.5 from Workday
    assert risk_concepts(toy.situation("Meeting_Room", "Afternoon", "Friends"), toy) == pytest.approx(0.5)


def test_risk_semantic(toy):
    s = toy.situation("Office", "Morning", "Alone")
    assert risk_semantic(s, [], UNIFORM, toy) == 0.0
    assert risk_semantic(s, [toy.situation("Home", "Weekend", "Friends"), s], UNIFORM, toy) == pytest.approx(1.0)
    far = toy.situation("Home", "Weekend", "Client")  # 0.4 on every dimension
    near = toy.situation("Office", "Afternoon", "Client")
    assert situation_similarity(s, far, UNIFORM, toy) == pytest.approx(0.4)
    assert risk_semantic(s, [far, near], UNIFORM, toy) == pytest.approx(0.6889, abs=1e-4)


def test_risk_variance():
    assert risk_variance([DocumentStats("a", clicks=5, recom=5, last_click=3)]) == 1.0
    assert risk_variance([DocumentStats("a", clicks=5000, fails=5000, recom=10000, last_click=1)]) == 0.0
    assert risk_variance([DocumentStats("a", clicks=1, recom=1, last_click=0)]) == 0.5
    assert risk_variance([]) == 0.5


def test_situation_risk_combination():
    assert RiskComponents(0.0, 0.0, 0.0).combine(RiskWeights()) == 0.0
    assert RiskComponents(0.9, 1.0, 0.8).combine(RiskWeights()) == pytest.approx(0.9, abs=1e-12)
    assert RiskComponents(0.3, 1.0, 0.8).combine(RiskWeights(1.0, 0.0, 0.0)) == 0.3


def test_situation_risk_end_to_end(toy):
    crit = toy.situation("Meeting_Room", "Morning", "Client")
    model = RiskModel(toy, (crit,))
    stats = {"d": DocumentStats("d", clicks=4, recom=4, last_click=2)}
    # R_c = 1, R_m = 1, R_v = 1
    assert situation_risk(crit, model, UNIFORM, stats) == pytest.approx(1.0)


def test_risk_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        RiskWeights(0.5, 0.5, 0.5)


def test_exploration_rate_default_bounds():
    assert exploration_rate(0.0, DEFAULT_BOUNDS) == 0.5
    assert exploration_rate(1.0, DEFAULT_BOUNDS) == pytest.approx(0.05, abs=1e-15)
    assert exploration_rate(0.5, DEFAULT_BOUNDS) == pytest.approx(0.275, abs=1e-15)


@pytest.mark.parametrize("r", [-0.01, 1.01, math.nan])
def test_exploration_rate_rejects_bad_risk(r):
    with pytest.raises(ValueError):
        exploration_rate(r, DEFAULT_BOUNDS)


def test_exploration_bounds_validated():
    with pytest.raises(ValueError):
        ExplorationBounds(0.6, 0.5)


# -- invariants -----------------------------------------------------------


positive_weights = st.builds(
    lambda n, a, b, c: DimensionWeights(n, (a * n, b * n, c * n)),
    st.integers(1, 50),
    st.floats(0.01, 1.0),
    st.floats(0.01, 1.0),
    st.floats(0.01, 1.0),
)


@invariant
@settings(max_examples=PROPERTY_RUNS, deadline=None)
@given(st.data(), positive_weights)
def test_similarity_properties(toy, data, w):
    a = data.draw(situation_triples(toy))
    b = data.draw(situation_triples(toy))
    s_ab = situation_similarity(a, b, w, toy)
    assert s_ab == pytest.approx(situation_similarity(b, a, w, toy), abs=1e-12)
    assert -1e-12 <= s_ab <= 1.0 + 1e-12
    if a.key == b.key:
        assert s_ab == pytest.approx(1.0, abs=1e-12)
    else:
        assert s_ab < 1.0 - 1e-9


@invariant
@settings(max_examples=PROPERTY_RUNS, deadline=None)
@given(st.lists(st.tuples(*[st.floats(0.0, 1.0)] * 3), min_size=0, max_size=60))
def test_weights_normalized_and_match_brute_mean(history):
    w = DimensionWeights()
    for y in history:
        w = update_dimension_weights(w, y)
    assert w.history_count == len(history)
    if history and all(sum(col) > 0 for col in zip(*history)):
        for k in range(3):
            assert w.raw[k] == pytest.approx(statistics.fmean(y[k] for y in history), abs=1e-12)
    if any(any(y) for y in history) or not history:
        assert sum(w.alphas) == pytest.approx(1.0, abs=1e-9)


@invariant
@settings(max_examples=PROPERTY_RUNS, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_exploration_rate_monotone_with_exact_range(lo, hi, r1, r2):
    lo, hi = min(lo, hi), max(lo, hi)
    b = ExplorationBounds(lo, hi)
    r1, r2 = min(r1, r2), max(r1, r2)
    assert exploration_rate(r1, b) >= exploration_rate(r2, b)
    assert lo - 1e-15 <= exploration_rate(r1, b) <= hi + 1e-15
    assert exploration_rate(0.0, b) == hi
    assert exploration_rate(1.0, b) == pytest.approx(lo, abs=1e-15)


@invariant
@settings(max_examples=PROPERTY_RUNS, deadline=None)
@given(
    st.tuples(*[st.floats(0, 1)] * 3),
    st.tuples(*[st.floats(0.0, 1.0)] * 3),
    st.integers(0, 2),
    st.floats(0, 1),
)
def test_situation_risk_monotone(raw_lambdas, comps, which, bump):
    total = sum(raw_lambdas)
    if total == 0:
        raw_lambdas, total = (1.0, 1.0, 1.0), 3.0
    lc, lm = raw_lambdas[0] / total, raw_lambdas[1] / total
    lam = RiskWeights(lc, lm, max(0.0, 1.0 - lc - lm))
    base = RiskComponents(*comps)
    raised = list(comps)
    raised[which] = max(raised[which], bump)
    r0 = base.combine(lam)
    r1 = RiskComponents(*raised).combine(lam)
    assert 0.0 <= r0 <= 1.0
    assert r1 >= r0 - 1e-12


@invariant
@settings(max_examples=PROPERTY_RUNS, deadline=None)
@given(st.lists(st.booleans(), max_size=300), st.randoms(use_true_random=False))
def test_variance_risk_order_invariant(rewards, shuffler):
    shuffled = list(rewards)
    shuffler.shuffle(shuffled)
    ones = sum(rewards)
    got = variance_risk(ones, len(rewards) - ones)
    assert got == variance_risk(sum(shuffled), len(shuffled) - sum(shuffled))
    if len(rewards) >= 2:
        oracle = 1.0 - min(1.0, 4.0 * statistics.variance([float(x) for x in shuffled]))
        assert got == pytest.approx(oracle, abs=1e-12)
    else:
        assert got == 0.5


def test_variance_risk_large_balanced_sample():
    rewards = [1] * 5000 + [0] * 5000
    random.Random(0).shuffle(rewards)
    assert variance_risk(sum(rewards), len(rewards) - sum(rewards)) == 0.0
