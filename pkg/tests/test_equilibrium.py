import json

import numpy as np
import pytest

from contention.equilibrium import (
    Conjecture,
    NonEvaluableError,
    PointConjecture,
    all_coalitions,
    best_response_trd,
    conjecture_from_rule,
    deviation_scan,
    ei_dominance_condition,
    find_coalition_deviation,
    is_conjectural_equilibrium,
    is_linearly_consistent,
    is_nash_intervened,
    is_stackelberg,
    pair_coalition_proof,
)
from contention.game import GameSpec, payoff
from contention.intervention import AggregateRule, NoiseRobustRule, QuantizedTRDRule, TRDRule, intervened_payoff
from contention.search import SearchBudget

from oracles import argmax_dense, max_unilateral_gain, pair_deviation_exists, user_payoff_under_trd


def brute_is_equilibrium(k, t, p):
    """Unilateral deviation scan per unit of valuation."""
    kn = np.ones(len(t))
    return max_unilateral_gain(kn, t, p) <= 1e-9


class TestBestResponse:
    def test_target_reply_to_target(self):
        t = (0.2, 0.3, 0.4)
        spec = GameSpec.homogeneous(3)
        for i in range(3):
            br = best_response_trd(spec, t, 3.0, i, np.delete(t, i))
            assert br.kind == "unique"
            assert br.value == pytest.approx(t[i], abs=1e-15)

    def test_adaptive_offset_step(self):
        br = best_response_trd(GameSpec.homogeneous(2), (0.2, 0.2), 5.0, 0, [0.9])
        assert br.value == pytest.approx(0.15)

    def test_saturated_is_indifferent(self):
        spec = GameSpec.homogeneous(2)
        br = best_response_trd(spec, (0.2, 0.2), 2.0, 0, [0.9], current=0.8)
        assert br.indifferent and br.payoff_at == 0.0 and br.value == 0.8
        xs = np.linspace(0, 1, 1001)
        assert np.all(user_payoff_under_trd([1, 1], [0.2, 0.2], [0.8, 0.9], 0, xs, offset=2.0) == 0)
        alt = best_response_trd(spec, (0.2, 0.2), 2.0, 0, [0.9], current=0.8, indifference="formula")
        assert alt.indifferent and 0.0 <= alt.value <= 1.0

    def test_other_user_always_on(self):
        br = best_response_trd(GameSpec.homogeneous(2), (0.5, 0.5), 2.0, 0, [1.0], current=0.3)
        assert br.indifferent and br.value == 0.3

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            best_response_trd(GameSpec.homogeneous(3), (0.2, 0.2, 0.2), 3.0, 0, [0.1])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(21)
        checked = 0
        for _ in range(400):
            n = int(rng.integers(2, 6))
            t = rng.uniform(0.05, 0.95, n)
            k = rng.uniform(0.5, 3, n)
            p = rng.uniform(0, 1, n) * rng.choice([0.3, 1.0])
            offset = float(rng.uniform(0.5, 2 * n))
            i = int(rng.integers(n))
            br = best_response_trd(GameSpec(tuple(k)), t, offset, i, np.delete(p, i))
            if br.indifferent:
                vals = user_payoff_under_trd(k, t, p, i, np.linspace(0, 1, 2001), offset)
                assert np.all(vals == 0)
                continue
            x, fx = argmax_dense(lambda v: user_payoff_under_trd(k, t, p, i, v, offset))
            assert br.value == pytest.approx(x, abs=1e-6)
            assert fx - 1e-12 <= br.payoff_at <= fx + 1e-6 * k[i]
            checked += 1
        assert checked > 100


class TestNashIntervened:
    def test_target(self):
        v = is_nash_intervened(GameSpec.homogeneous(2), (0.2, 0.4), (0.2, 0.4))
        assert v.kind == "target" and v.witness_user is None

    def test_second_class(self):
        spec = GameSpec.homogeneous(2)
        v = is_nash_intervened(spec, (0.2, 0.2), (0.8, 0.9))
        assert v.kind == "second_class"
        assert brute_is_equilibrium(spec.k, [0.2, 0.2], [0.8, 0.9])

    def test_not_equilibrium_with_witness(self):
        spec = GameSpec.homogeneous(2)
        v = is_nash_intervened(spec, (0.2, 0.2), (0.3, 0.3))
        assert v.kind == "not_equilibrium"
        i = v.witness_user
        p = np.array([0.3, 0.3])
        now = user_payoff_under_trd([1, 1], [0.2, 0.2], p, i, p[i])[0]
        then = user_payoff_under_trd([1, 1], [0.2, 0.2], p, i, v.witness_value)[0]
        assert then - now == pytest.approx(v.witness_gain) and v.witness_gain > 1e-9
        d = v.to_dict()
        assert d["class"] == "not_equilibrium" and d["witness"]["user"] == i + 1
        json.dumps(d)

    def test_boundary_profiles(self):
        spec = GameSpec.homogeneous(2)
        assert is_nash_intervened(spec, (0.5, 0.5), (1.0, 1.0)).kind == "boundary_pi_equals_1"
        assert is_nash_intervened(spec, (0.5, 0.5), (1.0, 0.0)).kind == "boundary_pi_equals_1"
        # the sole full-rate user profits from backing off here
        v = is_nash_intervened(spec, (0.5, 0.5), (1.0, 0.1))
        assert v.kind == "not_equilibrium" and v.witness_user == 0
        assert v.witness_value == pytest.approx(0.9)

    def test_boundary_agrees_with_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(60):
            n = int(rng.integers(2, 5))
            t = rng.uniform(0.05, 0.95, n)
            p = rng.uniform(0, 1, n)
            p[rng.integers(n)] = 1.0
            v = is_nash_intervened(GameSpec.homogeneous(n), t, p)
            assert v.is_equilibrium == brute_is_equilibrium(None, t, p), (t, p, v)

    def test_interior_agrees_with_brute_force(self):
        rng = np.random.default_rng(9)
        for trial in range(120):
            n = int(rng.integers(1, 5))
            t = rng.uniform(0.05, 0.6, n)
            kind = trial % 3
            if kind == 0:
                p = rng.uniform(0, 0.99, n)
            elif kind == 1:
                p = t.copy()
            else:
                p = np.minimum(t * rng.uniform(1.0, 4.0, n), 0.99)
            k = rng.uniform(0.5, 3, n)
            v = is_nash_intervened(GameSpec(tuple(k)), t, p)
            assert v.is_equilibrium == brute_is_equilibrium(k, t, p), (t, p, v)


class TestStackelberg:
    def test_trd_at_target(self):
        t = (0.2, 0.3, 0.1)
        assert is_stackelberg(GameSpec((1.0, 2.0, 3.0)), TRDRule(t), t)

    def test_second_class_is_not(self):
        assert not is_stackelberg(GameSpec.homogeneous(2), TRDRule((0.2, 0.2)), (0.8, 0.9))

    def test_noise_rule_is_not(self):
        t = (0.4, 0.5)
        assert not is_stackelberg(GameSpec.homogeneous(2), NoiseRobustRule(t, 0.01), t)

    def test_other_rules_by_scan(self):
        assert is_stackelberg(GameSpec.homogeneous(3), AggregateRule(0.25, 3), (0.25, 0.25, 0.25))
        assert is_stackelberg(GameSpec.homogeneous(2), QuantizedTRDRule((0.4, 0.6), 5), (0.4, 0.6))
        assert is_stackelberg(GameSpec((1.0, 3.0)), TRDRule((0.3, 0.6), offset=2.0), (0.3, 0.6))

    def test_deviation_scan_finds_gain(self):
        # with a too-large offset the target is no longer a best reply
        found = deviation_scan(GameSpec.homogeneous(2), TRDRule((0.3, 0.6), offset=2.5), (0.3, 0.6))
        assert found is not None and found[2] > 0


class TestCoalitions:
    def test_pair_examples(self):
        assert not pair_coalition_proof((0.3, 0.8), 0, 1)
        assert pair_coalition_proof((0.25,) * 4, 1, 3)
        assert pair_coalition_proof((0.5, 0.5), 0, 1)
        with pytest.raises(ValueError):
            pair_coalition_proof((0.3, 0.3), 1, 1)

    def test_worked_example_deviation(self):
        spec = GameSpec.homogeneous(2)
        v = find_coalition_deviation(spec, (0.3, 0.8), (0, 1))
        assert not v.proof
        assert np.all(v.payoffs_after >= v.payoffs_before) and np.any(v.payoffs_after > v.payoffs_before + 1e-9)
        u0 = intervened_payoff(spec, TRDRule((0.3, 0.8)), (0.3, 0.8))
        u1 = intervened_payoff(spec, TRDRule((0.3, 0.8)), (0.25, 0.75))
        np.testing.assert_allclose(u0, [0.06, 0.56], atol=1e-12)
        np.testing.assert_allclose(u1, [0.0625, 0.5625], atol=1e-12)
        assert v.to_dict()["coalition"] == [1, 2]

    def test_equal_shares_pair_proof(self):
        v = find_coalition_deviation(GameSpec.homogeneous(3), (1 / 3,) * 3, (0, 1))
        assert v.proof and v.deviation is None
        assert not pair_deviation_exists([1, 1, 1], [1 / 3] * 3, 0, 1)

    def test_grand_coalition_at_efficient_target(self):
        spec = GameSpec((1.0, 2.0, 3.0))
        t = (1 / 6, 2 / 6, 3 / 6)
        assert find_coalition_deviation(spec, t, (0, 1, 2)).proof

    def test_single_user_coalition_is_nash(self):
        for i in range(3):
            assert find_coalition_deviation(GameSpec.homogeneous(3), (0.2, 0.5, 0.6), (i,)).proof

    def test_empty_coalition(self):
        with pytest.raises(ValueError):
            find_coalition_deviation(GameSpec.homogeneous(2), (0.3, 0.3), ())

    def test_pair_rule_matches_search(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            n = int(rng.integers(2, 5))
            t = rng.uniform(0.05, 0.95, n)
            i, j = rng.choice(n, 2, replace=False)
            spec = GameSpec(tuple(rng.uniform(0.5, 3, n)))
            numeric = find_coalition_deviation(spec, t, (i, j)).proof
            assert pair_coalition_proof(t, i, j) == numeric
            assert numeric == (not pair_deviation_exists(spec.k, t, i, j))

    def test_all_coalitions(self):
        assert len(list(all_coalitions(3))) == 7

    def test_verdict_carries_budget(self):
        budget = SearchBudget(grid=11, starts=1)
        v = find_coalition_deviation(GameSpec.homogeneous(2), (0.3, 0.3), (0, 1), budget)
        assert v.budget == budget and v.to_dict()["budget"]["grid"] == 11


def test_ei_dominance_condition_as_written():
    for t in [(0.2, 0.5), (0.5, 0.5), (0.9, 0.1), (0.1, 0.3, 0.4)]:
        n = len(t)
        for i in range(n):
            rest = np.prod([1 - t[j] for j in range(n) if j != i])
            assert ei_dominance_condition(t, i) == (1 + n - 1 / t[i] < t[i] * rest)
    assert ei_dominance_condition((0.2, 0.5), 0)


class TestConjectures:
    def test_conjecture_clipped(self):
        f = Conjecture(2.0, 1.0)
        assert f(0.5) == 1.0 and f(1.0) == 1.0
        assert Conjecture(0.5, 2.0)(0.5) == 0.0
        with pytest.raises(ValueError):
            Conjecture(0.5, 0.0)

    def test_tangent_conjectures_at_target(self):
        t = (0.2, 0.3, 0.4)
        spec = GameSpec((1.0, 2.0, 3.0))
        rule = TRDRule(t)
        conj = [conjecture_from_rule(rule, t, i, side="right") for i in range(3)]
        assert is_conjectural_equilibrium(spec, rule, t, conj)
        for i, f in enumerate(conj):
            assert is_linearly_consistent(rule, t, i, f, side="right")

    def test_point_conjectures_anywhere(self):
        rng = np.random.default_rng(2)
        spec = GameSpec.homogeneous(3)
        rule = TRDRule((0.2, 0.3, 0.4))
        for _ in range(5):
            p = rng.uniform(0, 0.9, 3)
            conj = [PointConjecture(p[i], float((1 - rule.evaluate(p)) * np.prod(np.delete(1 - p, i)))) for i in range(3)]
            assert is_conjectural_equilibrium(spec, rule, p, conj)

    def test_correct_but_not_optimal(self):
        t = (0.2, 0.2)
        rule = TRDRule(t)
        p = (0.1, 0.2)
        conj = [conjecture_from_rule(rule, p, i, side="left") for i in range(2)]
        assert not is_conjectural_equilibrium(GameSpec.homogeneous(2), rule, p, conj)

    def test_mismatched_value(self):
        t = (0.2, 0.3)
        rule = TRDRule(t)
        conj = [conjecture_from_rule(rule, t, i, side="right") for i in range(2)]
        conj[0] = Conjecture(conj[0].a + 0.01, conj[0].b)
        assert not is_conjectural_equilibrium(GameSpec.homogeneous(2), rule, t, conj)

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            is_conjectural_equilibrium(GameSpec.homogeneous(2), TRDRule((0.2, 0.3)), (0.2, 0.3), [Conjecture(1, 1)])

    def test_linear_consistency_in_open_region(self):
        t = np.array([0.2, 0.3])
        rule = TRDRule(tuple(t))
        p = np.array([0.25, 0.3])  # h = 0.25
        f = conjecture_from_rule(rule, p, 0)
        assert is_linearly_consistent(rule, p, 0, f)
        assert not is_linearly_consistent(rule, p, 0, Conjecture(f.a, f.b * 1.5))

    def test_kink_is_not_evaluable(self):
        t = (0.2, 0.3)
        rule = TRDRule(t)
        f = conjecture_from_rule(rule, t, 0, side="right")
        with pytest.raises(NonEvaluableError):
            is_linearly_consistent(rule, t, 0, f)
