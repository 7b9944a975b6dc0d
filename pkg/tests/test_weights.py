import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wecl.eventcalc import ground_candidates
from wecl.logic import Const
from wecl.mapinf import map_inference
from wecl.parsing import parse_rules
from wecl.weights import (
    UpdateContext,
    adagrad_update,
    batch_weight_update,
    count_true_groundings,
    grounding_counts,
)

from _instances import base_example, random_theory, random_window, window

CTX = UpdateContext(1.0, 0.01, 1.0)


def hand_update(w, gsq, dg, eta=1.0, lam=0.01, delta=1.0):
    c = delta + math.sqrt(gsq + dg * dg)
    step = w - eta / c * dg
    mag = max(0.0, abs(step) - lam * eta / c)
    return (mag if step >= 0 else -mag), gsq + dg * dg


class TestAdagrad:
    def test_worked_examples(self):
        w, gsq = adagrad_update(0.0, 0.0, 2, CTX)
        assert w == pytest.approx(-(2 / 3 - 0.01 / 3), abs=1e-9)
        assert w == pytest.approx(-0.663333333, abs=1e-9)
        assert gsq == 4
        assert adagrad_update(0.0, 0.0, 0, CTX) == (0.0, 0.0)
        w, _ = adagrad_update(0.5, 0.0, 0, CTX)
        assert w == pytest.approx(0.49, abs=1e-9)

    def test_context_validation(self):
        with pytest.raises(ValueError):
            UpdateContext(eta=0)
        with pytest.raises(ValueError):
            UpdateContext(lam=-1)

    @settings(max_examples=300)
    @given(st.floats(-5, 5), st.floats(0, 100), st.integers(-20, 20))
    def test_matches_formula(self, w, gsq, dg):
        got = adagrad_update(w, gsq, dg, CTX)
        want = hand_update(w, gsq, dg)
        assert got[0] == pytest.approx(want[0], abs=1e-12)
        assert got[1] == want[1]

    @settings(max_examples=300)
    @given(st.floats(-5, 5), st.floats(0, 100), st.integers(1, 20))
    def test_sign(self, w, gsq, dg):
        up, _ = adagrad_update(w, gsq, -dg, CTX)
        down, _ = adagrad_update(w, gsq, dg, CTX)
        assert down < w or down == 0.0
        assert up > w or (up == 0.0 and w < 0)

    @settings(max_examples=100)
    @given(st.floats(0.05, 5), st.integers(1, 30))
    def test_zero_gradient_shrinks(self, w, steps):
        gsq = 4.0
        for _ in range(steps):
            c = 1 + math.sqrt(gsq)
            new, gsq2 = adagrad_update(w, gsq, 0, CTX)
            assert gsq2 == gsq
            assert new == pytest.approx(max(0.0, w - 0.01 / c), abs=1e-12)
            w = new

    @settings(max_examples=200)
    @given(st.floats(-3, 3), st.floats(0, 10), st.floats(10, 1000), st.integers(-10, 10))
    def test_adaptive_rate(self, w, small, large, dg):
        a, _ = adagrad_update(w, small, dg, UpdateContext(lam=0))
        b, _ = adagrad_update(w, large, dg, UpdateContext(lam=0))
        assert abs(b - w) <= abs(a - w) + 1e-12


class TestCounts:
    def test_base_rule(self):
        rules, interp = base_example()
        state = map_inference(rules, interp).state()
        assert grounding_counts(rules[0], state, interp) == (1, 0)
        assert count_true_groundings(rules[1], state, interp) == 1
        # d at 8 does not initiate a in the MAP state
        assert grounding_counts(rules[2], state, interp) == (0, 1)

    def test_vacuous_termination(self):
        [r] = parse_rules("terminatedAt(a,T) :- happensAt(c,T).")
        assert grounding_counts(r, frozenset(), window("happensAt(c,3).", 0, 5)) == (1, 0)

    def test_upper_bound(self):
        [r] = parse_rules("terminatedAt(a,T) :- happensAt(c,T).")
        assert grounding_counts(r, frozenset(), window("happensAt(c,3).", 0, 5), hi=3) == (0, 0)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000))
    def test_against_naive(self, seed):
        rng = np.random.default_rng(seed)
        rules, interp = random_theory(rng), random_window(rng)
        state = frozenset(
            (Const(f), t) for f in "ab" for t in range(interp.start, interp.end + 2) if rng.random() < 0.5
        )
        for r in rules:
            true = false = 0
            for t in interp.times:
                # the random theories have ground heads, so at most one grounding per time
                gs = [g for g in ground_candidates(r, interp) if g.time == t]
                if not gs:
                    continue
                body = all(((f, t) in state) == v for f, v in gs[0].alternatives[0]) if gs[0].alternatives else True
                if not body:
                    continue
                if ((gs[0].fluent, t + 1) in state) == r.is_initiation:
                    true += 1
                else:
                    false += 1
            assert grounding_counts(r, state, interp) == (true, false)


class TestBatchUpdate:
    def test_equal_states(self):
        rules, interp = base_example()
        state = map_inference(rules, interp).state()
        before = [r.weight for r in rules]
        gaps = batch_weight_update(rules, state, state, interp, UpdateContext(lam=0))
        assert set(gaps.values()) == {0}
        assert [r.weight for r in rules] == before

    def test_false_positive_rule_demoted(self):
        [r] = parse_rules("0.5 initiatedAt(a,T) :- happensAt(b,T).")
        interp = window("happensAt(b,2).", 0, 5, fluents=("a",))
        pred = map_inference([r], interp).state()
        gaps = batch_weight_update([r], pred, frozenset(), interp, CTX)
        assert gaps[r.id] == 1
        assert r.weight < 0.5

    def test_false_negative_rule_promoted(self):
        [r] = parse_rules("-0.5 initiatedAt(a,T) :- happensAt(b,T).")
        interp = window("happensAt(b,2).", 0, 5, fluents=("a",))
        truth = frozenset((Const("a"), t) for t in range(3, 7))
        pred = map_inference([r], interp).state()
        gaps = batch_weight_update([r], pred, truth, interp, CTX)
        assert gaps[r.id] == -1
        assert r.weight > -0.5
        assert r.stats.grad_sq_sum == 1
