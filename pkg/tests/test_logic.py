import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wecl.logic import (
    Atom,
    Compound,
    Const,
    Literal,
    Rule,
    Var,
    apply_substitution,
    apply_term,
    compose,
    term_vars,
    theta_equivalent,
    theta_subsumes,
    variabilize,
)
from wecl.parsing import parse_modes, parse_rules

from _instances import random_theory


def rule(text: str) -> Rule:
    return parse_rules(text)[0]


TABLE_MODES = parse_modes(
    """
    modeh(initiatedAt(move(+person,+person),+time)).
    modeb(happensAt(walk(+person),+time)).
    modeb(close(+person,+person,#dist,+time)).
    """
)


def naive_subsumes(r1: Rule, r2: Rule) -> bool:
    """Try every mapping of r1's variables onto r2's terms."""
    v1 = sorted(r1.variables(), key=lambda v: v.name)
    terms = set()
    for a in [r2.head] + [lit.atom for lit in r2.body]:
        for arg in a.args:
            terms.add(arg)
            if isinstance(arg, Compound):
                terms.update(arg.args)
    body2 = set(r2.body)
    for image in itertools.product(sorted(terms, key=str), repeat=len(v1)):
        theta = dict(zip(v1, image))
        r = apply_substitution(r1, theta)
        if r.head == r2.head and set(r.body) <= body2:
            return True
    return False


class TestSubsumption:
    def test_subset_body_subsumes(self):
        r1 = rule("initiatedAt(a,T) :- happensAt(b,T).")
        r2 = rule("initiatedAt(a,T) :- happensAt(b,T), holdsAt(a,T).")
        assert theta_subsumes(r1, r2)
        assert not theta_subsumes(r2, r1)

    def test_reflexive(self):
        r = rule("initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T).")
        assert theta_subsumes(r, r)

    def test_different_events(self):
        r1 = rule("initiatedAt(a,T) :- happensAt(c,T).")
        r2 = rule("initiatedAt(a,T) :- happensAt(b,T).")
        assert not theta_subsumes(r1, r2)
        assert naive_subsumes(r1, r2) is False

    def test_variable_merge(self):
        # X and Y may both map to X
        general = rule("initiatedAt(move(X,X),T) :- happensAt(walk(X),T), happensAt(walk(Y),T).")
        specific = rule("initiatedAt(move(X,X),T) :- happensAt(walk(X),T).")
        assert theta_subsumes(general, specific)
        assert theta_equivalent(general, specific)

    def test_negation_matters(self):
        r1 = rule("terminatedAt(a,T) :- happensAt(b,T), not happensAt(c,T).")
        r2 = rule("terminatedAt(a,T) :- happensAt(b,T), happensAt(c,T).")
        assert not theta_subsumes(r1, r2)

    def test_against_naive_oracle(self):
        texts = [
            "initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T).",
            "initiatedAt(move(X,Y),T) :- happensAt(walk(Y),T), happensAt(walk(X),T), close(Y,X,25,T).",
            "initiatedAt(move(X,X),T) :- happensAt(walk(X),T).",
            "initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), close(X,Y,25,T).",
            "initiatedAt(move(X,Y),T) :- close(X,Y,25,T), close(Y,X,25,T).",
            "initiatedAt(move(X,Y),T) :- close(X,Y,30,T).",
        ]
        rules = [rule(t) for t in texts]
        for r1, r2 in itertools.product(rules, repeat=2):
            assert theta_subsumes(r1, r2) == naive_subsumes(r1, r2), (r1, r2)


class TestSubstitution:
    def test_empty_substitution(self):
        r = rule("1.283 initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), close(X,Y,25,T).")
        assert apply_substitution(r, {}).key() == r.key()

    def test_partial_grounding(self):
        r = rule("1.283 initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), close(X,Y,25,T).")
        g = apply_substitution(r, {Var("X"): Const("id1")})
        assert str(g.head) == "initiatedAt(move(id1,Y),T)"
        assert str(g.body[1]) == "close(id1,Y,25,T)"
        assert g.weight == r.weight

    @settings(max_examples=200)
    @given(
        st.dictionaries(st.sampled_from("XYZ"), st.sampled_from(["a", "b", "X", "Y", "f"]), max_size=3),
        st.dictionaries(st.sampled_from("XYZ"), st.sampled_from(["c", "d", "Z", "X"]), max_size=3),
    )
    def test_compose_matches_sequential(self, d1, d2):
        def mk(v):
            if v == "f":
                return Compound("f", (Var("Z"),))
            return Var(v) if v.isupper() else Const(v)

        s1 = {Var(k): mk(v) for k, v in d1.items()}
        s2 = {Var(k): mk(v) for k, v in d2.items()}
        r = rule("initiatedAt(move(X,Y),T) :- happensAt(walk(Z),T), close(X,Y,25,T).")
        seq = apply_substitution(apply_substitution(r, s1), s2)
        once = apply_substitution(r, compose(s1, s2))
        assert seq.key() == once.key()

    @given(st.dictionaries(st.sampled_from("XYZT"), st.sampled_from(["a", "b", "c"]), max_size=4))
    def test_preserves_signatures(self, d):
        r = rule("initiatedAt(move(X,Y),T) :- happensAt(walk(Z),T), not close(X,Y,25,T).")
        g = apply_substitution(r, {Var(k): Const(v) for k, v in d.items()})
        assert g.head.signature == r.head.signature
        assert [l.atom.signature for l in g.body] == [l.atom.signature for l in r.body]
        assert [l.negated for l in g.body] == [l.negated for l in r.body]


class TestVariabilize:
    def test_table_shape(self):
        ground = rule("initiatedAt(move(id1,id2),5) :- happensAt(walk(id1),5).")
        lifted = variabilize(ground, TABLE_MODES)
        assert lifted.clause_str() == "initiatedAt(move(X,Y),T) :- happensAt(walk(X),T)."

    def test_constants_kept(self):
        ground = rule("initiatedAt(move(id1,id2),5) :- close(id1,id2,25,5), happensAt(walk(id2),5).")
        lifted = variabilize(ground, TABLE_MODES)
        assert lifted.clause_str() == "initiatedAt(move(X,Y),T) :- close(X,Y,25,T), happensAt(walk(Y),T)."

    def test_empty_body(self):
        ground = rule("initiatedAt(move(id1,id2),3).")
        lifted = variabilize(ground, TABLE_MODES)
        assert lifted.clause_str() == "initiatedAt(move(X,Y),T)."

    def test_unmatched_literal_dropped(self, caplog):
        ground = rule("initiatedAt(move(id1,id2),5) :- happensAt(run(id1),5), happensAt(walk(id1),5).")
        lifted = variabilize(ground, TABLE_MODES)
        assert [str(l) for l in lifted.body] == ["happensAt(walk(X),T)"]
        assert "no matching body mode" in caplog.text

    def test_ground_rule_is_instance(self):
        ground = rule("initiatedAt(move(id1,id2),5) :- happensAt(walk(id1),5), happensAt(walk(id2),5), close(id1,id2,25,5).")
        lifted = variabilize(ground, TABLE_MODES)
        assert theta_subsumes(lifted, ground)

    def test_head_without_mode(self):
        with pytest.raises(ValueError):
            variabilize(rule("terminatedAt(move(id1,id2),5)."), TABLE_MODES)


class TestRuleInvariants:
    def test_bad_head(self):
        with pytest.raises(ValueError):
            Rule(Atom("holdsAt", (Const("a"), Var("T"))))

    def test_size_and_vars(self):
        r = rule("initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), close(X,Y,25,T).")
        assert r.size() == 3
        assert {v.name for v in r.variables()} == {"X", "Y", "T"}

    def test_literal_str(self):
        lit = Literal(Atom("close", (Var("X"), Var("Y"), Const("30"), Var("T"))), True)
        assert str(lit) == "not close(X,Y,30,T)"

    def test_term_vars_nested(self):
        t = Compound("f", (Var("X"), Compound("g", (Var("Y"), Const("c")))))
        assert {v.name for v in term_vars(t)} == {"X", "Y"}
        assert apply_term(t, {Var("Y"): Const("k")}) == Compound("f", (Var("X"), Compound("g", (Const("k"), Const("c")))))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_subsumption_preorder(seed):
    rng = np.random.default_rng(seed)
    rules = random_theory(rng, max_rules=4) + random_theory(rng, max_rules=4)
    for r in rules:
        assert theta_subsumes(r, r)
    for a, b, c in itertools.product(rules[:4], repeat=3):
        if theta_subsumes(a, b) and theta_subsumes(b, c):
            assert theta_subsumes(a, c)
    for a, b in itertools.product(rules[:5], repeat=2):
        assert theta_subsumes(a, b) == naive_subsumes(a, b)
