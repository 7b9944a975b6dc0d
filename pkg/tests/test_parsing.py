import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wecl.logic import Const
from wecl.parsing import (
    ParseError,
    StreamRecord,
    check_tiling,
    format_facts,
    format_modes,
    format_rules,
    format_state,
    load_stream,
    make_batches,
    parse_csv_records,
    parse_facts,
    parse_modes,
    parse_rules,
    parse_state,
    parse_term,
)

MOVE_RULE = (
    "1.283 initiatedAt(move(X,Y),T) :- happensAt(walk(X),T),happensAt(walk(Y),T),"
    "close(X,Y,25,T),orientation(X,Y,45,T)."
)
CAVIAR_FRAGMENT = """\
% time point 1
happensAt(walk(id1),1).
happensAt(walk(id2),1).
coords(id1,201,454,1).
direction(id1,270,1).
holdsAt(move(id1,id2),2).
holdsAt(move(id2,id1),2).
"""


class TestRules:
    def test_weighted_rule(self):
        [r] = parse_rules(MOVE_RULE)
        assert r.weight == 1.283
        assert len(r.body) == 4
        assert str(r.body[2]) == "close(X,Y,25,T)"

    def test_default_weight(self):
        [r] = parse_rules("initiatedAt(a,T) :- happensAt(b,T).")
        assert r.weight == 0.01
        [r] = parse_rules("initiatedAt(a,T) :- happensAt(b,T).", default_weight=0.5)
        assert r.weight == 0.5

    def test_negated_literal(self):
        [r] = parse_rules("0.923 terminatedAt(move(X,Y),T) :- happensAt(inactive(X),T), not close(X,Y,30,T).")
        assert [l.negated for l in r.body] == [False, True]
        assert r.weight == 0.923

    def test_negative_weight_and_ids(self):
        rs = parse_rules("-1 initiatedAt(a,T) :- happensAt(d,T).\n2 initiatedAt(a,T) :- happensAt(b,T).", start_id=7)
        assert [r.weight for r in rs] == [-1.0, 2.0]
        assert [r.id for r in rs] == [7, 8]

    def test_unicode_arrow(self):
        [r] = parse_rules("1 initiatedAt(a,T) ← happensAt(b,T).")
        assert r.clause_str() == "initiatedAt(a,T) :- happensAt(b,T)."

    def test_syntax_error_position(self):
        with pytest.raises(ParseError) as e:
            parse_rules("initiatedAt(a,T) :- happensAt(b,T)\ninitiatedAt(a,T).")
        assert e.value.line == 2

    def test_arity_mismatch(self):
        with pytest.raises(ParseError, match="arity"):
            parse_rules("initiatedAt(a,T) :- happensAt(b,T).\ninitiatedAt(a,T) :- happensAt(b,c,T).")

    def test_bad_head(self):
        with pytest.raises(ParseError, match="head"):
            parse_rules("holdsAt(a,T) :- happensAt(b,T).")

    def test_unbound_head_variable(self):
        with pytest.raises(ParseError, match="do not occur"):
            parse_rules("initiatedAt(move(X,Y),T) :- happensAt(walk(X),T).")

    def test_empty(self):
        assert parse_rules("% nothing here\n") == []

    def test_round_trip(self):
        text = MOVE_RULE + "\n-0.5 terminatedAt(move(X,Y),T) :- happensAt(inactive(X),T), not close(X,Y,30,T).\n"
        rules = parse_rules(text)
        again = parse_rules(format_rules(rules))
        assert [(r.key(), r.weight) for r in again] == [(r.key(), r.weight) for r in rules]


class TestModes:
    def test_body_mode(self):
        [m] = parse_modes("modeb(happensAt(walk(+person),+time)).")
        assert m.kind == "body" and not m.negated
        assert str(m) == "modeb(happensAt(walk(+person),+time))."

    def test_empty(self):
        assert parse_modes("") == []

    def test_malformed_placemarker(self):
        with pytest.raises(ParseError, match="placemarker"):
            parse_modes("modeb(happensAt(walk(+),+time)).")

    def test_variables_rejected(self):
        with pytest.raises(ParseError):
            parse_modes("modeb(happensAt(walk(X),+time)).")

    def test_needs_time(self):
        with pytest.raises(ParseError):
            parse_modes("modeb(happensAt(walk(+person),#dist)).")

    def test_round_trip(self):
        text = (
            "modeh(initiatedAt(move(+person,+person),+time)).\n"
            "modeb(happensAt(walk(+person),+time)).\n"
            "modeb(not close(+person,+person,#dist,+time)).\n"
            "modeb(coords(+person,-x,-y,+time)).\n"
        )
        modes = parse_modes(text)
        assert format_modes(modes) == text
        assert parse_modes(format_modes(modes)) == modes


names = st.sampled_from(["a", "b", "walk", "id1", "id2", "close"])
ints = st.integers(0, 500).map(str)


@st.composite
def ground_terms(draw, depth=2):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(names, ints))
    f = draw(names)
    args = draw(st.lists(ground_terms(depth=depth - 1), min_size=1, max_size=3))
    return f"{f}({','.join(args)})"


@st.composite
def fact_texts(draw):
    pred = draw(st.sampled_from(["happensAt", "coords", "orientation"]))
    args = draw(st.lists(ground_terms(), min_size=0, max_size=3))
    t = draw(st.integers(0, 99))
    # one fixed arity per predicate within a run
    return f"{pred}{len(args)}({','.join(args + [str(t)])})."


class TestFacts:
    def test_caviar_fragment(self):
        recs = parse_facts(CAVIAR_FRAGMENT)
        assert str(recs[0].fact) == "happensAt(walk(id1),1)"
        assert recs[0].time == 1
        assert len(recs) == 6

    def test_non_ground(self):
        with pytest.raises(ParseError, match="not ground"):
            parse_facts("happensAt(walk(X),1).")

    def test_needs_time(self):
        with pytest.raises(ParseError):
            parse_facts("happensAt(walk(id1),now).")

    @settings(max_examples=150)
    @given(st.lists(fact_texts(), max_size=8))
    def test_round_trip(self, facts):
        recs = parse_facts("\n".join(facts))
        assert parse_facts(format_facts(recs)) == recs

    def test_csv_matches_facts(self):
        csv_text = "1,happensAt,walk(id1)\n1,coords,id1,201,454\n2,happensAt,\"active(id2)\"\n"
        facts = "happensAt(walk(id1),1). coords(id1,201,454,1). happensAt(active(id2),2)."
        assert parse_csv_records(csv_text) == parse_facts(facts)

    def test_csv_bad_time(self):
        with pytest.raises(ParseError):
            parse_csv_records("x,happensAt,walk(id1)\n")

    def test_state_round_trip(self):
        state = parse_state("holdsAt(move(id1,id2),2). holdsAt(a,5).")
        assert (parse_term("move(id1,id2)"), 2) in state
        assert parse_state(format_state(state)) == state

    def test_state_rejects_events(self):
        with pytest.raises(ValueError):
            parse_state("happensAt(a,5).")


def records(n: int) -> list[StreamRecord]:
    return parse_facts(" ".join(f"happensAt(tick,{t})." for t in range(n)))


class TestBatches:
    def test_two_batches(self):
        bs = make_batches(records(100), 50)
        assert [(b.interp.start, b.interp.end) for b in bs] == [(0, 49), (50, 99)]
        assert all(b.truth is None for b in bs)

    def test_single_batch(self):
        bs = make_batches(records(100), 1000)
        assert len(bs) == 1 and bs[0].interp.length == 100

    def test_unsorted(self):
        recs = records(3)
        with pytest.raises(ValueError, match="sorted"):
            make_batches([recs[2], recs[0]], 2)

    def test_bad_size(self):
        with pytest.raises(ValueError):
            make_batches(records(3), 0)

    @given(st.integers(1, 60), st.integers(1, 25))
    def test_tiling(self, n, size):
        bs = make_batches(records(n), size)
        check_tiling(bs)
        covered = [t for b in bs for t in b.interp.times]
        assert covered == list(range(n))
        assert sum(len(b.interp.observations) for b in bs) == n

    def test_overlap_detected(self):
        bs = make_batches(records(10), 5)
        with pytest.raises(ValueError, match="overlapping"):
            check_tiling([bs[0], bs[0]])

    def test_closed_world_truth(self):
        f = Const("a")
        bs = make_batches(records(10), 5, annotation={(f, 3), (f, 7)}, fluents={f})
        assert bs[0].truth == frozenset({(f, 3)})
        # window [5,9] also scores time 10, up to the horizon
        assert bs[1].truth == frozenset({(f, 7)})
        assert list(bs[0].scored_times) == [1, 2, 3, 4, 5]
        assert list(bs[1].scored_times) == [6, 7, 8, 9]
        assert bs[1].horizon == 9

    def test_initial_state_from_annotation(self):
        f = Const("a")
        bs = make_batches(records(10), 5, annotation={(f, 5)}, fluents={f})
        assert bs[1].interp.initial_state == frozenset({f})


def test_load_stream(tmp_path):
    data = tmp_path / "data.lp"
    data.write_text(CAVIAR_FRAGMENT)
    [b] = load_stream(data, 50)
    assert any(str(a) == "happensAt(walk(id1),1)" for a in b.interp.facts_at(1, "happensAt"))
    assert len(b.truth) == 2
    assert all(f.functor == "move" for f, _ in b.truth)

    ann = tmp_path / "ann.lp"
    ann.write_text("holdsAt(move(id1,id2),1).\n")
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("1,happensAt,walk(id1)\n")
    [b] = load_stream(csv_path, 50, ann)
    assert b.truth == frozenset({(parse_term("move(id1,id2)"), 1)})

    bad = tmp_path / "bad.lp"
    bad.write_text("happensAt(walk(id1),1).\n")
    with pytest.raises(ValueError):
        load_stream(csv_path, 50, bad)
