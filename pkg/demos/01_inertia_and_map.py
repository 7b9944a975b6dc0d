"""Crisp Event Calculus versus weighted MAP inference on a tiny stream.

Three rules drive the fluent ``a``: ``b`` starts it, ``c`` stops it and ``d``
also starts it, but with a negative weight. Crisp inference treats every
rule as hard; MAP inference may decline to honour the negatively weighted
one.
"""
from wecl import crisp_infer, map_inference, parse_facts, parse_rules
from wecl.eventcalc import Interpretation
from wecl.logic import Const

RULES = """\
2 initiatedAt(a,T) :- happensAt(b,T).
1 terminatedAt(a,T) :- happensAt(c,T).
-1 initiatedAt(a,T) :- happensAt(d,T).
"""
FACTS = "happensAt(b,2). happensAt(c,5). happensAt(d,8)."


def times(state, name):
    return sorted(t for f, t in state if f == Const(name))


def main():
    rules = parse_rules(RULES)
    obs = {}
    for rec in parse_facts(FACTS):
        obs.setdefault(rec.time, set()).add(rec.fact)
    window = Interpretation(0, 9, {t: frozenset(v) for t, v in obs.items()}, frozenset(), frozenset({Const("a")}))

    print("crisp: a holds at", times(crisp_infer(rules, window), "a"))
    res = map_inference(rules, window)
    print("MAP:   a holds at", times(res.state(), "a"))
    print("satisfied groundings:", ", ".join(str(g.head) for g in res.satisfied))
    # d at 8 would cost one unit of weight, so the optimum leaves a false
    print("objective (scaled):", res.objective)


if __name__ == "__main__":
    main()
