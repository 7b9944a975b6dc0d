"""Learning a missing rule from the mistakes of a single batch.

The theory knows how ``a`` behaves but nothing about ``a'``, which the
annotation says starts when ``c`` happens while ``a`` holds. Abduction finds
where ``a'`` should have been initiated, a bottom rule collects what was true
there, and the search keeps the cheapest generalisation.
"""
from wecl import map_inference, parse_facts, parse_modes, parse_rules, scale_weights
from wecl.eventcalc import Interpretation
from wecl.induction import abduce_heads, find_mistakes, generate_bottom_rule, learn_from_mistakes
from wecl.logic import Const

RULES = """\
2 initiatedAt(a,T) :- happensAt(b,T).
1 terminatedAt(a,T) :- happensAt(c,T).
-1 initiatedAt(a,T) :- happensAt(d,T).
"""
FACTS = """
happensAt(c,1). happensAt(e,1). happensAt(b,2). happensAt(e,4).
happensAt(c,5). happensAt(e,5). happensAt(d,8).
"""
MODES = """\
modeh(initiatedAt(a',+time)).
modeb(happensAt(#event,+time)).
modeb(holdsAt(#fluent,+time)).
"""


def main():
    a, a2 = Const("a"), Const("a'")
    obs = {}
    for rec in parse_facts(FACTS):
        obs.setdefault(rec.time, set()).add(rec.fact)
    window = Interpretation(0, 9, {t: frozenset(v) for t, v in obs.items()}, frozenset(), frozenset({a, a2}))
    truth = frozenset({(a, t) for t in (3, 4, 5)} | {(a2, t) for t in range(6, 11)})
    theory, modes = parse_rules(RULES), parse_modes(MODES)

    scaled = scale_weights(theory)
    state = map_inference(theory, window, scaled).state()
    mistakes = find_mistakes(state, truth, range(1, 11))
    print(f"{len(mistakes)} mistakes:", ", ".join(f"{m.kind} {m.atom}" for m in mistakes))

    [seed] = abduce_heads(mistakes, truth)
    print("abduced head:", seed)
    print("bottom rule: ", generate_bottom_rule(seed, window, modes, state).lifted.clause_str())

    result = learn_from_mistakes(theory, window, state, truth, modes, scaled)
    for r in result.rules:
        print("learned:     ", r)
    print(f"selection cost {result.cost} against {result.base_cost} with no new rule")

    # without the rules for a, holdsAt(a,T) is never true and the same search adds nothing
    bare = learn_from_mistakes([], window, frozenset(), truth, modes, scale_weights([]))
    print("learned from an empty theory:", [str(r) for r in bare.rules] or "nothing")


if __name__ == "__main__":
    main()
