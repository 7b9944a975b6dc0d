"""New-rule induction from prediction mistakes.

Mistakes seed rule heads by abduction, each seed grows a bottom rule from
the literals true at its time point, and an exact branch-and-bound search
picks, per bottom rule, the literal subset (or nothing) that minimises

    mistake_cost * disagreements + use_cost * selected_literals - reward(H_t)

where the disagreements and the reward of the existing weighted theory
come from one joint MAP computation. New rules enter that computation as
hard rules: whenever their body holds, their head is enforced.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .eventcalc import GroundInstance, Interpretation, UnsupportedRule, ground_candidates, is_safe
from .logic import (
    HOLDS,
    INITIATED,
    TERMINATED,
    TIME_TYPE,
    Atom,
    Compound,
    Const,
    Literal,
    ModeDeclaration,
    Placemarker,
    Rule,
    Term,
    find_mode,
    match_template,
    subterms,
    theta_equivalent,
    variabilize,
)
from .mapinf import ScaledWeights, WeightedInstance, solve, weighted_instances

log = logging.getLogger(__name__)

FP = "FP"
FN = "FN"
INITIAL_WEIGHT = 0.01


@dataclass(frozen=True)
class Mistake:
    fluent: Term
    time: int
    kind: str

    def __post_init__(self):
        if self.kind not in (FP, FN):
            raise ValueError(f"mistake kind must be FP or FN, got {self.kind!r}")

    @property
    def atom(self) -> Atom:
        return Atom(HOLDS, (self.fluent, Const(str(self.time))))


def find_mistakes(predicted: frozenset, truth: frozenset, times: Iterable[int]) -> list[Mistake]:
    """Symmetric difference of two states over ``times``, sorted by time then fluent."""
    times = set(times)
    out = [Mistake(f, t, FN) for f, t in truth - predicted if t in times]
    out += [Mistake(f, t, FP) for f, t in predicted - truth if t in times]
    return sorted(out, key=lambda m: (m.time, str(m.fluent), m.kind))


def abduce_heads(mistakes: Iterable[Mistake], truth: frozenset) -> list[Atom]:
    """Head seeds explaining the mistakes.

    A false negative at t whose fluent is false at t-1 in the truth calls
    for an initiation at t-1; a false positive at t whose fluent is true at
    t-1 calls for a termination at t-1. Mistakes inside a true (resp.
    false) run are explained by inertia and seed nothing.
    """
    seeds = set()
    for m in mistakes:
        prev = (m.fluent, m.time - 1) in truth
        if m.kind == FN and not prev:
            seeds.add(Atom(INITIATED, (m.fluent, Const(str(m.time - 1)))))
        elif m.kind == FP and prev:
            seeds.add(Atom(TERMINATED, (m.fluent, Const(str(m.time - 1)))))
    return sorted(seeds, key=lambda a: (a.time, str(a)))


# --------------------------------------------------------------------------
# Bottom rules


@dataclass(frozen=True)
class BottomRule:
    """A seed's maximally specific rule, ground and variabilized.

    ``lifted.body[j]`` is addressed as literal ``j+1``; literal 0 is the head.
    """

    ground: Rule
    lifted: Rule

    @property
    def literals(self) -> tuple:
        return self.lifted.body

    def assemble(self, subset: Iterable[int], rule_id: int = 0, weight: float = INITIAL_WEIGHT) -> Rule:
        """Rule made of the head plus the lifted literals at ``subset`` (0-based body indices)."""
        body = tuple(self.lifted.body[j] for j in sorted(subset))
        return Rule(self.lifted.head, body, weight=weight, id=rule_id, bottom=self)


def _leaves(template) -> list[Placemarker]:
    out = []
    for a in template.args:
        out.extend(s for s in subterms(a) if isinstance(s, Placemarker))
    return out


def _pool_facts(interp: Interpretation, state: frozenset, predicate: str, t: Optional[int] = None):
    times = interp.times if t is None else (t,)
    for u in times:
        if predicate == HOLDS:
            for f, v in sorted(state, key=lambda p: str(p[0])):
                if v == u:
                    yield Atom(HOLDS, (f, Const(str(u))))
        else:
            yield from interp.facts_at(u, predicate)


def _constant_pool(interp: Interpretation, state: frozenset, modes: Sequence[ModeDeclaration]) -> dict:
    """Constants seen at ``#`` positions of body modes anywhere in the window."""
    pool: dict[str, set] = {}
    for m in modes:
        if m.kind != "body":
            continue
        for fact in _pool_facts(interp, state, m.template.predicate):
            binding = match_template(m.template, fact)
            if binding is None:
                continue
            for p, term in binding:
                if p.kind == "#":
                    pool.setdefault(p.type, set()).add(term)
    if any(m.template.predicate == HOLDS for m in modes if m.kind == "body"):
        for f in interp.universe():
            pool.setdefault("fluent", set()).add(f)
    return pool


def _instantiate(template, choices: dict):
    """All ground atoms obtained by filling each placemarker from ``choices[placemarker position]``."""
    leaves = _leaves(template)
    domains = [sorted(choices[(i, p.kind, p.type)], key=str) for i, p in enumerate(leaves)]
    for combo in itertools.product(*domains):
        it = iter(combo)
        yield _fill(template, it)


def _fill(template, it):
    if isinstance(template, Placemarker):
        return next(it)
    if isinstance(template, Atom):
        return Atom(template.predicate, tuple(_fill(a, it) for a in template.args))
    if isinstance(template, Compound):
        return Compound(template.functor, tuple(_fill(a, it) for a in template.args))
    return template


def generate_bottom_rule(
    seed: Atom, interp: Interpretation, modes: Sequence[ModeDeclaration], state: frozenset
) -> BottomRule:
    """Bottom rule of a ground head seed.

    Body literals are mode instances that are true at the seed's time point,
    with input placemarkers filled from constants reachable from the head
    (outputs of earlier literals extend the reachable set until fixpoint).
    holdsAt literals are read from ``state``; those about the seed's own
    fluent are left out. Raises ValueError if the seed matches no head mode.
    """
    hm = find_mode(seed, modes, "head")
    if hm is None:
        raise ValueError(f"seed {seed} matches no head mode")
    t = seed.time
    reachable: dict[str, set] = {}
    for p, term in hm[1]:
        if p.kind != "#":
            reachable.setdefault(p.type, set()).add(term)
    reachable.setdefault(TIME_TYPE, set()).add(Const(str(t)))
    pool = _constant_pool(interp, state, modes)
    body: list[Literal] = []
    seen: set = set()
    changed = True
    while changed:
        changed = False
        for m in modes:
            if m.kind != "body":
                continue
            if m.negated:
                new = _negated_instances(m, interp, state, reachable, pool, t)
            else:
                new = _positive_instances(m, interp, state, reachable, t)
            for lit, outputs in new:
                # holdsAt of the head's own fluent never changes a crisp trajectory
                if lit in seen or (lit.atom.predicate == HOLDS and lit.atom.args[0] == seed.args[0]):
                    continue
                seen.add(lit)
                body.append(lit)
                changed = True
                for ptype, term in outputs:
                    reachable.setdefault(ptype, set()).add(term)
    ground = Rule(seed, tuple(body), weight=0.0)
    return BottomRule(ground, variabilize(ground, modes))


def _positive_instances(m: ModeDeclaration, interp, state, reachable, t):
    out = []
    for fact in _pool_facts(interp, state, m.template.predicate, t):
        binding = match_template(m.template, fact)
        if binding is None:
            continue
        if all(term in reachable.get(p.type, ()) for p, term in binding if p.kind == "+"):
            out.append((Literal(fact), [(p.type, term) for p, term in binding if p.kind == "-"]))
    return out


def _negated_instances(m: ModeDeclaration, interp, state, reachable, pool, t):
    choices = {}
    for i, p in enumerate(_leaves(m.template)):
        if p.type == TIME_TYPE:
            dom = {Const(str(t))}
        elif p.kind == "+":
            dom = reachable.get(p.type, set())
        else:
            dom = pool.get(p.type, set())
        choices[(i, p.kind, p.type)] = dom
    out = []
    for atom in _instantiate(m.template, choices):
        if atom.predicate == HOLDS:
            present = (atom.args[0], t) in state
        else:
            present = interp.has(atom)
        if not present:
            out.append((Literal(atom, True), []))
    return out


def compress_bottom_rules(brs: Iterable[BottomRule]) -> list[BottomRule]:
    """Keep the first bottom rule of each theta-equivalence class of lifted forms."""
    kept: list[BottomRule] = []
    for br in brs:
        if not any(theta_equivalent(br.lifted, k.lifted) for k in kept):
            kept.append(br)
    return kept


# --------------------------------------------------------------------------
# Joint selection


@dataclass
class InductionConfig:
    max_body_length: int = 8
    node_budget: int = 2000
    option_budget: int = 4096
    initial_weight: float = INITIAL_WEIGHT


@dataclass(frozen=True)
class _Option:
    bottom: int
    subset: tuple
    instances: tuple

    @property
    def uses(self) -> int:
        return 1 + len(self.subset)


@dataclass
class InductionResult:
    rules: list = field(default_factory=list)
    uses: list = field(default_factory=list)
    cost: int = 0
    base_cost: int = 0
    truncated: bool = False


_OPTION_ID_BASE = 1 << 40


def _options(bottoms, interp, config, result):
    rid = _OPTION_ID_BASE
    per = []
    for bi, br in enumerate(bottoms):
        seen: dict = {}
        opts = []
        n = len(br.literals)
        tried = 0
        for size in range(min(n, config.max_body_length) + 1):
            for subset in itertools.combinations(range(n), size):
                tried += 1
                if tried > config.option_budget:
                    result.truncated = True
                    break
                rule = br.assemble(subset, rule_id=rid)
                if not is_safe(rule):
                    continue
                try:
                    insts = ground_candidates(rule, interp)
                except UnsupportedRule:
                    continue
                if not insts:
                    continue
                sig = frozenset((g.time, g.fluent, g.initiation, g.alternatives) for g in insts)
                if sig in seen:
                    continue
                seen[sig] = True
                opts.append(_Option(bi, subset, tuple(insts)))
                rid += 1
        per.append(opts)
    return per


class _Evaluator:
    def __init__(self, base, interp, truth, unit, truth_hi):
        self.base = base
        self.interp = interp
        self.truth = truth
        self.unit = unit
        self.truth_hi = truth_hi
        self.calls = 0

    def value(self, hard: Iterable[GroundInstance], optional: Iterable[GroundInstance] = ()) -> int:
        """Best reward minus disagreement cost with ``hard`` enforced and ``optional`` free."""
        self.calls += 1
        ws = list(self.base)
        ws += [WeightedInstance(g, 0, True) for g in hard]
        ws += [WeightedInstance(g, 0, False) for g in optional]
        res = solve(ws, self.interp, self.truth, self.unit, truth_hi=self.truth_hi)
        return res.objective - self.unit * res.disagreements


def selection_cost(
    theory: Sequence[Rule],
    rules: Sequence[Rule],
    interp: Interpretation,
    truth: frozenset,
    scaled: ScaledWeights,
    truth_hi: Optional[int] = None,
) -> int:
    """Objective of the joint optimisation for a fixed set of added rules.

    Every added literal (head included) and every disagreement costs one
    weight unit; rewards of the weighted theory are subtracted.
    """
    ev = _Evaluator(weighted_instances(theory, interp, scaled), interp, truth, scaled.unit, truth_hi)
    hard = [g for r in rules for g in ground_candidates(r, interp)]
    return scaled.unit * sum(r.size() for r in rules) - ev.value(hard)


def induce_new_rules(
    theory: Sequence[Rule],
    bottoms: Sequence[BottomRule],
    interp: Interpretation,
    truth: frozenset,
    scaled: ScaledWeights,
    config: Optional[InductionConfig] = None,
    truth_hi: Optional[int] = None,
) -> InductionResult:
    """Exact joint selection of literal subsets, one optional rule per bottom rule.

    Branch and bound: a node fixes the choices of a prefix of the bottom
    rules; its bound lets the remaining candidates fire freely at no use
    cost, which relaxes every completion. The greedy completion seeds the
    incumbent. When the node budget runs out the incumbent is returned with
    ``truncated`` set.
    """
    config = config or InductionConfig()
    result = InductionResult()
    unit = scaled.unit
    ev = _Evaluator(weighted_instances(theory, interp, scaled), interp, truth, unit, truth_hi)
    per = _options(bottoms, interp, config, result)
    base_cost = -ev.value(())
    result.cost = result.base_cost = base_cost
    all_opts = [o for opts in per for o in opts]
    if not all_opts:
        return result
    everything = [g for o in all_opts for g in o.instances]
    root_bound = -ev.value((), everything)
    if unit * min(o.uses for o in all_opts) + root_bound >= base_cost:
        return result

    # cheapest standalone options first
    solo = {id(o): unit * o.uses - ev.value(o.instances) for o in all_opts}
    order = [sorted(opts, key=lambda o: (solo[id(o)], o.uses, o.subset)) for opts in per]
    m = len(order)

    def cost_of(choice) -> int:
        hard = [g for o in choice if o is not None for g in o.instances]
        return unit * sum(o.uses for o in choice if o is not None) - ev.value(hard)

    best = [None] * m
    best_cost = base_cost
    for i in range(m):
        for o in order[i]:
            trial = best[:i] + [o] + best[i + 1 :]
            c = cost_of(trial)
            if c < best_cost:
                best, best_cost = trial, c

    def dfs(i: int, choice: list, uses: int):
        nonlocal best, best_cost
        if ev.calls > config.node_budget:
            result.truncated = True
            return
        if unit * uses >= best_cost:
            return
        hard = [g for o in choice if o is not None for g in o.instances]
        rest = [g for opts in order[i:] for o in opts for g in o.instances]
        bound = unit * uses - ev.value(hard, rest)
        if i == m:
            if bound < best_cost:
                best, best_cost = list(choice), bound
            return
        if bound >= best_cost:
            return
        for o in [None] + order[i]:
            dfs(i + 1, choice + [o], uses + (0 if o is None else o.uses))

    dfs(0, [], 0)
    result.cost = best_cost
    for o in best:
        if o is None:
            continue
        rule = bottoms[o.bottom].assemble(o.subset, weight=config.initial_weight)
        result.rules.append(rule)
        result.uses.append((o.bottom, (0,) + tuple(j + 1 for j in o.subset)))
    return result


def learn_from_mistakes(
    theory: Sequence[Rule],
    interp: Interpretation,
    map_state: frozenset,
    truth: frozenset,
    modes: Sequence[ModeDeclaration],
    scaled: ScaledWeights,
    config: Optional[InductionConfig] = None,
    truth_hi: Optional[int] = None,
) -> InductionResult:
    """Mistakes, seeds, bottom rules, compression and selection in one call."""
    hi = interp.end + 1 if truth_hi is None else min(truth_hi, interp.end + 1)
    mistakes = find_mistakes(map_state, truth, range(interp.start + 1, hi + 1))
    if not mistakes:
        return InductionResult()
    bottoms = []
    for seed in abduce_heads(mistakes, truth):
        if find_mode(seed, modes, "head") is None:
            log.debug("seed %s matches no head mode", seed)
            continue
        bottoms.append(generate_bottom_rule(seed, interp, modes, map_state))
    bottoms = compress_bottom_rules(bottoms)
    if not bottoms:
        return InductionResult()
    return induce_new_rules(theory, bottoms, interp, truth, scaled, config, hi)
