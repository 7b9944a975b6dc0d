"""Crisp Event Calculus semantics over a windowed interpretation.

Rules are restricted: every body literal is evaluated at the rule's time
variable ``T``; observation literals are checked against the interpretation
and ``holdsAt`` literals are left symbolic, to be evaluated against a fluent
state. A *state* is a frozenset of ``(fluent, time)`` pairs that hold.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .logic import (
    HOLDS,
    Atom,
    Const,
    Literal,
    Rule,
    Term,
    Var,
    apply_atom,
    apply_term,
    is_ground,
    match_atom,
    match_term,
    term_vars,
)

State = frozenset  # frozenset[tuple[Term, int]]


class UnsupportedRule(ValueError):
    """Rule falls outside the restricted (same-time-point) language."""


@dataclass(frozen=True)
class Interpretation:
    """One mini-batch: observations over ``[start, end]`` and the fluents holding at ``start``.

    ``fluents`` lists the target fluent instances known for the window (used
    to ground variables that only occur inside ``holdsAt`` literals, and as
    the closed-world universe when scoring predictions).
    """

    start: int
    end: int
    observations: Mapping[int, frozenset] = field(default_factory=dict)
    initial_state: frozenset = frozenset()
    fluents: frozenset = frozenset()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} > end {self.end}")
        index: dict[int, dict[str, list[Atom]]] = {}
        for t, facts in self.observations.items():
            if not self.start <= t <= self.end:
                raise ValueError(f"observation time {t} outside window [{self.start},{self.end}]")
            by_pred = index.setdefault(t, {})
            for a in sorted(facts, key=str):
                by_pred.setdefault(a.predicate, []).append(a)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "initial_state", frozenset(self.initial_state))
        object.__setattr__(self, "fluents", frozenset(self.fluents))

    @property
    def times(self) -> range:
        return range(self.start, self.end + 1)

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def facts_at(self, t: int, predicate: str) -> Sequence[Atom]:
        return self._index.get(t, {}).get(predicate, ())

    def has(self, atom: Atom) -> bool:
        t = atom.time
        return atom in self.observations.get(t, ())

    def universe(self) -> frozenset:
        return self.fluents | self.initial_state

    def with_initial_state(self, initial: Iterable[Term]) -> "Interpretation":
        return replace(self, initial_state=frozenset(initial))


@dataclass(frozen=True, order=True)
class GroundInstance:
    """A head-projected grounding of a rule at time ``time``.

    ``alternatives`` is a disjunction of ``holdsAt`` condition sets, one per
    full substitution sharing this head; the body is true iff any alternative
    is satisfied. ``((),)`` means the body holds unconditionally.
    """

    time: int
    rule_id: int
    subst: tuple
    fluent: Term = field(compare=False)
    initiation: bool = field(compare=False)
    alternatives: tuple = field(compare=False, default=((),))

    @property
    def head(self) -> Atom:
        pred = "initiatedAt" if self.initiation else "terminatedAt"
        return Atom(pred, (self.fluent, Const(str(self.time))))

    def holds_under(self, state: frozenset) -> bool:
        t = self.time
        return any(all(((f, t) in state) == v for f, v in alt) for alt in self.alternatives)

    def referenced_fluents(self) -> set:
        return {f for alt in self.alternatives for f, _ in alt}

    def __str__(self):
        return f"{self.head}[r{self.rule_id}]"


def _time_of(lit: Literal) -> Term:
    return lit.atom.args[-1]


def check_restricted(rule: Rule) -> None:
    """Raise UnsupportedRule unless all body literals sit at the head's time term."""
    t = rule.time_term
    for lit in rule.body:
        if not lit.atom.args:
            raise UnsupportedRule(f"literal {lit} has no time argument")
        if _time_of(lit) != t:
            raise UnsupportedRule(f"literal {lit} is not evaluated at the rule's time {t}")
        if lit.atom.predicate == HOLDS and lit.atom.arity != 2:
            raise UnsupportedRule(f"holdsAt must have arity 2: {lit}")
    if not isinstance(t, (Var, Const)):
        raise UnsupportedRule(f"time argument {t} must be a variable or a constant")


def is_safe(rule: Rule, head_domain: bool = False) -> bool:
    """Head and negated-literal variables must be bound by positive body literals.

    With ``head_domain`` the head fluent's variables also count as bound:
    they range over the window's known fluent instances.
    """
    bound = {rule.time_term} if isinstance(rule.time_term, Var) else set()
    if head_domain:
        bound.update(term_vars(rule.fluent))
    for lit in rule.body:
        if not lit.negated:
            bound.update(term_vars(lit.atom))
    need = set(term_vars(rule.head))
    for lit in rule.body:
        if lit.negated:
            need.update(term_vars(lit.atom))
    return need <= bound


def _split_body(rule: Rule):
    pos_obs, neg_obs, holds = [], [], []
    for lit in rule.body:
        if lit.atom.predicate == HOLDS:
            holds.append(lit)
        elif lit.negated:
            neg_obs.append(lit)
        else:
            pos_obs.append(lit)
    return pos_obs, neg_obs, holds


def _join(lits: list[Literal], i: int, theta: dict, interp: Interpretation, t: int):
    if i == len(lits):
        yield theta
        return
    atom = lits[i].atom
    for fact in interp.facts_at(t, atom.predicate):
        ext = match_atom(atom, fact, theta)
        if ext is not None:
            yield from _join(lits, i + 1, ext, interp, t)


def _bind_holds(lits: list[Literal], i: int, theta: dict, universe: Sequence[Term]):
    """Bind variables that occur only in positive holdsAt literals over the fluent universe."""
    if i == len(lits):
        yield theta
        return
    fl = apply_term(lits[i].atom.args[0], theta)
    if is_ground(fl):
        yield from _bind_holds(lits, i + 1, theta, universe)
        return
    for f in universe:
        ext = match_term(fl, f, theta)
        if ext is not None:
            yield from _bind_holds(lits, i + 1, ext, universe)


def _bind_all(fluent: Term, pos_holds: list[Literal], theta: dict, universe: Sequence[Term]):
    """Head fluent variables left free by observations range over the universe."""
    head = apply_term(fluent, theta)
    heads = [theta]
    if not is_ground(head):
        heads = [ext for f in universe if (ext := match_term(head, f, theta)) is not None]
    for th in heads:
        yield from _bind_holds(pos_holds, 0, th, universe)


def ground_candidates(rule: Rule, interp: Interpretation) -> list[GroundInstance]:
    """All head-projected groundings whose observation literals hold at some t.

    Deterministic order: by time, then by substitution.
    """
    check_restricted(rule)
    if not is_safe(rule, head_domain=True):
        raise UnsupportedRule(f"unsafe rule: {rule.clause_str()}")
    pos_obs, neg_obs, holds = _split_body(rule)
    # most selective literals first
    pos_obs = sorted(pos_obs, key=lambda l: (len(list(term_vars(l.atom))), str(l)))
    pos_holds = [l for l in holds if not l.negated]
    universe = sorted(interp.universe(), key=str)
    tterm = rule.time_term
    head_vars = sorted(set(term_vars(rule.head)) - {tterm}, key=lambda v: v.name)
    out: list[GroundInstance] = []
    for t in interp.times:
        if isinstance(tterm, Const):
            if int(tterm.name) != t:
                continue
            base: dict = {}
        else:
            base = {tterm: Const(str(t))}
        found: dict = {}
        for theta0 in _join(pos_obs, 0, base, interp, t):
            for theta2 in _bind_all(rule.fluent, pos_holds, theta0, universe):
                if any(interp.has(apply_atom(l.atom, theta2)) for l in neg_obs):
                    continue
                fluent = apply_term(rule.fluent, theta2)
                if not is_ground(fluent):
                    raise UnsupportedRule(f"head of {rule.clause_str()} not ground under {theta2}")
                conds = []
                for l in holds:
                    f = apply_term(l.atom.args[0], theta2)
                    if not is_ground(f):
                        raise UnsupportedRule(f"holdsAt literal {l} not ground")
                    conds.append((f, not l.negated))
                conds = tuple(sorted(set(conds), key=lambda c: (str(c[0]), c[1])))
                # contradictory conditions can never hold
                if len({f for f, _ in conds}) != len(conds):
                    continue
                key = tuple((v.name, str(theta2[v])) for v in head_vars)
                found.setdefault(key, (fluent, set()))[1].add(conds)
        for key in sorted(found):
            fluent, alts = found[key]
            if () in alts:
                alts = {()}
            out.append(
                GroundInstance(
                    time=t,
                    rule_id=rule.id,
                    subst=key,
                    fluent=fluent,
                    initiation=rule.is_initiation,
                    alternatives=tuple(sorted(alts, key=str)),
                )
            )
    return out


def evaluate_body(rule: Rule, theta: Mapping, interp: Interpretation, state: frozenset) -> bool:
    """Truth of a fully ground body under observations and a fluent state.

    Positive literals must be present (observation or state), negated ones absent.
    """
    for lit in rule.body:
        atom = apply_atom(lit.atom, theta)
        if not atom.is_ground():
            raise ValueError(f"literal {atom} is not ground under {dict(theta)}")
        if atom.predicate == HOLDS:
            present = (atom.args[0], atom.time) in state
        else:
            present = interp.has(atom)
        if present == lit.negated:
            return False
    return True


def ground_theory(rules: Iterable[Rule], interp: Interpretation) -> list[list[GroundInstance]]:
    """Candidates per rule, aligned with ``rules``.

    Rules whose head variables are bound only by the fluent universe see the
    window's known fluents plus every fluent another rule could initiate.
    """
    rules = list(rules)
    out: list = [None] * len(rules)
    extra = set()
    for i, r in enumerate(rules):
        if is_safe(r):
            out[i] = ground_candidates(r, interp)
            extra.update(g.fluent for g in out[i] if g.initiation)
    if any(o is None for o in out):
        wide = replace(interp, fluents=interp.fluents | extra)
        for i, r in enumerate(rules):
            if out[i] is None:
                out[i] = ground_candidates(r, wide)
    return out


def candidates_by_time(rules: Iterable[Rule], interp: Interpretation) -> dict[int, list[GroundInstance]]:
    by_t: dict[int, list[GroundInstance]] = defaultdict(list)
    for gs in ground_theory(rules, interp):
        for g in gs:
            by_t[g.time].append(g)
    return by_t


def crisp_infer(rules: Iterable[Rule], interp: Interpretation) -> frozenset:
    """Forward Event Calculus inference, ignoring weights.

    f holds at t+1 iff initiated at t, or it held at t and was not terminated at t.
    Returns the state over ``[start, end+1]``.
    """
    by_t = candidates_by_time(rules, interp)
    current = set(interp.initial_state)
    state = {(f, interp.start) for f in current}
    for t in interp.times:
        snapshot = frozenset((f, t) for f in current)
        inits, terms = set(), set()
        for g in by_t.get(t, ()):
            if g.holds_under(snapshot):
                (inits if g.initiation else terms).add(g.fluent)
        current = inits | (current - terms)
        state.update((f, t + 1) for f in current)
    return frozenset(state)


def state_at(state: Iterable, t: int) -> frozenset:
    return frozenset(f for f, u in state if u == t)


def holds_atoms(state: Iterable) -> list[Atom]:
    """Sorted holdsAt atoms of a state."""
    return [Atom(HOLDS, (f, Const(str(t)))) for f, t in sorted(state, key=lambda p: (p[1], str(p[0])))]


def restrict(state: Iterable, lo: int, hi: int) -> frozenset:
    """Pairs with ``lo <= t <= hi``."""
    return frozenset(p for p in state if lo <= p[1] <= hi)


def dependency_groups(instances: Iterable[GroundInstance], fluents: Iterable[Term]) -> list[list[Term]]:
    """Partition fluent instances so that rules referencing each other's holdsAt share a group."""
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            if str(ra) < str(rb):
                parent[rb] = ra
            else:
                parent[ra] = rb

    for f in fluents:
        find(f)
    for g in instances:
        find(g.fluent)
        for f in g.referenced_fluents():
            union(g.fluent, f)
    groups: dict = defaultdict(list)
    for f in list(parent):
        groups[find(f)].append(f)
    out = [sorted(g, key=str) for g in groups.values()]
    return sorted(out, key=lambda g: str(g[0]))
