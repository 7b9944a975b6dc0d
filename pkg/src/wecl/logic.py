"""First-order terms, rules, substitutions, theta-subsumption and variabilization.

This is the hypothesis-language substrate shared by every other module.
Terms, atoms and literals are immutable; :class:`Rule` carries a mutable
weight and learning statistics on top of an immutable clause.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

log = logging.getLogger(__name__)

INITIATED = "initiatedAt"
TERMINATED = "terminatedAt"
HOLDS = "holdsAt"
HAPPENS = "happensAt"
HEAD_PREDICATES = frozenset({INITIATED, TERMINATED})

TIME_TYPE = "time"


@dataclass(frozen=True, slots=True)
class Const:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("constant symbol must be nonempty")

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable symbol must be nonempty")

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not self.functor:
            raise ValueError("functor must be nonempty")
        if len(self.args) < 1:
            raise ValueError(f"compound {self.functor} needs arity >= 1")

    def __str__(self):
        return f"{self.functor}({','.join(map(str, self.args))})"


@dataclass(frozen=True, slots=True)
class Placemarker:
    """A mode-declaration leaf: ``+type`` input, ``-type`` output, ``#type`` constant."""

    kind: str
    type: str

    def __post_init__(self):
        if self.kind not in ("+", "-", "#"):
            raise ValueError(f"bad placemarker kind {self.kind!r}")
        if not self.type:
            raise ValueError("placemarker type must be nonempty")

    def __str__(self):
        return f"{self.kind}{self.type}"


Term = Union[Const, Var, Compound, Placemarker]
Substitution = Mapping[Var, Term]


def const(value) -> Const:
    return Const(str(value))


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(map(str, self.args))})"

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> tuple[str, int]:
        return self.predicate, len(self.args)

    @property
    def time(self) -> int:
        """Integer value of the last (time) argument of a ground atom."""
        return int(self.args[-1].name)

    def is_ground(self) -> bool:
        return all(is_ground(a) for a in self.args)


@dataclass(frozen=True, slots=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self):
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass
class RuleStats:
    true_groundings: int = 0
    false_groundings: int = 0
    grad_sq_sum: float = 0.0
    observations: int = 0
    weight_sum: float = 0.0
    updates: int = 0

    def average_weight(self, current: float) -> float:
        return self.weight_sum / self.updates if self.updates else current


@dataclass(eq=False)
class Rule:
    """A weighted initiation/termination clause.

    Equality is identity; use :meth:`key` or :func:`theta_equivalent` to
    compare clauses structurally.
    """

    head: Atom
    body: tuple = ()
    weight: float = 0.0
    id: int = 0
    stats: RuleStats = field(default_factory=RuleStats)
    bottom: Optional[object] = None
    parent: Optional[int] = None

    def __post_init__(self):
        self.body = tuple(self.body)
        if self.head.predicate not in HEAD_PREDICATES:
            raise ValueError(f"rule head must be initiatedAt/terminatedAt, got {self.head}")
        if self.head.arity != 2:
            raise ValueError(f"rule head must have arity 2, got {self.head}")

    @property
    def is_initiation(self) -> bool:
        return self.head.predicate == INITIATED

    @property
    def fluent(self) -> Term:
        return self.head.args[0]

    @property
    def time_term(self) -> Term:
        return self.head.args[1]

    def key(self) -> tuple:
        return self.head, self.body

    def size(self) -> int:
        """Number of literals, head included."""
        return 1 + len(self.body)

    def variables(self) -> set[Var]:
        out = set(term_vars(self.head))
        for lit in self.body:
            out.update(term_vars(lit.atom))
        return out

    def clause_str(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."

    def __str__(self):
        return f"{self.weight!r} {self.clause_str()}"

    def __repr__(self):
        return f"Rule(id={self.id}, {self})"


# --------------------------------------------------------------------------
# Term utilities


def is_ground(t) -> bool:
    if isinstance(t, Const):
        return True
    if isinstance(t, (Var, Placemarker)):
        return False
    if isinstance(t, Compound):
        return all(is_ground(a) for a in t.args)
    if isinstance(t, Atom):
        return t.is_ground()
    raise TypeError(f"not a term: {t!r}")


def term_vars(t) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from term_vars(a)
    elif isinstance(t, Atom):
        for a in t.args:
            yield from term_vars(a)
    elif isinstance(t, Literal):
        yield from term_vars(t.atom)


def subterms(t) -> Iterator:
    yield t
    if isinstance(t, Compound):
        for a in t.args:
            yield from subterms(a)


def apply_term(t: Term, theta: Substitution) -> Term:
    if isinstance(t, Var):
        return theta.get(t, t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(apply_term(a, theta) for a in t.args))
    return t


def apply_atom(a: Atom, theta: Substitution) -> Atom:
    if not theta:
        return a
    return Atom(a.predicate, tuple(apply_term(x, theta) for x in a.args))


def apply_literal(lit: Literal, theta: Substitution) -> Literal:
    return Literal(apply_atom(lit.atom, theta), lit.negated)


def apply_substitution(rule: Rule, theta: Substitution) -> Rule:
    """Simultaneously replace variables of ``rule`` according to ``theta``."""
    return replace(
        rule,
        head=apply_atom(rule.head, theta),
        body=tuple(apply_literal(l, theta) for l in rule.body),
        stats=RuleStats(),
    )


def compose(first: Substitution, second: Substitution) -> dict[Var, Term]:
    """Substitution equal to applying ``first`` and then ``second``."""
    out = {v: apply_term(t, second) for v, t in first.items()}
    for v, t in second.items():
        out.setdefault(v, t)
    return out


def match_term(pattern: Term, target: Term, theta: dict) -> Optional[dict]:
    """One-way matching: bind variables of ``pattern`` so it equals ``target``.

    Variables occurring in ``target`` are rigid. Returns an extended copy of
    ``theta`` or None.
    """
    if isinstance(pattern, Var):
        bound = theta.get(pattern)
        if bound is None:
            out = dict(theta)
            out[pattern] = target
            return out
        return theta if bound == target else None
    if isinstance(pattern, Compound):
        if (
            not isinstance(target, Compound)
            or target.functor != pattern.functor
            or len(target.args) != len(pattern.args)
        ):
            return None
        for p, q in zip(pattern.args, target.args):
            theta = match_term(p, q, theta)
            if theta is None:
                return None
        return theta
    return theta if pattern == target else None


def match_atom(pattern: Atom, target: Atom, theta: dict) -> Optional[dict]:
    if pattern.predicate != target.predicate or len(pattern.args) != len(target.args):
        return None
    for p, q in zip(pattern.args, target.args):
        theta = match_term(p, q, theta)
        if theta is None:
            return None
    return theta


# --------------------------------------------------------------------------
# Theta-subsumption


def theta_subsumes(r1: Rule, r2: Rule) -> bool:
    """True iff some theta maps head(r1) onto head(r2) and body(r1) into body(r2)."""
    theta = match_atom(r1.head, r2.head, {})
    if theta is None:
        return False
    index: dict[tuple, list[Atom]] = {}
    for lit in r2.body:
        index.setdefault((lit.negated, lit.atom.predicate, lit.atom.arity), []).append(lit.atom)

    def candidates(lit):
        return index.get((lit.negated, lit.atom.predicate, lit.atom.arity), ())

    # rarest predicate first keeps the backtracking shallow
    lits = sorted(set(r1.body), key=lambda l: (len(candidates(l)), str(l)))
    if any(not candidates(l) for l in lits):
        return False
    return _subsume_search(lits, 0, theta, candidates)


def _subsume_search(lits, i, theta, candidates) -> bool:
    if i == len(lits):
        return True
    lit = lits[i]
    for target in candidates(lit):
        ext = match_atom(lit.atom, target, theta)
        if ext is not None and _subsume_search(lits, i + 1, ext, candidates):
            return True
    return False


def theta_equivalent(r1: Rule, r2: Rule) -> bool:
    return theta_subsumes(r1, r2) and theta_subsumes(r2, r1)


# --------------------------------------------------------------------------
# Mode declarations and variabilization


@dataclass(frozen=True, slots=True)
class ModeDeclaration:
    """A head (``modeh``) or body (``modeb``) literal template."""

    kind: str
    template: Atom
    negated: bool = False

    def __post_init__(self):
        if self.kind not in ("head", "body"):
            raise ValueError(f"mode kind must be head or body, got {self.kind!r}")
        if self.negated and self.kind == "head":
            raise ValueError("head modes cannot be negated")
        if not self.template.args:
            raise ValueError(f"mode template {self.template} has no time argument")
        last = self.template.args[-1]
        if not (isinstance(last, Placemarker) and last.type == TIME_TYPE):
            raise ValueError(f"last argument of {self.template} must be a time placemarker")
        n_time = sum(
            1
            for a in self.template.args
            for s in subterms(a)
            if isinstance(s, Placemarker) and s.type == TIME_TYPE
        )
        if n_time != 1:
            raise ValueError(f"{self.template} must have exactly one time argument")
        if self.kind == "head" and self.template.predicate not in HEAD_PREDICATES:
            raise ValueError("head modes must use initiatedAt/terminatedAt")
        if self.negated and any(
            isinstance(s, Placemarker) and s.kind == "-"
            for a in self.template.args
            for s in subterms(a)
        ):
            raise ValueError("negated modes cannot carry output placemarkers")

    def __str__(self):
        name = "modeh" if self.kind == "head" else "modeb"
        inner = f"not {self.template}" if self.negated else str(self.template)
        return f"{name}({inner})."


def match_template(template, term) -> Optional[list[tuple[Placemarker, Term]]]:
    """Match a mode template against a term; returns placemarker bindings."""
    if isinstance(template, Placemarker):
        return [(template, term)]
    if isinstance(template, Atom):
        if not isinstance(term, Atom) or term.signature != template.signature:
            return None
        pairs = zip(template.args, term.args)
    elif isinstance(template, Compound):
        if (
            not isinstance(term, Compound)
            or term.functor != template.functor
            or len(term.args) != len(template.args)
        ):
            return None
        pairs = zip(template.args, term.args)
    else:
        return [] if template == term else None
    out = []
    for p, q in pairs:
        m = match_template(p, q)
        if m is None:
            return None
        out.extend(m)
    return out


def find_mode(atom: Atom, modes: Iterable[ModeDeclaration], kind: str, negated: bool = False):
    for m in modes:
        if m.kind != kind or m.negated != negated:
            continue
        binding = match_template(m.template, atom)
        if binding is not None:
            return m, binding
    return None


_VAR_NAMES = ("X", "Y", "Z", "U", "V", "W")


class _Namer:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.mapping: dict[Term, Var] = {}
        self._next = 0

    def var_for(self, term: Term, ptype: str) -> Var:
        if isinstance(term, Var):
            return term
        if term in self.mapping:
            return self.mapping[term]
        if ptype == TIME_TYPE and "T" not in self.taken:
            name = "T"
        else:
            name = self._fresh()
        self.taken.add(name)
        v = Var(name)
        self.mapping[term] = v
        return v

    def _fresh(self) -> str:
        while True:
            i = self._next
            self._next += 1
            base = _VAR_NAMES[i % len(_VAR_NAMES)]
            name = base if i < len(_VAR_NAMES) else f"{base}{i // len(_VAR_NAMES)}"
            if name not in self.taken:
                return name


def _lift(template, term, namer: _Namer):
    if isinstance(template, Placemarker):
        if template.kind == "#":
            return term
        return namer.var_for(term, template.type)
    if isinstance(template, Atom):
        return Atom(term.predicate, tuple(_lift(p, q, namer) for p, q in zip(template.args, term.args)))
    if isinstance(template, Compound):
        return Compound(term.functor, tuple(_lift(p, q, namer) for p, q in zip(template.args, term.args)))
    return term


def variabilize(rule: Rule, modes: Sequence[ModeDeclaration]) -> Rule:
    """Replace constants at +/- placemarker positions by variables.

    The same constant maps to the same variable throughout the rule; constants
    at # positions are kept. Body literals matching no mode are dropped with a
    warning. Raises ValueError when the head matches no head mode.
    """
    taken = {v.name for v in rule.variables()}
    namer = _Namer(taken)
    hm = find_mode(rule.head, modes, "head")
    if hm is None:
        raise ValueError(f"head {rule.head} matches no head mode")
    head = _lift(hm[0].template, rule.head, namer)
    body = []
    for lit in rule.body:
        bm = find_mode(lit.atom, modes, "body", lit.negated)
        if bm is None:
            log.warning("dropping literal %s: no matching body mode", lit)
            continue
        new = Literal(_lift(bm[0].template, lit.atom, namer), lit.negated)
        if new not in body:
            body.append(new)
    return replace(rule, head=head, body=tuple(body), stats=RuleStats())
