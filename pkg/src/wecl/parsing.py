"""Readers and writers for rules, mode declarations, facts and streams.

Surface syntax follows ordinary logic-programming conventions::

    1.283 initiatedAt(move(X,Y),T) :- happensAt(walk(X),T), not close(X,Y,30,T).
    modeb(happensAt(walk(+person),+time)).
    happensAt(walk(id1),1).

Variables start with an upper-case letter or underscore. ``%`` starts a
comment. Every printer here is the inverse of its parser.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .eventcalc import Interpretation
from .logic import (
    HEAD_PREDICATES,
    HOLDS,
    Atom,
    Compound,
    Const,
    Literal,
    ModeDeclaration,
    Placemarker,
    Rule,
    Var,
    term_vars,
)

DEFAULT_INITIAL_WEIGHT = 0.01


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<arrow>:-|<-|←)
  | (?P<name>[a-z][A-Za-z0-9_']*)
  | (?P<var>[A-Z_][A-Za-z0-9_']*)
  | (?P<punct>[(),.+\-\#−])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "punct" and value == "−":
                value = "-"
            toks.append(_Tok(kind, value, line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, arities: Optional[dict] = None):
        self.toks = _tokenize(text)
        self.i = 0
        self.arities = {} if arities is None else arities

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def take(self, kind: str, text: Optional[str] = None) -> _Tok:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of input"
            raise self.error(f"expected {want}, found {got!r}")
        t = self.tok
        self.i += 1
        return t

    def done(self) -> bool:
        return self.at("eof")

    # grammar

    def term(self, modes: bool):
        t = self.tok
        if t.kind == "var":
            if modes:
                raise self.error("variables are not allowed in mode declarations")
            self.i += 1
            return Var(t.text)
        if t.kind == "number":
            self.i += 1
            return Const(t.text)
        if t.kind == "punct" and t.text in "+-#":
            if not modes:
                raise self.error(f"placemarker {t.text!r} outside a mode declaration")
            self.i += 1
            if not self.at("name"):
                raise self.error("malformed placemarker: expected a type name")
            return Placemarker(t.text, self.take("name").text)
        if t.kind == "name":
            self.i += 1
            if self.at("punct", "("):
                return Compound(t.text, self.args(modes))
            return Const(t.text)
        raise self.error(f"expected a term, found {t.text or 'end of input'!r}")

    def args(self, modes: bool) -> tuple:
        self.take("punct", "(")
        out = [self.term(modes)]
        while self.at("punct", ","):
            self.i += 1
            out.append(self.term(modes))
        self.take("punct", ")")
        return tuple(out)

    def atom(self, modes: bool = False) -> Atom:
        t = self.take("name")
        args = self.args(modes) if self.at("punct", "(") else ()
        known = self.arities.setdefault(t.text, len(args))
        if known != len(args):
            raise self.error(f"predicate {t.text} used with arity {len(args)}, previously {known}", t)
        return Atom(t.text, args)

    def literal(self) -> Literal:
        if self.at("name", "not") and self.toks[self.i + 1].kind == "name":
            self.i += 1
            return Literal(self.atom(), True)
        return Literal(self.atom(), False)

    def weight(self) -> Optional[float]:
        sign = 1.0
        if self.at("punct", "-") and self.toks[self.i + 1].kind == "number":
            self.i += 1
            sign = -1.0
        if self.at("number"):
            return sign * float(self.take("number").text)
        return None

    def rule(self, default_weight: float, rid: int) -> Rule:
        start = self.tok
        w = self.weight()
        head = self.atom()
        if head.predicate not in HEAD_PREDICATES or head.arity != 2:
            raise self.error("rule head must be initiatedAt/2 or terminatedAt/2", start)
        body = []
        if self.at("arrow"):
            self.i += 1
            body.append(self.literal())
            while self.at("punct", ","):
                self.i += 1
                body.append(self.literal())
        self.take("punct", ".")
        rule = Rule(head=head, body=tuple(body), weight=default_weight if w is None else w, id=rid)
        if not math.isfinite(rule.weight):
            raise self.error("weight must be finite", start)
        bound = set()
        for lit in body:
            bound |= set(term_vars(lit.atom))
        free = set(term_vars(head)) - bound - {rule.time_term}
        if free:
            names = ", ".join(sorted(v.name for v in free))
            raise self.error(f"head variables {names} do not occur in the body", start)
        return rule

    def mode(self) -> ModeDeclaration:
        start = self.take("name")
        if start.text not in ("modeh", "modeb"):
            raise self.error(f"expected modeh or modeb, found {start.text!r}", start)
        self.take("punct", "(")
        negated = False
        if self.at("name", "not") and self.toks[self.i + 1].kind == "name":
            self.i += 1
            negated = True
        atom = self.atom(modes=True)
        self.take("punct", ")")
        self.take("punct", ".")
        try:
            return ModeDeclaration("head" if start.text == "modeh" else "body", atom, negated)
        except ValueError as e:
            raise self.error(str(e), start) from None

    def fact(self) -> Atom:
        start = self.tok
        atom = self.atom()
        self.take("punct", ".")
        if not atom.is_ground():
            raise self.error(f"fact {atom} is not ground", start)
        if not atom.args or not isinstance(atom.args[-1], Const) or not atom.args[-1].name.isdigit():
            raise self.error(f"fact {atom} needs a non-negative integer time as last argument", start)
        return atom


# --------------------------------------------------------------------------
# Public parsers and printers


def parse_rules(text: str, default_weight: float = DEFAULT_INITIAL_WEIGHT, start_id: int = 1) -> list[Rule]:
    p = _Parser(text)
    out = []
    while not p.done():
        out.append(p.rule(default_weight, start_id + len(out)))
    return out


def format_rule(rule: Rule) -> str:
    return str(rule)


def format_rules(rules: Iterable[Rule]) -> str:
    return "".join(f"{r}\n" for r in rules)


def parse_modes(text: str) -> list[ModeDeclaration]:
    p = _Parser(text)
    out = []
    while not p.done():
        m = p.mode()
        if m not in out:
            out.append(m)
    return out


def format_modes(modes: Iterable[ModeDeclaration]) -> str:
    return "".join(f"{m}\n" for m in modes)


def parse_term(text: str):
    p = _Parser(text)
    t = p.term(modes=False)
    if not p.done():
        raise p.error("trailing input after term")
    return t


@dataclass(frozen=True)
class StreamRecord:
    time: int
    fact: Atom

    def __post_init__(self):
        if not self.fact.is_ground():
            raise ValueError(f"stream fact {self.fact} is not ground")
        if self.time < 0 or self.fact.time != self.time:
            raise ValueError(f"bad time {self.time} for {self.fact}")

    def __str__(self):
        return f"{self.fact}."


def parse_facts(text: str) -> list[StreamRecord]:
    p = _Parser(text)
    out = []
    while not p.done():
        a = p.fact()
        out.append(StreamRecord(a.time, a))
    return out


def format_facts(records: Iterable[StreamRecord]) -> str:
    return "".join(f"{r}\n" for r in records)


def parse_csv_records(text: str) -> list[StreamRecord]:
    """Rows ``time,predicate,arg1,...,argN`` become ``predicate(arg1,...,argN,time)``.

    Compound arguments may be quoted or left bare; the argument columns are
    re-joined and parsed as a term list.
    """
    out = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("%"):
            continue
        if len(row) < 2:
            raise ParseError("expected time,predicate[,args...]", lineno, 1)
        time_s, pred = row[0].strip(), row[1].strip()
        if not time_s.isdigit():
            raise ParseError(f"bad time {time_s!r}", lineno, 1)
        args = ",".join(c.strip() for c in row[2:] if c.strip())
        src = f"{pred}({args + ',' if args else ''}{time_s})."
        try:
            rec = parse_facts(src)
        except ParseError as e:
            raise ParseError(str(e).split(": ", 1)[1], lineno, e.column) from None
        out.extend(rec)
    return out


def read_records(path) -> list[StreamRecord]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        return parse_csv_records(text)
    return parse_facts(text)


def format_state(state: Iterable) -> str:
    """holdsAt facts for a state, sorted by time then fluent."""
    return "".join(f"{HOLDS}({f},{t}).\n" for f, t in sorted(state, key=lambda p: (p[1], str(p[0]))))


def parse_state(text: str) -> frozenset:
    """Inverse of :func:`format_state`; only holdsAt facts are accepted."""
    out = set()
    for r in parse_facts(text):
        if r.fact.predicate != HOLDS or r.fact.arity != 2:
            raise ValueError(f"expected holdsAt/2 fact, got {r.fact}")
        out.add((r.fact.args[0], r.time))
    return frozenset(out)


# --------------------------------------------------------------------------
# Streams


@dataclass(frozen=True)
class Batch:
    """One window of the stream with its annotation.

    ``truth`` holds the annotated (closed-world) state over ``[start, end+1]``
    capped at ``horizon``, the last annotated time point; it is None for an
    unannotated stream.
    """

    interp: Interpretation
    truth: Optional[frozenset] = None
    horizon: Optional[int] = None

    @property
    def scored_times(self) -> range:
        hi = self.interp.end + 1
        if self.horizon is not None:
            hi = min(hi, self.horizon)
        return range(self.interp.start + 1, hi + 1)


def check_tiling(batches: Sequence[Batch]) -> None:
    """Raise ValueError unless windows are consecutive and non-overlapping."""
    for a, b in zip(batches, batches[1:]):
        if b.interp.start <= a.interp.end:
            raise ValueError(f"overlapping windows [{a.interp.start},{a.interp.end}] and [{b.interp.start},{b.interp.end}]")
        if b.interp.start != a.interp.end + 1:
            raise ValueError(f"gap between windows ending {a.interp.end} and starting {b.interp.start}")


def make_batches(
    records: Sequence[StreamRecord],
    batch_size: int,
    annotation: Optional[Iterable] = None,
    fluents: Optional[Iterable] = None,
    start: Optional[int] = None,
    end: Optional[int] = None,
    horizon: Optional[int] = None,
) -> list[Batch]:
    """Partition time-sorted records into windows of ``batch_size`` time points.

    ``annotation`` is a state (``(fluent, time)`` pairs) read under the
    closed-world assumption up to ``horizon`` (by default the last time
    point seen). Raises ValueError on unsorted records.
    """
    if batch_size < 1:
        raise ValueError("batch size must be at least 1 time point")
    for a, b in zip(records, records[1:]):
        if b.time < a.time:
            raise ValueError(f"stream not sorted by time: {a.fact} precedes {b.fact}")
    truth = None if annotation is None else frozenset(annotation)
    times = [r.time for r in records] + ([t for _, t in truth] if truth else [])
    if not times and (start is None or end is None):
        return []
    lo = min(times) if start is None else start
    hi = max(times) if end is None else end
    universe = frozenset(fluents) if fluents is not None else frozenset(f for f, _ in truth or ())
    by_time: dict[int, set] = {}
    for r in records:
        by_time.setdefault(r.time, set()).add(r.fact)
    if truth is None:
        horizon = None
    elif horizon is None:
        horizon = max(hi, max((t for _, t in truth), default=hi))
    out = []
    for ws in range(lo, hi + 1, batch_size):
        we = min(ws + batch_size - 1, hi)
        obs = {t: frozenset(by_time[t]) for t in range(ws, we + 1) if t in by_time}
        init = frozenset(f for f, t in truth if t == ws) if truth is not None else frozenset()
        interp = Interpretation(ws, we, obs, init, universe)
        window_truth = None
        if truth is not None:
            window_truth = frozenset(p for p in truth if ws <= p[1] <= min(we + 1, horizon))
        out.append(Batch(interp, window_truth, horizon))
    check_tiling(out)
    return out


def load_stream(path, batch_size: int, annotation_path=None) -> list[Batch]:
    """Read a fact or CSV stream (plus optional annotation file) into batches.

    holdsAt facts found in the data file are treated as annotation.
    """
    records = read_records(path)
    events = [r for r in records if r.fact.predicate != HOLDS]
    labels = {(r.fact.args[0], r.time) for r in records if r.fact.predicate == HOLDS}
    if annotation_path is not None:
        labels |= {(r.fact.args[0], r.time) for r in read_records(annotation_path) if _is_holds(r.fact)}
    annotated = annotation_path is not None or bool(labels)
    return make_batches(events, batch_size, labels if annotated else None)


def _is_holds(a: Atom) -> bool:
    if a.predicate != HOLDS or a.arity != 2:
        raise ValueError(f"annotation must contain holdsAt/2 facts only, got {a}")
    return True

