"""Hoeffding-gated specialization of rules along their bottom rule's lattice."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .eventcalc import Interpretation, is_safe
from .logic import Rule, theta_equivalent
from .weights import grounding_counts

INITIAL_WEIGHT = 0.01


@dataclass
class GainStats:
    p: int = 0
    n: int = 0

    def add(self, p: int, n: int) -> None:
        if p < 0 or n < 0:
            raise ValueError("grounding counts must be non-negative")
        self.p += p
        self.n += n

    @property
    def total(self) -> int:
        return self.p + self.n


def information_gain(child: GainStats, parent: GainStats) -> float:
    """Normalized gain of a specialization over its parent, in [0, 1].

    Raw gain ``P_c * (ln prec_c - ln prec_p)`` is clamped at 0 and divided by
    ``P_p * -ln prec_p``. Degenerate cases (no child positives, perfectly
    precise parent) give 0.
    """
    if parent.total == 0:
        raise ValueError("parent has no groundings")
    if child.p == 0 or parent.p == 0:
        return 0.0
    prec_p = parent.p / parent.total
    g_max = parent.p * -math.log(prec_p)
    if g_max <= 0:
        return 0.0
    raw = child.p * (math.log(child.p / child.total) - math.log(prec_p))
    return min(1.0, max(0.0, raw) / g_max)


def hoeffding_epsilon(delta: float, n: int) -> float:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n < 0:
        raise ValueError("observation count must be non-negative")
    if n == 0:
        return math.inf
    return math.sqrt(math.log(1 / delta) / (2 * n))


def hoeffding_choice(gains: Sequence[float], n: int, delta: float) -> Optional[int]:
    """Index of the best gain if it beats the runner-up (0 if none) by more than epsilon."""
    if not gains:
        return None
    order = sorted(range(len(gains)), key=lambda i: (-gains[i], i))
    best = gains[order[0]]
    second = gains[order[1]] if len(order) > 1 else 0.0
    if best > 0 and best - second > hoeffding_epsilon(delta, n):
        return order[0]
    return None


@dataclass
class SpecializationSlot:
    """A rule together with its one-literal refinements and their statistics."""

    parent: Rule
    children: list = field(default_factory=list)
    parent_stats: GainStats = field(default_factory=GainStats)
    child_stats: list = field(default_factory=list)

    @property
    def observations(self) -> int:
        return self.parent_stats.total

    def gains(self) -> list[float]:
        if self.parent_stats.total == 0:
            return [0.0] * len(self.children)
        return [information_gain(s, self.parent_stats) for s in self.child_stats]


def candidate_children(rule: Rule, next_id: Callable[[], int], weight: float = INITIAL_WEIGHT) -> list[Rule]:
    """Safe rules adding one literal of the bottom rule, one per theta-equivalence class."""
    bottom = getattr(rule, "bottom", None)
    if bottom is None:
        return []
    out: list[Rule] = []
    for lit in bottom.literals:
        if lit in rule.body:
            continue
        child = Rule(rule.head, rule.body + (lit,), weight=weight, id=0, bottom=bottom, parent=rule.id)
        if not is_safe(child) or theta_equivalent(child, rule):
            continue
        if any(theta_equivalent(child, c) for c in out):
            continue
        child.id = next_id()
        out.append(child)
    return out


def make_slot(rule: Rule, next_id: Callable[[], int], weight: float = INITIAL_WEIGHT) -> SpecializationSlot:
    children = candidate_children(rule, next_id, weight)
    return SpecializationSlot(rule, children, GainStats(), [GainStats() for _ in children])


def update_gain_stats(
    slot: SpecializationSlot, top_state: frozenset, interp: Interpretation, hi: Optional[int] = None
) -> SpecializationSlot:
    """Accumulate true/false grounding counts of parent and children in the top-theory MAP state."""
    slot.parent_stats.add(*grounding_counts(slot.parent, top_state, interp, hi))
    for child, stats in zip(slot.children, slot.child_stats):
        stats.add(*grounding_counts(child, top_state, interp, hi))
    return slot


def try_specialize(slot: SpecializationSlot, delta: float) -> Optional[Rule]:
    """Best child when the Hoeffding test separates it from the runner-up, else None.

    Equal gains are ordered by the children's clause text.
    """
    if not slot.children:
        return None
    order = sorted(range(len(slot.children)), key=lambda i: slot.children[i].clause_str())
    gains = slot.gains()
    pick = hoeffding_choice([gains[i] for i in order], slot.observations, delta)
    return None if pick is None else slot.children[order[pick]]
