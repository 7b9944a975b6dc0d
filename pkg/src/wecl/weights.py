"""AdaGrad weight learning from the gap between predicted and true states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .eventcalc import Interpretation, ground_candidates
from .logic import Rule


@dataclass(frozen=True)
class UpdateContext:
    eta: float = 1.0
    lam: float = 0.01
    delta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("learning rate must be positive")
        if self.lam < 0 or self.delta < 0:
            raise ValueError("regularization and delta must be non-negative")


def grounding_counts(rule: Rule, state: frozenset, interp: Interpretation, hi: Optional[int] = None) -> tuple[int, int]:
    """(true, false) groundings of ``rule`` whose body holds under ``state``.

    A grounding at t is true when its head agrees with the state at t+1:
    the fluent holds for an initiation rule, does not hold for a termination
    rule. Groundings with t+1 beyond ``hi`` are ignored.
    """
    hi = interp.end + 1 if hi is None else hi
    true = false = 0
    for g in ground_candidates(rule, interp):
        if g.time + 1 > hi or not g.holds_under(state):
            continue
        if ((g.fluent, g.time + 1) in state) == g.initiation:
            true += 1
        else:
            false += 1
    return true, false


def count_true_groundings(rule: Rule, state: frozenset, interp: Interpretation, hi: Optional[int] = None) -> int:
    return grounding_counts(rule, state, interp, hi)[0]


def adagrad_update(weight: float, grad_sq_sum: float, dg: float, ctx: UpdateContext) -> tuple[float, float]:
    """One regularized AdaGrad step; returns the new weight and squared-gradient sum.

    The adaptive divisor includes the current gradient.
    """
    gsq = grad_sq_sum + dg * dg
    c = ctx.delta + math.sqrt(gsq)
    if c == 0:
        return weight, gsq
    step = weight - ctx.eta / c * dg
    shrunk = max(0.0, abs(step) - ctx.lam * ctx.eta / c)
    return math.copysign(shrunk, step) if shrunk else 0.0, gsq


def update_rule(rule: Rule, dg: float, ctx: UpdateContext) -> None:
    rule.weight, rule.stats.grad_sq_sum = adagrad_update(rule.weight, rule.stats.grad_sq_sum, dg, ctx)


def batch_weight_update(
    rules: Iterable[Rule],
    map_state: frozenset,
    truth: frozenset,
    interp: Interpretation,
    ctx: UpdateContext,
    hi: Optional[int] = None,
) -> dict[int, int]:
    """Update every rule in place with its true-grounding gap; returns the gaps by rule id."""
    gaps = {}
    for r in rules:
        dg = count_true_groundings(r, map_state, interp, hi) - count_true_groundings(r, truth, interp, hi)
        update_rule(r, dg, ctx)
        gaps[r.id] = dg
    return gaps
