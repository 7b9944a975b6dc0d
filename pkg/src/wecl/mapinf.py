"""Exact MAP inference for weighted Event Calculus theories.

MAP inference maximises the summed (integer-scaled) weight of satisfied
rule groundings. Once the fluent trajectories are fixed, the program is
stratified and the best choice of satisfied groundings decomposes per
fluent and time step, so the optimum is found by a Viterbi-style dynamic
program over the joint state of each dependency group of fluents.

Two oracles live here as well: :func:`brute_force_map` enumerates every
joint trajectory and every subset of satisfied groundings per transition,
and :func:`enumerate_distribution` enumerates all answer sets with their
unnormalised weight ``exp(sum of satisfied weights)``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .eventcalc import (
    GroundInstance,
    Interpretation,
    candidates_by_time,
    dependency_groups,
    ground_theory,
)
from .logic import Rule, Term

DEFAULT_K = 1000
MAX_GROUP_SIZE = 12
MAX_BRUTE_BITS = 22
MAX_WORLDS = 1 << 20
# caps k / d_min so near-equal learned weights cannot overflow the scaling
MAX_FACTOR = 1e12


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class ScaledWeights:
    factor: float
    per_rule: Mapping[int, int]

    @property
    def unit(self) -> int:
        """Integer equivalent of real weight 1.0."""
        return round_half_away(self.factor)


def scale_weights(rules: Iterable[Rule], k: int = DEFAULT_K) -> ScaledWeights:
    """Scale real weights by ``k / d_min`` and round half away from zero.

    ``d_min`` is the smallest gap between distinct weight values; with fewer
    than two distinct values the factor is ``k``. The factor never exceeds
    ``MAX_FACTOR``, so weights closer than ``k / MAX_FACTOR`` may tie.
    """
    if k <= 0:
        raise ValueError("scaling constant must be positive")
    rules = list(rules)
    values = sorted({r.weight for r in rules})
    gaps = [b - a for a, b in zip(values, values[1:])]
    factor = min(k / min(gaps), MAX_FACTOR) if gaps else float(k)
    return ScaledWeights(factor, {r.id: round_half_away(r.weight * factor) for r in rules})


@dataclass(frozen=True)
class WeightedInstance:
    inst: GroundInstance
    weight: int
    hard: bool = False


@dataclass(frozen=True)
class MAPResult:
    start: int
    trajectories: Mapping[Term, tuple]
    satisfied: tuple
    objective: int
    disagreements: int = 0

    @property
    def end(self) -> int:
        return self.start + len(next(iter(self.trajectories.values()), (None,))) - 2

    def state(self) -> frozenset:
        return frozenset(
            (f, self.start + i) for f, vals in self.trajectories.items() for i, v in enumerate(vals) if v
        )

    def final_fluents(self) -> frozenset:
        return frozenset(f for f, vals in self.trajectories.items() if vals[-1])


# --------------------------------------------------------------------------
# Per-transition choice of satisfied groundings


def _pick(lst, mode):
    forced = [x for x in lst if x.hard]
    if mode == "empty":
        return (0, []) if not forced else None
    chosen = forced + [x for x in lst if not x.hard and x.weight > 0]
    if chosen or mode == "any":
        return sum(x.weight for x in chosen), chosen
    if not lst:
        return None
    best = min(lst, key=lambda x: (-x.weight, x.inst))
    return best.weight, [best]


def _both(a, b):
    if a is None or b is None:
        return None
    return a[0] + b[0], a[1] + b[1]


def _transition(prev: int, nxt: int, inits, terms):
    """Best (score, chosen) moving a fluent from ``prev`` to ``nxt``, or None if infeasible."""
    if nxt:
        a = _both(_pick(inits, "nonempty"), _pick(terms, "any"))
        b = _both(_pick(inits, "empty"), _pick(terms, "empty")) if prev else None
        if a is None:
            return b
        if b is None:
            return a
        return b if b[0] >= a[0] else a
    empty = _pick(inits, "empty")
    if empty is None:
        return None
    return _both(empty, _pick(terms, "nonempty" if prev else "any"))


# --------------------------------------------------------------------------
# Dynamic program


@dataclass
class _Compiled:
    wi: WeightedInstance
    fid: int
    alts: list = field(default_factory=list)

    def true_under(self, s: int) -> bool:
        return any((s & req) == val for req, val in self.alts)


def _compile(wi: WeightedInstance, idx: Mapping[Term, int]) -> _Compiled:
    alts = []
    for alt in wi.inst.alternatives:
        req = val = 0
        for f, v in alt:
            bit = 1 << idx[f]
            req |= bit
            if v:
                val |= bit
        alts.append((req, val))
    return _Compiled(wi, idx[wi.inst.fluent], alts)


def _split(comps, s, k):
    inits = [[] for _ in range(k)]
    terms = [[] for _ in range(k)]
    for c in comps:
        if c.true_under(s):
            (inits if c.wi.inst.initiation else terms)[c.fid].append(c.wi)
    return inits, terms


def _solve_group(group, by_t, interp, truth, penalty, truth_hi):
    k = len(group)
    if k > MAX_GROUP_SIZE:
        raise ValueError(f"dependency group of {k} fluents exceeds the DP limit {MAX_GROUP_SIZE}")
    idx = {f: i for i, f in enumerate(group)}
    comps = {t: [_compile(w, idx) for w in ws] for t, ws in by_t.items()}
    init_mask = sum(1 << i for f, i in idx.items() if f in interp.initial_state)
    big = k * interp.length + 1
    nstates = 1 << k
    values = {init_mask: 0}
    back = []
    for t in interp.times:
        cs = comps.get(t, ())
        scored = truth is not None and t + 1 <= truth_hi
        tmask = 0
        if scored:
            tmask = sum(1 << i for f, i in idx.items() if (f, t + 1) in truth)
        new: dict[int, int] = {}
        bp: dict[int, int] = {}
        for s in sorted(values):
            v = values[s]
            inits, terms = _split(cs, s, k)
            opts = []
            for j in range(k):
                prev = (s >> j) & 1
                off = _transition(prev, 0, inits[j], terms[j])
                on = _transition(prev, 1, inits[j], terms[j])
                opts.append((None if off is None else off[0], None if on is None else on[0]))
            for s2 in range(nstates):
                total = 0
                for j in range(k):
                    sc = opts[j][(s2 >> j) & 1]
                    if sc is None:
                        break
                    total += sc
                else:
                    miss = bin(s2 ^ tmask).count("1") if scored else 0
                    val = v + (total - penalty * miss) * big - bin(s2).count("1")
                    if s2 not in new or val > new[s2]:
                        new[s2] = val
                        bp[s2] = s
        values = new
        back.append(bp)
    best = max(values.items(), key=lambda kv: (kv[1], -kv[0]))[0]
    masks = [best]
    for bp in reversed(back):
        masks.append(bp[masks[-1]])
    masks.reverse()
    satisfied = []
    objective = 0
    for step, t in enumerate(interp.times):
        s, s2 = masks[step], masks[step + 1]
        inits, terms = _split(comps.get(t, ()), s, k)
        for j in range(k):
            score, chosen = _transition((s >> j) & 1, (s2 >> j) & 1, inits[j], terms[j])
            objective += score
            satisfied.extend(chosen)
    trajectories = {f: tuple(bool((m >> i) & 1) for m in masks) for f, i in idx.items()}
    return trajectories, satisfied, objective


def _fluents_of(instances: Iterable[WeightedInstance], interp: Interpretation) -> set:
    out = set(interp.universe())
    for w in instances:
        out.add(w.inst.fluent)
        out |= w.inst.referenced_fluents()
    return out


def _count_disagreements(trajectories, start, truth, truth_hi) -> int:
    n = 0
    for f, vals in trajectories.items():
        for i, v in enumerate(vals[1:], start=1):
            if start + i <= truth_hi:
                n += v != ((f, start + i) in truth)
    return n


def solve(
    instances: Sequence[WeightedInstance],
    interp: Interpretation,
    truth: Optional[frozenset] = None,
    penalty: int = 0,
    threads: int = 1,
    truth_hi: Optional[int] = None,
) -> MAPResult:
    """Exact optimum over weighted (and hard) groundings.

    With ``truth`` given, every disagreement with it at times ``start+1 ..
    min(end+1, truth_hi)`` costs ``penalty``. Ties prefer fewer true holdsAt
    values.
    """
    if truth_hi is None:
        truth_hi = interp.end + 1
    fluents = _fluents_of(instances, interp)
    groups = dependency_groups([w.inst for w in instances], fluents)
    where = {f: gi for gi, g in enumerate(groups) for f in g}
    per_group: list[dict] = [dict() for _ in groups]
    for w in instances:
        per_group[where[w.inst.fluent]].setdefault(w.inst.time, []).append(w)

    def run(gi):
        return _solve_group(groups[gi], per_group[gi], interp, truth, penalty, truth_hi)

    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(groups))))
    else:
        parts = [run(gi) for gi in range(len(groups))]
    trajectories: dict = {}
    satisfied: list = []
    objective = 0
    for traj, sat, obj in parts:
        trajectories.update(traj)
        satisfied.extend(sat)
        objective += obj
    dis = _count_disagreements(trajectories, interp.start, truth, truth_hi) if truth is not None else 0
    return MAPResult(
        start=interp.start,
        trajectories=trajectories,
        satisfied=tuple(sorted(w.inst for w in satisfied)),
        objective=objective,
        disagreements=dis,
    )


def weighted_instances(rules: Iterable[Rule], interp: Interpretation, scaled: ScaledWeights) -> list[WeightedInstance]:
    rules = list(rules)
    out = []
    for r, gs in zip(rules, ground_theory(rules, interp)):
        w = scaled.per_rule[r.id]
        out.extend(WeightedInstance(g, w) for g in gs)
    return out


def map_inference(
    rules: Sequence[Rule],
    interp: Interpretation,
    scaled: Optional[ScaledWeights] = None,
    k: int = DEFAULT_K,
    threads: int = 1,
) -> MAPResult:
    """Most probable fluent trajectories and satisfied groundings of a weighted theory."""
    rules = list(rules)
    if scaled is None:
        scaled = scale_weights(rules, k)
    return solve(weighted_instances(rules, interp, scaled), interp, threads=threads)


# --------------------------------------------------------------------------
# Oracles


def _subset_table(lst, prev):
    """Best score for next=0/1 by enumerating every subset of body-true groundings."""
    if len(lst) > 16:
        raise ValueError("too many simultaneous groundings for subset enumeration")
    best = [None, None]
    hard = [x for x in lst if x.hard]
    for r in range(len(lst) + 1):
        for sub in itertools.combinations(lst, r):
            if any(h not in sub for h in hard):
                continue
            initiated = any(x.inst.initiation for x in sub)
            terminated = any(not x.inst.initiation for x in sub)
            nxt = int(initiated or (prev and not terminated))
            score = sum(x.weight for x in sub)
            key = (score, [x.inst for x in sub])
            cur = best[nxt]
            if cur is None or score > cur[0] or (score == cur[0] and key[1] < cur[1]):
                best[nxt] = (score, key[1], list(sub))
    return best


def brute_force_solve(
    instances: Sequence[WeightedInstance],
    interp: Interpretation,
    truth: Optional[frozenset] = None,
    penalty: int = 0,
    truth_hi: Optional[int] = None,
) -> MAPResult:
    """Exhaustive counterpart of :func:`solve` over all joint trajectories."""
    if truth_hi is None:
        truth_hi = interp.end + 1
    fluents = sorted(_fluents_of(instances, interp), key=str)
    k, n_steps = len(fluents), interp.length
    if k * n_steps > MAX_BRUTE_BITS:
        raise ValueError(f"{k} fluents x {n_steps} steps exceeds brute-force bound of {MAX_BRUTE_BITS} bits")
    idx = {f: i for i, f in enumerate(fluents)}
    by_t: dict = {}
    for w in instances:
        by_t.setdefault(w.inst.time, []).append(_compile(w, idx))
    init_mask = sum(1 << i for f, i in idx.items() if f in interp.initial_state)
    smask = (1 << k) - 1
    neg = -(1 << 50)
    codes = np.arange(1 << (k * n_steps), dtype=np.int64)
    total = np.zeros_like(codes)
    tables = {}
    for step, t in enumerate(interp.times):
        prev_states = np.full_like(codes, init_mask) if step == 0 else (codes >> ((step - 1) * k)) & smask
        for j in range(k):
            tbl = np.full((1 << k, 2), neg, dtype=np.int64)
            for s in range(1 << k):
                lst = [c.wi for c in by_t.get(t, ()) if c.fid == j and c.true_under(s)]
                best = _subset_table(lst, (s >> j) & 1)
                tables[(t, j, s)] = best
                for b in (0, 1):
                    if best[b] is not None:
                        tbl[s, b] = best[b][0]
            bits = (codes >> (step * k + j)) & 1
            total += tbl[prev_states, bits]
            if truth is not None and t + 1 <= truth_hi:
                truth_bit = int((fluents[j], t + 1) in truth)
                total -= penalty * (bits != truth_bit)
    ntrue = np.zeros_like(codes)
    for b in range(k * n_steps):
        ntrue += (codes >> b) & 1
    feasible = total > neg // 2
    big = k * n_steps + 1
    score = np.where(feasible, total * big - ntrue, np.iinfo(np.int64).min)
    code = int(np.argmax(score))
    masks = [init_mask] + [(code >> (step * k)) & smask for step in range(n_steps)]
    trajectories = {f: tuple(bool((m >> i) & 1) for m in masks) for f, i in idx.items()}
    satisfied, objective = [], 0
    for step, t in enumerate(interp.times):
        s, s2 = masks[step], masks[step + 1]
        for j in range(k):
            score_j, _, chosen = tables[(t, j, s)][(s2 >> j) & 1]
            objective += score_j
            satisfied.extend(chosen)
    dis = _count_disagreements(trajectories, interp.start, truth, truth_hi) if truth is not None else 0
    return MAPResult(interp.start, trajectories, tuple(sorted(w.inst for w in satisfied)), objective, dis)


def brute_force_map(
    rules: Sequence[Rule], interp: Interpretation, scaled: Optional[ScaledWeights] = None, k: int = DEFAULT_K
) -> MAPResult:
    rules = list(rules)
    if scaled is None:
        scaled = scale_weights(rules, k)
    return brute_force_solve(weighted_instances(rules, interp, scaled), interp)


@dataclass(frozen=True)
class World:
    satisfied: frozenset
    state: frozenset
    log_weight: float


@dataclass(frozen=True)
class Distribution:
    worlds: tuple
    probabilities: tuple

    def argmax(self) -> World:
        i = max(range(len(self.worlds)), key=lambda i: (self.probabilities[i], -i))
        return self.worlds[i]

    @property
    def max_log_weight(self) -> float:
        return max(w.log_weight for w in self.worlds)


def enumerate_distribution(rules: Sequence[Rule], interp: Interpretation) -> Distribution:
    """All answer sets with ``P(I) = exp(sum of satisfied real weights) / Z``.

    An answer set is fixed by which body-true groundings are marked
    satisfied at each step; trajectories then follow from the axioms.
    """
    rules = list(rules)
    weight = {r.id: r.weight for r in rules}
    by_t = candidates_by_time(rules, interp)
    worlds: list[World] = []

    def rec(t, current, sat, wsum, state):
        if t > interp.end:
            worlds.append(World(frozenset(sat), frozenset(state), wsum))
            if len(worlds) > MAX_WORLDS:
                raise ValueError("answer-set enumeration exceeds bound")
            return
        snapshot = frozenset((f, t) for f in current)
        live = [g for g in by_t.get(t, ()) if g.holds_under(snapshot)]
        for r in range(len(live) + 1):
            for chosen in itertools.combinations(live, r):
                inits = {g.fluent for g in chosen if g.initiation}
                terms = {g.fluent for g in chosen if not g.initiation}
                nxt = inits | (current - terms)
                rec(
                    t + 1,
                    nxt,
                    sat + list(chosen),
                    wsum + sum(weight[g.rule_id] for g in chosen),
                    state | {(f, t + 1) for f in nxt},
                )

    init = set(interp.initial_state)
    rec(interp.start, init, [], 0.0, {(f, interp.start) for f in init})
    logs = np.array([w.log_weight for w in worlds])
    z = logs.max() + math.log(np.exp(logs - logs.max()).sum())
    probs = np.exp(logs - z)
    return Distribution(tuple(worlds), tuple(float(p) for p in probs))


# --------------------------------------------------------------------------
# Validation


def validate_map_result(
    result: MAPResult, instances: Sequence[WeightedInstance], interp: Interpretation
) -> list[str]:
    """Consistency problems of a result (empty list when valid).

    Re-derives every trajectory from the satisfied set by forward
    propagation and checks bodies, initial values and the objective.
    """
    problems = []
    state = result.state()
    weights = {w.inst: w.weight for w in instances}
    hard = {w.inst for w in instances if w.hard}
    sat = set(result.satisfied)
    for g in result.satisfied:
        if g not in weights:
            problems.append(f"{g} is not a candidate grounding")
        elif not g.holds_under(state):
            problems.append(f"{g} satisfied but its body is false")
    for g in hard:
        if g.holds_under(state) and g not in sat:
            problems.append(f"hard grounding {g} has a true body but is not satisfied")
    for f, vals in result.trajectories.items():
        if vals[0] != (f in interp.initial_state):
            problems.append(f"{f} does not start from the initial state")
        for i, t in enumerate(interp.times):
            init = any(g.fluent == f and g.initiation and g.time == t for g in sat)
            term = any(g.fluent == f and not g.initiation and g.time == t for g in sat)
            if vals[i + 1] != (init or (vals[i] and not term)):
                problems.append(f"{f} at {t + 1} is inconsistent with the axioms")
    for g in sat:
        if g.fluent not in result.trajectories:
            problems.append(f"{g} concerns a fluent without trajectory")
    obj = sum(weights.get(g, 0) for g in sat)
    if obj != result.objective:
        problems.append(f"objective {result.objective} != sum of satisfied weights {obj}")
    return problems
