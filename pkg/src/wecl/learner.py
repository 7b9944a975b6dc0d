"""Online learning loop: predict, score, then learn from each batch.

Every batch is first predicted by MAP inference with the current theory and
scored against its annotation (test-then-train). Only afterwards does the
learner induce new rules from the mistakes, update weights with AdaGrad and
try to specialize rules.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .eventcalc import Interpretation, restrict
from .induction import InductionConfig, learn_from_mistakes
from .logic import ModeDeclaration, Rule, theta_equivalent
from .mapinf import DEFAULT_K, MAPResult, map_inference, scale_weights
from .metrics import f1_score
from .parsing import Batch, format_rule
from .specialize import SpecializationSlot, make_slot, try_specialize, update_gain_stats
from .weights import UpdateContext, batch_weight_update

CARRY_INFERRED = "inferred"
CARRY_ANNOTATED = "annotated"


@dataclass
class LearnerConfig:
    eta: float = 1.0
    lam: float = 0.01
    adagrad_delta: float = 1.0
    hoeffding_delta: float = 0.01
    k: int = DEFAULT_K
    max_body_length: int = 8
    initial_weight: float = 0.01
    carry_state: str = CARRY_INFERRED
    prune_threshold: Optional[float] = None
    prune_patience: int = 5
    node_budget: int = 2000
    threads: int = 1
    induce: bool = True
    specialize: bool = True

    def __post_init__(self):
        if self.carry_state not in (CARRY_INFERRED, CARRY_ANNOTATED):
            raise ValueError(f"carry_state must be {CARRY_INFERRED!r} or {CARRY_ANNOTATED!r}")
        if self.max_body_length < 0:
            raise ValueError("max_body_length must be non-negative")
        if self.k <= 0:
            raise ValueError("k must be positive")

    @property
    def update_context(self) -> UpdateContext:
        return UpdateContext(self.eta, self.lam, self.adagrad_delta)


@dataclass(frozen=True)
class TraceRow:
    batch: int
    tp: int
    fp: int
    fn: int
    cum_err: float
    cum_f1: float
    infer_ms: float
    learn_ms: float
    theory_size: int

    FIELDS = ("batch", "tp", "fp", "fn", "cum_err", "cum_f1", "infer_ms", "learn_ms", "theory_size")


@dataclass(frozen=True)
class BatchRecord:
    """What the learner used and produced for one batch, kept for replay."""

    index: int
    version: int
    theory: tuple
    interp: Interpretation
    predictions: frozenset
    scored_times: range
    labels: int


@dataclass
class BatchOutcome:
    predictions: frozenset
    mistakes: int
    row: TraceRow
    map_result: MAPResult


def theory_size(rules: Iterable[Rule]) -> int:
    """Total literal count, heads included."""
    return sum(r.size() for r in rules)


class OnlineLearner:
    def __init__(
        self,
        modes: Sequence[ModeDeclaration] = (),
        rules: Sequence[Rule] = (),
        config: Optional[LearnerConfig] = None,
        on_predict: Optional[Callable[[int, int], None]] = None,
        on_learn: Optional[Callable[[int, int], None]] = None,
    ):
        self.modes = list(modes)
        self.config = config or LearnerConfig()
        self._ids = itertools.count(max((r.id for r in rules), default=0) + 1)
        self.theory: list[Rule] = []
        self.slots: dict[int, SpecializationSlot] = {}
        for r in rules:
            self._add(r)
        self.version = 0
        self.batches_seen = 0
        self.carry: Optional[frozenset] = None
        self.trace: list[TraceRow] = []
        self.records: list[BatchRecord] = []
        self.on_predict = on_predict
        self.on_learn = on_learn
        self._tp = self._fp = self._fn = self._labels = 0
        self._small: dict[int, int] = {}

    def _next_id(self) -> int:
        return next(self._ids)

    def _add(self, rule: Rule) -> None:
        self.theory.append(rule)
        self.slots[rule.id] = make_slot(rule, self._next_id, self.config.initial_weight)

    def theory_text(self) -> str:
        return "".join(f"{format_rule(r)}\n" for r in self.theory)

    def crisp_theory(self) -> list[Rule]:
        """Hard reading of the theory: rules whose weight, averaged over the
        batches they have been in the theory, is positive.

        Under label noise a correct rule's weight hovers just above zero, so
        the last weight alone can drop a rule for one batch.
        """
        out = []
        for r in self.theory:
            w = r.stats.average_weight(r.weight)
            if w > 0:
                out.append(Rule(r.head, r.body, weight=w, id=r.id))
        return out

    # ------------------------------------------------------------------

    def _window(self, batch: Batch) -> Interpretation:
        interp = batch.interp
        use_truth = self.config.carry_state == CARRY_ANNOTATED and batch.truth is not None
        if self.carry is not None and not use_truth:
            interp = interp.with_initial_state(self.carry)
        return interp

    def process_batch(self, batch: Batch) -> BatchOutcome:
        cfg = self.config
        index = self.batches_seen
        interp = self._window(batch)
        t0 = time.perf_counter()
        scaled = scale_weights(self.theory, cfg.k)
        result = map_inference(self.theory, interp, scaled, threads=cfg.threads)
        infer_ms = (time.perf_counter() - t0) * 1000
        if self.on_predict is not None:
            self.on_predict(index, self.version)
        scored = batch.scored_times
        predicted = restrict(result.state(), scored.start, scored.stop - 1)
        snapshot = tuple((r.id, format_rule(r)) for r in self.theory)
        universe = interp.universe() | {f for f, _ in predicted}
        if batch.truth is not None:
            universe |= {f for f, _ in batch.truth}
        labels = len(universe) * len(scored) if batch.truth is not None else 0
        self.records.append(BatchRecord(index, self.version, snapshot, interp, predicted, scored, labels))

        tp = fp = fn = 0
        learn_ms = 0.0
        if batch.truth is not None:
            truth = restrict(batch.truth, scored.start, scored.stop - 1)
            tp, fp, fn = len(predicted & truth), len(predicted - truth), len(truth - predicted)
            self._tp += tp
            self._fp += fp
            self._fn += fn
            self._labels += labels
            t1 = time.perf_counter()
            self._learn(index, interp, result, batch.truth, scaled, scored.stop - 1)
            learn_ms = (time.perf_counter() - t1) * 1000
        self.carry = result.final_fluents()
        self.batches_seen += 1
        cum_err = (self._fp + self._fn) / self._labels if self._labels else 0.0
        row = TraceRow(
            index, tp, fp, fn, cum_err, f1_score(self._tp, self._fp, self._fn),
            infer_ms, learn_ms, theory_size(self.theory),
        )
        self.trace.append(row)
        return BatchOutcome(predicted, fp + fn, row, result)

    def _learn(self, index, interp, result, truth, scaled, hi) -> None:
        cfg = self.config
        map_state = result.state()
        new_rules: list[Rule] = []
        if cfg.induce and self.modes:
            ind = learn_from_mistakes(
                self.theory, interp, map_state, truth, self.modes, scaled,
                InductionConfig(cfg.max_body_length, cfg.node_budget, initial_weight=cfg.initial_weight),
                hi,
            )
            for r in ind.rules:
                if any(theta_equivalent(r, k) for k in self.theory + new_rules):
                    continue
                r.id = self._next_id()
                new_rules.append(r)
        for r in new_rules:
            self._add(r)
        ctx = cfg.update_context
        # pre-induction MAP state for every rule, including the new ones
        batch_weight_update(self.theory, map_state, truth, interp, ctx, hi)
        if cfg.specialize:
            children = [c for r in self.theory for c in self.slots[r.id].children]
            batch_weight_update(children, map_state, truth, interp, ctx, hi)
            for r in list(self.theory):
                slot = update_gain_stats(self.slots[r.id], map_state, interp, hi)
                best = try_specialize(slot, cfg.hoeffding_delta)
                if best is not None:
                    self._replace(r, best)
        if cfg.prune_threshold is not None:
            self._prune()
        for r in self.theory:
            r.stats.weight_sum += r.weight
            r.stats.updates += 1
        self.version += 1
        if self.on_learn is not None:
            self.on_learn(index, self.version)

    def _replace(self, parent: Rule, child: Rule) -> None:
        i = next(i for i, r in enumerate(self.theory) if r is parent)
        del self.slots[parent.id]
        self.theory[i] = child
        self.slots[child.id] = make_slot(child, self._next_id, self.config.initial_weight)

    def _prune(self) -> None:
        keep = []
        for r in self.theory:
            if abs(r.weight) < self.config.prune_threshold:
                self._small[r.id] = self._small.get(r.id, 0) + 1
            else:
                self._small[r.id] = 0
            if self._small[r.id] >= self.config.prune_patience:
                del self.slots[r.id]
                continue
            keep.append(r)
        self.theory = keep

    def run(self, batches: Iterable[Batch]) -> list[TraceRow]:
        for b in batches:
            self.process_batch(b)
        return self.trace


def run_stream(
    batches: Iterable[Batch],
    modes: Sequence[ModeDeclaration] = (),
    rules: Sequence[Rule] = (),
    config: Optional[LearnerConfig] = None,
) -> tuple[list[Rule], list[TraceRow], OnlineLearner]:
    learner = OnlineLearner(modes, rules, config)
    learner.run(batches)
    return learner.theory, learner.trace, learner
