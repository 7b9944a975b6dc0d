"""Synthetic streams, experiment driver and report files."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .eventcalc import Interpretation, crisp_infer, restrict
from .learner import LearnerConfig, OnlineLearner, TraceRow
from .logic import HAPPENS, Atom, Compound, Const, ModeDeclaration, Rule
from .mapinf import map_inference, scale_weights
from .metrics import confusion, f1_score
from .parsing import Batch, StreamRecord, format_rules, format_state, make_batches, parse_modes, parse_rules

GROUND_TRUTH = """\
1.0 initiatedAt(active(X),T) :- happensAt(start(X),T).
1.0 terminatedAt(active(X),T) :- happensAt(stop(X),T).
1.0 terminatedAt(active(X),T) :- happensAt(crash(X),T).
"""

SYNTHETIC_MODES = """\
modeh(initiatedAt(active(+entity),+time)).
modeh(terminatedAt(active(+entity),+time)).
modeb(happensAt(start(+entity),+time)).
modeb(happensAt(stop(+entity),+time)).
modeb(happensAt(crash(+entity),+time)).
modeb(happensAt(walk(+entity),+time)).
modeb(happensAt(wave(+entity),+time)).
modeb(holdsAt(active(+entity),+time)).
"""

DEFAULT_RATES = {"start": 0.08, "stop": 0.02, "crash": 0.015, "walk": 0.05, "wave": 0.05}


@dataclass
class SyntheticSpec:
    theory: str = GROUND_TRUTH
    entities: Sequence[str] = ("p1", "p2")
    fluent: str = "active"
    length: int = 10_000
    rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.noise <= 1:
            raise ValueError("noise rate must lie in [0, 1]")
        if self.length < 1:
            raise ValueError("stream length must be positive")

    def fluents(self) -> frozenset:
        return frozenset(Compound(self.fluent, (Const(e),)) for e in self.entities)


@dataclass(frozen=True)
class SyntheticStream:
    records: tuple
    annotation: frozenset
    clean: frozenset
    fluents: frozenset
    length: int

    def interpretation(self) -> Interpretation:
        obs: dict[int, set] = {}
        for r in self.records:
            obs.setdefault(r.time, set()).add(r.fact)
        init = frozenset(f for f, t in self.clean if t == 0)
        return Interpretation(0, self.length - 1, {t: frozenset(v) for t, v in obs.items()}, init, self.fluents)

    def batches(self, batch_size: int, noisy: bool = True) -> list[Batch]:
        labels = self.annotation if noisy else self.clean
        return make_batches(
            self.records, batch_size, labels, self.fluents, start=0, end=self.length - 1, horizon=self.length
        )


def generate_synthetic(spec: SyntheticSpec) -> SyntheticStream:
    """Random events per time point, labels by crisp inference, then label flips.

    Labels cover times ``0..length``; the fluents start false.
    """
    rng = np.random.default_rng(spec.seed)
    names = sorted(spec.rates)
    probs = np.array([spec.rates[n] for n in names])
    hits = rng.random((spec.length, len(spec.entities), len(names))) < probs
    records = []
    for t, e, k in zip(*np.nonzero(hits)):
        event = Compound(names[k], (Const(spec.entities[e]),))
        records.append(StreamRecord(int(t), Atom(HAPPENS, (event, Const(str(int(t)))))))
    fluents = spec.fluents()
    stream = SyntheticStream(tuple(records), frozenset(), frozenset(), fluents, spec.length)
    clean = crisp_infer(parse_rules(spec.theory), stream.interpretation())
    ordered = sorted(fluents, key=str)
    flips = rng.random((spec.length + 1, len(ordered))) < spec.noise
    noisy = set(clean)
    for t, j in zip(*np.nonzero(flips)):
        noisy ^= {(ordered[j], int(t))}
    return SyntheticStream(tuple(records), frozenset(noisy), clean, fluents, spec.length)


def synthetic_modes() -> list[ModeDeclaration]:
    return parse_modes(SYNTHETIC_MODES)


def crisp_f1(rules: Sequence[Rule], stream: SyntheticStream) -> float:
    """F1 of crisp inference with ``rules`` against the noiseless labels at times 1..length."""
    state = crisp_infer(rules, stream.interpretation())
    tp, fp, fn = confusion(restrict(state, 1, stream.length), restrict(stream.clean, 1, stream.length))
    return f1_score(tp, fp, fn)


def infer_stream(rules: Sequence[Rule], batches: Sequence[Batch], k: int = 1000, threads: int = 1) -> list[frozenset]:
    """MAP predictions per batch with a fixed theory, carrying the final state forward."""
    scaled = scale_weights(rules, k)
    carry = None
    out = []
    for b in batches:
        interp = b.interp if carry is None else b.interp.with_initial_state(carry)
        res = map_inference(rules, interp, scaled, threads=threads)
        s = b.scored_times
        out.append(restrict(res.state(), s.start, s.stop - 1))
        carry = res.final_fluents()
    return out


def score_predictions(predictions: frozenset, batches: Sequence[Batch]) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for b in batches:
        if b.truth is None:
            continue
        s = b.scored_times
        got = confusion(restrict(predictions, s.start, s.stop - 1), restrict(b.truth, s.start, s.stop - 1))
        tp, fp, fn = tp + got[0], fp + got[1], fn + got[2]
    return tp, fp, fn


# --------------------------------------------------------------------------
# Reports


def write_trace(path, rows: Sequence[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TraceRow.FIELDS)
        for r in rows:
            w.writerow([
                r.batch, r.tp, r.fp, r.fn, f"{r.cum_err:.6f}", f"{r.cum_f1:.6f}",
                f"{r.infer_ms:.3f}", f"{r.learn_ms:.3f}", r.theory_size,
            ])


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


@dataclass
class ExperimentResult:
    learner: Optional[OnlineLearner]
    predictions: frozenset
    summary: dict


def train(
    batches: Sequence[Batch],
    modes: Sequence[ModeDeclaration],
    rules: Sequence[Rule] = (),
    config: Optional[LearnerConfig] = None,
    out_dir=None,
) -> ExperimentResult:
    """Single prequential pass.

    With ``out_dir`` set, writes trace.csv, theory.lp, crisp_theory.lp,
    predictions.lp and summary.json there.
    """
    t0 = time.perf_counter()
    learner = OnlineLearner(modes, rules, config)
    learner.run(batches)
    predictions = frozenset().union(*(r.predictions for r in learner.records)) if learner.records else frozenset()
    tp, fp, fn = score_predictions(predictions, batches)
    last = learner.trace[-1] if learner.trace else None
    summary = {
        "mode": "train",
        "batches": len(learner.trace),
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "f1": f1_score(tp, fp, fn),
        "cum_err": last.cum_err if last else 0.0,
        "rules": len(learner.theory),
        "crisp_rules": len(learner.crisp_theory()),
        "theory_size": last.theory_size if last else 0,
        "seconds": round(time.perf_counter() - t0, 3),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trace(out / "trace.csv", learner.trace)
        (out / "theory.lp").write_text(learner.theory_text())
        (out / "crisp_theory.lp").write_text(format_rules(learner.crisp_theory()))
        (out / "predictions.lp").write_text(format_state(predictions))
        write_json(out / "summary.json", summary)
    return ExperimentResult(learner, predictions, summary)


def infer(rules: Sequence[Rule], batches: Sequence[Batch], k: int = 1000, threads: int = 1, out_dir=None) -> ExperimentResult:
    per_batch = infer_stream(rules, batches, k, threads)
    predictions = frozenset().union(*per_batch) if per_batch else frozenset()
    summary = {"mode": "infer", "batches": len(batches), "rules": len(rules)}
    if any(b.truth is not None for b in batches):
        tp, fp, fn = score_predictions(predictions, batches)
        summary.update(tp=tp, fp=fp, fn=fn, f1=f1_score(tp, fp, fn))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "predictions.lp").write_text(format_state(predictions))
        write_json(out / "summary.json", summary)
    return ExperimentResult(None, predictions, summary)


def evaluate(predictions: frozenset, batches: Sequence[Batch], out_dir=None) -> ExperimentResult:
    if not any(b.truth is not None for b in batches):
        raise ValueError("evaluation needs an annotated stream")
    tp, fp, fn = score_predictions(predictions, batches)
    summary = {"mode": "eval", "batches": len(batches), "tp": tp, "fp": fp, "fn": fn, "f1": f1_score(tp, fp, fn)}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "summary.json", summary)
    return ExperimentResult(None, predictions, summary)
