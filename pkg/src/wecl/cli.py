"""Command-line entry point: ``wecl --mode train|infer|eval``.

Without ``--data`` the commands run on a generated synthetic stream, which
makes ``wecl --mode train --out-dir out`` a complete smoke run.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .eventcalc import UnsupportedRule
from .harness import SyntheticSpec, evaluate, generate_synthetic, infer, synthetic_modes, train
from .learner import CARRY_ANNOTATED, CARRY_INFERRED, LearnerConfig
from .parsing import ParseError, load_stream, parse_modes, parse_rules, parse_state

log = logging.getLogger("wecl")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wecl", description="Online learning and MAP inference for weighted Event Calculus rules.")
    p.add_argument("--mode", choices=("train", "infer", "eval"), required=True)
    p.add_argument("--data", type=Path, help="event stream (.lp facts or .csv time,predicate,args); synthetic if omitted")
    p.add_argument("--annotation", type=Path, help="holdsAt facts for the stream")
    p.add_argument("--modes", type=Path, help="mode declarations")
    p.add_argument("--rules", type=Path, help="initial (train) or fixed (infer) weighted theory")
    p.add_argument("--predictions", type=Path, help="holdsAt facts to score in eval mode")
    p.add_argument("--batch-size", type=int, default=50, help="time points per batch")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--adagrad-delta", type=float, default=1.0)
    p.add_argument("--hoeffding-delta", type=float, default=0.01)
    p.add_argument("--k-scale", type=int, default=1000)
    p.add_argument("--max-body-length", type=int, default=8)
    p.add_argument("--carry-state", choices=(CARRY_INFERRED, CARRY_ANNOTATED), default=CARRY_INFERRED)
    p.add_argument("--prune-threshold", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed of the synthetic stream")
    p.add_argument("--synthetic-length", type=int, default=10_000)
    p.add_argument("--noise", type=float, default=0.05, help="label noise of the synthetic stream")
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read(path: Optional[Path], what: str) -> Optional[str]:
    if path is None:
        return None
    if not path.is_file():
        raise FileNotFoundError(f"{what} file not found: {path}")
    return path.read_text(encoding="utf-8")


def _batches(args):
    if args.data is None:
        if args.annotation is not None:
            raise ValueError("--annotation needs --data")
        spec = SyntheticSpec(length=args.synthetic_length, noise=args.noise, seed=args.seed)
        log.info("no --data given; using a synthetic stream of %d time points", spec.length)
        return generate_synthetic(spec).batches(args.batch_size), True
    if not args.data.is_file():
        raise FileNotFoundError(f"data file not found: {args.data}")
    if args.annotation is not None and not args.annotation.is_file():
        raise FileNotFoundError(f"annotation file not found: {args.annotation}")
    return load_stream(args.data, args.batch_size, args.annotation), False


def run(args) -> dict:
    if args.batch_size < 1:
        raise ValueError("--batch-size must be at least 1")
    if args.threads < 1:
        raise ValueError("--threads must be at least 1")
    batches, synthetic = _batches(args)
    rules_text = _read(args.rules, "rules")
    rules = parse_rules(rules_text) if rules_text is not None else []
    if args.mode == "train":
        modes_text = _read(args.modes, "modes")
        if modes_text is not None:
            modes = parse_modes(modes_text)
        elif synthetic:
            modes = synthetic_modes()
        else:
            modes = []
            log.warning("no --modes given: weight learning only, no new rules")
        config = LearnerConfig(
            eta=args.eta, lam=args.lam, adagrad_delta=args.adagrad_delta,
            hoeffding_delta=args.hoeffding_delta, k=args.k_scale,
            max_body_length=args.max_body_length, carry_state=args.carry_state,
            prune_threshold=args.prune_threshold, threads=args.threads,
        )
        return train(batches, modes, rules, config, args.out_dir).summary
    if args.mode == "infer":
        if args.rules is None:
            raise ValueError("infer mode needs --rules")
        return infer(rules, batches, args.k_scale, args.threads, args.out_dir).summary
    text = _read(args.predictions, "predictions")
    if text is None:
        raise ValueError("eval mode needs --predictions")
    return evaluate(parse_state(text), batches, args.out_dir).summary


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        summary = run(args)
    except (OSError, ParseError, UnsupportedRule, ValueError) as e:
        print(f"wecl: error: {e}", file=sys.stderr)
        return 2
    for k in sorted(summary):
        print(f"{k}: {summary[k]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
