"""A prequential pass over a synthetic stream, starting from no rules.

Each batch is predicted with the current theory, scored, and only then
learned from. The printout follows the theory as it grows and the
cumulative F1 as it settles.
"""
import sys

from wecl.harness import GROUND_TRUTH, SyntheticSpec, crisp_f1, generate_synthetic, synthetic_modes
from wecl.learner import OnlineLearner
from wecl.parsing import parse_rules


def main(length=10000):
    stream = generate_synthetic(SyntheticSpec(length=length, noise=0.05, seed=0))
    print("hidden theory:")
    print(GROUND_TRUTH)

    learner = OnlineLearner(synthetic_modes())
    seen = set()
    for batch in stream.batches(50):
        row = learner.process_batch(batch).row
        for r in learner.theory:
            if r.clause_str() not in seen:
                seen.add(r.clause_str())
                print(f"batch {row.batch:3d}: + {r.clause_str()}")
        if row.batch % 20 == 19:
            print(f"batch {row.batch:3d}: cumulative F1 {row.cum_f1:.3f}, {len(learner.theory)} rules")

    print("\nfinal theory:")
    print(learner.theory_text())
    holdout = generate_synthetic(SyntheticSpec(length=2000, noise=0.0, seed=1000))
    # the hard reading keeps rules whose weight averaged over the run is positive
    crisp = learner.crisp_theory()
    print("crisp reading:", *(r.clause_str() for r in crisp), sep="\n  ")
    print(f"held-out crisp F1 of the learned theory: {crisp_f1(crisp, holdout):.3f}")
    print(f"held-out crisp F1 of the hidden theory:  {crisp_f1(parse_rules(GROUND_TRUTH), holdout):.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10000)
