"""How a rule's weight moves, and when a refinement wins the Hoeffding test."""
import math

from wecl.specialize import GainStats, hoeffding_epsilon, information_gain
from wecl.weights import UpdateContext, adagrad_update


def main():
    ctx = UpdateContext(eta=1.0, lam=0.01, delta=1.0)

    # a rule that keeps missing true initiations (negative gap) is promoted,
    # while its step size shrinks as squared gaps accumulate
    w, gsq = 0.0, 0.0
    for dg in (-2, -1, -1, 0, 0, 1):
        w, gsq = adagrad_update(w, gsq, dg, ctx)
        print(f"gap {dg:+d} -> weight {w:+.4f}  (step scale {1 / (1 + math.sqrt(gsq)):.3f})")

    # a parent rule that is right 80% of the time, and a refinement that is
    # right 60 times out of 65, against a rival right 75 times out of 85
    parent, child, rival = GainStats(80, 20), GainStats(60, 5), GainStats(75, 10)
    g1, g2 = information_gain(child, parent), information_gain(rival, parent)
    print(f"\ngain of the refinement {g1:.4f}, of its rival {g2:.4f}")
    for n in (10, 100, 1000):
        eps = hoeffding_epsilon(0.01, n)
        verdict = "refine" if g1 - g2 > eps else "wait"
        print(f"after {n:4d} groundings epsilon = {eps:.4f}: {verdict}")


if __name__ == "__main__":
    main()
