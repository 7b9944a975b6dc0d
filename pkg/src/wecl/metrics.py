"""Scoring helpers for predicted versus annotated states."""
from __future__ import annotations

from typing import Iterable


def f1_score(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def confusion(predicted: Iterable, truth: Iterable) -> tuple[int, int, int]:
    """(TP, FP, FN) between two sets of ``(fluent, time)`` pairs."""
    p, t = frozenset(predicted), frozenset(truth)
    return len(p & t), len(p - t), len(t - p)
