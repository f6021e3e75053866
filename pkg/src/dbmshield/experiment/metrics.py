"""Quantitative comparison of original and synthetic SNP-like data."""

from itertools import combinations
from typing import NamedTuple

import numpy as np

from ..data import as_dataset


class PatternMetrics(NamedTuple):
    marginal_max_abs_diff: float
    pattern_recovery_rate: float
    within_set_cooccurrence: float
    between_set_cooccurrence: float
    noise_rate: float


def complete_set_mask(X, pattern_columns):
    """Boolean ``(n_rows, n_sets)``: row carries every one of the set's columns."""
    return np.column_stack([X[:, list(cols)].all(axis=1) for cols in pattern_columns])


def _mean_lift(X, pairs):
    p = X.mean(axis=0)
    lifts = []
    for i, j in pairs:
        denom = p[i] * p[j]
        if denom > 0:
            lifts.append(np.mean(X[:, i] * X[:, j]) / denom)
    return float(np.mean(lifts)) if lifts else 0.0


def cooccurrence_lifts(X, pattern_columns):
    """Mean pairwise lift ``P(a, b) / (P(a) P(b))`` within and between sets.

    Pairs whose marginal product is zero are skipped; with no valid pair the
    lift is reported as 0.
    """
    within = [pair for cols in pattern_columns for pair in combinations(cols, 2)]
    between = [
        (i, j)
        for s, t in combinations(range(len(pattern_columns)), 2)
        for i in pattern_columns[s]
        for j in pattern_columns[t]
    ]
    return _mean_lift(X, within), _mean_lift(X, between)


def noise_rate(X, pattern_columns):
    """Ones-fraction in the non-pattern columns of rows that contain no complete set."""
    X = np.asarray(X)
    rows = ~complete_set_mask(X, pattern_columns).any(axis=1)
    in_sets = {c for cols in pattern_columns for c in cols}
    outside = [c for c in range(X.shape[1]) if c not in in_sets]
    if not rows.any() or not outside:
        return 0.0
    return float(X[np.ix_(rows, outside)].mean())


def pattern_metrics(original, synthetic):
    """Compare synthetic rows against the labelled original dataset."""
    orig = original.data.values
    syn = as_dataset(synthetic).values
    if orig.shape[1] != syn.shape[1]:
        raise ValueError(f"column mismatch: {orig.shape[1]} vs {syn.shape[1]}")
    sets = original.pattern_columns
    marginal = float(np.max(np.abs(orig.mean(axis=0) - syn.mean(axis=0))))
    recovery = float(complete_set_mask(syn, sets).any(axis=1).mean())
    within, between = cooccurrence_lifts(syn, sets)
    return PatternMetrics(marginal, recovery, within, between, noise_rate(syn, sets))


def noise_baseline_recovery(noise_p, n_patterns, pattern_size):
    """Probability that pure Bernoulli noise completes at least one set in a row."""
    return 1.0 - (1.0 - noise_p ** pattern_size) ** n_patterns
