"""SNP-like benchmark data: sparse noise plus co-occurring variable sets."""

from dataclasses import dataclass

import numpy as np

from .._validation import check_positive_int
from ..data import BinaryDataset

CASE = "case"
CONTROL = "control"


@dataclass(frozen=True)
class SnpDataSpec:
    n_samples: int = 500
    n_variables: int = 50
    n_patterns: int = 5
    pattern_size: int = 5
    noise_p: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("n_samples", "n_variables", "n_patterns", "pattern_size"):
            check_positive_int(getattr(self, name), name)
        check_positive_int(self.seed, "seed", minimum=0)
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError("noise_p must lie in [0, 1]")
        if self.n_patterns * self.pattern_size > self.n_variables:
            raise ValueError("pattern sets do not fit into the available variables")

    @property
    def pattern_columns(self):
        k = self.pattern_size
        return [tuple(range(i * k, (i + 1) * k)) for i in range(self.n_patterns)]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    data: BinaryDataset
    labels: tuple
    pattern_columns: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) != self.data.n_rows:
            raise ValueError("one label per row is required")
        object.__setattr__(self, "labels", labels)
        cols = tuple(tuple(int(c) for c in s) for s in self.pattern_columns)
        flat = [c for s in cols for c in s]
        if len(set(flat)) != len(flat):
            raise ValueError("pattern column sets must be disjoint")
        object.__setattr__(self, "pattern_columns", cols)

    @property
    def n_rows(self):
        return self.data.n_rows

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return LabeledDataset(self.data.take(rows), [self.labels[i] for i in rows],
                              self.pattern_columns)


def gen_snp_data(spec=None):
    """Generate the benchmark matrix.

    The first ``n_samples // 2`` rows are cases and carry one uniformly chosen
    set of ``pattern_size`` ones; every cell is then OR-ed with independent
    Bernoulli(``noise_p``) noise, so noise never erases pattern bits.
    """
    spec = spec or SnpDataSpec()
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n_samples, spec.n_variables
    values = np.zeros((n, p))
    n_cases = n // 2
    sets = spec.pattern_columns
    choice = rng.integers(spec.n_patterns, size=n_cases)
    for i, s in enumerate(choice):
        values[i, list(sets[s])] = 1.0
    noise = rng.random((n, p)) < spec.noise_p
    values = np.maximum(values, noise)
    labels = [CASE] * n_cases + [CONTROL] * (n - n_cases)
    return LabeledDataset(BinaryDataset(values), labels, sets)


def site_sizes(n_rows, n_sites):
    base, rest = divmod(n_rows, n_sites)
    return [base + (1 if i < rest else 0) for i in range(n_sites)]


def partition_sites(data, n_sites, seed=0):
    """Random near-equal row partition; leftover rows go to the first sites."""
    n_sites = check_positive_int(n_sites, "n_sites")
    if n_sites > data.n_rows:
        raise ValueError(f"cannot spread {data.n_rows} rows over {n_sites} sites")
    if n_sites == 1:
        return [data]
    perm = np.random.default_rng(seed).permutation(data.n_rows)
    parts = []
    start = 0
    for size in site_sizes(data.n_rows, n_sites):
        parts.append(data.take(np.sort(perm[start:start + size])))
        start += size
    return parts
