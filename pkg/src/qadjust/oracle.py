"""Ground truth for the permutation model, plus random partitions for experiments.

Three independent routes to null-model moments:

* :func:`permutation_table_distribution` - all N! reassignments of the
  column labels (tiny N only);
* :func:`enumerate_moments` - all tables with the given marginals,
  weighted by prod(a_i!) prod(b_j!) / (N! prod(n_ij!));
* :func:`monte_carlo_moments` - seeded random permutations.

The weighted-table route is only trusted after it agrees with the N!
route (see the tests). Randomness comes from numpy's PCG64 generator,
seeded through :class:`numpy.random.SeedSequence`, so results depend only
on the seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .partition import ContingencyTable

__all__ = [
    "OracleMoments",
    "RandomPartitionSpec",
    "ENUMERATION_CAP",
    "iter_tables",
    "table_probability",
    "enumerate_table_distribution",
    "permutation_table_distribution",
    "enumerate_moments",
    "permutation_moments",
    "sample_tables",
    "monte_carlo_moments",
    "random_partition",
    "make_rng",
]

ENUMERATION_CAP = 12
MC_CHUNK = 10_000


@dataclass(frozen=True)
class OracleMoments:
    mean: float
    variance: float
    n_outcomes_or_samples: int
    method: str
    ci99_halfwidth: Optional[float] = None


def _marginals(row_marginals, col_marginals) -> tuple[list[int], list[int]]:
    a = [int(x) for x in row_marginals]
    b = [int(x) for x in col_marginals]
    if not a or not b or min(a) < 1 or min(b) < 1:
        raise ValueError("marginals must be positive integers")
    if sum(a) != sum(b):
        raise ValueError(f"marginals disagree on N: {sum(a)} vs {sum(b)}")
    return a, b


def iter_tables(row_marginals, col_marginals) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Every nonnegative integer table with the given marginals."""
    a, b = _marginals(row_marginals, col_marginals)
    r, c = len(a), len(b)

    def rows_for(total, caps, j):
        if j == c - 1:
            if total <= caps[j]:
                yield (total,)
            return
        rest = sum(caps[j + 1 :])
        for x in range(max(0, total - rest), min(total, caps[j]) + 1):
            for tail in rows_for(total - x, caps, j + 1):
                yield (x,) + tail

    def fill(i, caps):
        if i == r - 1:
            yield (tuple(caps),)
            return
        for row in rows_for(a[i], caps, 0):
            new_caps = [cap - x for cap, x in zip(caps, row)]
            for rest in fill(i + 1, new_caps):
                yield (row,) + rest

    yield from fill(0, list(b))


def table_probability(counts, row_marginals, col_marginals) -> Fraction:
    """Exact permutation-model probability of one table."""
    n = sum(int(x) for x in row_marginals)
    num = math.prod(math.factorial(int(x)) for x in row_marginals)
    num *= math.prod(math.factorial(int(x)) for x in col_marginals)
    den = math.factorial(n) * math.prod(math.factorial(int(x)) for row in counts for x in row)
    return Fraction(num, den)


def enumerate_table_distribution(row_marginals, col_marginals) -> dict:
    """{table: probability} over all tables with the given marginals."""
    return {
        tab: table_probability(tab, row_marginals, col_marginals)
        for tab in iter_tables(row_marginals, col_marginals)
    }


def permutation_table_distribution(row_marginals, col_marginals) -> dict:
    """{table: probability} by brute force over all N! column-label orders."""
    a, b = _marginals(row_marginals, col_marginals)
    n = sum(a)
    if n > 9:
        raise ValueError("N! enumeration is limited to N <= 9")
    r, c = len(a), len(b)
    u = np.repeat(np.arange(r), a)
    v = np.repeat(np.arange(c), b)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    codes = u[None, :] * c + v[perms]
    offsets = np.arange(len(perms))[:, None] * (r * c)
    flat = np.bincount((codes + offsets).ravel(), minlength=len(perms) * r * c)
    tables, freq = np.unique(flat.reshape(len(perms), r * c), axis=0, return_counts=True)
    total = math.factorial(n)
    return {
        tuple(tuple(int(x) for x in row) for row in tab.reshape(r, c)): Fraction(int(k), total)
        for tab, k in zip(tables, freq)
    }


def _moments_of(dist: dict, statistic: Callable, method: str) -> OracleMoments:
    stats = []
    probs = []
    for tab, p in dist.items():
        stats.append(float(statistic(ContingencyTable(np.array(tab)))))
        probs.append(float(p))
    stats = np.array(stats)
    probs = np.array(probs)
    mean = math.fsum(probs * stats)
    var = math.fsum(probs * (stats - mean) ** 2)
    return OracleMoments(mean, var, len(dist), method)


def enumerate_moments(row_marginals, col_marginals, statistic: Callable[[ContingencyTable], float],
                      cap: int = ENUMERATION_CAP) -> OracleMoments:
    """Exact mean and variance of ``statistic`` over all tables with the marginals."""
    a, b = _marginals(row_marginals, col_marginals)
    if sum(a) > cap:
        raise ValueError(f"N = {sum(a)} exceeds the enumeration cap {cap}")
    return _moments_of(enumerate_table_distribution(a, b), statistic, "enumeration")


def permutation_moments(row_marginals, col_marginals, statistic) -> OracleMoments:
    """Mean and variance of ``statistic`` over all N! permutations."""
    dist = permutation_table_distribution(row_marginals, col_marginals)
    return _moments_of(dist, statistic, "permutation")


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int seed, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def sample_tables(row_marginals, col_marginals, n_samples: int, seed) -> np.ndarray:
    """Random tables with fixed marginals, shape (n_samples, r, c).

    Each sample shuffles the column labels of a fixed labeling. Samples are
    drawn in chunks of ``MC_CHUNK`` with child seeds spawned from ``seed``,
    so the output depends only on (marginals, n_samples, seed).
    """
    a, b = _marginals(row_marginals, col_marginals)
    r, c = len(a), len(b)
    u = np.repeat(np.arange(r), a)
    v = np.repeat(np.arange(c), b)
    n_chunks = -(-n_samples // MC_CHUNK)
    children = np.random.SeedSequence(int(seed)).spawn(n_chunks)
    out = np.empty((n_samples, r, c), dtype=np.int64)
    for k, child in enumerate(children):
        lo = k * MC_CHUNK
        size = min(MC_CHUNK, n_samples - lo)
        rng = make_rng(child)
        shuffled = rng.permuted(np.broadcast_to(v, (size, len(v))), axis=1)
        codes = u[None, :] * c + shuffled + np.arange(size)[:, None] * (r * c)
        out[lo : lo + size] = np.bincount(codes.ravel(), minlength=size * r * c).reshape(size, r, c)
    return out


def monte_carlo_moments(row_marginals, col_marginals, statistic, n_samples: int, seed,
                        vectorized: bool = False) -> OracleMoments:
    """Sample mean, unbiased variance and 99% CI half-width of the mean.

    ``statistic`` receives a ContingencyTable per sample, or, with
    ``vectorized=True``, the whole (n_samples, r, c) count array at once.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    tables = sample_tables(row_marginals, col_marginals, n_samples, seed)
    if vectorized:
        values = np.asarray(statistic(tables), dtype=float)
    else:
        values = np.array([float(statistic(ContingencyTable(tab))) for tab in tables])
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    half = float(norm.ppf(0.995) * math.sqrt(var / n_samples))
    return OracleMoments(mean, var, n_samples, "monte-carlo", half)


@dataclass(frozen=True)
class RandomPartitionSpec:
    """How to draw a random partition of ``n_objects`` into ``n_clusters`` sets.

    scheme ``uniform``: each object picks a cluster uniformly, redrawn until
    no cluster is empty. ``fixed``: cluster sizes given by ``marginals``.
    ``size-sweep``: one cluster holds ``round(fraction * n)`` objects, the
    rest are split as evenly as possible.
    """

    n_objects: int
    n_clusters: int
    scheme: str = "uniform"
    marginals: Optional[Sequence[int]] = None
    fraction: Optional[float] = None

    def __post_init__(self):
        if self.n_objects < 1 or self.n_clusters < 1 or self.n_clusters > self.n_objects:
            raise ValueError("need 1 <= n_clusters <= n_objects")
        if self.scheme == "fixed":
            if self.marginals is None or len(self.marginals) != self.n_clusters:
                raise ValueError("fixed scheme needs one marginal per cluster")
            if sum(self.marginals) != self.n_objects or min(self.marginals) < 1:
                raise ValueError("fixed marginals must be positive and sum to n_objects")
        elif self.scheme == "size-sweep":
            if self.fraction is None or not 0 < self.fraction < 1:
                raise ValueError("size-sweep needs a fraction in (0, 1)")
            big = round(self.fraction * self.n_objects)
            rest = self.n_objects - big
            if big < 1 or (self.n_clusters > 1 and rest < self.n_clusters - 1):
                raise ValueError("size-sweep fraction leaves an empty cluster")
            if self.n_clusters == 1 and rest:
                raise ValueError("size-sweep with one cluster needs fraction 1")
        elif self.scheme != "uniform":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def sizes(self) -> Optional[list[int]]:
        if self.scheme == "fixed":
            return [int(x) for x in self.marginals]
        if self.scheme == "size-sweep":
            big = round(self.fraction * self.n_objects)
            k = self.n_clusters - 1
            rest = self.n_objects - big
            return [big] + [rest // k + (1 if t < rest % k else 0) for t in range(k)]
        return None


def random_partition(spec: RandomPartitionSpec, seed) -> np.ndarray:
    """Cluster labels 0..n_clusters-1 for ``spec.n_objects`` objects."""
    rng = make_rng(seed)
    sizes = spec.sizes()
    if sizes is not None:
        return rng.permutation(np.repeat(np.arange(len(sizes)), sizes))
    while True:
        labels = rng.integers(0, spec.n_clusters, size=spec.n_objects)
        if np.unique(labels).size == spec.n_clusters:
            return labels
