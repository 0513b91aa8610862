"""Plug-in comparison measures: pair-counting indices and q-entropy measures.

All q-entropy quantities use the empirical frequencies a_i/N, b_j/N and
n_ij/N of a contingency table. Empty cells contribute nothing (0^q = 0,
0 ln 0 = 0). Sums go through :func:`math.fsum` since sum p^q adds many
small, nearly equal terms.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import UndefinedMeasureError
from .partition import as_table, pair_counts
from .qparam import as_qparam

__all__ = [
    "rand_index",
    "mirkin_index",
    "jaccard",
    "tsallis_entropy",
    "entropy_q",
    "joint_entropy_q",
    "conditional_entropy_q",
    "mutual_information_q",
    "variation_of_information_q",
    "nmi_q",
]


def rand_index(t) -> float:
    """Fraction of object pairs on which U and V agree."""
    t = as_table(t)
    if t.total < 2:
        raise UndefinedMeasureError("RI", "needs at least two objects")
    pc = pair_counts(t)
    return (pc.same_same + pc.diff_diff) / pc.n_pairs


def mirkin_index(t) -> float:
    """Mirkin distance sum a_i^2 + sum b_j^2 - 2 sum n_ij^2 (twice the disagreeing pairs)."""
    pc = pair_counts(t)
    return float(2 * (pc.same_diff + pc.diff_same))


def jaccard(t) -> float:
    """k11 / (k11 + k10 + k01).

    When no pair is co-clustered in either partition both are all
    singletons, hence identical, and the coefficient is 1.
    """
    pc = pair_counts(t)
    den = pc.same_same + pc.same_diff + pc.diff_same
    if den == 0:
        return 1.0
    return pc.same_same / den


def _power_sum(p: np.ndarray, q: float) -> float:
    p = p[p > 0]
    return math.fsum(np.power(p, q))


def _shannon_sum(p: np.ndarray) -> float:
    p = p[p > 0]
    return -math.fsum(p * np.log(p))


def _entropy_of(p: np.ndarray, qp) -> float:
    if qp.is_shannon:
        return _shannon_sum(p)
    return (1.0 - _power_sum(p, qp.q)) / (qp.q - 1.0)


def tsallis_entropy(weights, q) -> float:
    """q-entropy of a probability vector.

    Tsallis: (1 - sum p^q) / (q - 1). Shannon: -sum p ln p, in nats.

    >>> tsallis_entropy([0.5, 0.5], 2)
    0.5
    """
    qp = as_qparam(q)
    p = np.asarray(weights, dtype=float).ravel()
    if p.size == 0 or (p < 0).any() or not np.all(np.isfinite(p)):
        raise ValueError("weights must be finite and nonnegative")
    if abs(math.fsum(p) - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    return _entropy_of(p, qp)


def _freq(x: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel() / n


def entropy_q(t, q, side: str = "U") -> float:
    """q-entropy of one marginal partition: ``side`` is ``"U"`` (rows) or ``"V"`` (columns)."""
    t = as_table(t)
    marg = {"U": t.row_marginals, "V": t.col_marginals}[side]
    return _entropy_of(_freq(marg, t.total), as_qparam(q))


def joint_entropy_q(t, q) -> float:
    """q-entropy of the joint partition, cell frequencies n_ij/N."""
    t = as_table(t)
    return _entropy_of(_freq(t.counts, t.total), as_qparam(q))


def conditional_entropy_q(t, q, direction: str = "V|U") -> float:
    """Conditional q-entropy as a (a_i/N)^q-weighted average of row entropies.

    ``direction="V|U"`` conditions on the rows, ``"U|V"`` on the columns.
    For Shannon the weights reduce to a_i/N.
    """
    t = as_table(t)
    qp = as_qparam(q)
    if direction == "U|V":
        t = t.transpose()
    elif direction != "V|U":
        raise ValueError("direction must be 'V|U' or 'U|V'")
    n = t.total
    terms = []
    for row, a in zip(t.counts, t.row_marginals):
        w = a / n
        h = _entropy_of(_freq(row, int(a)), qp)
        terms.append((w if qp.is_shannon else w**qp.q) * h)
    return math.fsum(terms)


def mutual_information_q(t, q) -> float:
    """H_q(U) + H_q(V) - H_q(U,V). Can be negative for q < 1; not clamped."""
    t = as_table(t)
    return entropy_q(t, q, "U") + entropy_q(t, q, "V") - joint_entropy_q(t, q)


def variation_of_information_q(t, q) -> float:
    """2 H_q(U,V) - H_q(U) - H_q(V)."""
    t = as_table(t)
    return 2.0 * joint_entropy_q(t, q) - entropy_q(t, q, "U") - entropy_q(t, q, "V")


def nmi_q(t, q) -> float:
    """MI_q normalized by its upper bound (H_q(U) + H_q(V)) / 2."""
    t = as_table(t)
    bound = 0.5 * (entropy_q(t, q, "U") + entropy_q(t, q, "V"))
    if bound == 0.0:
        raise UndefinedMeasureError("NMI_q", "both partitions have a single cluster")
    return mutual_information_q(t, q) / bound
