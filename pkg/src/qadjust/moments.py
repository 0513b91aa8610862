"""Exact moments of cell sums under the fixed-marginal permutation model.

Measures of the form ``alpha + beta * sum_ij phi(n_ij)`` have exact
expectation and variance once the first two moments of
``S = sum_ij phi(n_ij)`` are known. Each cell n_ij is hypergeometric with
parameters (a_i, b_j, N); the second moment conditions a second cell on the
first, splitting into four index cases (same cell, same column, same row,
neither).

Two cell functions cover every q-entropy measure: ``n**q`` for Tsallis and
``n ln n`` for Shannon. Arbitrary callables are accepted for other members
of the family (e.g. ``n**2`` for the Rand index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .entropy import entropy_q
from .exceptions import NumericalConsistencyError, UnsupportedQError
from .partition import ContingencyTable, as_table
from .qparam import QParam, as_qparam

__all__ = [
    "CellPhi",
    "PowerPhi",
    "EntropyPhi",
    "CallablePhi",
    "cell_phi",
    "MomentReport",
    "hypergeometric_pmf_series",
    "expected_phi_cell",
    "expected_sum_phi",
    "second_moment_sum_phi",
    "variance_sum_phi",
    "expected_joint_entropy_q",
    "expected_mi_q",
    "expected_vi_q",
    "variance_joint_entropy_q",
    "variance_mi_q",
    "variance_vi_q",
    "moment_report",
    "asymptotic_expectation",
    "asymptotic_expected_measure",
    "asymptotic_expected_jaccard",
    "asymptotic_variance_limit_check",
]

# Cap on the number of float64 entries materialized per PMF block.
_BLOCK_BUDGET = 1 << 22
# Variances below -VAR_FLOOR * E[S^2] are reported as inconsistent; above, clamped to 0.
VAR_FLOOR = 1e-12


class CellPhi:
    """A cell function phi(n), evaluated on integer counts 0..n_max."""

    name = "phi"

    def values(self, n_max: int) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, n):
        n = np.asarray(n)
        return self.values(int(n.max()) if n.size else 0)[n]


class PowerPhi(CellPhi):
    def __init__(self, exponent: float):
        if exponent <= 0:
            raise ValueError("exponent must be positive")
        self.exponent = float(exponent)
        self.name = f"n^{self.exponent:g}"

    def values(self, n_max):
        n = np.arange(n_max + 1, dtype=float)
        if self.exponent == 2.0:
            return n * n
        return np.power(n, self.exponent)


class EntropyPhi(CellPhi):
    """n ln n with 0 ln 0 = 0."""

    name = "n ln n"

    def values(self, n_max):
        n = np.arange(n_max + 1, dtype=float)
        out = np.zeros_like(n)
        out[1:] = n[1:] * np.log(n[1:])
        return out


class CallablePhi(CellPhi):
    def __init__(self, func: Callable[[np.ndarray], np.ndarray], name: str = "phi"):
        self.func = func
        self.name = name

    def values(self, n_max):
        return np.asarray(self.func(np.arange(n_max + 1)), dtype=float)


def cell_phi(q) -> CellPhi:
    """Cell function whose sum is affine in H_q(U,V)."""
    qp = as_qparam(q)
    return EntropyPhi() if qp.is_shannon else PowerPhi(qp.q)


def _resolve_phi(q) -> CellPhi:
    return q if isinstance(q, CellPhi) else cell_phi(q)


def _entropy_affine(qp: QParam, n: int) -> tuple[float, float]:
    """(alpha, beta) with H = alpha + beta * sum phi(counts)."""
    if qp.is_shannon:
        return math.log(n), -1.0 / n
    q = qp.q
    return 1.0 / (q - 1.0), -1.0 / ((q - 1.0) * float(n) ** q)


@lru_cache(maxsize=8)
def _log_factorials(n_max: int) -> np.ndarray:
    lf = gammaln(np.arange(n_max + 1, dtype=float) + 1.0)
    lf.setflags(write=False)
    return lf


def _log_factorials_upto(n: int) -> np.ndarray:
    # round up so nearby sizes share a cache entry
    size = 1 << max(6, int(n).bit_length())
    return _log_factorials(size)


def _pmf_block(draws, succ, pop) -> np.ndarray:
    """Dense hypergeometric PMFs, one row per (draws, successes, population).

    Row k holds P(X = n) for n = 0..W-1, zero off the support. The seed is
    P at the mode, from log-factorials; the rest follows from the ratio
    P(n+1)/P(n) = (d-n)(s-n) / ((n+1)(M-d-s+n+1)), walked outward from the
    mode so no intermediate value overflows. Rows are renormalized.
    """
    d = np.asarray(draws, dtype=np.int64).ravel()
    s = np.asarray(succ, dtype=np.int64).ravel()
    m = np.broadcast_to(np.asarray(pop, dtype=np.int64), d.shape).ravel()
    if d.size == 0:
        return np.zeros((0, 1))
    if (d < 0).any() or (s < 0).any() or (d > m).any() or (s > m).any():
        raise ValueError("hypergeometric parameters out of range")
    lo = np.maximum(0, d + s - m)
    hi = np.minimum(d, s)
    mode = np.clip(((d + 1) * (s + 1)) // (m + 2), lo, hi)
    width = int(hi.max()) + 1
    k_rows = d.size

    lf = _log_factorials_upto(int(m.max()))
    log_seed = (
        lf[s] - lf[mode] - lf[s - mode]
        + lf[m - s] - lf[d - mode] - lf[m - s - d + mode]
        - lf[m] + lf[d] + lf[m - d]
    )

    rows_idx = np.arange(k_rows)[:, None]
    pmf = np.zeros((k_rows, width))
    pmf[np.arange(k_rows), mode] = 1.0

    n_up = int((hi - mode).max())
    if n_up > 0:
        steps = np.arange(n_up)[None, :]
        n = mode[:, None] + steps  # ratio from n to n+1
        valid = n < hi[:, None]
        num = ((d[:, None] - n) * (s[:, None] - n)).astype(float)
        den = ((n + 1) * (m[:, None] - d[:, None] - s[:, None] + n + 1)).astype(float)
        ratio = np.where(valid, num / np.where(valid, den, 1.0), 0.0)
        vals = np.cumprod(ratio, axis=1)
        cols = np.where(valid, n + 1, 0)
        pmf[np.broadcast_to(rows_idx, cols.shape)[valid], cols[valid]] = vals[valid]

    n_down = int((mode - lo).max())
    if n_down > 0:
        steps = np.arange(n_down)[None, :]
        n = mode[:, None] - 1 - steps  # ratio from n+1 down to n
        valid = n >= lo[:, None]
        num = ((n + 1) * (m[:, None] - d[:, None] - s[:, None] + n + 1)).astype(float)
        den = ((d[:, None] - n) * (s[:, None] - n)).astype(float)
        ratio = np.where(valid, num / np.where(valid, den, 1.0), 0.0)
        vals = np.cumprod(ratio, axis=1)
        cols = np.where(valid, n, 0)
        pmf[np.broadcast_to(rows_idx, cols.shape)[valid], cols[valid]] = vals[valid]

    pmf *= np.exp(log_seed)[:, None]
    total = pmf.sum(axis=1)
    if np.any(np.abs(total - 1.0) > 1e-8):
        raise NumericalConsistencyError("hypergeometric PMF failed to normalize")
    pmf /= total[:, None]
    return pmf


def _expect_rows(draws, succ, pop, phi_mat: np.ndarray) -> np.ndarray:
    """E[phi_k(X)] for each hypergeometric row and each phi row of ``phi_mat``.

    Returns shape (n_rows, K). Rows are processed in chunks so the dense
    PMF block stays within budget.
    """
    d = np.asarray(draws, dtype=np.int64).ravel()
    s = np.asarray(succ, dtype=np.int64).ravel()
    m = np.broadcast_to(np.asarray(pop, dtype=np.int64), d.shape).ravel()
    out = np.empty((d.size, phi_mat.shape[0]))
    if d.size == 0:
        return out
    width = int(np.minimum(d, s).max()) + 1
    step = max(1, _BLOCK_BUDGET // width)
    for start in range(0, d.size, step):
        sl = slice(start, start + step)
        pmf = _pmf_block(d[sl], s[sl], m[sl])
        out[sl] = pmf @ phi_mat[:, : pmf.shape[1]].T
    return out


def hypergeometric_pmf_series(a: int, b: int, n_total: int) -> list[tuple[int, float]]:
    """Support and probabilities of the overlap of an a-set and a b-set.

    Probability that a uniformly random a-subset of n_total objects
    contains exactly n of b marked objects, for n on
    [max(0, a + b - n_total), min(a, b)].

    >>> hypergeometric_pmf_series(1, 1, 2)
    [(0, 0.5), (1, 0.5)]
    """
    a, b, n_total = int(a), int(b), int(n_total)
    if n_total < 1 or not (0 <= a <= n_total and 0 <= b <= n_total):
        raise ValueError("marginals must lie in [0, n_total] with n_total >= 1")
    pmf = _pmf_block([a], [b], n_total)[0]
    lo = max(0, a + b - n_total)
    hi = min(a, b)
    return [(n, float(pmf[n])) for n in range(lo, hi + 1)]


def expected_phi_cell(a: int, b: int, n_total: int, q=None, phi: CellPhi | None = None) -> float:
    """E[phi(n)] for a single hypergeometric cell (a, b, n_total)."""
    f = phi if phi is not None else _resolve_phi(q)
    series = hypergeometric_pmf_series(a, b, n_total)
    vals = f.values(series[-1][0])
    return math.fsum(vals[n] * p for n, p in series)


def _cell_block(t: ContingencyTable) -> np.ndarray:
    a = np.repeat(t.row_marginals, t.n_cols)
    b = np.tile(t.col_marginals, t.n_rows)
    return _pmf_block(a, b, t.total)


def _phi_matrix(phis: Sequence[CellPhi], n_max: int) -> np.ndarray:
    return np.vstack([f.values(n_max) for f in phis])


def _first_moments(t: ContingencyTable, phis: Sequence[CellPhi]) -> np.ndarray:
    pmf = _cell_block(t)
    vals = _phi_matrix(phis, pmf.shape[1] - 1)
    terms = pmf[None, :, :] * vals[:, None, :]
    return np.array([math.fsum(row) for row in terms.reshape(len(phis), -1)])


def expected_sum_phi(t, q) -> float:
    """E[sum_ij phi(n_ij)], summing per-cell hypergeometric expectations.

    Cost is linear in N per cell row: O(N * max(r, c)) overall.
    """
    t = as_table(t)
    return float(_first_moments(t, [_resolve_phi(q)])[0])


def _second_moments(t: ContingencyTable, phis: Sequence[CellPhi]) -> tuple[np.ndarray, np.ndarray]:
    """(E[S], E[S^2]) for each cell function; S = sum_ij phi(n_ij).

    E[S^2] = sum_ij sum_n phi(n) P_ij(n) * [ phi(n)
               + sum_{i' != i} E phi(Hyp(b_j - n, a_i', N - a_i))
               + sum_{j' != j} sum_m P(m; Hyp(a_i - n, b_j', N - b_j))
                   * ( phi(m) + sum_{i' != i} E phi(Hyp(a_i', b_j' - m, N - a_i)) ) ]

    Both inner i'-sums are the same function W_i(D) = sum_{i' != i}
    E phi(Hyp(D, a_i', N - a_i)) evaluated at D = b_j - n and D = b_j' - m,
    so it is tabulated once per row i. The table is oriented with the
    smaller dimension on the columns, which the (j, j') loop runs over.
    """
    if t.n_cols > t.n_rows:
        t = t.transpose()
    a = t.row_marginals.astype(np.int64)
    b = t.col_marginals.astype(np.int64)
    n_tot = t.total
    r, c = len(a), len(b)
    k_phi = len(phis)
    phi_mat = _phi_matrix(phis, n_tot)

    # W[i][D, k] for D = 0..N - a_i, all (i, i') pairs in one batch
    spans = n_tot - a + 1
    pair_i, pair_ip = np.nonzero(~np.eye(r, dtype=bool))
    w_tab = [np.zeros((spans[i], k_phi)) for i in range(r)]
    if pair_i.size:
        reps = spans[pair_i]
        d = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
        ex = _expect_rows(d, np.repeat(a[pair_ip], reps), np.repeat(n_tot - a[pair_i], reps), phi_mat)
        start = 0
        for i, span in zip(pair_i, reps):
            w_tab[i] += ex[start : start + span]
            start += span

    # G[j'][i, m, k] = phi(m) + W_i(b_j' - m), m = 0..b_j'
    g_tab = []
    for jp in range(c):
        m = np.arange(b[jp] + 1)
        g = np.empty((r, b[jp] + 1, k_phi))
        idx = b[jp] - m
        for i in range(r):
            ok = idx <= n_tot - a[i]
            wv = np.zeros((b[jp] + 1, k_phi))
            wv[ok] = w_tab[i][idx[ok]]
            g[i] = phi_mat[:, m].T + wv
        g_tab.append(g)

    # Hsum[j][D, i, k] = sum_{j' != j} E_{m ~ Hyp(D, b_j', N - b_j)} G[j'][i, m, k]
    a_max = int(a.max())
    h_tab = []
    for j in range(c):
        d_hi = min(a_max, n_tot - b[j])
        acc = np.zeros((d_hi + 1, r, k_phi))
        others = [jp for jp in range(c) if jp != j]
        if others:
            span = d_hi + 1
            pmf = _pmf_block(np.tile(np.arange(span), len(others)), np.repeat(b[others], span),
                             n_tot - b[j])
            for k, jp in enumerate(others):
                block = pmf[k * span : (k + 1) * span, : b[jp] + 1]
                acc += np.einsum("dm,imk->dik", block, g_tab[jp][:, : block.shape[1], :])
        h_tab.append(acc)

    cell = _pmf_block(np.repeat(a, c), np.tile(b, r), n_tot)
    first = np.zeros(k_phi)
    second = np.zeros(k_phi)
    for i in range(r):
        for j in range(c):
            lo = max(0, a[i] + b[j] - n_tot)
            hi = min(a[i], b[j])
            n = np.arange(lo, hi + 1)
            p = cell[i * c + j, lo : hi + 1]
            fn = phi_mat[:, n].T  # (len n, K)
            bracket = fn + w_tab[i][b[j] - n] + h_tab[j][a[i] - n, i, :]
            first += (p[:, None] * fn).sum(axis=0)
            second += (p[:, None] * fn * bracket).sum(axis=0)
    return first, second


def _clamped_variance(e1: float, e2: float, what: str = "Var") -> float:
    var = e2 - e1 * e1
    if var < 0:
        if var < -VAR_FLOOR * max(1.0, abs(e2)):
            raise NumericalConsistencyError(f"{what} = {var!r} is negative beyond rounding")
        return 0.0
    return var


def second_moment_sum_phi(t, q) -> float:
    """E[(sum_ij phi(n_ij))^2] under the permutation model."""
    t = as_table(t)
    return float(_second_moments(t, [_resolve_phi(q)])[1][0])


def variance_sum_phi(t, q) -> float:
    """Var(sum_ij phi(n_ij)), clamped at zero within the rounding floor."""
    t = as_table(t)
    first, second = _second_moments(t, [_resolve_phi(q)])
    return _clamped_variance(first[0], second[0])


def expected_joint_entropy_q(t, q) -> float:
    t = as_table(t)
    qp = as_qparam(q)
    alpha, beta = _entropy_affine(qp, t.total)
    return alpha + beta * expected_sum_phi(t, qp)


def expected_mi_q(t, q) -> float:
    t = as_table(t)
    return entropy_q(t, q, "U") + entropy_q(t, q, "V") - expected_joint_entropy_q(t, q)


def expected_vi_q(t, q) -> float:
    t = as_table(t)
    return 2.0 * expected_joint_entropy_q(t, q) - entropy_q(t, q, "U") - entropy_q(t, q, "V")


def variance_joint_entropy_q(t, q) -> float:
    t = as_table(t)
    qp = as_qparam(q)
    _, beta = _entropy_affine(qp, t.total)
    return beta * beta * variance_sum_phi(t, qp)


def variance_mi_q(t, q) -> float:
    """Var(MI_q) equals Var(H_q(U,V)): the marginal entropies are fixed."""
    return variance_joint_entropy_q(t, q)


def variance_vi_q(t, q) -> float:
    return 4.0 * variance_joint_entropy_q(t, q)


@dataclass(frozen=True)
class MomentReport:
    """Null-model moments of S = sum phi(n_ij) and of the q-entropy measures."""

    q: QParam
    method: str
    e_sum_phi: float
    e2_sum_phi: float
    e_joint_entropy: float
    e_mi: float
    e_vi: float
    var_joint_entropy: float
    var_mi: float
    var_vi: float
    extra: dict = field(default_factory=dict)

    @property
    def var_sum_phi(self) -> float:
        return self.e2_sum_phi - self.e_sum_phi**2

    def to_dict(self) -> dict:
        out = {
            "q": self.q.label,
            "method": self.method,
            "e_sum_phi": self.e_sum_phi,
            "e2_sum_phi": self.e2_sum_phi,
            "e_joint_entropy": self.e_joint_entropy,
            "e_mi": self.e_mi,
            "e_vi": self.e_vi,
            "var_joint_entropy": self.var_joint_entropy,
            "var_mi": self.var_mi,
            "var_vi": self.var_vi,
        }
        out.update(self.extra)
        return out


def _report_from_sum_moments(t, qp, method, e1, e2, var_s, extra=None) -> MomentReport:
    alpha, beta = _entropy_affine(qp, t.total)
    hu = entropy_q(t, qp, "U")
    hv = entropy_q(t, qp, "V")
    e_h = alpha + beta * e1
    var_h = beta * beta * var_s
    return MomentReport(
        q=qp,
        method=method,
        e_sum_phi=float(e1),
        e2_sum_phi=float(e2),
        e_joint_entropy=e_h,
        e_mi=hu + hv - e_h,
        e_vi=2.0 * e_h - hu - hv,
        var_joint_entropy=var_h,
        var_mi=var_h,
        var_vi=4.0 * var_h,
        extra=extra or {},
    )


def moment_report(t, q, method: str = "exact", *, n_samples: int = 10_000, seed: int | None = None,
                  second_moment: bool = True) -> MomentReport:
    """Moments of H_q(U,V), MI_q and VI_q by the requested method.

    ``exact`` uses the hypergeometric formulas; ``asymptotic`` the large-N
    limits (variances are their limit, 0); ``enumeration`` and
    ``monte-carlo`` go through :mod:`qadjust.oracle`. With
    ``second_moment=False`` the exact path skips the cubic-cost variance
    and reports NaN for it.
    """
    t = as_table(t)
    qp = as_qparam(q)
    phi = cell_phi(qp)
    if method == "exact":
        if second_moment:
            first, second = _second_moments(t, [phi])
            e1, e2 = float(first[0]), float(second[0])
            var_s = _clamped_variance(e1, e2)
        else:
            e1 = expected_sum_phi(t, qp)
            e2 = var_s = float("nan")
        return _report_from_sum_moments(t, qp, "exact", e1, e2, var_s)
    if method == "asymptotic":
        hu = entropy_q(t, qp, "U")
        hv = entropy_q(t, qp, "V")
        e_h = asymptotic_expected_measure(t, qp, "JointH")
        mu = np.outer(t.row_marginals, t.col_marginals) / t.total
        e1 = math.fsum(np.power(mu.ravel(), qp.q))
        return MomentReport(qp, "asymptotic", e1, e1 * e1, e_h, hu + hv - e_h, 2.0 * e_h - hu - hv,
                            0.0, 0.0, 0.0)
    from . import oracle

    stat = _sum_phi_statistic(phi)
    if method == "enumeration":
        om = oracle.enumerate_moments(t.row_marginals, t.col_marginals, stat)
    elif method in ("monte-carlo", "mc"):
        if seed is None:
            raise ValueError("monte-carlo moments need an explicit seed")
        om = oracle.monte_carlo_moments(t.row_marginals, t.col_marginals, stat, n_samples, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    extra = {"n_outcomes_or_samples": om.n_outcomes_or_samples, "seed": seed}
    if om.ci99_halfwidth is not None:
        extra["ci99_halfwidth_sum_phi"] = om.ci99_halfwidth
    return _report_from_sum_moments(
        t, qp, om.method, om.mean, om.variance + om.mean**2, om.variance, extra
    )


def _sum_phi_statistic(phi: CellPhi):
    def stat(table):
        counts = table.counts if isinstance(table, ContingencyTable) else np.asarray(table)
        return math.fsum(phi.values(int(counts.max()))[counts.ravel()])

    return stat


def asymptotic_expectation(t, statistic: Callable[[np.ndarray], float]) -> float:
    """Large-N expectation of a function of the cell frequencies n_ij/N.

    The limit evaluates ``statistic`` at the products of marginal
    frequencies (a_i/N)(b_j/N); it needs only the marginals.
    """
    t = as_table(t)
    freq = np.outer(t.row_marginals / t.total, t.col_marginals / t.total)
    return float(statistic(freq))


def asymptotic_expected_measure(t, q, which: str = "MI") -> float:
    """Closed-form large-N limit of E[H_q(U,V)], E[MI_q] or E[VI_q].

    JointH: H_q(U) + H_q(V) - (q-1) H_q(U) H_q(V); MI: (q-1) H_q(U) H_q(V);
    VI: H_q(U) + H_q(V) - 2 (q-1) H_q(U) H_q(V). Tsallis orders only.
    """
    t = as_table(t)
    qp = as_qparam(q)
    if qp.is_shannon:
        raise UnsupportedQError("asymptotic expectations are available for Tsallis orders only")
    hu = entropy_q(t, qp, "U")
    hv = entropy_q(t, qp, "V")
    cross = (qp.q - 1.0) * hu * hv
    if which in ("JointH", "H"):
        return hu + hv - cross
    if which == "MI":
        return cross
    if which == "VI":
        return hu + hv - 2.0 * cross
    raise ValueError("which must be 'JointH', 'MI' or 'VI'")


def _jaccard_of_frequencies(x: np.ndarray) -> float:
    cells = float((x * x).sum())
    rows = float((x.sum(axis=1) ** 2).sum())
    cols = float((x.sum(axis=0) ** 2).sum())
    return cells / (rows + cols - cells)


def asymptotic_expected_jaccard(t) -> float:
    """Large-N expectation of the Jaccard coefficient.

    With x_ij = n_ij/N the coefficient is
    (sum x^2 - 1/N) / (sum_i (a_i/N)^2 + sum_j (b_j/N)^2 - sum x^2 - 1/N);
    the 1/N terms vanish in the limit and the remaining function is
    evaluated at the marginal products.
    """
    return asymptotic_expectation(t, _jaccard_of_frequencies)


def asymptotic_variance_limit_check(t, q, scales: Sequence[int] = (1, 4, 16)) -> list[float]:
    """Exact Var(MI_q) on copies of ``t`` with every cell scaled by each factor."""
    t = as_table(t)
    return [variance_mi_q(t.scaled(k), q) for k in scales]

