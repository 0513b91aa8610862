"""Chance-adjusted and standardized q-entropy measures.

Writing S = sum_ij phi(n_ij) with phi(n) = n^q (Tsallis) or n ln n
(Shannon), every q-entropy measure is affine in S, so

    AMI_q = (S - E[S]) / ((sum_i phi(a_i) + sum_j phi(b_j)) / 2 - E[S])
    SMI_q = (MI_q - E[MI_q]) / sd(MI_q)

The Shannon path is the AMI with the arithmetic-mean bound and the
standardized MI (equivalently the standardized G-statistic). ARI and SRI
carry their own pair-count implementations so that AMI_2 = ARI and
SMI_2 = SRI are genuine cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .entropy import (
    entropy_q,
    rand_index,
    variation_of_information_q,
)
from .exceptions import UndefinedMeasureError
from .moments import (
    MomentReport,
    _first_moments,
    PowerPhi,
    VAR_FLOOR,
    _clamped_variance,
    _report_from_sum_moments,
    _second_moments,
    cell_phi,
    expected_sum_phi,
    expected_vi_q,
)
from .partition import as_table, pair_counts
from .qparam import QParam, as_qparam

__all__ = [
    "AdjustedReport",
    "ami_q",
    "ami_q_multi",
    "avi_q",
    "ari",
    "nvi_q",
    "smi_q",
    "smi_q_multi",
    "svi_q",
    "sri",
    "p_value_bound",
    "adjusted_report",
]

DEGENERATE_NONE = "none"
DEGENERATE_ZERO = "zero_denominator_defined_zero"
DEGENERATE_UNDEFINED = "undefined"

# Relative size below which a numerator or denominator counts as zero.
_ZERO_TOL = 1e-12


def _is_zero(x: float, scale: float) -> bool:
    return abs(x) <= _ZERO_TOL * max(1.0, abs(scale))


def _adjust(measure: str, num: float, den: float, scale: float) -> tuple[float, str]:
    """num / den with the 0/0 convention; raises on x/0."""
    if _is_zero(den, scale):
        if _is_zero(num, scale):
            return 0.0, DEGENERATE_ZERO
        raise UndefinedMeasureError(measure, "zero denominator with nonzero numerator")
    return num / den, DEGENERATE_NONE


def _phi_of_marginals(t, phi) -> float:
    rows = phi(t.row_marginals)
    cols = phi(t.col_marginals)
    return 0.5 * (math.fsum(rows) + math.fsum(cols))


def _sum_phi(t, phi) -> float:
    return math.fsum(phi(t.counts.ravel()))


def _ami_parts(t, qp: QParam, e_sum: Optional[float] = None):
    phi = cell_phi(qp)
    s = _sum_phi(t, phi)
    e = expected_sum_phi(t, qp) if e_sum is None else e_sum
    bound = _phi_of_marginals(t, phi)
    return s - e, bound - e, bound


def ami_q(t, q) -> float:
    """Adjusted MI_q, (S - E[S]) / ((sum phi(a) + sum phi(b)) / 2 - E[S]).

    1 for identical partitions, about 0 for independent ones. When both
    the numerator and denominator vanish (e.g. both partitions a single
    cluster) the value is defined as 0; see :func:`adjusted_report` for the
    flag.
    """
    t = as_table(t)
    qp = as_qparam(q)
    num, den, scale = _ami_parts(t, qp)
    return _adjust("AMI_q", num, den, scale)[0]


def ami_q_multi(t, qs) -> list[float]:
    """AMI_q for several orders at once, sharing one pass over the cell PMFs."""
    t = as_table(t)
    qps = [as_qparam(q) for q in qs]
    phis = [cell_phi(qp) for qp in qps]
    first = _first_moments(t, phis)
    out = []
    for qp, e in zip(qps, first):
        num, den, scale = _ami_parts(t, qp, e_sum=float(e))
        out.append(_adjust("AMI_q", num, den, scale)[0])
    return out


def avi_q(t, q) -> float:
    """Adjusted VI_q, (E[VI_q] - VI_q) / (E[VI_q] - 0), from the VI_q values directly."""
    t = as_table(t)
    e_vi = expected_vi_q(t, q)
    vi = variation_of_information_q(t, q)
    hu, hv = entropy_q(t, q, "U"), entropy_q(t, q, "V")
    return _adjust("AVI_q", e_vi - vi, e_vi, hu + hv)[0]


def nvi_q(t, q) -> float:
    """VI_q divided by its null expectation."""
    t = as_table(t)
    e_vi = expected_vi_q(t, q)
    hu, hv = entropy_q(t, q, "U"), entropy_q(t, q, "V")
    if _is_zero(e_vi, hu + hv):
        raise UndefinedMeasureError("NVI_q", "expected VI_q is zero")
    return variation_of_information_q(t, q) / e_vi


def ari(t) -> float:
    """Adjusted Rand index from pair counts (Hubert and Arabie form)."""
    t = as_table(t)
    if t.total < 2:
        raise UndefinedMeasureError("ARI", "needs at least two objects")
    pc = pair_counts(t)
    pairs_u = pc.same_same + pc.same_diff
    pairs_v = pc.same_same + pc.diff_same
    n_pairs = pc.n_pairs
    # exact rational arithmetic until the final division
    expected_num = pairs_u * pairs_v
    num = pc.same_same * n_pairs - expected_num
    den = (pairs_u + pairs_v) * n_pairs - 2 * expected_num
    if den == 0:
        if num == 0:
            return 0.0
        raise UndefinedMeasureError("ARI", "zero denominator with nonzero numerator")
    return (2 * num) / den


def _standardize(measure, deviation, var, e2) -> float:
    if var <= VAR_FLOOR * max(1.0, abs(e2)):
        raise UndefinedMeasureError(measure, "null variance is zero")
    return deviation / math.sqrt(var)


def _smi_from_moments(t, qp, e1, e2) -> float:
    phi = cell_phi(qp)
    var = _clamped_variance(e1, e2)
    dev = _sum_phi(t, phi) - e1
    # MI_q - E[MI_q] = (S - E[S]) / ((q - 1) N^q): the sign flips for q < 1
    if not qp.is_shannon and qp.q < 1.0:
        dev = -dev
    return _standardize("SMI_q", dev, var, e2)


def smi_q(t, q) -> float:
    """Standardized MI_q: (MI_q - E[MI_q]) / sd(MI_q) under the permutation model.

    For q > 1 and Shannon this is (S - E[S]) / sd(S); for q < 1 the
    affine map from S to MI_q is decreasing, so the sign is reversed.
    Cost is dominated by the second moment of S.
    """
    t = as_table(t)
    qp = as_qparam(q)
    first, second = _second_moments(t, [cell_phi(qp)])
    return _smi_from_moments(t, qp, float(first[0]), float(second[0]))


def smi_q_multi(t, qs) -> list[float]:
    """SMI_q for several orders, batching the second-moment computation."""
    t = as_table(t)
    qps = [as_qparam(q) for q in qs]
    first, second = _second_moments(t, [cell_phi(qp) for qp in qps])
    return [_smi_from_moments(t, qp, float(e1), float(e2)) for qp, e1, e2 in zip(qps, first, second)]


def svi_q(t, q) -> float:
    """Standardized VI_q, (E[VI_q] - VI_q) / sd(VI_q), assembled from VI_q and its moments."""
    t = as_table(t)
    qp = as_qparam(q)
    first, second = _second_moments(t, [cell_phi(qp)])
    rep = _report_from_sum_moments(t, qp, "exact", float(first[0]), float(second[0]),
                                   _clamped_variance(float(first[0]), float(second[0])))
    vi = variation_of_information_q(t, qp)
    if rep.var_vi <= 0.0:
        raise UndefinedMeasureError("SVI_q", "null variance is zero")
    return (rep.e_vi - vi) / math.sqrt(rep.var_vi)


def sri(t) -> float:
    """Standardized Rand index, (RI - E[RI]) / sd(RI).

    RI = (k11 + k00) / C(N, 2) = alpha + beta * sum n_ij^2 with
    beta = 1 / C(N, 2); the null moments of sum n_ij^2 come from the
    cell-sum engine with phi(n) = n^2.
    """
    t = as_table(t)
    ri = rand_index(t)
    n = t.total
    n_pairs = pair_counts(t).n_pairs
    # k11 + k00 = sum n_ij^2 + (N^2 - N - sum a_i^2 - sum b_j^2) / 2
    sq_rows = int((t.row_marginals.astype(object) ** 2).sum())
    sq_cols = int((t.col_marginals.astype(object) ** 2).sum())
    beta = 1.0 / n_pairs
    alpha = (n * n - n - sq_rows - sq_cols) / (2 * n_pairs)
    first, second = _second_moments(t, [PowerPhi(2.0)])
    e1, e2 = float(first[0]), float(second[0])
    var_s = _clamped_variance(e1, e2)
    if var_s <= VAR_FLOOR * max(1.0, e2):
        raise UndefinedMeasureError("SRI", "null variance is zero")
    e_ri = alpha + beta * e1
    return (ri - e_ri) / (beta * math.sqrt(var_s))


def p_value_bound(smi: float) -> float:
    """One-sided Cantelli bound 1 / (1 + SMI^2) on the independence-test p-value.

    Only informative for positive scores; nonpositive scores give 1.
    """
    smi = float(smi)
    if not math.isfinite(smi):
        raise ValueError("standardized score must be finite")
    if smi <= 0.0:
        return 1.0
    return min(1.0, 1.0 / (1.0 + smi * smi))


@dataclass(frozen=True)
class AdjustedReport:
    q: QParam
    ami_q: float
    nvi_q: Optional[float]
    smi_q: Optional[float]
    p_value_bound: Optional[float]
    moments: MomentReport
    degenerate_flag: str = DEGENERATE_NONE

    def to_dict(self) -> dict:
        return {
            "q": self.q.label,
            "ami_q": self.ami_q,
            "nvi_q": self.nvi_q,
            "smi_q": self.smi_q,
            "p_value_bound": self.p_value_bound,
            "degenerate_flag": self.degenerate_flag,
            "moments": self.moments.to_dict(),
        }


def adjusted_report(t, q, standardize: bool = True) -> AdjustedReport:
    """AMI_q, NVI_q and optionally SMI_q with its p-value bound, sharing one moment pass.

    AMI_q uses the 0/0 convention rather than raising. NVI_q is None when
    E[VI_q] = 0 and SMI_q is None when the null variance is zero.
    """
    t = as_table(t)
    qp = as_qparam(q)
    phi = cell_phi(qp)
    if standardize:
        first, second = _second_moments(t, [phi])
        e1, e2 = float(first[0]), float(second[0])
        var_s = _clamped_variance(e1, e2)
    else:
        e1 = expected_sum_phi(t, qp)
        e2 = var_s = float("nan")
    moments = _report_from_sum_moments(t, qp, "exact", e1, e2, var_s)

    num, den, scale = _ami_parts(t, qp, e_sum=e1)
    try:
        ami, flag = _adjust("AMI_q", num, den, scale)
    except UndefinedMeasureError:
        ami, flag = float("nan"), DEGENERATE_UNDEFINED

    hu, hv = entropy_q(t, qp, "U"), entropy_q(t, qp, "V")
    nvi = None
    if not _is_zero(moments.e_vi, hu + hv):
        nvi = variation_of_information_q(t, qp) / moments.e_vi

    smi = pval = None
    if standardize:
        try:
            smi = _smi_from_moments(t, qp, e1, e2)
        except UndefinedMeasureError:
            smi = None
        if smi is not None and smi > 0:
            pval = p_value_bound(smi)
    return AdjustedReport(qp, ami, nvi, smi, pval, moments, flag)

