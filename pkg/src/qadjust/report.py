"""All comparison indices for one pair of partitions, in a serializable form."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import adjusted, entropy
from .adjusted import DEGENERATE_NONE
from .moments import _first_moments, _second_moments, cell_phi
from .partition import ContingencyTable, as_table
from .qparam import SHANNON, as_qparam

__all__ = ["MeasureReport", "compare", "SMI_SIZE_LIMIT"]

# Above this many objects the second moment is opt-in.
SMI_SIZE_LIMIT = 2000


@dataclass(frozen=True)
class MeasureReport:
    """Indices for one table; ``values`` is ordered as computed."""

    table: ContingencyTable
    q_list: tuple
    values: dict
    flags: dict = field(default_factory=dict)
    smi_computed: bool = True

    def to_dict(self) -> dict:
        return {
            "table": self.table.tolist(),
            "n_objects": int(self.table.total),
            "q": [qp.label for qp in self.q_list],
            "smi_computed": self.smi_computed,
            "measures": dict(self.values),
            "degenerate_flags": dict(self.flags),
        }

    def to_json(self) -> str:
        # repr of a float is its shortest exact decimal, so values round-trip
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["measure", "value"])
        for name, value in self.values.items():
            writer.writerow([name, "" if value is None else format(value, ".17g")])
        return buf.getvalue()

    def to_human(self) -> str:
        width = max(len(k) for k in self.values)
        r, c = self.table.shape
        lines = [f"N = {self.table.total}, {r} x {c} table"]
        for name, value in self.values.items():
            text = "n/a" if value is None else format(value, ".6g")
            flag = self.flags.get(name)
            lines.append(f"{name.ljust(width)}  {text}" + (f"  ({flag})" if flag else ""))
        return "\n".join(lines) + "\n"


def _ami_with_flag(t, qp, e_sum) -> tuple[float, str]:
    num, den, scale = adjusted._ami_parts(t, qp, e_sum=e_sum)
    return adjusted._adjust("AMI_q" if not qp.is_shannon else "AMI", num, den, scale)


def compare(t, q_list: Sequence = (2.0,), smi: bool = True,
            measures: Optional[Sequence[str]] = None) -> MeasureReport:
    """RI, ARI, Shannon MI/AMI/VI, then AMI_q and SMI_q (with its p-value bound) per q.

    Moments for all orders are computed in one batched pass. ``measures``
    restricts the output to the named entries. Raises
    :class:`~qadjust.exceptions.UndefinedMeasureError` naming the measure
    if a requested index is undefined.
    """
    t = as_table(t)
    qps = tuple(dict.fromkeys(as_qparam(q) for q in q_list))
    orders = [SHANNON] + [qp for qp in qps if qp != SHANNON]
    phis = [cell_phi(qp) for qp in orders]
    if smi:
        first, second = _second_moments(t, phis)
    else:
        first, second = _first_moments(t, phis), None
    idx = {qp: k for k, qp in enumerate(orders)}

    values, flags = {}, {}
    values["RI"] = entropy.rand_index(t)
    values["ARI"] = adjusted.ari(t)
    values["MI"] = entropy.mutual_information_q(t, SHANNON)
    ami, flag = _ami_with_flag(t, SHANNON, float(first[0]))
    values["AMI"] = ami
    if flag != DEGENERATE_NONE:
        flags["AMI"] = flag
    values["VI"] = entropy.variation_of_information_q(t, SHANNON)
    for qp in qps:
        k = idx[qp]
        name = f"AMI_{qp.label}"
        ami, flag = _ami_with_flag(t, qp, float(first[k]))
        values[name] = ami
        if flag != DEGENERATE_NONE:
            flags[name] = flag
        if smi:
            s = adjusted._smi_from_moments(t, qp, float(first[k]), float(second[k]))
            values[f"SMI_{qp.label}"] = s
            # the one-sided bound is only reported for positive scores
            values[f"p_value_bound_{qp.label}"] = adjusted.p_value_bound(s) if s > 0 else None
    if measures:
        missing = [m for m in measures if m not in values]
        if missing:
            raise KeyError(f"unknown measures {missing}; available: {list(values)}")
        values = {m: values[m] for m in measures}
        flags = {m: f for m, f in flags.items() if m in values}
    return MeasureReport(t, qps, values, flags, smi)
