"""Contingency tables and pair counts for two partitions of the same objects.

Tables hold exact integer counts. Nothing in this module touches floating
point; measures further downstream decide how to convert.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .exceptions import InvalidTableError

__all__ = [
    "ContingencyTable",
    "PairCounts",
    "as_table",
    "build_contingency",
    "from_counts",
    "pair_counts",
    "read_label_file",
    "read_table_file",
]

_SPLIT = re.compile(r"[,\s]+")


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """r x c overlap counts between clusters of U (rows) and V (columns).

    Build instances with :func:`from_counts` or :func:`build_contingency`;
    the constructor validates but does not copy-protect arbitrary input.
    """

    counts: np.ndarray
    row_marginals: np.ndarray = field(init=False)
    col_marginals: np.ndarray = field(init=False)
    total: int = field(init=False)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.size == 0:
            raise InvalidTableError("contingency table must be a non-empty 2-D grid")
        if (counts < 0).any():
            raise InvalidTableError("contingency table has a negative entry")
        rows = counts.sum(axis=1)
        cols = counts.sum(axis=0)
        if (rows == 0).any() or (cols == 0).any():
            raise InvalidTableError("contingency table has an all-zero row or column")
        counts.setflags(write=False)
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "row_marginals", rows)
        object.__setattr__(self, "col_marginals", cols)
        object.__setattr__(self, "total", int(rows.sum()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def n_rows(self) -> int:
        return self.counts.shape[0]

    @property
    def n_cols(self) -> int:
        return self.counts.shape[1]

    def transpose(self) -> "ContingencyTable":
        """Swap the roles of U and V."""
        return ContingencyTable(self.counts.T)

    @property
    def T(self) -> "ContingencyTable":
        return self.transpose()

    def scaled(self, k: int) -> "ContingencyTable":
        """Table with every cell multiplied by ``k`` (marginal fractions fixed)."""
        k = int(k)
        if k < 1:
            raise ValueError("scale factor must be a positive integer")
        return ContingencyTable(self.counts * k)

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return self.shape == other.shape and bool((self.counts == other.counts).all())

    def __hash__(self):
        return hash((self.shape, self.counts.tobytes()))

    def __repr__(self):
        return f"ContingencyTable({self.counts.tolist()})"


@dataclass(frozen=True)
class PairCounts:
    """Tallies over all unordered pairs of objects.

    same_same (k11): pair co-clustered in U and in V; diff_diff (k00):
    separated in both; same_diff (k10): together in U only; diff_same
    (k01): together in V only.
    """

    same_same: int
    diff_diff: int
    same_diff: int
    diff_same: int

    @property
    def n_pairs(self) -> int:
        return self.same_same + self.diff_diff + self.same_diff + self.diff_same


def from_counts(grid) -> ContingencyTable:
    """Validate an r x c grid of counts and wrap it as a table."""
    arr = np.asarray(grid)
    if arr.size == 0:
        raise InvalidTableError("contingency table is empty")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
            raise InvalidTableError("contingency table entries must be integers")
    elif arr.dtype.kind not in "iu":
        raise InvalidTableError("contingency table entries must be integers")
    return ContingencyTable(arr.astype(np.int64))


def as_table(t) -> ContingencyTable:
    """Accept a ContingencyTable or anything :func:`from_counts` accepts."""
    if isinstance(t, ContingencyTable):
        return t
    return from_counts(t)


def _dense_ids(labels: Sequence[Hashable]) -> tuple[np.ndarray, list]:
    index: dict = {}
    ids = np.empty(len(labels), dtype=np.int64)
    for k, lab in enumerate(labels):
        ids[k] = index.setdefault(lab, len(index))
    return ids, list(index)


def build_contingency(labels_u: Sequence[Hashable], labels_v: Sequence[Hashable]) -> ContingencyTable:
    """Cross-tabulate two labelings of the same N objects.

    Cluster ids may be any hashable values; they map to dense indices in
    order of first appearance, so the table layout is deterministic.

    >>> build_contingency([0, 1, 0, 1, 2], [0, 0, 1, 1, 1]).tolist()
    [[1, 1], [1, 1], [0, 1]]
    """
    labels_u = list(labels_u)
    labels_v = list(labels_v)
    if len(labels_u) != len(labels_v):
        raise InvalidTableError(
            f"labelings differ in length ({len(labels_u)} vs {len(labels_v)})"
        )
    if not labels_u:
        raise InvalidTableError("labelings are empty")
    u, ku = _dense_ids(labels_u)
    v, kv = _dense_ids(labels_v)
    r, c = len(ku), len(kv)
    counts = np.bincount(u * c + v, minlength=r * c).reshape(r, c)
    return ContingencyTable(counts)


def pair_counts(t) -> PairCounts:
    """Pair tallies k11, k00, k10, k01 from cell and marginal sums of squares."""
    t = as_table(t)
    n = t.total
    sum_cells = int((t.counts.astype(object) ** 2).sum())
    sum_rows = int((t.row_marginals.astype(object) ** 2).sum())
    sum_cols = int((t.col_marginals.astype(object) ** 2).sum())
    k11 = (sum_cells - n) // 2
    k00 = (n * n + sum_cells - sum_rows - sum_cols) // 2
    k10 = (sum_rows - sum_cells) // 2
    k01 = (sum_cols - sum_cells) // 2
    pc = PairCounts(k11, k00, k10, k01)
    assert pc.n_pairs == comb(n, 2)
    return pc


def _tokens(line: str) -> list[str]:
    return [tok for tok in _SPLIT.split(line.strip()) if tok]


def _content_lines(source) -> Iterable[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped


class ParseError(InvalidTableError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def read_label_file(source) -> ContingencyTable:
    """Read ``u-label v-label`` pairs, one object per line.

    Tokens are separated by whitespace or commas; lines starting with ``#``
    are skipped. ``source`` is a path or an open text stream.
    """
    us, vs = [], []
    for lineno, line in _content_lines(source):
        toks = _tokens(line)
        if len(toks) != 2:
            raise ParseError(lineno, f"expected 2 labels, found {len(toks)}")
        us.append(toks[0])
        vs.append(toks[1])
    if not us:
        raise ParseError(0, "no objects in label file")
    return build_contingency(us, vs)


def read_table_file(source) -> ContingencyTable:
    """Read a contingency grid, one row of integers per line."""
    rows = []
    width = None
    for lineno, line in _content_lines(source):
        try:
            row = [int(tok) for tok in _tokens(line)]
        except ValueError:
            raise ParseError(lineno, "non-integer entry") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(lineno, f"expected {width} entries, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ParseError(0, "no rows in table file")
    try:
        return from_counts(rows)
    except InvalidTableError as exc:
        raise ParseError(0, str(exc)) from None
