"""Entropy order: Shannon or Tsallis q."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

__all__ = ["QParam", "SHANNON", "as_qparam"]

# Tsallis orders this close to 1 lose most digits to cancellation in (1 - sum p^q)/(q - 1).
ILL_CONDITIONED = 1e-9


@dataclass(frozen=True)
class QParam:
    """Entropy order. ``q is None`` marks the Shannon variant."""

    q: Optional[float] = None

    def __post_init__(self):
        if self.q is None:
            return
        q = float(self.q)
        if not math.isfinite(q) or q <= 0:
            raise ValueError(f"Tsallis order must be a positive real, got {self.q!r}")
        if abs(q - 1.0) < ILL_CONDITIONED:
            raise ValueError(
                f"Tsallis order {q!r} is within {ILL_CONDITIONED:g} of 1; use QParam.shannon()"
            )
        object.__setattr__(self, "q", q)

    @classmethod
    def shannon(cls) -> "QParam":
        return cls(None)

    @classmethod
    def tsallis(cls, q: float) -> "QParam":
        return cls(float(q))

    @property
    def is_shannon(self) -> bool:
        return self.q is None

    @property
    def value(self) -> float:
        """Numeric order, 1.0 for Shannon."""
        return 1.0 if self.q is None else self.q

    @property
    def label(self) -> str:
        return "shannon" if self.q is None else format(self.q, "g")

    def __str__(self):
        return self.label


SHANNON = QParam.shannon()


def as_qparam(q: Union[QParam, float, int, str, None]) -> QParam:
    """Coerce user input to a QParam.

    ``None``, ``"shannon"`` and exactly ``1`` select Shannon; any other
    number is a Tsallis order.
    """
    if isinstance(q, QParam):
        return q
    if q is None:
        return SHANNON
    if isinstance(q, str):
        s = q.strip().lower()
        if s in ("shannon", "s", "1", "1.0"):
            return SHANNON
        return QParam.tsallis(float(s))
    if float(q) == 1.0:
        return SHANNON
    return QParam.tsallis(q)
