"""Time series of per-step observables: the record every run emits."""

from __future__ import annotations

import numpy as np

from .errors import UsageError


class TimeSeries:
    """Rows of (t, observables...) with a fixed column layout.

    The first column is always ``t`` and must be strictly increasing.
    """

    def __init__(self, columns):
        cols = list(columns)
        if not cols or cols[0] != "t":
            cols = ["t"] + cols
        if len(set(cols)) != len(cols):
            raise UsageError(f"duplicate column names in {cols}")
        self.columns = cols
        self._rows = []

    def append(self, t: float, values) -> None:
        vals = [float(x) for x in values]
        if 1 + len(vals) != len(self.columns):
            raise UsageError(
                f"row width {1 + len(vals)} does not match columns {self.columns}")
        if self._rows and t <= self._rows[-1][0]:
            raise UsageError(f"t must be strictly increasing, got {t} after {self._rows[-1][0]}")
        self._rows.append((float(t), *vals))

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def rows(self):
        return list(self._rows)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError as exc:
            raise UsageError(f"no column {name!r}; have {self.columns}") from exc
        return np.array([r[j] for r in self._rows], dtype=float)
