"""Time-indexed metric records and their CSV serialization."""

from __future__ import annotations

import csv
import math

__all__ = ["MetricsTrace", "emit_metrics"]


class MetricsTrace:
    """Ordered (index, {metric name: value}) records.

    Indices must be strictly increasing and every value finite.  Records may
    carry different metric subsets; the union of names, in first-appearance
    order, forms the CSV columns.
    """

    def __init__(self):
        self.records: list[tuple[int, dict[str, float]]] = []
        self._names: list[str] = []

    def add(self, index: int, **metrics: float) -> None:
        index = int(index)
        if self.records and index <= self.records[-1][0]:
            raise ValueError(
                f"trace index {index} not greater than last {self.records[-1][0]}")
        if not metrics:
            raise ValueError("a trace record needs at least one metric")
        clean = {}
        for name, value in metrics.items():
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"non-finite metric {name}={value}")
            clean[name] = value
            if name not in self._names:
                self._names.append(name)
        self.records.append((index, clean))

    @property
    def metric_names(self) -> list[str]:
        return list(self._names)

    def values(self, name: str) -> list[float]:
        """Values of one metric across the records that carry it."""
        return [rec[name] for _, rec in self.records if name in rec]

    def last(self, name: str) -> float:
        vals = self.values(name)
        if not vals:
            raise KeyError(name)
        return vals[-1]

    def __len__(self) -> int:
        return len(self.records)


def emit_metrics(trace: MetricsTrace, path, header_comment: str = None) -> None:
    """CSV: header `step,<names...>`, one row per record, 9 significant digits.

    A record lacking a metric leaves that cell empty.  header_comment, when
    given, is written as a leading `#` line (used to stamp run metadata).
    """
    if not len(trace):
        raise ValueError("cannot emit an empty trace")
    names = trace.metric_names
    with open(path, "w", newline="") as fh:
        if header_comment is not None:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["step"] + names)
        for index, rec in trace.records:
            row = [str(index)]
            for name in names:
                row.append("%.9g" % rec[name] if name in rec else "")
            writer.writerow(row)
