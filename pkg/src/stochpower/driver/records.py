"""Per-iteration run records and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from ..vectors import INFINITE_TANGENT, InfiniteTangent

COLUMNS = (
    "t",
    "wall_ms",
    "population",
    "shift",
    "proj_energy",
    "l1",
    "l2",
    "nnz_matvec",
    "rel_compress_err",
    "tan_theta",
)
_INT_COLUMNS = {"t", "population", "nnz_matvec"}


def _fmt(name: str, x) -> str:
    if x is None:
        return ""
    if isinstance(x, InfiniteTangent):
        return "inf"
    if name in _INT_COLUMNS:
        return str(int(x))
    return format(float(x), ".17g")


def _parse(name: str, text: str):
    if text == "":
        return None
    if name in _INT_COLUMNS:
        return int(text)
    if name == "tan_theta" and text == "inf":
        return INFINITE_TANGENT
    return float(text)


class RunRecord:
    """Time series of one run, one row per iteration (row 0 is the start).

    ``controlled_from`` is the first iteration of the controlled phase for
    walker runs, None otherwise.
    """

    def __init__(self, method: str | None = None):
        self.method = method
        self.controlled_from: int | None = None
        self._rows: list[tuple] = []

    def append(self, t: int, wall_ms: float, population: int, **values) -> None:
        unknown = set(values) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown record columns {sorted(unknown)}")
        if self._rows and t <= self._rows[-1][0]:
            raise ValueError("record rows must be strictly increasing in t")
        row = (int(t), float(wall_ms), int(population)) + tuple(values.get(c) for c in COLUMNS[3:])
        for name, x in zip(COLUMNS, row):
            if x is None or isinstance(x, InfiniteTangent):
                continue
            if not math.isfinite(x):
                raise ValueError(f"non-finite value in column {name}")
        self._rows.append(row)

    def __len__(self) -> int:
        return len(self._rows)

    def column(self, name: str) -> list:
        j = COLUMNS.index(name)
        return [r[j] for r in self._rows]

    def rows(self) -> list[dict]:
        return [dict(zip(COLUMNS, r)) for r in self._rows]

    def to_csv_text(self, normalize_wall: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self._rows:
            cells = [_fmt(n, x) for n, x in zip(COLUMNS, r)]
            if normalize_wall:
                cells[1] = "0"
            writer.writerow(cells)
        return buf.getvalue()

    def write_csv(self, path, normalize_wall: bool = False) -> None:
        Path(path).write_text(self.to_csv_text(normalize_wall))

    @classmethod
    def read_csv(cls, path) -> "RunRecord":
        rec = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                raise ValueError(f"unexpected record header {header}")
            for cells in reader:
                vals = [_parse(n, c) for n, c in zip(COLUMNS, cells)]
                rec.append(vals[0], vals[1], vals[2], **dict(zip(COLUMNS[3:], vals[3:])))
        return rec
