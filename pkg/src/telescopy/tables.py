"""Result tables written as CSV with a commented provenance header."""

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from . import __version__

TYPES = {"str": str, "int": int, "float": float, "bool": bool}


def format_value(value, kind):
    if kind == "float":
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if kind == "bool":
        return "true" if value else "false"
    if kind == "int":
        return str(int(value))
    return str(value)


@dataclass
class ResultTable:
    columns: Tuple[Tuple[str, str], ...]
    rows: List[tuple] = field(default_factory=list)
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, kind in self.columns:
            if kind not in TYPES:
                raise ValueError(f"column {name}: unknown type {kind!r}")

    @property
    def names(self):
        return tuple(n for n, _ in self.columns)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name):
        i = self.names.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        if not self.provenance:
            raise ValueError("result tables need a provenance header")
        buf = io.StringIO()
        prov = {"artifact_version": __version__, **self.provenance}
        for key in sorted(prov):
            buf.write(f"# {key}={prov[key]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        kinds = [k for _, k in self.columns]
        for row in self.rows:
            w.writerow([format_value(v, k) for v, k in zip(row, kinds)])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def read_csv(path_or_text) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Inverse of :meth:`ResultTable.to_csv`: ``(provenance, header, rows)`` as text."""
    text = path_or_text
    if "\n" not in text:
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    prov, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, v = line[2:].split("=", 1)
            prov[k] = v
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return prov, rows[0], rows[1:]
