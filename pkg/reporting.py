"""
reporting.py
────────────
Output helpers shared by the CLI: deterministic JSON documents and the
tabulate tables of the human format.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Sequence

from tabulate import tabulate

from equivalence import AnalysisGraph, Partition, Violation
from pepa_model import format_rational

INDENT = 2


class CompactJSONEncoder(json.JSONEncoder):
    """Indented JSON that keeps flat lists on one line, at any depth."""

    def encode(self, o: Any) -> str:
        return self._encode(o, 0)

    def iterencode(self, o, _one_shot=False):
        return iter([self.encode(o)])

    def _encode(self, o: Any, depth: int) -> str:
        pad, inner = " " * (INDENT * depth), " " * (INDENT * (depth + 1))
        if isinstance(o, (list, tuple)):
            if not any(isinstance(i, (list, tuple, dict)) for i in o):
                return "[" + ", ".join(json.dumps(i, ensure_ascii=False) for i in o) + "]"
            items = ",\n".join(inner + self._encode(i, depth + 1) for i in o)
            return "[\n" + items + "\n" + pad + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = ",\n".join(
                f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {self._encode(v, depth + 1)}"
                for k, v in o.items()
            )
            return "{\n" + items + "\n" + pad + "}"
        return json.dumps(o, ensure_ascii=False)


def document(kind: str, /, **fields: Any) -> dict:
    return {"document": kind, **fields}


def dumps(doc: dict) -> str:
    return json.dumps(doc, cls=CompactJSONEncoder) + "\n"


# ── human format ──────────────────────────────────────────────────────────────

def table(rows: Iterable[Sequence[Any]], headers: Sequence[str]) -> str:
    return tabulate(list(rows), headers, tablefmt="simple", disable_numparse=True)


def witness_table(graph: AnalysisGraph, violation: Violation) -> str:
    block = "-" if violation.block is None else str(violation.block)
    rows = [
        ("state", graph.label(violation.left)),
        ("other state", graph.label(violation.right)),
        ("action", violation.action),
        ("clause", violation.clause),
        ("block", block),
        ("rate (state)", format_rational(violation.left_rate)),
        ("rate (other)", format_rational(violation.right_rate)),
    ]
    return tabulate(rows, tablefmt="plain", disable_numparse=True)


def partition_table(graph: AnalysisGraph, partition: Partition) -> str:
    rows = [
        (k, ", ".join(f"{graph.label(i)} [{graph.origin(i)}]" for i in block))
        for k, block in enumerate(partition.blocks)
    ]
    return table(rows, ("block", "states"))
