from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..plan import PlanError, PlanNode, build_plan
from .providers import TableCostProvider

TWO_STAGE_EXAMPLE = "two_stage_example.json"


def load_cost_fixture(path: Optional[Union[str, Path]] = None) -> tuple[PlanNode, TableCostProvider, list[int]]:
    """Plan, table-backed cost provider and sample counts from a cost-table document."""
    if path is None:
        text = resources.files("costwise.data").joinpath(TWO_STAGE_EXAMPLE).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_cost_fixture(json.loads(text))


def parse_cost_fixture(doc: dict) -> tuple[PlanNode, TableCostProvider, list[int]]:
    if "plan" not in doc or "cost_tables" not in doc:
        raise PlanError("cost fixture needs 'plan' and 'cost_tables'")
    root = build_plan(doc["plan"])
    tables = {int(i): {int(p): float(c) for p, c in t.items()} for i, t in doc["cost_tables"].items()}
    provider = TableCostProvider.for_plan(root, tables)
    samples = sorted({int(p) for p in doc.get("samples", [])} or {p for t in tables.values() for p in t})
    return root, provider, samples
