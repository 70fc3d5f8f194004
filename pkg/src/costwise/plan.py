"""Plan representation: operators, statistics, plan trees and stages.

Plans arrive as JSON documents (one object per node, children nested).  A
document may mix logical operators (``Get``, ``Join`` ...) and physical ones
(``Extract``, ``HashJoin`` ...); the optimizer maps the logical ones and keeps
physical nodes as given.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Union


class PlanError(ValueError):
    """Raised for malformed plan documents or plans violating an invariant."""


class LogicalKind(str, enum.Enum):
    GET = "Get"
    FILTER = "Filter"
    PROJECT = "Project"
    JOIN = "Join"
    GROUP_AGG = "GroupAgg"
    SORT = "Sort"
    UNION = "Union"
    UDF = "Udf"
    OUTPUT = "Output"


class PhysicalKind(str, enum.Enum):
    EXTRACT = "Extract"
    FILTER = "FilterExec"
    PROJECT = "ProjectExec"
    HASH_JOIN = "HashJoin"
    MERGE_JOIN = "MergeJoin"
    HASH_AGG = "HashAgg"
    STREAM_AGG = "StreamAgg"
    SORT = "SortExec"
    EXCHANGE = "Exchange"
    UDF = "UdfExec"
    UNION = "UnionExec"
    OUTPUT = "OutputExec"

    @property
    def is_boundary(self) -> bool:
        return self in (PhysicalKind.EXTRACT, PhysicalKind.EXCHANGE)

    @property
    def logical_label(self) -> str:
        """Logical kind name used when counting operator frequencies."""
        return _PHYSICAL_TO_LOGICAL[self]


_PHYSICAL_TO_LOGICAL = {
    PhysicalKind.EXTRACT: LogicalKind.GET.value,
    PhysicalKind.FILTER: LogicalKind.FILTER.value,
    PhysicalKind.PROJECT: LogicalKind.PROJECT.value,
    PhysicalKind.HASH_JOIN: LogicalKind.JOIN.value,
    PhysicalKind.MERGE_JOIN: LogicalKind.JOIN.value,
    PhysicalKind.HASH_AGG: LogicalKind.GROUP_AGG.value,
    PhysicalKind.STREAM_AGG: LogicalKind.GROUP_AGG.value,
    PhysicalKind.SORT: LogicalKind.SORT.value,
    # enforcer without a logical counterpart; counted under its own label
    PhysicalKind.EXCHANGE: "Exchange",
    PhysicalKind.UDF: LogicalKind.UDF.value,
    PhysicalKind.UNION: LogicalKind.UNION.value,
    PhysicalKind.OUTPUT: LogicalKind.OUTPUT.value,
}

OpKind = Union[LogicalKind, PhysicalKind]

_KINDS: dict[str, OpKind] = {k.value: k for k in LogicalKind}
_KINDS.update({k.value: k for k in PhysicalKind})


def parse_kind(name: str) -> OpKind:
    try:
        return _KINDS[name]
    except KeyError:
        raise PlanError(f"unknown operator kind {name!r}") from None


def is_leaf_kind(kind: OpKind) -> bool:
    return kind in (LogicalKind.GET, PhysicalKind.EXTRACT)


def logical_label(kind: OpKind) -> str:
    if isinstance(kind, PhysicalKind):
        return kind.logical_label
    return kind.value


@dataclass(frozen=True)
class Stats:
    """Optimizer statistics for one operator.

    ``input_card`` (I), ``base_card`` (B) and ``output_card`` (C) are row
    counts; ``avg_row_len`` (L) is in bytes.
    """

    input_card: float
    base_card: float
    output_card: float
    avg_row_len: float

    def __post_init__(self) -> None:
        vals = (self.input_card, self.base_card, self.output_card, self.avg_row_len)
        if not all(math.isfinite(v) for v in vals):
            raise PlanError("invalid statistics: non-finite value")
        if min(self.input_card, self.base_card, self.output_card) < 0 or self.avg_row_len <= 0:
            raise PlanError("invalid statistics")


@dataclass(eq=False)
class PlanNode:
    kind: OpKind
    stats: Stats
    children: list["PlanNode"] = field(default_factory=list)
    inputs: tuple[str, ...] = ()
    params: tuple[str, ...] = ()
    partition_count: Optional[int] = None
    required_partition: Optional[int] = None
    actual_latency_ms: Optional[float] = None

    @property
    def is_boundary(self) -> bool:
        return isinstance(self.kind, PhysicalKind) and self.kind.is_boundary

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["PlanNode"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def postorder(self) -> list["PlanNode"]:
        out: list[PlanNode] = []

        def visit(n: PlanNode) -> None:
            for c in n.children:
                visit(c)
            out.append(n)

        visit(self)
        return out

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def leaves(self) -> list["PlanNode"]:
        return [n for n in self.walk() if n.is_leaf]


@dataclass(eq=False)
class Stage:
    """Operators sharing one data partitioning; ``nodes[0]`` is the boundary."""

    nodes: list[PlanNode]

    @property
    def boundary(self) -> PlanNode:
        return self.nodes[0]

    @property
    def top(self) -> PlanNode:
        return self.nodes[-1]

    def __len__(self) -> int:
        return len(self.nodes)


# --------------------------------------------------------------------------
# documents


def _num(doc: dict, key: str) -> float:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise PlanError(f"statistic {key!r} must be a number")
    return float(v)


def _opt_pos_int(doc: dict, key: str) -> Optional[int]:
    v = doc.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise PlanError(f"{key!r} must be a positive integer")
    return v


def _str_list(doc: dict, key: str) -> tuple[str, ...]:
    v = doc.get(key, [])
    if not isinstance(v, list) or not all(isinstance(s, str) for s in v):
        raise PlanError(f"{key!r} must be a list of strings")
    return tuple(v)


def _build(doc: Any) -> PlanNode:
    if not isinstance(doc, dict):
        raise PlanError("plan node must be a JSON object")
    if "op" not in doc or not isinstance(doc["op"], str):
        raise PlanError("plan node is missing 'op'")
    kind = parse_kind(doc["op"])
    children_doc = doc.get("children", [])
    if not isinstance(children_doc, list):
        raise PlanError("'children' must be a list")
    children = [_build(c) for c in children_doc]

    sdoc = doc.get("stats")
    if not isinstance(sdoc, dict) or "C" not in sdoc or "L" not in sdoc:
        raise PlanError("missing stats")
    # I and B may be omitted on inner nodes; they follow from the children.
    if children:
        i_default = sum(c.stats.output_card for c in children)
        b_default = sum(c.stats.base_card for c in children)
    else:
        raw = sdoc.get("I", sdoc.get("B"))
        if raw is None:
            raise PlanError("leaf operator needs input cardinality 'I'")
        i_default = b_default = raw
    stats = Stats(
        input_card=_num(sdoc, "I") if "I" in sdoc else float(i_default),
        base_card=_num(sdoc, "B") if "B" in sdoc else float(b_default),
        output_card=_num(sdoc, "C"),
        avg_row_len=_num(sdoc, "L"),
    )

    inputs = _str_list(doc, "inputs")
    if is_leaf_kind(kind):
        if children:
            raise PlanError(f"{kind.value} must be a leaf")
        if not inputs:
            raise PlanError(f"{kind.value} needs at least one input name")
    elif inputs:
        raise PlanError(f"only Get/Extract carry input names, got inputs on {kind.value}")

    actual = doc.get("actual_ms")
    if actual is not None:
        if isinstance(actual, bool) or not isinstance(actual, (int, float)) or actual < 0 or not math.isfinite(actual):
            raise PlanError("'actual_ms' must be a non-negative number")
        actual = float(actual)

    return PlanNode(
        kind=kind,
        stats=stats,
        children=children,
        inputs=inputs,
        params=_str_list(doc, "params"),
        partition_count=_opt_pos_int(doc, "partitions"),
        required_partition=_opt_pos_int(doc, "required_partitions"),
        actual_latency_ms=actual,
    )


def build_plan(document: Union[str, bytes, dict]) -> PlanNode:
    """Build and validate a plan tree from a JSON document (text or parsed)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise PlanError(f"malformed document: {exc}") from exc
    root = _build(document)
    seen: set[int] = set()
    for node in root.walk():
        if id(node) in seen:
            raise PlanError("plan must be a tree")
        seen.add(id(node))
    return root


def _fmt_num(v: float) -> Union[int, float]:
    return int(v) if float(v).is_integer() and abs(v) < 2**53 else v


def to_document(node: PlanNode, annotate: Optional[dict[int, dict]] = None) -> dict:
    """Inverse of :func:`build_plan`.  ``annotate`` maps ``id(node)`` to extra keys."""
    s = node.stats
    doc: dict[str, Any] = {
        "op": node.kind.value,
        "stats": {
            "I": _fmt_num(s.input_card),
            "B": _fmt_num(s.base_card),
            "C": _fmt_num(s.output_card),
            "L": _fmt_num(s.avg_row_len),
        },
    }
    if node.partition_count is not None:
        doc["partitions"] = node.partition_count
    if node.required_partition is not None:
        doc["required_partitions"] = node.required_partition
    if node.inputs:
        doc["inputs"] = list(node.inputs)
    if node.params:
        doc["params"] = list(node.params)
    if node.actual_latency_ms is not None:
        doc["actual_ms"] = node.actual_latency_ms
    if annotate and id(node) in annotate:
        doc.update(annotate[id(node)])
    doc["children"] = [to_document(c, annotate) for c in node.children]
    return doc


# --------------------------------------------------------------------------
# stages


def decompose_stages(plan: PlanNode) -> list[Stage]:
    """Split a physical plan into stages at Extract/Exchange operators.

    A non-boundary operator joins the stage of its left-most child, which is
    the stage of the nearest boundary below it on the left-most path.  Stages
    are returned ordered by the post-order position of their top operator,
    so every stage comes after the stages feeding it.
    """
    stages: list[Stage] = []
    owner: dict[int, Stage] = {}
    order: dict[int, int] = {}
    for pos, node in enumerate(plan.postorder()):
        order[id(node)] = pos
        if node.is_leaf and node.kind is not PhysicalKind.EXTRACT:
            raise PlanError(f"leaf operator must be Extract, got {node.kind.value}")
        if node.is_boundary:
            stage = Stage([node])
            stages.append(stage)
        else:
            stage = owner[id(node.children[0])]
            stage.nodes.append(node)
        owner[id(node)] = stage
    stages.sort(key=lambda st: order[id(st.top)])
    return stages


# --------------------------------------------------------------------------
# input templates

_DIGITS = re.compile(r"\d+")


def normalize_input_name(raw: str) -> str:
    """Replace date and number tokens so recurring inputs share one template.

    Every maximal digit run becomes ``#``; separators inside a date are kept so
    ``clicks_2019_08_01.tsv`` maps to ``clicks_#_#_#.tsv``.  Idempotent.
    """
    return _DIGITS.sub("#", raw)
