from __future__ import annotations

from typing import Union

from ..plan import LogicalKind, OpKind, PhysicalKind

_RULES: dict[LogicalKind, tuple[PhysicalKind, ...]] = {
    LogicalKind.GET: (PhysicalKind.EXTRACT,),
    LogicalKind.FILTER: (PhysicalKind.FILTER,),
    LogicalKind.PROJECT: (PhysicalKind.PROJECT,),
    LogicalKind.JOIN: (PhysicalKind.HASH_JOIN, PhysicalKind.MERGE_JOIN),
    LogicalKind.GROUP_AGG: (PhysicalKind.HASH_AGG, PhysicalKind.STREAM_AGG),
    LogicalKind.SORT: (PhysicalKind.SORT,),
    LogicalKind.UNION: (PhysicalKind.UNION,),
    LogicalKind.UDF: (PhysicalKind.UDF,),
    LogicalKind.OUTPUT: (PhysicalKind.OUTPUT,),
}

# inputs of these operators are re-partitioned on their keys
PARTITION_SENSITIVE = frozenset({LogicalKind.JOIN, LogicalKind.GROUP_AGG})


def enumerate_physical(kind: Union[OpKind, str]) -> list[PhysicalKind]:
    """Physical implementations of a logical operator; physical kinds map to themselves."""
    if isinstance(kind, str) and not isinstance(kind, (LogicalKind, PhysicalKind)):
        kind = LogicalKind(kind)
    if isinstance(kind, PhysicalKind):
        return [kind]
    return list(_RULES[kind])


def needs_exchange(kind: OpKind) -> bool:
    return kind in PARTITION_SENSITIVE
