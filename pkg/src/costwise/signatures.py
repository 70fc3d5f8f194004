"""Stable 64-bit subgraph signatures at four granularities.

All hashes are FNV-1a 64 over a canonical byte string: a family tag, the
root kind, then (depending on the family) child hashes as little-endian
u64, ``(label, count)`` pairs and input templates, every string
length-prefixed.  Parameter values and raw dates/numbers never enter.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .plan import PlanNode, logical_label, normalize_input_name

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK
    return h


def _s(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


@dataclass(frozen=True)
class SignatureSet:
    subgraph: int
    subgraph_approx: int
    op_input: int
    operator: int

    def hex(self) -> tuple[str, str, str, str]:
        return tuple(format(v, "016x") for v in (self.subgraph, self.subgraph_approx, self.op_input, self.operator))


def operator_signature(kind_name: str) -> int:
    return fnv1a64(b"O" + _s(kind_name))


def _templates(node: PlanNode) -> list[str]:
    return [normalize_input_name(raw) for raw in node.inputs]


def _summaries(root: PlanNode, out: dict[int, tuple[int, Counter, list[str]]]) -> tuple[int, Counter, list[str]]:
    """Post-order pass returning (subgraph hash, label counts incl. root, leaf templates)."""
    child_info = [_summaries(c, out) for c in root.children]
    own_templates = _templates(root)
    buf = [b"S", _s(root.kind.value), struct.pack("<I", len(child_info))]
    for h, _, _ in child_info:
        buf.append(struct.pack("<Q", h))
    buf.append(struct.pack("<I", len(own_templates)))
    buf.extend(_s(t) for t in own_templates)
    sub = fnv1a64(b"".join(buf))

    counts: Counter = Counter()
    templates = list(own_templates)
    for _, cc, tt in child_info:
        counts.update(cc)
        templates.extend(tt)
    info_desc = counts.copy()  # strict descendants only
    counts[logical_label(root.kind)] += 1
    out[id(root)] = (sub, info_desc, templates)
    return sub, counts, templates


def _finish(kind_name: str, sub: int, desc: Counter, templates: Iterable[str]) -> SignatureSet:
    tsorted = sorted(templates)
    tbytes = struct.pack("<I", len(tsorted)) + b"".join(_s(t) for t in tsorted)
    cbytes = struct.pack("<I", len(desc)) + b"".join(
        _s(label) + struct.pack("<I", n) for label, n in sorted(desc.items())
    )
    approx = fnv1a64(b"A" + _s(kind_name) + cbytes + tbytes)
    op_input = fnv1a64(b"I" + _s(kind_name) + tbytes)
    return SignatureSet(sub, approx, op_input, operator_signature(kind_name))


def signature_map(root: PlanNode) -> dict[int, SignatureSet]:
    """Signatures for every node of ``root``, keyed by ``id(node)``.  O(n)."""
    raw: dict[int, tuple[int, Counter, list[str]]] = {}
    _summaries(root, raw)
    return {id(n): _finish(n.kind.value, *raw[id(n)]) for n in root.walk()}


def compute_signatures(node: PlanNode) -> SignatureSet:
    """Signatures of the subtree rooted at ``node``."""
    raw: dict[int, tuple[int, Counter, list[str]]] = {}
    _summaries(node, raw)
    return _finish(node.kind.value, *raw[id(node)])
