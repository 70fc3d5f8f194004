"""Small plan constructors shared by the test modules."""

from __future__ import annotations

from costwise.plan import LogicalKind as LK
from costwise.plan import PhysicalKind as PK
from costwise.plan import PlanNode, Stats


def leaf(card=1000.0, name="clicks_2019_08_01.tsv", out=None, L=100.0, kind=PK.EXTRACT, **kw):
    out = card if out is None else out
    return PlanNode(kind, Stats(card, card, out, L), [], inputs=(name,), **kw)


def op(kind, *children, out=None, L=100.0, params=(), **kw):
    I = sum(c.stats.output_card for c in children)
    B = sum(c.stats.base_card for c in children)
    out = I if out is None else out
    return PlanNode(kind, Stats(I, B, out, L), list(children), params=tuple(params), **kw)


def chain(*kinds, card=1000.0, name="clicks_2019_08_01.tsv", leaf_kind=PK.EXTRACT):
    """Leaf first, then unary operators bottom-up."""
    node = leaf(card, name, kind=leaf_kind)
    for k in kinds:
        node = op(k, node, out=node.stats.output_card * 0.5)
    return node


def logical_join_plan(card_a=4e6, card_b=2e6):
    a = op(LK.FILTER, leaf(card_a, "orders_2019_08_01.tsv", kind=LK.GET), out=card_a / 2)
    b = leaf(card_b, "users.tsv", kind=LK.GET)
    j = op(LK.JOIN, a, b, out=card_a / 4)
    g = op(LK.GROUP_AGG, j, out=1000.0)
    return op(LK.OUTPUT, g)


def two_stage_physical():
    """Extract -> Filter -> Exchange -> HashAgg -> Output."""
    e = leaf(2e6)
    f = op(PK.FILTER, e, out=1e6)
    x = op(PK.EXCHANGE, f)
    a = op(PK.HASH_AGG, x, out=1000.0)
    return op(PK.OUTPUT, a)
