import copy
import subprocess
import sys

from hypothesis import given, settings
from hypothesis import strategies as st

from builders import leaf, op, two_stage_physical
from costwise.plan import PhysicalKind as PK
from costwise.signatures import compute_signatures, fnv1a64, operator_signature, signature_map


def test_fnv_reference_vectors():
    # published FNV-1a 64 test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def _join(a_name, b_name, swap=False):
    a = op(PK.FILTER, leaf(1000.0, a_name), out=10.0)
    b = op(PK.PROJECT, leaf(500.0, b_name))
    kids = (b, a) if swap else (a, b)
    return op(PK.HASH_JOIN, *kids)


def test_structural_twins_share_signatures():
    assert compute_signatures(two_stage_physical()) == compute_signatures(two_stage_physical())


def test_dates_collapse():
    a = compute_signatures(_join("clicks_2019_08_01.tsv", "users.tsv"))
    b = compute_signatures(_join("clicks_2019_09_15.tsv", "users.tsv"))
    assert a == b


def test_child_order():
    a = compute_signatures(_join("a.tsv", "b.tsv"))
    b = compute_signatures(_join("a.tsv", "b.tsv", swap=True))
    assert a.subgraph != b.subgraph
    assert a.subgraph_approx == b.subgraph_approx
    assert a.op_input == b.op_input
    assert a.operator == b.operator


def test_granularities_separate_different_inputs():
    a = compute_signatures(_join("a.tsv", "b.tsv"))
    b = compute_signatures(_join("a.tsv", "c.tsv"))
    assert a.subgraph != b.subgraph
    assert a.op_input != b.op_input
    assert a.operator == b.operator


def test_approx_counts_logical_kinds():
    # HashAgg and StreamAgg below the root count as the same logical operator
    x = op(PK.OUTPUT, op(PK.HASH_AGG, leaf()))
    y = op(PK.OUTPUT, op(PK.STREAM_AGG, leaf()))
    sx, sy = compute_signatures(x), compute_signatures(y)
    assert sx.subgraph != sy.subgraph
    assert sx.subgraph_approx == sy.subgraph_approx


def test_operator_signature_depends_on_kind_only():
    for kind in PK:
        variants = [
            leaf(10.0, "a.tsv", kind=kind) if kind is PK.EXTRACT else op(kind, leaf(10.0, "a.tsv")),
            leaf(99.0, "z_1.tsv", kind=kind) if kind is PK.EXTRACT else op(kind, leaf(1.0, "q.tsv"), leaf(2.0, "r.tsv")),
        ]
        sigs = {compute_signatures(v).operator for v in variants}
        assert sigs == {operator_signature(kind.value)}
    assert len({operator_signature(k.value) for k in PK}) == len(PK)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.text(alphabet="abc_", min_size=1, max_size=5), min_size=1, max_size=3),
    st.integers(0, 10**6),
    st.floats(1, 1e9),
)
def test_params_and_numbers_do_not_matter(params, number, card):
    base = op(PK.OUTPUT, op(PK.FILTER, leaf(1000.0, "logs_2019_01_01_part7.tsv")))
    other = copy.deepcopy(base)
    other.children[0].params = tuple(params)
    other.children[0].children[0].inputs = (f"logs_{number}_01_01_part{number % 97}.tsv",)
    other.children[0].children[0] = leaf(card, other.children[0].children[0].inputs[0])
    assert compute_signatures(base) == compute_signatures(other)


def test_signature_map_agrees_with_per_node():
    plan = op(PK.OUTPUT, _join("a.tsv", "b.tsv"))
    sigs = signature_map(plan)
    for n in plan.walk():
        assert sigs[id(n)] == compute_signatures(n)


def test_stable_across_processes():
    code = (
        "import sys; sys.path.insert(0, 'tests');"
        "from builders import two_stage_physical;"
        "from costwise.signatures import compute_signatures;"
        "print(compute_signatures(two_stage_physical()).hex())"
    )
    out = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
           for _ in range(2)}
    assert out == {str(compute_signatures(two_stage_physical()).hex()) + "\n"}
