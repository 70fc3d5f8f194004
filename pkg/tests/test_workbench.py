import math

import numpy as np
import pytest

from builders import leaf, op
from costwise.hub import extract_training_rows
from costwise.learners import FitConfig
from costwise.optimizer import Mode, SamplingConfig, Strategy, sample_partitions
from costwise.plan import PhysicalKind as PK
from costwise.workbench import (
    CSV_HEADER,
    Coefficients,
    EmptyTestSet,
    OracleParams,
    UnknownTemplateError,
    WorkloadConfig,
    adhoc_count,
    bench_explore,
    compare_plans,
    default_cost,
    default_provider,
    evaluate,
    explore_csv,
    gen_workload,
    logical_suite,
    oracle_curve,
    oracle_latency,
    pick_stages,
    train_from_days,
)
from costwise.workbench.evaluate import REPORT_FAMILIES


def _lines(wl):
    return [j.to_json() for j in wl.jobs]


def test_generation_is_deterministic():
    cfg = WorkloadConfig(n_templates=5, instances_per_template=3, days=2, adhoc_fraction=0.2, seed=5)
    a, b = gen_workload(cfg), gen_workload(cfg, jobs=4)
    assert _lines(a) == _lines(b)
    assert _lines(a) != _lines(gen_workload(WorkloadConfig(n_templates=5, instances_per_template=3, days=2,
                                                           adhoc_fraction=0.2, seed=6)))


def test_plan_count():
    wl = gen_workload(WorkloadConfig(n_templates=10, instances_per_template=5, days=2, adhoc_fraction=0.0))
    assert len(wl.jobs) == 100
    for job in wl.jobs:
        assert 2 <= sum(1 for n in job.plan.walk() if n.kind is not PK.EXCHANGE) <= 10
        assert all(n.actual_latency_ms > 0 and n.partition_count >= 1 for n in job.plan.walk())


def test_adhoc_share():
    wl = gen_workload(WorkloadConfig(n_templates=20, instances_per_template=5, days=2, adhoc_fraction=0.15, seed=2))
    assert abs(wl.adhoc_share() - 0.15) <= 0.02
    fresh = {j.template for j in wl.jobs if j.adhoc}
    assert len(fresh) == sum(j.adhoc for j in wl.jobs)  # every ad-hoc job is a one-off template
    assert adhoc_count(100, 0.0) == 0


def test_input_drift_changes_numbers_not_templates(small_workload):
    d1 = next(j for j in small_workload.days[0] if j.template == "t000").plan
    d2 = next(j for j in small_workload.days[1] if j.template == "t000").plan
    assert [n.kind for n in d1.walk()] == [n.kind for n in d2.walk()]
    assert [n.stats.output_card for n in d1.walk()] != [n.stats.output_card for n in d2.walk()]


# -- oracle -------------------------------------------------------------------------------

def _oracle(coef, kind=PK.FILTER):
    params = OracleParams(seed=0)
    params.set(kind, "t", coef)
    return params


def test_oracle_arithmetic():
    node = op(PK.FILTER, leaf(40.0, out=40.0), out=0.0, L=10.0)  # I·L = 400
    params = _oracle(Coefficients(a=10, b=1, c=0, d=2, e=0))
    assert oracle_latency(node, 10, params, "t") == pytest.approx(70.0)
    assert oracle_curve(node, [10], params, "t")[0] == pytest.approx(70.0)


def test_oracle_unknown_template():
    with pytest.raises(UnknownTemplateError):
        oracle_latency(leaf(), 1, OracleParams(seed=0), "nope")


def test_oracle_monotone_without_per_partition_terms():
    node = op(PK.FILTER, leaf(1e6))
    params = _oracle(Coefficients(a=5, b=0, c=0, d=0.5, e=1e-3))
    lat = [oracle_latency(node, P, params, "t") for P in (1, 2, 4, 8, 16, 32, 64)]
    assert all(x < y for x, y in zip(lat, lat[1:]))


@pytest.mark.parametrize("seed", range(20))
def test_oracle_argmin_closed_form(seed):
    rng = np.random.default_rng(seed)
    I, C, L = rng.uniform(1e3, 1e7), rng.uniform(1e2, 1e6), rng.uniform(10, 200)
    b, c, d = rng.uniform(1e-8, 1e-6), rng.uniform(0, 1e-6), rng.uniform(0.01, 2)
    node = op(PK.FILTER, leaf(I), out=C, L=L)
    params = _oracle(Coefficients(a=1.0, b=b, c=c, d=d, e=1e-3))
    grid = np.arange(1, 3001)
    best = int(grid[np.argmin(oracle_curve(node, grid, params, "t"))])
    closed = math.sqrt(b * I * L + c * C * L) / math.sqrt(d)
    assert abs(best - min(max(closed, 1), 3000)) <= 1.0


def test_generated_coefficients_respect_invariants(small_workload):
    oracle = small_workload.oracle
    for t in sorted(oracle.templates)[:5]:
        for kind in PK:
            co = oracle.coefficients(kind, t)
            assert min(co.a, co.b, co.c, co.d) >= 0 and co.b + co.c + co.d > 0
    assert oracle.coefficients(PK.FILTER, "t000") == oracle.coefficients(PK.FILTER, "t000")


def test_noise_is_multiplicative():
    node = op(PK.FILTER, leaf(1e6))
    params = _oracle(Coefficients(a=10, b=1e-6, c=0, d=1, e=0))
    rng = np.random.default_rng(0)
    base = oracle_latency(node, 4, params, "t")
    draws = np.array([oracle_latency(node, 4, params, "t", rng, 0.1) for _ in range(4000)])
    assert np.std(np.log(draws / base)) == pytest.approx(0.1, rel=0.05)


def test_hard_mode_adds_term():
    node = op(PK.FILTER, leaf(1e7), out=1e5)
    soft = _oracle(Coefficients(1, 1e-8, 0, 1, 0))
    hard = _oracle(Coefficients(1, 1e-8, 0, 1, 0))
    hard.hard_mode = True
    assert oracle_latency(node, 4, hard, "t") > oracle_latency(node, 4, soft, "t")


# -- default cost ------------------------------------------------------------------------

def test_default_cost():
    assert default_cost(op(PK.FILTER, leaf(), out=0.0)) == 0.0
    node = op(PK.HASH_AGG, leaf(1e6), out=1e3)
    prov = default_provider()
    costs = prov.costs(node, [1, 10, 3000])
    assert costs[0] == costs[1] == costs[2] == default_cost(node) > 0


# -- evaluation -----------------------------------------------------------------------------

def test_report_shape_and_coverage_order(small_store, small_workload):
    report = evaluate(small_store, small_workload.days[2] + small_workload.days[1])
    assert len(report.rows) == len(REPORT_FAMILIES) * 2
    assert report.to_csv().splitlines()[0] == ",".join(CSV_HEADER)
    for day in (2, 3):
        cov = [report.get(f, day).coverage for f in ("subgraph", "approx", "input", "operator")]
        assert cov == sorted(cov)
        assert cov[-1] == 1.0 == report.get("combined", day).coverage


def test_training_rows_fit_better_than_test_day(small_store, small_rows):
    train = evaluate(small_store, small_rows[1]).get("combined").median_err
    test = evaluate(small_store, small_rows[2]).get("combined").median_err
    assert train <= test


def test_fresh_templates_lower_subgraph_coverage():
    wl = gen_workload(WorkloadConfig(n_templates=10, instances_per_template=6, days=3, adhoc_fraction=0.3, seed=8))
    store = train_from_days(wl.days[:2])
    day = wl.days[2]
    assert abs(sum(j.adhoc for j in day) / len(day) - 0.3) <= 0.02
    report = evaluate(store, day)
    assert report.get("subgraph").coverage < report.get("input").coverage
    assert report.get("combined").coverage == 1.0


def test_empty_test_set(small_store):
    with pytest.raises(EmptyTestSet, match="empty test set"):
        evaluate(small_store, [])


@pytest.mark.parametrize("seed", [3, 21])
def test_noiseless_training_is_accurate(seed):
    # near-unpenalised individual fits; the combined model keeps its 20-tree budget with a faster rate
    wl = gen_workload(WorkloadConfig(n_templates=10, instances_per_template=8, days=3, noise_cv=0.0, seed=seed))
    store = train_from_days(wl.days[:2], cfg=FitConfig(alpha=1e-3, tol=1e-9, max_iter=20_000),
                            combined_cfg=FitConfig(learning_rate=0.3))
    report = evaluate(store, [j for j in wl.days[2] if not j.adhoc])
    assert report.get("combined").median_err <= 0.05


# -- plan comparison ------------------------------------------------------------------------

def test_identical_arms_change_nothing(small_store, small_workload):
    suite = logical_suite(small_workload)[:15]
    arm = (small_store, Mode.FIXED)
    report = compare_plans(suite, small_store, small_workload.oracle, baseline=arm, candidate=arm)
    assert report.n_plans == 15 and report.n_changed == 0
    assert report.processing_delta == 0.0


def test_report_fractions_in_range(small_store, small_workload):
    report = compare_plans(logical_suite(small_workload)[:20], small_store, small_workload.oracle)
    s = report.summary()
    for key in ("fraction_changed", "fraction_improved"):
        assert 0.0 <= s[key] <= 1.0
    assert s["plans"] == 20


# -- exploration benchmark --------------------------------------------------------------------

def test_bench_explore_rows(small_store, small_workload):
    stages = pick_stages(small_workload.days[2], 5, seed=1)
    assert len(stages) == 5
    strategies = [("Geometric(s=2)", SamplingConfig(Strategy.GEOMETRIC, s=2)), ("Analytical", None)]
    rows = bench_explore(small_store, stages, small_workload.oracle, strategies, P_max=500)
    geo, ana = rows
    assert geo.samples == len(sample_partitions(SamplingConfig(Strategy.GEOMETRIC, s=2, P_max=500)))
    assert ana.samples == 1
    assert geo.cost_gap >= 0 and ana.cost_gap >= 0 and not math.isnan(geo.true_gap)
    assert geo.lookups > ana.lookups
    csv_text = explore_csv(rows)
    assert csv_text.splitlines()[0] == "strategy,samples,lookups,cost_gap,true_gap"
    assert len(csv_text.splitlines()) == 3


def test_rows_match_logged_nodes(small_workload):
    day = small_workload.days[0][:100]
    assert len(extract_training_rows(day)) == sum(j.plan.size() for j in day)
