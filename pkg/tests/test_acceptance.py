"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Workload criteria run on the shipped configuration: seed 7, 50 templates ×
10 instances × 3 days, noise 0.1.  Individual models are trained on day 1,
combined models on day 2, and day 3 is held out.
"""

import functools
import math
import time

import numpy as np
import pytest

from costwise.hub import dumps_store, extract_training_rows, load_store, lookup, predict_rows, save_store
from costwise.learners import FitConfig, fit_elastic_net, fit_gbt, msle
from costwise.optimizer import (
    Mode, SamplingConfig, analytical_partition, count_lookups, geometric_samples, optimize, restricted_cost,
)
from costwise.optimizer.fixtures import load_cost_fixture
from costwise.workbench import (
    WorkloadConfig, bench_explore, compare_plans, evaluate, gen_workload, logical_suite, pick_stages,
    train_from_days,
)
from test_learners import _gbt_data, brute_force_stump, kkt_residual
from test_optimizer import _count_ops, _full_store, _straight_plan

SHIPPED = WorkloadConfig(n_templates=50, instances_per_template=10, days=3, noise_cv=0.1, seed=7)


@functools.lru_cache(maxsize=None)
def shipped():
    """(workload, store, seconds spent generating and training)."""
    t0 = time.perf_counter()
    wl = gen_workload(SHIPPED)
    store = train_from_days(wl.days[:2])
    return wl, store, time.perf_counter() - t0


def report(capsys, number, title, checks, elapsed, budget):
    """Print the criterion line, then fail the test if any check or the time budget failed."""
    checks = dict(checks)
    checks[f"runtime {elapsed:.2f}s < {budget:g}s"] = elapsed < budget
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    detail = "; ".join(checks) if ok else "failed: " + "; ".join(failed)
    with capsys.disabled():
        print(f"\nCRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
    assert ok, failed


def test_c01_invocation_accounting(capsys):
    t0 = time.perf_counter()
    naive = count_lookups(8, P_max=3000, mode=Mode.NAIVE)
    analytical = count_lookups(8, mode=Mode.ANALYTICAL)
    sampling = count_lookups(8, mode=Mode.SAMPLING, cfg=SamplingConfig(s=2, P_max=3000))
    measured = {}
    for mode in (Mode.SAMPLING, Mode.ANALYTICAL):
        plan = _straight_plan()
        store = _full_store(plan)
        res = optimize(plan, store, SamplingConfig(), mode)
        measured[mode] = (res.lookup_count, count_lookups(_count_ops(res.root), mode=mode), store.evaluations)
    elapsed = time.perf_counter() - t0
    report(capsys, 1, "invocation accounting", {
        f"naive {naive} == 120000": naive == 120_000,
        f"analytical {analytical} == 40": analytical == 40,
        f"sampling {sampling} in [760, 800]": 760 <= sampling <= 800,
        "measured lookup_count == count_lookups": all(a == b == c for a, b, c in measured.values()),
    }, elapsed, 1.0)


def test_c02_geometric_sequence(capsys):
    t0 = time.perf_counter()
    seq = geometric_samples(SamplingConfig(s=2, P_max=3000))
    expected = [1]
    while math.ceil(expected[-1] + expected[-1] / 2) <= 3000:
        expected.append(math.ceil(expected[-1] + expected[-1] / 2))
    elapsed = time.perf_counter() - t0
    report(capsys, 2, "geometric sequence", {
        f"{len(seq)} terms == 19": len(seq) == 19,
        f"ends {seq[:5]}...{seq[-1]}": seq[:5] == [1, 2, 3, 5, 8] and seq[-1] == 2397,
        "matches recurrence": seq == expected,
    }, elapsed, 1.0)


def test_c03_analytical_optimum(capsys):
    t0 = time.perf_counter()
    grid = np.arange(1, 3001)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 9))
        tp, tc = rng.lognormal(7, 2.5, m), rng.lognormal(0, 1.5, m)
        P = analytical_partition(tp.sum(), tc.sum(), 1, 3000)
        best = restricted_cost(tp.sum(), tc.sum(), grid).min()
        worst = max(worst, restricted_cost(tp.sum(), tc.sum(), [P])[0] / best - 1.0)
    pure = analytical_partition(400.0, 1.0)
    elapsed = time.perf_counter() - t0
    report(capsys, 3, "analytical optimum", {
        f"worst gap {worst:.5f} <= 0.05 over 100 stages": worst <= 0.05,
        f"closed form P*={pure} == 20": pure == 20,
    }, elapsed, 10.0)


def test_c04_two_stage_fixture(capsys):
    t0 = time.perf_counter()
    root, prov, samples = load_cost_fixture()
    res = optimize(root, prov, SamplingConfig(explicit=tuple(samples)), Mode.SAMPLING)
    upper = res.stages[-1]
    elapsed = time.perf_counter() - t0
    report(capsys, 4, "two-stage cost-table fixture", {
        f"curve {upper.curve}": upper.curve == {2: 305.0, 16: 125.0},
        f"chosen P={upper.partitions} cost={upper.cost_ms:g}": upper.partitions == 16 and upper.cost_ms == 125.0,
    }, elapsed, 1.0)


def test_c05_learning_accuracy(capsys):
    wl, store, built = shipped()
    t0 = time.perf_counter()
    rep = evaluate(store, wl.days[2])
    elapsed = built + time.perf_counter() - t0  # generation and training count toward the budget
    comb, default = rep.get("combined"), rep.get("default")
    med = {f: rep.get(f).median_err for f in ("subgraph", "input", "operator")}
    report(capsys, 5, "learning accuracy (shipped seed)", {
        f"combined pearson {comb.pearson:.3f} >= 0.9": comb.pearson >= 0.9,
        f"combined median {comb.median_err:.3f} <= 0.25": comb.median_err <= 0.25,
        f"default pearson {default.pearson:.3f} <= 0.5": default.pearson <= 0.5,
        "median subgraph {subgraph:.3f} <= input {input:.3f} <= operator {operator:.3f}".format(**med):
            med["subgraph"] <= med["input"] <= med["operator"],
    }, elapsed, 120.0)


def test_c06_coverage(capsys):
    t0 = time.perf_counter()
    cfg = WorkloadConfig(n_templates=50, instances_per_template=10, days=3, noise_cv=0.1, seed=7, adhoc_fraction=0.3)
    wl = gen_workload(cfg)
    store = train_from_days(wl.days[:2])
    test = wl.days[2]
    share = sum(j.adhoc for j in test) / len(test)
    rows = extract_training_rows(test)
    seen = set(store.kinds.values())
    eligible = [r for r in rows if r.kind in seen]
    _, comb = predict_rows(store, eligible)
    rep = evaluate(store, rows)
    sub, inp = rep.get("subgraph").coverage, rep.get("input").coverage
    combined_cov = float(np.mean(~np.isnan(comb)))
    elapsed = time.perf_counter() - t0
    report(capsys, 6, "coverage", {
        f"fresh-template share {share:.3f} ~ 0.30": abs(share - 0.3) <= 0.02,
        f"combined covers {combined_cov:.3f} of {len(eligible)}/{len(rows)} seen-kind nodes": combined_cov == 1.0,
        f"subgraph {sub:.3f} < input {inp:.3f}": sub < inp,
    }, elapsed, 30.0)


def test_c07_loss_properties(capsys):
    wl, store, _ = shipped()
    t0 = time.perf_counter()
    exact = abs(msle([3.0], [1.0]) - math.log(2) ** 2)
    rng = np.random.default_rng(0)
    a = rng.uniform(1e-3, 1e6, 1000)
    d = a * rng.uniform(1e-3, 0.999, 1000)
    asym = all(msle([x - y], [x]) > msle([x + y], [x]) for x, y in zip(a, d))
    preds, comb = predict_rows(store, extract_training_rows(wl.days[2][:100]))
    cols = list(preds.values()) + [comb]
    non_neg = all(np.all(c[~np.isnan(c)] >= 0) for c in cols)
    elapsed = time.perf_counter() - t0
    report(capsys, 7, "loss properties", {
        f"|msle([3],[1]) - ln2^2| = {exact:.1e} <= 1e-12": exact <= 1e-12,
        "under-prediction costs more on 1000 pairs": asym,
        "all predictions >= 0": non_neg,
    }, elapsed, 5.0)


def test_c08_solver_correctness(capsys):
    t0 = time.perf_counter()
    kkt, monotone = 0.0, True
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(50, 10)) * rng.uniform(0.1, 10, 10)
        t = X @ rng.normal(size=10) + rng.normal(size=50)
        m = fit_elastic_net(X, t, FitConfig(alpha=1.0, l1_ratio=0.5, tol=1e-10, max_iter=10_000), log_target=False)
        kkt = max(kkt, kkt_residual(m, X, t, 1.0, 0.5))
        h = m.objective_history
        monotone &= bool(np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, np.abs(h[1:]))))
    rng = np.random.default_rng(6)
    x = np.concatenate([rng.normal(0, 1, 30), rng.normal(10, 1, 30)])
    y = np.concatenate([rng.normal(2, 0.1, 30), rng.normal(8, 0.1, 30)])
    stump = fit_gbt(x[:, None], y, FitConfig(n_trees=1, max_depth=1, subsample=1.0, learning_rate=1.0),
                    log_target=False)
    _, thr, left, right = brute_force_stump(x, y)
    sides = stump.log_predict(np.array([[thr - 1e-9], [thr + 1e-9]]))
    stump_ok = stump.trees[0].threshold[0] == pytest.approx(thr) and list(sides) == pytest.approx([left, right])
    Xg, yg = _gbt_data()
    repro = fit_gbt(Xg, yg, FitConfig(seed=11)).to_dict() == fit_gbt(Xg, yg, FitConfig(seed=11)).to_dict()
    elapsed = time.perf_counter() - t0
    report(capsys, 8, "solver correctness", {
        f"max KKT residual {kkt:.1e} <= 1e-4": kkt <= 1e-4,
        "objective non-increasing": monotone,
        "stump matches exhaustive split": stump_ok,
        "seeded GBT bit-reproducible": repro,
    }, elapsed, 30.0)


def test_c09_exploration_tradeoff(capsys):
    wl, store, _ = shipped()
    t0 = time.perf_counter()
    stages = pick_stages(wl.days[2], 100, seed=0)
    strategies = [("Geometric(s=2)", SamplingConfig(s=2)), ("Analytical", None)]
    geo, ana = bench_explore(store, stages, wl.oracle, strategies)
    five_m = float(np.mean([5 * len(st.nodes) for st in stages]))
    ratio = geo.lookups / ana.lookups
    elapsed = time.perf_counter() - t0
    report(capsys, 9, "exploration trade-off", {
        f"geometric samples {geo.samples:g} >= 15": geo.samples >= 15,
        f"analytical look-ups {ana.lookups:.2f} == 5*m {five_m:.2f}": ana.lookups == pytest.approx(five_m),
        f"look-up ratio {ratio:.1f}x >= 15": ratio >= 15,
        f"cost gap {ana.cost_gap:.4f} vs {geo.cost_gap:.4f} (within 0.02)": abs(ana.cost_gap - geo.cost_gap) <= 0.02,
        f"true gap {ana.true_gap:.4f} vs {geo.true_gap:.4f} (within 0.02)": abs(ana.true_gap - geo.true_gap) <= 0.02,
    }, elapsed, 60.0)


def test_c10_end_to_end_plan_quality(capsys):
    wl, store, _ = shipped()
    t0 = time.perf_counter()
    rep = compare_plans(logical_suite(wl), store, wl.oracle)
    s = rep.summary()
    elapsed = time.perf_counter() - t0
    report(capsys, 10, "end-to-end plan quality", {
        f"{s['changed']}/{s['plans']} plans changed": s["changed"] > 0,
        f"improved {s['fraction_improved']:.3f} >= 0.70": s["fraction_improved"] >= 0.70,
        f"processing delta {s['processing_delta_rel']:+.3f} < 0": s["processing_delta_ms"] < 0,
    }, elapsed, 120.0)


def test_c11_determinism_and_round_trip(capsys, tmp_path):
    wl, store, _ = shipped()
    t0 = time.perf_counter()
    save_store(store, tmp_path / "store.json")
    again = load_store(tmp_path / "store.json")
    nodes = [n for j in wl.days[2] for n in j.plan.walk()][:500]
    same_preds = all(lookup(again, n) == lookup(store, n) for n in nodes)
    rerun = gen_workload(SHIPPED, jobs=4)
    same_logs = [j.to_json() for j in rerun.jobs] == [j.to_json() for j in wl.jobs]
    same_store = dumps_store(train_from_days(rerun.days[:2], jobs=8)) == dumps_store(store)
    elapsed = time.perf_counter() - t0
    report(capsys, 11, "determinism and round trip", {
        "save/load predictions identical": same_preds,
        "logs byte-identical across runs and jobs=1/4": same_logs,
        "store byte-identical across runs and jobs=1/8": same_store,
    }, elapsed, 120.0)
