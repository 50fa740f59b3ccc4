import json
import math
from fractions import Fraction

import numpy as np
import pytest

from ruleseeker import (
    BenchmarkConfig,
    ConditioningInfeasibleError,
    ContractViolation,
    Distribution,
    Instance,
    Rule,
    constant_model,
    dictator_model,
    enumerate_exact,
    estimate_loss,
    estimate_precision,
    explain_instance,
    monomial_model,
    pac_sample_size,
    parity_model,
    random_tree_model,
    rule_from_explanation,
    run_benchmark,
)
from ruleseeker.evaluate import pac_bound_raw
from ruleseeker.solver import SolveInstance


def I(bits):
    return Instance.from_bitstring(bits)


# -- sample-size bound ---------------------------------------------------------


def test_pac_sample_size_reference_point():
    assert pac_sample_size(0.1, 0.05, 5, 60).m == 4833


def test_pac_sample_size_near_one_epsilon():
    budget = pac_sample_size(0.99, 0.5, 1, 2)
    assert budget.m >= 1
    assert budget.m == math.ceil((2 / 0.99**2) * (math.log(2) + math.log(4)))


def test_pac_bound_doubling_d_additive_before_ceiling():
    for eps, delta, k, d in ((0.1, 0.05, 3, 10), (0.2, 0.1, 2, 7)):
        diff = pac_bound_raw(eps, delta, k, 2 * d) - pac_bound_raw(eps, delta, k, d)
        assert abs(diff - (2 * k * math.log(2) / eps**2)) < 1e-9


def test_pac_sample_size_monotonicity():
    base = pac_sample_size(0.1, 0.05, 3, 30).m
    assert pac_sample_size(0.1, 0.05, 4, 30).m >= base
    assert pac_sample_size(0.1, 0.05, 3, 60).m >= base
    assert pac_sample_size(0.2, 0.05, 3, 30).m <= base
    assert pac_sample_size(0.1, 0.2, 3, 30).m <= base


def test_pac_sample_size_rejects_bad_parameters():
    for eps, delta, k, d in ((0.0, 0.5, 1, 2), (0.5, 1.0, 1, 2), (0.5, 0.5, 0, 2), (0.5, 0.5, 3, 2)):
        with pytest.raises(ContractViolation):
            pac_sample_size(eps, delta, k, d)


# -- precision / loss estimators -------------------------------------------------


def test_precision_zero_when_all_features_fixed():
    h = parity_model(6)
    x = I("101011")
    est = estimate_precision(h, Distribution.uniform(6, seed=1), x, range(6), 500)
    assert est.value == 0
    assert est.stderr == 0.0


def test_precision_zero_when_features_determine_model():
    h = monomial_model(5, [0, 2])
    x = I("10100")
    est = estimate_precision(h, Distribution.uniform(5, seed=2), x, [0, 2, 4], 800)
    assert est.value == 0


def test_precision_parity_near_half():
    h = parity_model(10)
    x = I("1111100000")
    est = estimate_precision(h, Distribution.uniform(10, seed=3), x, [0, 1], 2000)
    assert abs(est.value_float - 0.5) <= 4 * est.stderr


def test_precision_rejection_mode_uses_covered_subset():
    h = constant_model(6, 1)
    x = I("111111")
    est = estimate_precision(
        h, Distribution.uniform(6, seed=4), x, [0, 1], 2000, conditioning="reject"
    )
    assert est.conditioning == "rejection"
    # roughly a quarter of unconditioned draws agree on two fixed bits
    assert 2000 / 8 < est.samples_used < 2000 / 2
    assert est.value == 0


def test_precision_rejection_infeasible_when_no_sample_covered():
    h = constant_model(40, 1)
    x = Instance.from_iterable([1] * 40)
    with pytest.raises(ConditioningInfeasibleError):
        estimate_precision(
            h, Distribution.uniform(40, seed=5), x, range(40), 50, conditioning="reject"
        )


def test_precision_estimate_value_is_exact_ratio():
    h = parity_model(4)
    est = estimate_precision(h, Distribution.uniform(4, seed=6), I("1010"), [0], 321)
    assert est.value == Fraction(est.errors, 321)
    assert est.samples_used == 321


def test_loss_perfect_rule_is_zero():
    h = monomial_model(4, [1, 3])
    rule = Rule(body=frozenset({(1, 1), (3, 1)}), head=1)
    assert estimate_loss(h, Distribution.uniform(4, seed=7), rule, 400) == 0


def test_loss_constant_disagreement_is_one():
    h = constant_model(3, 0)
    rule = Rule(body=frozenset(), head=1)
    assert estimate_loss(h, Distribution.uniform(3, seed=8), rule, 200) == 1


def test_loss_parity_near_half():
    h = parity_model(9)
    rule = Rule(body=frozenset(), head=1)
    m = 2000
    loss = estimate_loss(h, Distribution.uniform(9, seed=9), rule, m)
    v = float(loss)
    assert abs(v - 0.5) <= 4 * math.sqrt(0.25 / m)


def test_dictator_precision_cases():
    h = dictator_model(8, 3)
    x = I("00010000")  # bit 3 set, f(x) = 1
    dist = Distribution.uniform(8, seed=10)
    inside = estimate_precision(h, dist, x, [3], 500)
    assert inside.value == 0
    outside = estimate_precision(h, dist, x, [0, 1], 2000)
    assert abs(outside.value_float - 0.5) <= 4 * outside.stderr


# -- explain pipeline ------------------------------------------------------------


def test_explain_recovers_planted_monomial():
    h = monomial_model(8, [0, 2])
    x = Instance.from_iterable([1] * 8)
    dist = Distribution.uniform(8, seed=11)
    explanation, report = explain_instance(h, dist, x, 2, "cop", 600, seed=12)
    assert explanation.features == (0, 2)
    assert explanation.objective == 0
    assert report.optimal


def test_explain_budget_zero_counts_label_disagreements():
    from ruleseeker.blackbox import sample_oracle_matrix

    h = parity_model(6)
    x = I("111111")
    dist = Distribution.uniform(6, seed=13)
    explanation, report = explain_instance(h, dist, x, 0, "cop", 300, seed=14)
    assert explanation.features == ()
    fx = h.predict([x])[0]
    Z, y = sample_oracle_matrix(h, dist, 300, 14)
    assert explanation.objective == int((y != fx).sum())


def test_explain_deterministic_across_runs():
    h = random_tree_model(12, 4, seed=15)
    x = Instance.from_iterable(np.random.default_rng(16).integers(0, 2, 12))
    dist = Distribution.uniform(12, seed=17)
    a = explain_instance(h, dist, x, 3, "cop", 200, seed=18)[0]
    b = explain_instance(h, dist, x, 3, "cop", 200, seed=18)[0]
    # identical apart from wall-clock solve time
    fields = lambda e: (e.features, e.anchor, e.anchor_label, e.objective, e.optimal, e.solve_stats.nodes)
    assert fields(a) == fields(b)


def test_explained_rule_fires_on_its_anchor():
    h = random_tree_model(10, 3, seed=19)
    rng = np.random.default_rng(20)
    dist = Distribution.uniform(10, seed=21)
    for _ in range(10):
        x = Instance.from_iterable(rng.integers(0, 2, 10))
        explanation, _ = explain_instance(h, dist, x, 3, "cop", 150, seed=int(rng.integers(1 << 30)))
        rule = rule_from_explanation(explanation)
        assert rule.fires(x)
        assert rule.predict(x) == explanation.anchor_label


def test_explain_objective_matches_enumeration_oracle():
    h = random_tree_model(9, 3, seed=22)
    x = Instance.from_iterable([1] * 9)
    dist = Distribution.uniform(9, seed=23)
    from ruleseeker.blackbox import sample_oracle_matrix
    from ruleseeker.transform import agreement_matrices

    fx = h.predict([x])[0]
    Z, y = sample_oracle_matrix(h, dist, 120, 24)
    U, v = agreement_matrices(x.to_array(), fx, Z, y)
    inst = SolveInstance.from_matrices(U, v, 3, "cop")
    _, report = explain_instance(h, dist, x, 3, "cop", 120, seed=24)
    assert report.objective == enumerate_exact(inst).objective


# -- benchmark harness -----------------------------------------------------------


def bench_config(prepared_dir, **kw):
    base = {
        "dataset": str(prepared_dir),
        "oracle": "builtin:tree:3",
        "k": [2],
        "m": [60],
        "variants": ["cop", "greedy"],
        "instance_count": 2,
        "eval_samples": 80,
        "time_limit": 10.0,
        "seed": 7,
        "dataset_name": "toy",
    }
    base.update(kw)
    return BenchmarkConfig.from_dict(base)


def test_benchmark_row_count_is_cartesian(prepared_dir):
    cfg = bench_config(prepared_dir)
    report = run_benchmark(cfg)
    assert len(report.rows) == 2 * 2  # anchors x variants
    assert all(r.status == "ok" for r in report.rows)


def test_benchmark_rerun_is_identical(prepared_dir):
    cfg = bench_config(prepared_dir)
    a = run_benchmark(cfg)
    b = run_benchmark(cfg)
    assert a.rows_csv() == b.rows_csv()
    assert a.summary_csv() == b.summary_csv()


def test_benchmark_resume_matches_uninterrupted(prepared_dir, tmp_path):
    cfg = bench_config(prepared_dir)
    full = run_benchmark(cfg)

    checkpoint = tmp_path / "rows.jsonl"
    # simulate an interrupted run: only the first row was completed
    first = full.sorted_rows()[0]
    checkpoint.write_text(json.dumps(first.to_json(), sort_keys=True) + "\n")
    resumed = run_benchmark(cfg, checkpoint_path=checkpoint)
    assert resumed.rows_csv() == full.rows_csv()


def test_benchmark_records_row_failures_and_continues(prepared_dir):
    # k exceeding the dimension trips the solver contract per row
    cfg = bench_config(prepared_dir, k=[99])
    report = run_benchmark(cfg)
    assert all(r.status == "failed" for r in report.rows)
    assert all("ContractViolation" in r.error for r in report.rows)


def test_benchmark_parallel_rows_match_serial(prepared_dir):
    serial = run_benchmark(bench_config(prepared_dir))
    parallel = run_benchmark(bench_config(prepared_dir, jobs=4))
    assert serial.rows_csv() == parallel.rows_csv()


def test_benchmark_anchors_from_distribution(prepared_dir):
    report = run_benchmark(bench_config(prepared_dir, anchor_source="distribution"))
    assert len(report.rows) == 4
    assert all(r.status == "ok" for r in report.rows)
    # anchors are synthetic draws, ids are sequence positions
    assert {r.instance_id for r in report.rows} == {0, 1}


def test_benchmark_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        BenchmarkConfig.from_dict({"dataset": "x", "oracle": "builtin:tree", "bogus": 1})
    with pytest.raises(ValueError):
        BenchmarkConfig.from_dict({"oracle": "builtin:tree"})


def test_mean_precision_tracks_anchor_mean(prepared_dir):
    report = run_benchmark(bench_config(prepared_dir))
    for agg in report.aggregates():
        rows = [
            r
            for r in report.rows
            if r.status == "ok"
            and (r.dataset, r.variant, r.k, r.m) == (agg["dataset"], agg["variant"], agg["k"], agg["m"])
        ]
        expect = np.mean([r.precision for r in rows])
        assert abs(agg["mean_precision"] - expect) < 1e-12
