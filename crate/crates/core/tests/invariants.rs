use manipcost_core::attack::{mean_attack, symmetry_certificate, trimmed_attack};
use manipcost_core::bench::{evaluate, symmetric_benchmarks, BenchmarkSpec};
use manipcost_core::cost::CostModel;
use manipcost_core::dist::{AtomDist, ParametricDist, PriceDist};
use manipcost_core::oracle::{min_cost_attack, Problem, SearchConfig};
use proptest::prelude::*;

fn dist() -> impl Strategy<Value = PriceDist> {
    prop_oneof![
        (-3.0..3.0f64, 0.1..2.0f64).prop_map(|(c, h)| ParametricDist::triangular(c, h).unwrap().into()),
        (-3.0..3.0f64, 0.1..2.0f64).prop_map(|(lo, w)| ParametricDist::uniform(lo, lo + w).unwrap().into()),
        (-3.0..3.0f64, 0.2..1.0f64, 0.5..2.0f64)
            .prop_map(|(c, s, h)| ParametricDist::truncated_gaussian(c, s, h).unwrap().into()),
        prop::collection::vec((-5.0..5.0f64, 0.1..1.0f64), 1..12)
            .prop_map(|a| AtomDist::normalized(a).unwrap().into()),
    ]
}

fn singles() -> Vec<BenchmarkSpec> {
    let mut v = symmetric_benchmarks();
    v.extend([BenchmarkSpec::Quantile(0.2), BenchmarkSpec::Quantile(0.5), BenchmarkSpec::TrimmedMean(0.05)]);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn benchmarks_commute_with_translation(d in dist(), s in -10.0..10.0f64) {
        for b in singles() {
            let before = evaluate(&b, &d).unwrap();
            let after = evaluate(&b, &d.shifted(s)).unwrap();
            prop_assert!((after - before - s).abs() <= 1e-9, "{}: {} vs {}", b.label(), after, before + s);
        }
    }

    #[test]
    fn certified_shift_plans_put_every_symmetric_benchmark_at_the_target(
        k in 0.0..10.0f64,
        a in 0.2..3.0f64,
        p in 0.1..3.0f64,
        tau in 0.0..0.45f64,
    ) {
        let m = CostModel::quadratic(k, a).unwrap();
        let point: PriceDist = ParametricDist::degenerate(0.0).unwrap().into();
        for plan in [mean_attack(&m, p).unwrap(), trimmed_attack(&m, tau, p).unwrap()] {
            let fin = plan.final_distribution(&point, 2).unwrap();
            let cert = symmetry_certificate(&fin, p, 1e-9).unwrap();
            if cert.symmetric {
                prop_assert!(cert.max_deviation <= 1e-6, "{:?}", cert);
            }
        }
    }

    #[test]
    fn mean_plans_cost_no_more_than_moving_everything(k in 0.0..10.0f64, p in 0.05..4.0f64) {
        let m = CostModel::quadratic(k, 1.0).unwrap();
        let plan = mean_attack(&m, p).unwrap();
        prop_assert!(plan.cost <= m.move_cost(p) + 1e-12);
        prop_assert!((plan.mass * plan.delta - p).abs() <= 1e-9);
    }
}

fn cfg(n: usize) -> SearchConfig {
    SearchConfig { n_atoms: n, delta_grid: 2 * n, ..SearchConfig::default() }
}

#[test]
fn oracle_never_beats_a_closed_form_that_applies() {
    let point: PriceDist = ParametricDist::degenerate(0.0).unwrap().into();
    for (k, p, tau) in [(8.0, 1.0, 0.1), (8.0, 1.0, 0.3), (2.0, 1.0, 0.2), (1.0, 0.5, 0.0), (8.0, 3.0, 0.25)] {
        let m = CostModel::quadratic(k, 1.0).unwrap();
        let closed = trimmed_attack(&m, tau, p).unwrap().cost;
        let found = min_cost_attack(&point, &m, &BenchmarkSpec::TrimmedMean(tau), p, &cfg(400)).unwrap().cost;
        assert!(found >= closed - 1e-3, "k={k} P={p} tau={tau}: oracle {found} below closed form {closed}");
    }
}

#[test]
fn doubling_the_resolution_moves_the_oracle_little() {
    let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
    let m = CostModel::fixed_only(1.0).unwrap();
    let coarse = min_cost_attack(&tri, &m, &BenchmarkSpec::Median, 0.3, &cfg(500)).unwrap().cost;
    let fine = min_cost_attack(&tri, &m, &BenchmarkSpec::Median, 0.3, &cfg(1000)).unwrap().cost;
    // one atom of mass at k = 1
    assert!((coarse - fine).abs() <= 1.0 / 500.0, "{coarse} vs {fine}");
}

#[test]
fn job_indices_are_stable() {
    let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
    let m = CostModel::quadratic(2.0, 1.0).unwrap();
    let a = Problem::new(&tri, &m, &BenchmarkSpec::Mean, 0.5, &cfg(100)).unwrap().jobs();
    let b = Problem::new(&tri, &m, &BenchmarkSpec::Mean, 0.5, &cfg(100)).unwrap().jobs();
    assert_eq!(a, b);
    let order = Problem::search_order(a.len());
    let mut sorted = order.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..a.len()).collect::<Vec<_>>());
}
