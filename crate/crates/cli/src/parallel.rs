//! Multi-threaded brute-force search.
//!
//! Jobs are evaluated on the rayon pool in [`Problem::search_order`]; the best
//! cost seen so far is shared through an atomic and only used to prune jobs
//! that are strictly worse, so the reduced winner is the same for any thread
//! count.

use std::sync::atomic::{AtomicU64, Ordering};

use manipcost_core::bench::BenchmarkSpec;
use manipcost_core::cost::CostModel;
use manipcost_core::dist::PriceDist;
use manipcost_core::oracle::{reduce, DiscreteManipulation, Problem, SearchConfig};
use manipcost_core::Result;
use rayon::prelude::*;

/// Lowest cost published so far. Costs are non-negative, so the bit patterns
/// of the floats order like the floats.
struct SharedBound(AtomicU64);

impl SharedBound {
    fn new() -> Self {
        SharedBound(AtomicU64::new(f64::INFINITY.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn offer(&self, cost: f64) {
        if cost >= 0.0 {
            self.0.fetch_min(cost.to_bits(), Ordering::Relaxed);
        }
    }
}

pub fn min_cost_attack(
    dist: &PriceDist,
    cost: &CostModel,
    spec: &BenchmarkSpec,
    target: f64,
    cfg: &SearchConfig,
) -> Result<DiscreteManipulation> {
    let problem = Problem::new(dist, cost, spec, target, cfg)?;
    let jobs = problem.jobs();
    let bound = SharedBound::new();
    let found: Vec<_> = Problem::search_order(jobs.len())
        .into_par_iter()
        .filter_map(|i| {
            let c = problem.run(i, &jobs[i], bound.get())?;
            bound.offer(c.cost);
            Some(c)
        })
        .collect();
    problem.finish(reduce(found))
}

/// Runs `f` on a dedicated pool of `threads` workers (the global pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool").install(f),
        None => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use manipcost_core::dist::ParametricDist;

    #[test]
    fn matches_the_serial_search() {
        let m = CostModel::quadratic(2.0, 1.0).unwrap();
        let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
        let cfg = SearchConfig { n_atoms: 200, delta_grid: 400, ..SearchConfig::default() };
        for spec in [BenchmarkSpec::Mean, BenchmarkSpec::TrimmedMean(0.2), BenchmarkSpec::Median] {
            let serial = manipcost_core::oracle::min_cost_attack(&tri, &m, &spec, 0.4, &cfg).unwrap();
            for t in [1, 3] {
                let par = with_threads(Some(t), || min_cost_attack(&tri, &m, &spec, 0.4, &cfg)).unwrap();
                assert_eq!(par, serial, "{spec:?} on {t} threads");
            }
        }
    }

    #[test]
    fn bound_keeps_the_minimum() {
        let b = SharedBound::new();
        b.offer(3.0);
        b.offer(5.0);
        b.offer(0.25);
        assert_eq!(b.get(), 0.25);
    }
}
