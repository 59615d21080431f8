//! Populations made of subpopulations with their own price distributions and
//! manipulation costs: weighted-mean weights, per-subpopulation attacks,
//! symmetry witnesses and doubly symmetric benchmarks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::attack::{median_attack_cost, median_symmetric_construction, MedianTransport};
use crate::bench::{evaluate, evaluate_population, median, symmetric_benchmarks, BenchmarkSpec};
use crate::cost::CostModel;
use crate::dist::{mirror_matches, AtomDist, Mixture, ParametricDist, PriceDist, DEFAULT_GRID_N};
use crate::error::{invalid, unsupported, Error, Result};

/// Tolerance of the witness search and of the pooled symmetry check.
pub const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Subpopulation {
    pub mass: f64,
    pub dist: PriceDist,
    pub cost: CostModel,
}

/// Finite list of subpopulations whose pooled distribution is symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    subpops: Vec<Subpopulation>,
    mixture: Mixture,
}

impl Population {
    pub fn new(subpops: Vec<Subpopulation>) -> Result<Self> {
        let mixture = Mixture::new(subpops.iter().map(|s| (s.mass, s.dist.clone())).collect())?;
        if !pooled_is_symmetric(&mixture, 0.0, WITNESS_TOL)? {
            return Err(invalid("population", "pooled distribution is not symmetric about 0"));
        }
        Ok(Population { subpops, mixture })
    }

    pub fn subpops(&self) -> &[Subpopulation] {
        &self.subpops
    }

    pub fn len(&self) -> usize {
        self.subpops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subpops.is_empty()
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    /// Subpopulation `i` shifted by `deltas[i]`.
    pub fn shifted(&self, deltas: &[f64]) -> Result<Mixture> {
        if deltas.len() != self.len() {
            return Err(invalid("shifts", format!("{} shifts for {} subpopulations", deltas.len(), self.len())));
        }
        Mixture::new(self.subpops.iter().zip(deltas).map(|(s, d)| (s.mass, s.dist.shifted(*d))).collect())
    }
}

/// Symmetry of `sum_i mu_i F_i` about `center`.
pub fn pooled_is_symmetric(mix: &Mixture, center: f64, tol: f64) -> Result<bool> {
    let (lo, hi) = mix.support();
    let reach = (hi - center).max(center - lo);
    let dense = mix.components().iter().all(|(_, d)| d.has_density());
    let pooled = if dense {
        // symmetric cells about the center so that mirrored cells line up
        let cdf = |x: f64| mix.cdf(x);
        crate::dist::GridDist::from_cdf(center - reach, center + reach, DEFAULT_GRID_N, cdf)?.into()
    } else {
        mix.pooled(DEFAULT_GRID_N)?
    };
    Ok(pooled.is_symmetric(center, tol))
}

/// Center `X` and pairing `y` with `mu_i f_i(x) = mu_{y(i)} f_{y(i)}(2X - x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryWitness {
    pub center: f64,
    pub pairing: Vec<usize>,
}

fn pairing_center(mix: &Mixture, pairing: &[usize], tol: f64) -> Option<f64> {
    let comps = mix.components();
    let centers: Vec<f64> =
        pairing.iter().enumerate().map(|(i, &j)| 0.5 * (comps[i].1.mean() + comps[j].1.mean())).collect();
    let x = centers[0];
    if centers.iter().any(|c| (c - x).abs() > tol.max(1e-12 * x.abs())) {
        return None;
    }
    let ok = pairing.iter().enumerate().all(|(i, &j)| {
        let (mi, di) = &comps[i];
        let (mj, dj) = &comps[j];
        mirror_matches((di, *mi), (dj, *mj), x, tol)
    });
    ok.then_some(x)
}

/// Tries the identity pairing, then pairs subpopulations mirrored by the order of their means.
pub fn find_witness(mix: &Mixture, tol: f64) -> Option<SymmetryWitness> {
    let n = mix.len();
    let identity: Vec<usize> = (0..n).collect();
    if let Some(center) = pairing_center(mix, &identity, tol) {
        return Some(SymmetryWitness { center, pairing: identity });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mix.components()[a].1.mean().total_cmp(&mix.components()[b].1.mean()));
    let mut pairing = alloc::vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        pairing[i] = order[n - 1 - r];
    }
    pairing_center(mix, &pairing, tol).map(|center| SymmetryWitness { center, pairing })
}

fn require_fixed_free(pop: &Population) -> Result<()> {
    for (i, s) in pop.subpops.iter().enumerate() {
        if s.cost.k() > 0.0 {
            return Err(unsupported("weighted mean attack", format!("subpopulation {i} has fixed cost k > 0")));
        }
        if !s.cost.variable().is_strictly_convex() {
            return Err(unsupported("weighted mean attack", format!("subpopulation {i} cost is not strictly convex")));
        }
    }
    Ok(())
}

/// Per-price weights `c_i'(P) / sum_j mu_j c_j'(P)`; they satisfy `sum_i mu_i w_i = 1`.
pub fn weighted_mean_weights(pop: &Population, target: f64) -> Result<Vec<f64>> {
    require_fixed_free(pop)?;
    if !(target.is_finite() && target != 0.0) {
        return Err(invalid("target", "need a finite P != 0"));
    }
    let p = target.abs();
    let den: f64 = pop.subpops.iter().map(|s| s.mass * s.cost.marginal_cost(p)).sum();
    if den <= 0.0 {
        return Err(unsupported("weighted_mean_weights", "all marginal costs vanish at P"));
    }
    Ok(pop.subpops.iter().map(|s| s.cost.marginal_cost(p) / den).collect())
}

/// Uniform shift of every subpopulation, with its optimality diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroShiftPlan {
    pub target: f64,
    pub weights: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `mu_i c_i(delta_i)` per subpopulation.
    pub costs: Vec<f64>,
    pub cost: f64,
    /// Weighted mean of the shifted population.
    pub achieved: f64,
    /// Lagrange multiplier of the weighted-mean constraint.
    pub multiplier: f64,
    /// `max_i |mu_i c_i'(delta_i) - multiplier * mu_i w_i|`.
    pub stationarity_residual: f64,
}

/// Shifts every subpopulation by `P`, the cheapest way to move the weighted mean to `P`.
pub fn hetero_mean_attack(pop: &Population, target: f64) -> Result<HeteroShiftPlan> {
    let weights = weighted_mean_weights(pop, target)?;
    let deltas = alloc::vec![target; pop.len()];
    let costs: Vec<f64> = pop.subpops.iter().map(|s| s.mass * s.cost.variable_cost(target)).collect();
    let cost = costs.iter().sum();
    let multiplier: f64 = pop.subpops.iter().map(|s| s.mass * s.cost.marginal_cost(target)).sum();
    let stationarity_residual = pop
        .subpops
        .iter()
        .zip(&weights)
        .map(|(s, w)| (s.mass * s.cost.marginal_cost(target) - multiplier * s.mass * w).abs())
        .fold(0.0, f64::max);
    let spec = BenchmarkSpec::WeightedMean(weights.clone());
    let base = evaluate_population(&spec, pop.mixture())?;
    let achieved = evaluate_population(&spec, &pop.shifted(&deltas)?)?;
    if base.abs() > 1e-9 {
        return Err(Error::HypothesesUnmet(format!("unmanipulated weighted mean is {base}, not 0")));
    }
    Ok(HeteroShiftPlan { target, weights, deltas, costs, cost, achieved, multiplier, stationarity_residual })
}

/// Cost of `deltas` under the population's costs (fixed charges included).
pub fn shift_cost(pop: &Population, deltas: &[f64]) -> f64 {
    pop.subpops.iter().zip(deltas).map(|(s, d)| s.mass * s.cost.move_cost(*d)).sum()
}

/// Moves each `delta_i` by `±eps`, restoring the weighted-mean constraint through
/// the next subpopulation, and reports whether every perturbation costs at least as much.
pub fn perturbation_check(pop: &Population, plan: &HeteroShiftPlan, eps: f64) -> bool {
    let n = pop.len();
    if n < 2 {
        return true;
    }
    let base = shift_cost(pop, &plan.deltas);
    let mw: Vec<f64> = pop.subpops.iter().zip(&plan.weights).map(|(s, w)| s.mass * w).collect();
    (0..n).all(|i| {
        [eps, -eps].iter().all(|&s| {
            let j = (i + 1) % n;
            if mw[j] == 0.0 {
                return true;
            }
            let mut d = plan.deltas.clone();
            d[i] += s;
            d[j] -= mw[i] * s / mw[j];
            shift_cost(pop, &d) >= base - 1e-12
        })
    })
}

/// Per-subpopulation symmetric median transports under fixed costs only.
#[derive(Debug, Clone)]
pub struct HeteroMedianPlan {
    pub target: f64,
    pub transports: Vec<MedianTransport>,
    /// `F_i(P) - 1/2` per subpopulation.
    pub moved: Vec<f64>,
    /// `sum_i k_i mu_i (F_i(P) - 1/2)`.
    pub cost: f64,
}

pub fn hetero_median_attack(pop: &Population, target: f64) -> Result<HeteroMedianPlan> {
    let mut transports = Vec::with_capacity(pop.len());
    let mut moved = Vec::with_capacity(pop.len());
    let mut cost = 0.0;
    for (i, s) in pop.subpops.iter().enumerate() {
        if !s.cost.variable().is_zero() {
            return Err(unsupported("hetero_median_attack", format!("subpopulation {i} has a variable cost")));
        }
        transports.push(median_symmetric_construction(&s.dist, target)?);
        let mc = median_attack_cost(s.cost.k(), &s.dist, target)?;
        moved.push(mc.moved_mass);
        cost += s.mass * mc.cost;
    }
    Ok(HeteroMedianPlan { target, transports, moved, cost })
}

/// `beta_i` with `c_i = beta_i c_0` on a probe grid, when every cost is proportional to the first.
pub fn costs_proportional(pop: &Population) -> Option<Vec<f64>> {
    let probes: Vec<f64> = (1..=64).map(|i| 0.125 * i as f64).collect();
    let first = &pop.subpops.first()?.cost;
    pop.subpops.iter().map(|s| s.cost.proportional_to(first, &probes)).collect()
}

/// Populations whose subpopulations are each symmetric and pairwise mirrored
/// about a known center, with `n` subpopulations each.
///
/// When `weights` is given, only subpopulations with equal weight are mirrored
/// onto each other; the rest are symmetric about the center on their own.
pub fn doubly_symmetric_battery(n: usize, weights: Option<&[f64]>) -> Vec<(f64, Mixture)> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for &x in &[-1.5, 0.0, 0.7, 2.0] {
        // pair (i, j) mirrored when allowed, otherwise i self-paired
        let mut partner: Vec<Option<usize>> = alloc::vec![None; n];
        let mut i = 0;
        while i + 1 < n {
            let same = weights.map_or(true, |w| w[i] == w[i + 1]);
            if same {
                partner[i] = Some(i + 1);
                partner[i + 1] = Some(i);
                i += 2;
            } else {
                i += 1;
            }
        }
        let mass = 1.0 / n as f64;
        for variant in 0..3 {
            let mut comps: Vec<(f64, PriceDist)> = Vec::with_capacity(n);
            for (i, &pair) in partner.iter().enumerate() {
                let s = 0.3 + 0.2 * i as f64;
                let d: PriceDist = match (pair, variant) {
                    (Some(j), 0) => {
                        let side = if i < j { -1.0 } else { 1.0 };
                        let off = 0.5 + 0.25 * (i.min(j) as f64);
                        ParametricDist::Uniform { lo: x + side * off - 0.2, hi: x + side * off + 0.2 }.into()
                    }
                    (Some(j), 1) => {
                        let side = if i < j { -1.0 } else { 1.0 };
                        let base = AtomDist::from_unnormalized(alloc::vec![(0.1, 0.3), (0.4, 0.5), (1.0, 0.2)]);
                        let atoms: Vec<(f64, f64)> = base.iter().map(|(p, m)| (x + side * p, m)).collect();
                        AtomDist::from_unnormalized(atoms).into()
                    }
                    (None, 1) | (Some(_), 2) => {
                        AtomDist::from_unnormalized(alloc::vec![(x - s, 0.25), (x, 0.5), (x + s, 0.25)]).into()
                    }
                    _ if i % 2 == 0 => ParametricDist::Triangular { center: x, halfwidth: s }.into(),
                    _ => ParametricDist::TruncatedGaussian { center: x, sigma: 0.5 * s, halfwidth: s }.into(),
                };
                comps.push((mass, d));
            }
            // mixed atom and density components have no pooled form; keep families uniform per variant
            let dense = comps.iter().filter(|(_, d)| d.has_density()).count();
            if dense != 0 && dense != n {
                comps = comps
                    .into_iter()
                    .map(|(m, d)| match d.has_density() {
                        true => (m, d.to_atoms(401).map(PriceDist::from).unwrap_or(d)),
                        false => (m, d),
                    })
                    .collect();
            }
            if let Ok(mix) = Mixture::new(comps) {
                out.push((x, mix));
            }
        }
    }
    out
}

/// True iff `spec` returns the witness center on every member of the doubly symmetric battery.
pub fn doubly_symmetric_probe(spec: &BenchmarkSpec, tol: f64) -> Result<bool> {
    if !spec.is_population() {
        return Err(unsupported("doubly_symmetric_probe", "needs a population statistic"));
    }
    let sizes: Vec<usize> = match spec {
        BenchmarkSpec::WeightedMean(w) => alloc::vec![w.len()],
        _ => alloc::vec![1, 2, 3, 4],
    };
    let weights = match spec {
        BenchmarkSpec::WeightedMean(w) => Some(w.as_slice()),
        _ => None,
    };
    for n in sizes {
        for (x, mix) in doubly_symmetric_battery(n, weights) {
            debug_assert!(find_witness(&mix, WITNESS_TOL).is_some());
            if (evaluate_population(spec, &mix)? - x).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Statistics of Uniform(-1, 1) split into uniforms on `[-1, .4]`, `[.4, .8]`, `[.8, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitUniformReport {
    pub masses: Vec<f64>,
    pub medians: Vec<f64>,
    pub median_of_medians: f64,
    /// Unweighted average of the subpopulation medians.
    pub mean_of_medians: f64,
    pub mass_weighted_mean_of_medians: f64,
    /// Value usually quoted for both statistics (0.6).
    pub quoted_value: f64,
    /// Set when the unweighted mean of medians differs from `quoted_value`.
    pub mean_of_medians_discrepancy: bool,
    /// Each symmetric benchmark on the pooled prices.
    pub symmetric_values: Vec<(String, f64)>,
    /// Whether the subpopulations admit a symmetry witness.
    pub witness: Option<SymmetryWitness>,
    pub notes: Vec<String>,
}

pub fn split_uniform_example() -> Result<SplitUniformReport> {
    let parts = [(-1.0, 0.4), (0.4, 0.8), (0.8, 1.0)];
    let comps: Vec<(f64, PriceDist)> = parts
        .iter()
        .map(|&(lo, hi)| Ok(((hi - lo) / 2.0, ParametricDist::uniform(lo, hi)?.into())))
        .collect::<Result<_>>()?;
    let mix = Mixture::new(comps)?;
    let medians: Vec<f64> = mix.components().iter().map(|(_, d)| median(d)).collect();
    let median_of_medians = evaluate_population(&BenchmarkSpec::MedianOfMedians, &mix)?;
    let mean_of_medians = evaluate_population(&BenchmarkSpec::MeanOfMedians, &mix)?;
    let mass_weighted_mean_of_medians = evaluate_population(&BenchmarkSpec::MassWeightedMeanOfMedians, &mix)?;
    let pooled = mix.pooled(DEFAULT_GRID_N)?;
    let mut symmetric_values = Vec::new();
    for spec in symmetric_benchmarks() {
        symmetric_values.push((spec.label(), evaluate(&spec, &pooled)?));
    }
    let quoted_value = 0.6;
    let discrepancy = (mean_of_medians - quoted_value).abs() > 1e-9;
    let mut notes = Vec::new();
    if discrepancy {
        notes.push(format!(
            "mean of medians is {mean_of_medians:.6} (mass-weighted {mass_weighted_mean_of_medians:.6}), not the quoted {quoted_value}"
        ));
    }
    Ok(SplitUniformReport {
        masses: mix.components().iter().map(|c| c.0).collect(),
        medians,
        median_of_medians,
        mean_of_medians,
        mass_weighted_mean_of_medians,
        quoted_value,
        mean_of_medians_discrepancy: discrepancy,
        symmetric_values,
        witness: find_witness(&mix, WITNESS_TOL),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> PriceDist {
        ParametricDist::triangular(0.0, 1.0).unwrap().into()
    }

    fn two_quadratics() -> Population {
        Population::new(alloc::vec![
            Subpopulation { mass: 0.5, dist: tri(), cost: CostModel::quadratic(0.0, 1.0).unwrap() },
            Subpopulation { mass: 0.5, dist: tri(), cost: CostModel::quadratic(0.0, 2.0).unwrap() },
        ])
        .unwrap()
    }

    #[test]
    fn weights_for_unequal_marginals() {
        let w = weighted_mean_weights(&two_quadratics(), 1.0).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((0.5 * w[0] + 0.5 * w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_costs_give_unit_weights() {
        let c = CostModel::quadratic(0.0, 1.0).unwrap();
        let pop = Population::new(alloc::vec![
            Subpopulation { mass: 0.5, dist: tri(), cost: c.clone() },
            Subpopulation { mass: 0.5, dist: tri(), cost: c },
        ])
        .unwrap();
        for p in [0.3, 1.0, 7.0] {
            assert_eq!(weighted_mean_weights(&pop, p).unwrap(), alloc::vec![1.0, 1.0]);
        }
    }

    #[test]
    fn weights_reject_fixed_costs() {
        let pop = Population::new(alloc::vec![Subpopulation {
            mass: 1.0,
            dist: tri(),
            cost: CostModel::quadratic(1.0, 1.0).unwrap(),
        }])
        .unwrap();
        assert!(weighted_mean_weights(&pop, 1.0).is_err());
    }

    #[test]
    fn uniform_shift_is_stationary() {
        let pop = two_quadratics();
        for (p, cost) in [(1.0, 1.5), (2.0, 6.0)] {
            let plan = hetero_mean_attack(&pop, p).unwrap();
            assert!((plan.cost - cost).abs() < 1e-12);
            assert!(plan.stationarity_residual <= 1e-9);
            assert!((plan.achieved - p).abs() < 1e-9);
            assert!(perturbation_check(&pop, &plan, 1e-3));
        }
    }

    #[test]
    fn single_subpopulation_reduces_to_mean_attack() {
        let c = CostModel::quadratic(0.0, 1.0).unwrap();
        let pop = Population::new(alloc::vec![Subpopulation { mass: 1.0, dist: tri(), cost: c.clone() }]).unwrap();
        let h = hetero_mean_attack(&pop, 1.3).unwrap();
        let m = crate::attack::mean_attack(&c, 1.3).unwrap();
        assert!((h.cost - m.cost).abs() < 1e-15);
    }

    #[test]
    fn median_attack_sums_subpopulations() {
        let pop = |k2: f64| {
            Population::new(alloc::vec![
                Subpopulation { mass: 0.5, dist: tri(), cost: CostModel::fixed_only(1.0).unwrap() },
                Subpopulation { mass: 0.5, dist: tri(), cost: CostModel::fixed_only(k2).unwrap() },
            ])
            .unwrap()
        };
        let plan = hetero_median_attack(&pop(2.0), 0.5).unwrap();
        assert!((plan.cost - 0.5625).abs() < 1e-12);
        let plan = hetero_median_attack(&pop(1.0), 0.5).unwrap();
        assert!((plan.cost - 0.375).abs() < 1e-12);
        for t in &plan.transports {
            let g: PriceDist = t.induced_grid(DEFAULT_GRID_N).unwrap().into();
            assert!(g.is_symmetric(0.5, 1e-6));
        }
    }

    #[test]
    fn rejects_asymmetric_population() {
        let u = |lo, hi| -> PriceDist { ParametricDist::uniform(lo, hi).unwrap().into() };
        let c = CostModel::quadratic(0.0, 1.0).unwrap();
        let r = Population::new(alloc::vec![
            Subpopulation { mass: 0.5, dist: u(-1.0, 0.0), cost: c.clone() },
            Subpopulation { mass: 0.5, dist: u(0.0, 2.0), cost: c },
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn witness_search() {
        let (_, mix) = &doubly_symmetric_battery(2, None)[0];
        let w = find_witness(mix, WITNESS_TOL).unwrap();
        assert_eq!(w.pairing, alloc::vec![1, 0]);
        assert!((w.center + 1.5).abs() < 1e-12);
        let same = Mixture::new(alloc::vec![(0.5, tri()), (0.5, tri())]).unwrap();
        assert_eq!(find_witness(&same, WITNESS_TOL).unwrap().pairing, alloc::vec![0, 1]);
    }

    #[test]
    fn battery_members_have_witnesses() {
        for n in 1..=4 {
            for (x, mix) in doubly_symmetric_battery(n, None) {
                let w = find_witness(&mix, WITNESS_TOL).unwrap_or_else(|| panic!("n={n} x={x}"));
                assert!((w.center - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubly_symmetric_probes() {
        assert!(doubly_symmetric_probe(&BenchmarkSpec::MedianOfMedians, 1e-9).unwrap());
        assert!(doubly_symmetric_probe(&BenchmarkSpec::MeanOfMedians, 1e-9).unwrap());
        assert!(doubly_symmetric_probe(&BenchmarkSpec::WeightedMean(alloc::vec![2.0 / 3.0, 4.0 / 3.0]), 1e-9).unwrap());
        assert!(doubly_symmetric_probe(&BenchmarkSpec::WeightedMean(alloc::vec![1.0, 1.0, 3.0]), 1e-9).unwrap());
        let q9 = BenchmarkSpec::Pooled(alloc::boxed::Box::new(BenchmarkSpec::Quantile(0.9)));
        assert!(!doubly_symmetric_probe(&q9, 1e-6).unwrap());
        assert!(doubly_symmetric_probe(&BenchmarkSpec::Mean, 1e-9).is_err());
    }

    #[test]
    fn three_uniform_split() {
        let r = split_uniform_example().unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(r.medians.iter().zip([-0.3, 0.6, 0.9]).all(|(a, b)| close(*a, b)));
        assert!(close(r.masses[0], 0.7) && close(r.masses[1], 0.2) && close(r.masses[2], 0.1));
        // 0.6 is the rounded midpoint of [0.4, 0.8]
        assert!((r.median_of_medians - 0.6).abs() <= 2.0 * f64::EPSILON);
        assert!(close(r.mean_of_medians, 0.4));
        assert!(r.mass_weighted_mean_of_medians.abs() < 1e-12);
        assert!(r.mean_of_medians_discrepancy);
        assert!(r.symmetric_values.iter().all(|(_, v)| v.abs() < 1e-9), "{:?}", r.symmetric_values);
        assert!(r.witness.is_none());
    }

    #[test]
    fn proportional_costs() {
        let pop = two_quadratics();
        let b = costs_proportional(&pop).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-15 && (b[1] - 2.0).abs() < 1e-12);
    }
}
