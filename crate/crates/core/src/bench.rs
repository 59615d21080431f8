//! Benchmark statistics over final price distributions.
//!
//! Single-distribution statistics (mean, median, trimmed means, quantiles)
//! and population statistics over a [`Mixture`] of subpopulations
//! (weighted means, median/mean of subpopulation medians, pooled statistics).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::{AtomDist, GridDist, Mixture, ParametricDist, PriceDist, DEFAULT_GRID_N};
use crate::error::{invalid, unsupported, Result};

/// Which statistic aggregates the final prices.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkSpec {
    Mean,
    /// Midpoint of the 0.5-quantile plateau (the plain median when the CDF
    /// crosses 1/2 at a single price).
    Median,
    /// Mean between the `tau` and `1 - tau` quantiles, `tau` in `[0, 1/2]`.
    TrimmedMean(f64),
    /// Plain `q`-quantile; not a symmetric statistic unless `q = 1/2`.
    Quantile(f64),
    /// Population: per-price weights by subpopulation.
    WeightedMean(Vec<f64>),
    /// Population: median of the subpopulation medians.
    MedianOfMedians,
    /// Population: unweighted mean of the subpopulation medians.
    MeanOfMedians,
    /// Population: mass-weighted mean of the subpopulation medians.
    MassWeightedMeanOfMedians,
    /// Population: a single-distribution statistic of the pooled prices.
    Pooled(Box<BenchmarkSpec>),
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BenchmarkSpec::TrimmedMean(t) if !(0.0..=0.5).contains(t) => {
                Err(invalid("trimmed mean", format!("tau = {t} outside [0, 0.5]")))
            }
            BenchmarkSpec::Quantile(q) if !(0.0..=1.0).contains(q) => {
                Err(invalid("quantile benchmark", format!("q = {q} outside [0, 1]")))
            }
            BenchmarkSpec::WeightedMean(w) => {
                if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().all(|x| *x == 0.0) {
                    Err(invalid("weighted mean", "weights must be >= 0 and not all zero"))
                } else {
                    Ok(())
                }
            }
            BenchmarkSpec::Pooled(inner) => {
                if inner.is_population() {
                    Err(invalid("pooled benchmark", "inner statistic must be a single-distribution one"))
                } else {
                    inner.validate()
                }
            }
            _ => Ok(()),
        }
    }

    pub fn is_population(&self) -> bool {
        matches!(
            self,
            BenchmarkSpec::WeightedMean(_)
                | BenchmarkSpec::MedianOfMedians
                | BenchmarkSpec::MeanOfMedians
                | BenchmarkSpec::MassWeightedMeanOfMedians
                | BenchmarkSpec::Pooled(_)
        )
    }

    /// Short stable label, used in reports and CSV rows.
    pub fn label(&self) -> String {
        match self {
            BenchmarkSpec::Mean => "mean".into(),
            BenchmarkSpec::Median => "median".into(),
            BenchmarkSpec::TrimmedMean(t) => format!("trimmed_mean({t})"),
            BenchmarkSpec::Quantile(q) => format!("quantile({q})"),
            BenchmarkSpec::WeightedMean(_) => "weighted_mean".into(),
            BenchmarkSpec::MedianOfMedians => "median_of_medians".into(),
            BenchmarkSpec::MeanOfMedians => "mean_of_medians".into(),
            BenchmarkSpec::MassWeightedMeanOfMedians => "mass_weighted_mean_of_medians".into(),
            BenchmarkSpec::Pooled(inner) => format!("pooled_{}", inner.label()),
        }
    }

    /// Trimming level when the statistic is a member of the trimmed-mean family
    /// (mean is `0`, median is `1/2`).
    pub fn trimming(&self) -> Option<f64> {
        match self {
            BenchmarkSpec::Mean => Some(0.0),
            BenchmarkSpec::Median => Some(0.5),
            BenchmarkSpec::TrimmedMean(t) => Some(*t),
            _ => None,
        }
    }
}

/// The statistics this library treats as symmetric benchmarks on single
/// distributions: the trimmed-mean family at a few levels.
pub fn symmetric_benchmarks() -> Vec<BenchmarkSpec> {
    alloc::vec![
        BenchmarkSpec::Mean,
        BenchmarkSpec::Median,
        BenchmarkSpec::TrimmedMean(0.1),
        BenchmarkSpec::TrimmedMean(0.25),
        BenchmarkSpec::TrimmedMean(0.4),
    ]
}

pub fn median(dist: &PriceDist) -> f64 {
    0.5 * (dist.quantile_unchecked(0.5) + dist.upper_quantile(0.5))
}

pub fn trimmed_mean(dist: &PriceDist, tau: f64) -> f64 {
    if tau == 0.0 {
        return dist.mean();
    }
    if tau == 0.5 {
        return median(dist);
    }
    let (_, moment) = dist.window_moment(tau, 1.0 - tau);
    moment / (1.0 - 2.0 * tau)
}

/// Evaluates a single-distribution statistic.
pub fn evaluate(spec: &BenchmarkSpec, dist: &PriceDist) -> Result<f64> {
    spec.validate()?;
    match spec {
        BenchmarkSpec::Mean => Ok(dist.mean()),
        BenchmarkSpec::Median => Ok(median(dist)),
        BenchmarkSpec::TrimmedMean(t) => Ok(trimmed_mean(dist, *t)),
        BenchmarkSpec::Quantile(q) => dist.quantile(*q),
        _ => Err(unsupported("evaluate", format!("{} needs a population", spec.label()))),
    }
}

/// Evaluates a population statistic on the final subpopulations.
pub fn evaluate_population(spec: &BenchmarkSpec, pop: &Mixture) -> Result<f64> {
    spec.validate()?;
    let medians = || pop.components().iter().map(|(_, d)| median(d)).collect::<Vec<f64>>();
    match spec {
        BenchmarkSpec::WeightedMean(w) => {
            if w.len() != pop.len() {
                return Err(invalid(
                    "weighted mean",
                    format!("{} weights for {} subpopulations", w.len(), pop.len()),
                ));
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for ((mu, d), wi) in pop.components().iter().zip(w) {
                num += mu * wi * d.mean();
                den += mu * wi;
            }
            Ok(num / den)
        }
        BenchmarkSpec::MedianOfMedians => {
            let mut m = medians();
            m.sort_by(f64::total_cmp);
            let n = m.len();
            Ok(if n % 2 == 1 { m[n / 2] } else { 0.5 * (m[n / 2 - 1] + m[n / 2]) })
        }
        BenchmarkSpec::MeanOfMedians => {
            let m = medians();
            Ok(m.iter().sum::<f64>() / m.len() as f64)
        }
        BenchmarkSpec::MassWeightedMeanOfMedians => {
            Ok(pop.components().iter().map(|(mu, d)| mu * median(d)).sum())
        }
        BenchmarkSpec::Pooled(inner) => evaluate(inner, &pop.pooled(DEFAULT_GRID_N)?),
        _ => Err(unsupported("evaluate_population", format!("{} is a single-distribution statistic", spec.label()))),
    }
}

/// Deterministic battery of distributions symmetric around known centers.
///
/// `trials` controls how many (center, scale) pairs each family is tried at.
pub fn symmetric_battery(trials: usize) -> Vec<(f64, PriceDist)> {
    let mut out = Vec::new();
    let trials = trials.max(1);
    for j in 0..trials {
        let c = -3.0 + 6.0 * (j as f64 + 0.5) / trials as f64;
        let s = 0.25 + 1.75 * ((j * 7 % trials) as f64 + 0.5) / trials as f64;
        let push = |out: &mut Vec<(f64, PriceDist)>, d: PriceDist| out.push((c, d));
        if let Ok(u) = ParametricDist::uniform(c - s, c + s) {
            push(&mut out, u.into());
        }
        if let Ok(t) = ParametricDist::triangular(c, s) {
            push(&mut out, t.into());
            if let Ok(g) = PriceDist::from(t).to_grid(2001) {
                push(&mut out, g.into());
            }
        }
        if let Ok(g) = ParametricDist::truncated_gaussian(c, 0.4 * s, s) {
            push(&mut out, g.into());
            if let Ok(a) = PriceDist::from(g).to_atoms(501) {
                push(&mut out, a.into());
            }
        }
        if let Ok(a) = AtomDist::new(alloc::vec![(c - s, 0.5), (c + s, 0.5)]) {
            push(&mut out, a.into());
        }
        if let Ok(a) = AtomDist::new(alloc::vec![(c - s, 0.25), (c, 0.5), (c + s, 0.25)]) {
            push(&mut out, a.into());
        }
        if let Ok(a) = AtomDist::new(alloc::vec![(c - s, 0.3), (c - 0.5 * s, 0.2), (c + 0.5 * s, 0.2), (c + s, 0.3)]) {
            push(&mut out, a.into());
        }
        if let Ok(g) = GridDist::new(c - s, c + s, alloc::vec![1.0, 3.0, 0.0, 3.0, 1.0]) {
            push(&mut out, g.into());
        }
    }
    out
}

/// True iff `spec` returns the center of every member of [`symmetric_battery`].
pub fn symmetric_benchmark_probe(spec: &BenchmarkSpec, trials: usize, tol: f64) -> Result<bool> {
    if spec.is_population() {
        return Err(unsupported("symmetric_benchmark_probe", "population statistic"));
    }
    for (center, d) in symmetric_battery(trials) {
        if (evaluate(spec, &d)? - center).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
