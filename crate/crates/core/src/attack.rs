//! Closed-form cheapest manipulations: uniform-shift plans for the mean and
//! trimmed means, the fixed-cost median attack and its symmetric transport,
//! and the trimming level that maximizes the attack cost.

use alloc::format;
use alloc::vec::Vec;

use crate::bench::{evaluate, symmetric_benchmarks, BenchmarkSpec};
use crate::cost::{CostModel, DeltaMin};
use crate::dist::{AtomDist, GridDist, ParametricDist, Peakedness, PriceDist, MASS_EPS};
use crate::error::{invalid, unsupported, Error, Result};
use crate::numeric::{bisect, integrate_piecewise};

/// Iterations of the bisection on the trimmed-mean first-order condition.
pub const FOC_ITERS: usize = 200;

/// Lower end of the first-order-condition bracket, relative to `delta_min`.
pub const FOC_EPS: f64 = 1e-9;

/// Quadrature tolerance used by the median transport.
const QUAD_TOL: f64 = 1e-13;

/// Which part of the distribution a uniform shift moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassSelector {
    /// The highest prices (used for upward targets).
    Top,
    /// The lowest prices (mirror image, used for downward targets).
    Bottom,
}

/// Move a mass `mass` of prices by the same amount `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformShiftPlan {
    pub benchmark: BenchmarkSpec,
    pub target: f64,
    /// Signed shift applied to every moved price.
    pub delta: f64,
    /// Moved mass, in `(0, 1]`.
    pub mass: f64,
    pub selector: MassSelector,
    pub cost: f64,
    /// Benchmark value after applying the plan to a point mass at zero.
    pub achieved: f64,
}

impl UniformShiftPlan {
    fn new(benchmark: BenchmarkSpec, target: f64, delta: f64, mass: f64, cost: f64) -> Result<Self> {
        let selector = if delta >= 0.0 { MassSelector::Top } else { MassSelector::Bottom };
        let mut plan = UniformShiftPlan { benchmark, target, delta, mass, selector, cost, achieved: f64::NAN };
        let point = PriceDist::from(ParametricDist::Degenerate { at: 0.0 });
        plan.achieved = evaluate(&plan.benchmark, &plan.final_distribution(&point, 2)?)?;
        Ok(plan)
    }

    /// Final prices after applying the plan to `base`.
    ///
    /// Moving all mass shifts `base` exactly; a point mass splits into two
    /// atoms; anything else is first cut into `n_atoms` equal-mass atoms and
    /// the boundary atom is split fractionally.
    pub fn final_distribution(&self, base: &PriceDist, n_atoms: usize) -> Result<PriceDist> {
        if self.mass >= 1.0 {
            return Ok(base.shifted(self.delta));
        }
        if let PriceDist::Parametric(ParametricDist::Degenerate { at }) = base {
            let atoms = alloc::vec![(*at, 1.0 - self.mass), (at + self.delta, self.mass)];
            return Ok(AtomDist::from_unnormalized(atoms).into());
        }
        let src = base.to_atoms(n_atoms)?;
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(src.len() + 1);
        let mut left = self.mass;
        let mut take = |(p, m): (f64, f64), out: &mut Vec<(f64, f64)>| {
            // snap float residue so whole atoms are not split by rounding
            let moved = if left <= MASS_EPS {
                0.0
            } else if left >= m - MASS_EPS {
                m
            } else {
                left
            };
            left = (left - moved).max(0.0);
            if moved > 0.0 {
                out.push((p + self.delta, moved));
            }
            if m - moved > 0.0 {
                out.push((p, m - moved));
            }
        };
        match self.selector {
            MassSelector::Top => {
                let (pos, mass) = (src.positions(), src.masses());
                (0..src.len()).rev().for_each(|i| take((pos[i], mass[i]), &mut out))
            }
            MassSelector::Bottom => src.iter().for_each(|a| take(a, &mut out)),
        }
        Ok(AtomDist::from_unnormalized(out).into())
    }
}

/// Outcome of the symmetry check on a final distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryCertificate {
    pub center: f64,
    pub symmetric: bool,
    /// Each symmetric benchmark's value on the final distribution.
    pub values: Vec<(BenchmarkSpec, f64)>,
    pub max_deviation: f64,
}

impl SymmetryCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.symmetric && self.max_deviation <= tol
    }
}

/// Checks that `dist` is symmetric about `center` and that every symmetric
/// benchmark of the library evaluates to `center`.
pub fn symmetry_certificate(dist: &PriceDist, center: f64, tol: f64) -> Result<SymmetryCertificate> {
    let symmetric = dist.is_symmetric(center, tol);
    let mut values = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for spec in symmetric_benchmarks() {
        let v = evaluate(&spec, dist)?;
        max_deviation = max_deviation.max((v - center).abs());
        values.push((spec, v));
    }
    Ok(SymmetryCertificate { center, symmetric, values, max_deviation })
}

fn require_convex(m: &CostModel, op: &'static str) -> Result<()> {
    if !m.variable().is_strictly_convex() {
        return Err(unsupported(op, "variable cost must be strictly convex"));
    }
    Ok(())
}

/// Cheapest way to move the mean to `target`.
///
/// Negative targets are solved for `|target|` and mirrored. With no variable
/// cost the infimum `0` is approached by ever larger shifts of ever less mass
/// and [`Error::Unattained`] is returned.
pub fn mean_attack(m: &CostModel, target: f64) -> Result<UniformShiftPlan> {
    mean_plan(m, target, BenchmarkSpec::Mean)
}

fn mean_plan(m: &CostModel, target: f64, label: BenchmarkSpec) -> Result<UniformShiftPlan> {
    if !target.is_finite() {
        return Err(invalid("target", "must be finite"));
    }
    if target == 0.0 {
        return Err(Error::TrivialTarget { target });
    }
    if !m.variable().is_zero() {
        require_convex(m, "mean_attack")?;
    }
    let p = target.abs();
    let (delta, mass) = match m.delta_min() {
        DeltaMin::Infinite => return Err(Error::Unattained { infimum: 0.0 }),
        DeltaMin::Finite(d) if d <= p => (p, 1.0),
        DeltaMin::Finite(d) => (d, p / d),
    };
    let cost = mass * m.move_cost(delta);
    UniformShiftPlan::new(label, target, delta.copysign(target), mass, cost)
}

/// Cost of moving the median to `target` when manipulation has only the fixed cost `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianCost {
    pub cost: f64,
    pub moved_mass: f64,
}

/// Mass strictly below `x` (the left limit of the CDF).
fn mass_strictly_below(dist: &PriceDist, x: f64) -> f64 {
    match dist {
        PriceDist::Atoms(a) => a.mass_below(x),
        PriceDist::Parametric(ParametricDist::Degenerate { at }) => {
            if *at < x {
                1.0
            } else {
                0.0
            }
        }
        _ => dist.cdf(x),
    }
}

/// `k * (F(P-) - 1/2)`: raise just enough mass from below `target` to leave half below it.
pub fn median_attack_cost(k: f64, dist: &PriceDist, target: f64) -> Result<MedianCost> {
    if !(k.is_finite() && k > 0.0) {
        return Err(invalid("fixed cost", "need k > 0"));
    }
    if target <= crate::bench::median(dist) {
        return Err(Error::TrivialTarget { target });
    }
    let moved_mass = mass_strictly_below(dist, target) - 0.5;
    if moved_mass <= 0.0 {
        return Err(Error::TrivialTarget { target });
    }
    Ok(MedianCost { cost: k * moved_mass, moved_mass })
}

/// Transport that raises the median of a strictly single-peaked density `f`,
/// symmetric about zero, to `P` while leaving a final density symmetric about `P`.
///
/// A price `y < P` stays put with probability `alpha(y) = g(y) / f(y)`, where
/// `g(y) = (f(y) + f(y - 2P)) / 2`; otherwise it is moved to `[P, inf)` with
/// density `(g(x) - f(x)) / A(y)`. Prices at or above `P` are untouched.
#[derive(Debug, Clone)]
pub struct MedianTransport {
    dist: PriceDist,
    target: f64,
    /// `int_P^inf (f(z - 2P) - f(z)) / 2 dz`, by quadrature.
    spread_mass: f64,
    /// `int_{-inf}^P (1 - alpha(y)) f(y) dy`, by quadrature.
    moved_mass: f64,
    breaks: Vec<f64>,
}

impl MedianTransport {
    fn f(&self, x: f64) -> f64 {
        self.dist.density(x).unwrap_or(0.0)
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// `(f(x) + f(x - 2P)) / 2`
    pub fn g_tilde(&self, x: f64) -> f64 {
        0.5 * (self.f(x) + self.f(x - 2.0 * self.target))
    }

    /// Share of the mass at `y < P` left in place.
    pub fn retention(&self, y: f64) -> f64 {
        let f = self.f(y);
        if y >= self.target || f <= 0.0 {
            1.0
        } else {
            self.g_tilde(y) / f
        }
    }

    /// Normalizer `A(y)` of the spread density; `None` where nothing is moved.
    pub fn spread_normalizer(&self, y: f64) -> Option<f64> {
        let a = self.retention(y);
        (a < 1.0).then(|| self.spread_mass / (1.0 - a))
    }

    /// Density at `x >= P` of the destination of a price moved from `y < P`.
    pub fn spread_density(&self, x: f64, y: f64) -> f64 {
        match self.spread_normalizer(y) {
            Some(a) if x >= self.target => (self.g_tilde(x) - self.f(x)) / a,
            _ => 0.0,
        }
    }

    /// Total mass moved.
    pub fn moved_mass(&self) -> f64 {
        self.moved_mass
    }

    /// Final density assembled from the transport: retained mass below `P`,
    /// untouched mass plus the inflow at and above `P`.
    pub fn induced_density(&self, x: f64) -> f64 {
        if x < self.target {
            self.retention(x) * self.f(x)
        } else {
            // inflow = int (g - f)(x) (1 - alpha(y)) f(y) / D dy
            self.f(x) + (self.g_tilde(x) - self.f(x)) * self.moved_mass / self.spread_mass
        }
    }

    /// The induced density on `n` cells of `[lo, hi + 2P]`, sampled at cell midpoints.
    pub fn induced_grid(&self, n: usize) -> Result<GridDist> {
        let (lo, hi) = self.dist.support();
        GridDist::from_fn(lo, hi + 2.0 * self.target, n, |x| self.induced_density(x))
    }
}

/// Builds the symmetric median transport for `dist` and target `target`.
pub fn median_symmetric_construction(dist: &PriceDist, target: f64) -> Result<MedianTransport> {
    const OP: &str = "median_symmetric_construction";
    match dist.peakedness() {
        Peakedness::Strict => {}
        Peakedness::Weak => return Err(unsupported(OP, "density is only weakly single-peaked")),
        Peakedness::NotSinglePeaked => return Err(unsupported(OP, "density is not single-peaked")),
        Peakedness::NoDensity => return Err(unsupported(OP, "distribution has no density")),
    }
    if !dist.is_symmetric(0.0, 1e-9) {
        return Err(unsupported(OP, "density must be symmetric about zero"));
    }
    let (lo, hi) = dist.support();
    if !(target > 0.0 && target < hi) {
        return Err(invalid("target", format!("{target} outside the support interior (0, {hi})")));
    }
    let shift = 2.0 * target;
    let mut breaks = alloc::vec![lo, 0.0, hi, lo + shift, shift, hi + shift, target];
    if let PriceDist::Grid(g) = dist {
        breaks.extend((0..g.n()).map(|i| g.midpoint(i)));
        breaks.extend((0..g.n()).map(|i| g.midpoint(i) + shift));
    }
    let mut t = MedianTransport { dist: dist.clone(), target, spread_mass: 0.0, moved_mass: 0.0, breaks };
    t.moved_mass =
        integrate_piecewise(|y| (1.0 - t.retention(y)) * t.f(y), lo, target, &t.breaks, QUAD_TOL);
    t.spread_mass = integrate_piecewise(
        |z| 0.5 * (t.f(z - shift) - t.f(z)),
        target,
        hi + shift,
        &t.breaks,
        QUAD_TOL,
    );
    if !(t.spread_mass > 0.0 && t.moved_mass > 0.0) {
        return Err(unsupported(OP, "no mass to move"));
    }
    Ok(t)
}

/// Cheapest uniform-shift attack on the `tau`-trimmed mean of prices all at zero.
///
/// Solves `min_{delta >= P} P (1 - 2 tau) (k + c(delta)) / delta + tau (k + c(delta))`:
/// the interior minimizer is the sign change of the derivative on
/// `(0, delta_min)`, found by bisection, and the plan raises
/// `tau + (1 - 2 tau) P / delta` of the mass by `delta = max(P, delta*)`.
pub fn trimmed_attack(m: &CostModel, tau: f64, target: f64) -> Result<UniformShiftPlan> {
    if !(0.0..0.5).contains(&tau) {
        return Err(invalid("trimming level", format!("tau = {tau} outside [0, 0.5)")));
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(invalid("target", "need P > 0"));
    }
    require_convex(m, "trimmed_attack")?;
    if tau == 0.0 {
        return mean_plan(m, target, BenchmarkSpec::TrimmedMean(0.0));
    }
    let p = target;
    let delta = match m.delta_min() {
        DeltaMin::Finite(d) if d > p => {
            let foc = |x: f64| {
                let avg = (m.k() + m.variable_cost(x)) / x;
                -p * (1.0 - 2.0 * tau) * (avg - m.marginal_cost(x)) / x + tau * m.marginal_cost(x)
            };
            let root = bisect(foc, FOC_EPS * d, d, FOC_ITERS)
                .ok_or_else(|| unsupported("trimmed_attack", "first-order condition has no sign change"))?;
            root.mid().max(p)
        }
        _ => p,
    };
    let mass = tau + (1.0 - 2.0 * tau) * p / delta;
    debug_assert!(mass > tau && mass <= 1.0 - tau + 1e-12);
    let cost = mass * m.move_cost(delta);
    UniformShiftPlan::new(BenchmarkSpec::TrimmedMean(tau), target, delta, mass, cost)
}

/// Trimming level `(1 - c'(2P) / cbar(2P)) / 2` that maximizes the cheapest
/// attack cost on prices all at zero.
///
/// Requires `delta_min >= 2P`; at equality the answer is `0` (the mean).
pub fn optimal_tau(m: &CostModel, target: f64) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(invalid("target", "need P > 0"));
    }
    require_convex(m, "optimal_tau")?;
    let p = target;
    let two_p = 2.0 * p;
    let d = match m.delta_min() {
        DeltaMin::Infinite => {
            return Err(Error::HypothesesUnmet("no variable cost: the median is optimal (P2_median)".into()))
        }
        DeltaMin::Finite(d) => d,
    };
    if d <= p {
        return Err(Error::HypothesesUnmet(format!(
            "delta_min = {d} <= P = {p}: the untrimmed mean is optimal (P3)"
        )));
    }
    if d < two_p * (1.0 - 1e-12) {
        return Err(Error::HypothesesUnmet(format!(
            "delta_min = {d} in (P, 2P): the untrimmed mean dominates every trimmed mean (P5)"
        )));
    }
    let avg = (m.k() + m.variable_cost(two_p)) / two_p;
    let tau = ((avg - m.marginal_cost(two_p)) / (2.0 * avg)).max(0.0);
    if tau > 0.0 {
        let plan = trimmed_attack(m, tau, p)?;
        if (plan.delta - two_p).abs() > 1e-6 * two_p || (plan.mass - 0.5).abs() > 1e-6 {
            return Err(unsupported(
                "optimal_tau",
                format!("attack at tau* moves {} by {}, expected 1/2 by 2P", plan.mass, plan.delta),
            ));
        }
    }
    Ok(tau)
}

/// One row of [`attack_cost_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub tau: f64,
    pub delta: f64,
    pub mass: f64,
    pub cost: f64,
}

/// Cheapest attack cost on prices all at zero for each trimming level in `taus`.
pub fn attack_cost_curve(m: &CostModel, target: f64, taus: &[f64]) -> Result<Vec<CurvePoint>> {
    taus.iter()
        .map(|&tau| {
            let plan = trimmed_attack(m, tau, target)?;
            Ok(CurvePoint { tau, delta: plan.delta, mass: plan.mass, cost: plan.cost })
        })
        .collect()
}
