//! Brute-force minimum-cost manipulation over equal-mass atoms.
//!
//! The search never uses the closed forms: it enumerates structured plan
//! families (top, bottom and contiguous-window uniform shifts, two-level
//! shifts, and for the median the minimal atom count), finds the smallest
//! shift that reaches the target by grid bracketing plus bisection, and
//! re-evaluates every candidate with [`crate::bench`].
//!
//! Work is split into independent [`Job`]s so callers can evaluate them in
//! any order or in parallel; [`reduce`] picks the winner with a total order
//! (cost, then shift, then moved atoms, then job index), so the result does not
//! depend on evaluation order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::attack::{
    attack_cost_curve, mean_attack, median_attack_cost, median_symmetric_construction, optimal_tau,
    symmetry_certificate, trimmed_attack,
};
use crate::bench::{evaluate, evaluate_population, BenchmarkSpec};
use crate::cost::{CostModel, DeltaMin};
use crate::dist::{AtomDist, Peakedness, PriceDist, ParametricDist, DEFAULT_GRID_N};
use crate::error::{invalid, unsupported, Error, Result};
use crate::hetero::{hetero_mean_attack, hetero_median_attack, perturbation_check, shift_cost, Population};
use crate::numeric::golden_section;

/// Resolution of the brute-force search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Equal-mass atoms the distribution is cut into.
    pub n_atoms: usize,
    /// Points of the shift grid over `(0, 4 max(P, delta_min)]`.
    pub delta_grid: usize,
    /// Step, in atoms, between the moved counts that are tried.
    pub mass_step: usize,
    /// Bisection steps after the grid bracket.
    pub refine_iters: usize,
    /// Largest accepted `|benchmark - P|`.
    pub tol: f64,
    /// Start positions tried by the contiguous-window family.
    pub window_starts: usize,
    /// Levels per axis of the two-level family (moved count, split, shift ratio).
    pub two_level_grid: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_atoms: 2000,
            delta_grid: 4000,
            mass_step: 1,
            refine_iters: 60,
            tol: 1e-4,
            window_starts: 8,
            two_level_grid: 12,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 2 || self.delta_grid < 2 || self.two_level_grid < 2 || self.window_starts < 2 {
            return Err(invalid("search config", "resolutions must be >= 2"));
        }
        if self.mass_step == 0 || self.mass_step >= self.n_atoms {
            return Err(invalid("search config", "mass_step must be in [1, n_atoms)"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid("search config", "tol must be positive"));
        }
        Ok(())
    }
}

/// Plan family a candidate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Top,
    Bottom,
    Window,
    TwoLevel,
    MedianCount,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Top => "top",
            Family::Bottom => "bottom",
            Family::Window => "window",
            Family::TwoLevel => "two_level",
            Family::MedianCount => "median_count",
        }
    }
}

/// One structured plan shape; the shift is searched by [`Problem::run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Job {
    /// Raise the `count` highest atoms.
    Top { count: usize },
    /// Raise the `count` lowest atoms.
    Bottom { count: usize },
    /// Raise atoms `start..start + count`.
    Window { start: usize, count: usize },
    /// Raise the `upper` highest atoms by `delta` and the next `count - upper` by `ratio * delta`.
    TwoLevel { count: usize, upper: usize, ratio: f64 },
    /// Move the fewest atoms from just below `P` to `P`.
    MedianCount,
}

impl Job {
    pub fn family(&self) -> Family {
        match self {
            Job::Top { .. } => Family::Top,
            Job::Bottom { .. } => Family::Bottom,
            Job::Window { .. } => Family::Window,
            Job::TwoLevel { .. } => Family::TwoLevel,
            Job::MedianCount => Family::MedianCount,
        }
    }
}

/// Result of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub job: Job,
    /// Largest shift applied.
    pub delta: f64,
    pub moved: usize,
    pub cost: f64,
    pub achieved: f64,
}

fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then(a.delta.total_cmp(&b.delta))
        .then(a.moved.cmp(&b.moved))
        .then(a.index.cmp(&b.index))
}

/// Deterministic minimum over candidates.
pub fn reduce<I: IntoIterator<Item = Candidate>>(cands: I) -> Option<Candidate> {
    cands.into_iter().min_by(candidate_order)
}

/// A discretized plan: where each equal-mass source atom ends up.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteManipulation {
    pub sources: AtomDist,
    /// Destination of source atom `i` (equal to its position when untouched).
    pub destinations: Vec<f64>,
    /// `sum_i mass_i (c(dest_i - src_i) + k [dest_i != src_i])`.
    pub cost: f64,
    pub achieved: f64,
    pub family: Family,
    pub delta: f64,
    pub moved: usize,
}

impl DiscreteManipulation {
    pub fn moved_mass(&self) -> f64 {
        self.moved as f64 / self.sources.len() as f64
    }

    pub fn final_distribution(&self) -> Result<AtomDist> {
        AtomDist::equal_mass(self.destinations.clone())
    }
}

/// Cost of moving equal-mass atoms from `src` to `dest`.
pub fn transport_cost(m: &CostModel, src: &AtomDist, dest: &[f64]) -> f64 {
    src.iter().zip(dest).map(|((p, w), d)| w * m.move_cost(d - p)).sum()
}

/// A discretized search instance. Targets below the unmanipulated benchmark
/// are solved on the mirrored atoms and mirrored back.
#[derive(Debug, Clone)]
pub struct Problem {
    original: AtomDist,
    /// Sorted working positions (mirrored when the target is below the base value).
    x: Vec<f64>,
    mirrored: bool,
    cost: CostModel,
    spec: BenchmarkSpec,
    /// Target in working orientation.
    target: f64,
    cfg: SearchConfig,
    grid_step: f64,
}

impl Problem {
    pub fn new(dist: &PriceDist, cost: &CostModel, spec: &BenchmarkSpec, target: f64, cfg: &SearchConfig) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;
        if !matches!(spec, BenchmarkSpec::Mean | BenchmarkSpec::Median | BenchmarkSpec::TrimmedMean(_)) {
            return Err(unsupported("min_cost_attack", format!("{} is not searched", spec.label())));
        }
        if !target.is_finite() {
            return Err(invalid("target", "must be finite"));
        }
        let original = dist.to_atoms(cfg.n_atoms)?;
        let mut p = Problem {
            x: original.positions().to_vec(),
            original,
            mirrored: false,
            cost: cost.clone(),
            spec: spec.clone(),
            target,
            cfg: cfg.clone(),
            grid_step: 0.0,
        };
        let base = p.value(&p.x);
        if (base - target).abs() <= cfg.tol {
            return Err(Error::TrivialTarget { target });
        }
        if target < base {
            p.mirrored = true;
            p.x = p.x.iter().rev().map(|v| -v).collect();
            p.target = -target;
        }
        let span = match cost.delta_min() {
            DeltaMin::Finite(d) => p.target_gap().max(d),
            DeltaMin::Infinite => p.target_gap(),
        };
        p.grid_step = 4.0 * span / cfg.delta_grid as f64;
        Ok(p)
    }

    /// Distance from the lowest atom to the target; also scales the shift grid.
    fn target_gap(&self) -> f64 {
        (self.target - self.x[0]).max(self.target.abs()).max(f64::MIN_POSITIVE)
    }

    /// Benchmark of equal-mass atoms at `pos`; the median reads the upper
    /// median so that a half of the mass sitting at `P` counts as reaching `P`.
    fn value(&self, pos: &[f64]) -> f64 {
        let Ok(a) = AtomDist::equal_mass(pos.to_vec()) else {
            return f64::NAN;
        };
        match self.spec {
            BenchmarkSpec::Median => a.upper_quantile(0.5),
            _ => evaluate(&self.spec, &a.into()).unwrap_or(f64::NAN),
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// All jobs, in the order that defines their tie-breaking index.
    ///
    /// Windows and bottoms that select the same positions as an earlier job
    /// (possible when atoms coincide) are left out.
    pub fn jobs(&self) -> Vec<Job> {
        let n = self.n();
        let x = &self.x;
        let step = self.cfg.mass_step;
        let mut jobs = Vec::new();
        let counts = || (1..=n).filter(move |c| c % step == 0 || *c == n);
        jobs.extend(counts().map(|count| Job::Top { count }));
        jobs.extend(counts().filter(|&c| c < n && x[0] != x[n - 1]).map(|count| Job::Bottom { count }));
        for s in 1..self.cfg.window_starts {
            let start = n * s / self.cfg.window_starts;
            for count in counts().filter(|&c| start + c < n) {
                let same_as_top = x[start] == x[n - 1];
                let same_as_bottom = x[0] == x[start + count - 1];
                if !same_as_top && !same_as_bottom {
                    jobs.push(Job::Window { start, count });
                }
            }
        }
        let l = self.cfg.two_level_grid;
        for a in 1..=l {
            let count = (n * a / l).max(2);
            for b in 1..l {
                let upper = (count * b / l).clamp(1, count - 1);
                for r in 1..l {
                    jobs.push(Job::TwoLevel { count, upper, ratio: r as f64 / l as f64 });
                }
            }
        }
        if self.spec == BenchmarkSpec::Median {
            jobs.push(Job::MedianCount);
        }
        jobs
    }

    /// Order in which to evaluate jobs so that good bounds appear early:
    /// every 16th job first, then the rest.
    pub fn search_order(len: usize) -> Vec<usize> {
        (0..len).step_by(16).chain((0..len).filter(|i| i % 16 != 0)).collect()
    }

    fn shifted(&self, job: &Job, delta: f64) -> Vec<f64> {
        let n = self.n();
        let mut out = self.x.clone();
        let mut raise = |r: core::ops::Range<usize>, d: f64| out[r].iter_mut().for_each(|v| *v += d);
        match *job {
            Job::Top { count } => raise(n - count..n, delta),
            Job::Bottom { count } => raise(0..count, delta),
            Job::Window { start, count } => raise(start..start + count, delta),
            Job::TwoLevel { count, upper, ratio } => {
                raise(n - upper..n, delta);
                raise(n - count..n - upper, ratio * delta);
            }
            Job::MedianCount => {}
        }
        out
    }

    fn shift_cost(&self, job: &Job, delta: f64) -> f64 {
        let w = 1.0 / self.n() as f64;
        let m = &self.cost;
        match *job {
            Job::Top { count } | Job::Bottom { count } | Job::Window { count, .. } => {
                count as f64 * w * m.move_cost(delta)
            }
            Job::TwoLevel { count, upper, ratio } => {
                upper as f64 * w * m.move_cost(delta) + (count - upper) as f64 * w * m.move_cost(ratio * delta)
            }
            Job::MedianCount => f64::NAN,
        }
    }

    fn moved(job: &Job) -> usize {
        match *job {
            Job::Top { count } | Job::Bottom { count } | Job::Window { count, .. } | Job::TwoLevel { count, .. } => {
                count
            }
            Job::MedianCount => 0,
        }
    }

    /// Cheapest plan of `job` reaching the target, unless it provably costs
    /// more than `bound`. Pruning only drops strictly worse jobs, so any
    /// bound taken from real candidates leaves the overall minimum unchanged.
    pub fn run(&self, index: usize, job: &Job, bound: f64) -> Option<Candidate> {
        if let Job::MedianCount = job {
            return self.run_median_count(index);
        }
        let p = self.target;
        let moved = Self::moved(job);
        if moved as f64 / self.n() as f64 * self.cost.k() > bound {
            return None;
        }
        let g = self.cfg.delta_grid;
        let at = |j: usize| j as f64 * self.grid_step;
        let reaches = |d: f64| self.value(&self.shifted(job, d)) >= p;
        if !reaches(at(g)) {
            return None;
        }
        // smallest grid index reaching the target; index 0 (no shift) does not
        let (mut lo, mut hi) = (0usize, g);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if reaches(at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (mut a, mut b) = (at(lo), at(hi));
        if lo > 0 && self.shift_cost(job, a) > bound {
            return None;
        }
        for _ in 0..self.cfg.refine_iters {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if reaches(mid) {
                b = mid;
            } else {
                a = mid;
            }
        }
        let achieved = self.value(&self.shifted(job, b));
        if (achieved - p).abs() > self.cfg.tol {
            return None;
        }
        Some(Candidate { index, job: *job, delta: b, moved, cost: self.shift_cost(job, b), achieved })
    }

    fn run_median_count(&self, index: usize) -> Option<Candidate> {
        let n = self.n();
        let p = self.target;
        let below = self.x.partition_point(|&v| v < p);
        // at most half of the atoms may stay strictly below the target
        let need = below.saturating_sub(n / 2);
        if need == 0 {
            return None;
        }
        let mut dest = self.x.clone();
        dest[below - need..below].iter_mut().for_each(|v| *v = p);
        let w = 1.0 / n as f64;
        let cost = self.x[below - need..below].iter().map(|v| w * self.cost.move_cost(p - v)).sum();
        let achieved = self.value(&dest);
        if (achieved - p).abs() > self.cfg.tol {
            return None;
        }
        Some(Candidate { index, job: Job::MedianCount, delta: p - self.x[below - need], moved: need, cost, achieved })
    }

    fn destinations(&self, c: &Candidate) -> Vec<f64> {
        let work = match c.job {
            Job::MedianCount => {
                let below = self.x.partition_point(|&v| v < self.target);
                let mut d = self.x.clone();
                d[below - c.moved..below].iter_mut().for_each(|v| *v = self.target);
                d
            }
            job => self.shifted(&job, c.delta),
        };
        if self.mirrored {
            work.iter().rev().map(|v| -v).collect()
        } else {
            work
        }
    }

    /// Turns the winning candidate into a plan on the original atoms.
    pub fn finish(&self, best: Option<Candidate>) -> Result<DiscreteManipulation> {
        let c = best.ok_or_else(|| {
            Error::Infeasible(format!(
                "{} cannot reach {} within tol {} on {} atoms",
                self.spec.label(),
                if self.mirrored { -self.target } else { self.target },
                self.cfg.tol,
                self.n()
            ))
        })?;
        let destinations = self.destinations(&c);
        let cost = transport_cost(&self.cost, &self.original, &destinations);
        let sign = if self.mirrored { -1.0 } else { 1.0 };
        Ok(DiscreteManipulation {
            sources: self.original.clone(),
            destinations,
            cost,
            achieved: sign * c.achieved,
            family: c.job.family(),
            delta: sign * c.delta,
            moved: c.moved,
        })
    }
}

/// Serial brute-force search for the cheapest plan moving `spec` to `target`.
pub fn min_cost_attack(
    dist: &PriceDist,
    cost: &CostModel,
    spec: &BenchmarkSpec,
    target: f64,
    cfg: &SearchConfig,
) -> Result<DiscreteManipulation> {
    let problem = Problem::new(dist, cost, spec, target, cfg)?;
    let jobs = problem.jobs();
    let mut best: Option<Candidate> = None;
    for i in Problem::search_order(jobs.len()) {
        let bound = best.as_ref().map_or(f64::INFINITY, |c| c.cost);
        if let Some(c) = problem.run(i, &jobs[i], bound) {
            best = reduce(best.into_iter().chain(core::iter::once(c)));
        }
    }
    problem.finish(best)
}

/// Result of the grid search over per-subpopulation shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSearch {
    pub deltas: Vec<f64>,
    pub cost: f64,
    pub achieved: f64,
}

/// Cheapest per-subpopulation shifts moving the weighted mean with `weights` to `target`.
///
/// The first `I - 1` shifts run over a grid (refined coordinate-wise by
/// golden section); the last is solved from the weighted-mean constraint.
pub fn hetero_shift_oracle(pop: &Population, weights: &[f64], target: f64, cfg: &SearchConfig) -> Result<ShiftSearch> {
    cfg.validate()?;
    let n = pop.len();
    if weights.len() != n {
        return Err(invalid("weights", "one weight per subpopulation"));
    }
    let mw: Vec<f64> = pop.subpops().iter().zip(weights).map(|(s, w)| s.mass * w).collect();
    if mw[n - 1] <= 0.0 {
        return Err(unsupported("hetero_shift_oracle", "last subpopulation must carry weight"));
    }
    let spec = BenchmarkSpec::WeightedMean(weights.to_vec());
    let base = evaluate_population(&spec, pop.mixture())?;
    let need = (target - base) * mw.iter().sum::<f64>();
    let complete = |free: &[f64]| -> Vec<f64> {
        let used: f64 = free.iter().zip(&mw).map(|(d, w)| d * w).sum();
        let mut d = free.to_vec();
        d.push((need - used) / mw[n - 1]);
        d
    };
    let cost_of = |free: &[f64]| shift_cost(pop, &complete(free));
    let dims = n - 1;
    let span = 4.0 * target.abs().max(f64::MIN_POSITIVE);
    let mut free = alloc::vec![0.0; dims];
    if dims > 0 {
        let per_axis = (libm::floor(libm::pow(cfg.delta_grid as f64, 1.0 / dims as f64)) as usize).max(2);
        let level = |i: usize| -span + 2.0 * span * i as f64 / (per_axis - 1) as f64;
        let mut best = f64::INFINITY;
        let mut idx = alloc::vec![0usize; dims];
        loop {
            let cand: Vec<f64> = idx.iter().map(|&i| level(i)).collect();
            let c = cost_of(&cand);
            if c < best {
                best = c;
                free = cand;
            }
            let mut k = 0;
            while k < dims {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dims {
                break;
            }
        }
        let h = 2.0 * span / (per_axis - 1) as f64;
        for _ in 0..cfg.refine_iters.min(8) {
            for k in 0..dims {
                let base = free.clone();
                let x = golden_section(
                    |v| {
                        let mut probe = base.clone();
                        probe[k] = v;
                        cost_of(&probe)
                    },
                    free[k] - h,
                    free[k] + h,
                    1e-12 * span,
                );
                free[k] = x;
            }
        }
    }
    let deltas = complete(&free);
    let cost = shift_cost(pop, &deltas);
    let achieved = evaluate_population(&spec, &pop.shifted(&deltas)?)?;
    if (achieved - target).abs() > cfg.tol {
        return Err(Error::Infeasible(format!("weighted mean reached {achieved}, target {target}")));
    }
    Ok(ShiftSearch { deltas, cost, achieved })
}

/// Cheapest way to move the pooled median to `target` under fixed costs only:
/// atoms below the target are raised to it, cheapest fixed cost first, until
/// at most half of the pooled mass remains below.
pub fn pooled_median_oracle(pop: &Population, target: f64, n_atoms: usize) -> Result<f64> {
    let mut below: Vec<(f64, f64)> = Vec::new();
    let mut mass_below = 0.0;
    for s in pop.subpops() {
        if !s.cost.variable().is_zero() {
            return Err(unsupported("pooled_median_oracle", "variable costs present"));
        }
        let atoms = s.dist.to_atoms(n_atoms)?;
        for (p, w) in atoms.iter() {
            if p < target {
                below.push((s.cost.k(), s.mass * w));
                mass_below += s.mass * w;
            }
        }
    }
    below.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut excess = mass_below - 0.5;
    let mut cost = 0.0;
    for (k, w) in below {
        if excess <= 1e-12 {
            break;
        }
        cost += k * w;
        excess -= w;
    }
    Ok(cost)
}

/// Statement being checked by [`verify_proposition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropId {
    /// Mean under variable cost only.
    P2Mean,
    /// Median under fixed cost only.
    P2Median,
    /// Mean when `delta_min <= P` or `delta_min = 2P`.
    P3,
    /// Optimally trimmed mean with no dispersion and `delta_min > 2P`.
    P4,
    /// Mean dominates every trimmed mean when `delta_min` is in `(P, 2P)`.
    P5,
    /// Weighted mean across subpopulations without fixed costs.
    P6Weighted,
    /// Subpopulation medians without variable costs.
    P6Median,
}

impl PropId {
    pub const ALL: [PropId; 7] =
        [PropId::P2Mean, PropId::P2Median, PropId::P3, PropId::P4, PropId::P5, PropId::P6Weighted, PropId::P6Median];

    pub fn label(self) -> &'static str {
        match self {
            PropId::P2Mean => "P2_mean",
            PropId::P2Median => "P2_median",
            PropId::P3 => "P3",
            PropId::P4 => "P4",
            PropId::P5 => "P5",
            PropId::P6Weighted => "P6_weighted",
            PropId::P6Median => "P6_median",
        }
    }

    pub fn parse(s: &str) -> Option<PropId> {
        PropId::ALL.into_iter().find(|p| p.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    HypothesesUnmet,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::HypothesesUnmet => "hypotheses_unmet",
        }
    }
}

/// Inputs of one verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub dist: PriceDist,
    pub cost: CostModel,
    pub target: f64,
    /// Trimming levels swept by the trimmed-mean checks.
    pub taus: Vec<f64>,
    pub population: Option<Population>,
    pub search: SearchConfig,
    /// Largest accepted gap between the closed form and the oracle.
    pub gap_tol: f64,
    /// Tolerance of the symmetry certificate.
    pub symmetry_tol: f64,
}

impl Scenario {
    pub fn new(id: impl Into<String>, dist: PriceDist, cost: CostModel, target: f64) -> Self {
        Scenario {
            id: id.into(),
            dist,
            cost,
            target,
            taus: Vec::new(),
            population: None,
            search: SearchConfig::default(),
            gap_tol: 1e-3,
            symmetry_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropositionReport {
    pub id: PropId,
    pub scenario_id: String,
    pub closed_form_cost: f64,
    pub oracle_cost: f64,
    pub abs_gap: f64,
    /// `None` when the statement makes no symmetry claim.
    pub symmetry_pass: Option<bool>,
    pub status: Status,
    pub notes: Vec<String>,
}

impl PropositionReport {
    fn unmet(id: PropId, sc: &Scenario, why: String) -> Self {
        PropositionReport {
            id,
            scenario_id: sc.id.clone(),
            closed_form_cost: f64::NAN,
            oracle_cost: f64::NAN,
            abs_gap: f64::NAN,
            symmetry_pass: None,
            status: Status::HypothesesUnmet,
            notes: alloc::vec![why],
        }
    }
}

/// Signature of a brute-force search, so callers can substitute a parallel runner.
pub type Oracle<'a> =
    &'a dyn Fn(&PriceDist, &CostModel, &BenchmarkSpec, f64, &SearchConfig) -> Result<DiscreteManipulation>;

/// Runs the closed form and the serial oracle for `id` on `sc`.
pub fn verify_proposition(id: PropId, sc: &Scenario) -> Result<PropositionReport> {
    verify_proposition_with(id, sc, &min_cost_attack)
}

fn is_point_mass(d: &PriceDist) -> bool {
    match d {
        PriceDist::Parametric(ParametricDist::Degenerate { .. }) => true,
        PriceDist::Atoms(a) => a.positions().first() == a.positions().last(),
        _ => false,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// [`verify_proposition`] with a caller-supplied oracle.
pub fn verify_proposition_with(id: PropId, sc: &Scenario, oracle: Oracle<'_>) -> Result<PropositionReport> {
    let p = sc.target;
    let m = &sc.cost;
    let n = sc.search.n_atoms;
    let mut notes = Vec::new();
    let unmet = |why: String| Ok(PropositionReport::unmet(id, sc, why));
    let (closed, oracle_cost, symmetry_pass, mut extra_ok) = match id {
        PropId::P2Mean | PropId::P3 => {
            if id == PropId::P2Mean && m.k() != 0.0 {
                return unmet(format!("fixed cost k = {} is not zero", m.k()));
            }
            if id == PropId::P3 {
                let ok = match m.delta_min() {
                    DeltaMin::Finite(d) => d <= p.abs() || close(d, 2.0 * p.abs()),
                    DeltaMin::Infinite => false,
                };
                if !ok {
                    return unmet(format!("delta_min = {:?} is neither <= |P| nor = 2|P|", m.delta_min()));
                }
            }
            let plan = match mean_attack(m, p) {
                Err(Error::Unsupported { reason, .. }) => return unmet(reason),
                r => r?,
            };
            let found = oracle(&sc.dist, m, &BenchmarkSpec::Mean, p, &sc.search)?;
            let fin = plan.final_distribution(&sc.dist, n)?;
            let cert = symmetry_certificate(&fin, p, sc.symmetry_tol)?;
            notes.push(format!("delta = {}, Delta = {}, oracle family {}", plan.delta, plan.mass, found.family.label()));
            (plan.cost, found.cost, Some(cert.passes(sc.symmetry_tol)), true)
        }
        PropId::P2Median => {
            if !m.variable().is_zero() {
                return unmet("variable cost is not zero".into());
            }
            if sc.dist.peakedness() != Peakedness::Strict {
                return unmet("density is not strictly single-peaked".into());
            }
            let closed = median_attack_cost(m.k(), &sc.dist, p)?;
            let found = oracle(&sc.dist, m, &BenchmarkSpec::Median, p, &sc.search)?;
            let t = median_symmetric_construction(&sc.dist, p)?;
            let grid: PriceDist = t.induced_grid(DEFAULT_GRID_N)?.into();
            let cert = symmetry_certificate(&grid, p, sc.symmetry_tol)?;
            let moved_gap = (t.moved_mass() - closed.moved_mass).abs();
            notes.push(format!("moved mass {} (transport) vs {} (F(P) - 1/2)", t.moved_mass(), closed.moved_mass));
            (closed.cost, found.cost, Some(cert.passes(sc.symmetry_tol)), moved_gap <= 1e-6)
        }
        PropId::P4 | PropId::P5 => {
            if !is_point_mass(&sc.dist) {
                return unmet("unmanipulated prices are dispersed".into());
            }
            let (closed, oracle_cost, sym, ok) = if id == PropId::P4 {
                let tau = match optimal_tau(m, p) {
                    Err(Error::HypothesesUnmet(why)) => return unmet(why),
                    Err(Error::Unsupported { reason, .. }) => return unmet(reason),
                    r => r?,
                };
                if tau == 0.0 {
                    return unmet("delta_min = 2P: the optimal trimming is the mean (P3)".into());
                }
                let plan = trimmed_attack(m, tau, p)?;
                let found = oracle(&sc.dist, m, &BenchmarkSpec::TrimmedMean(tau), p, &sc.search)?;
                let fin = plan.final_distribution(&sc.dist, n)?;
                let cert = symmetry_certificate(&fin, p, sc.symmetry_tol)?;
                notes.push(format!("tau* = {tau}, delta = {}, Delta = {}", plan.delta, plan.mass));
                let mut ok = true;
                if !sc.taus.is_empty() {
                    let mut costs = Vec::with_capacity(sc.taus.len());
                    for &t in &sc.taus {
                        let cf = trimmed_attack(m, t, p)?.cost;
                        let oc = oracle(&sc.dist, m, &BenchmarkSpec::TrimmedMean(t), p, &sc.search)?.cost;
                        ok &= (cf - oc).abs() <= sc.gap_tol;
                        costs.push((t, oc));
                    }
                    let (t_max, _) = costs.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |acc, c| {
                        if c.1 > acc.1 {
                            c
                        } else {
                            acc
                        }
                    });
                    let below = sc.taus.iter().copied().filter(|t| *t <= tau).fold(f64::NEG_INFINITY, f64::max);
                    let above = sc.taus.iter().copied().filter(|t| *t >= tau).fold(f64::INFINITY, f64::min);
                    let bracketed = t_max == below || t_max == above;
                    notes.push(format!("oracle sweep maximum at tau = {t_max}, tau* = {tau}"));
                    ok &= bracketed;
                }
                (plan.cost, found.cost, Some(cert.passes(sc.symmetry_tol)), ok)
            } else {
                let inside = match m.delta_min() {
                    DeltaMin::Finite(d) => d > p && d < 2.0 * p,
                    DeltaMin::Infinite => false,
                };
                if !inside {
                    return unmet(format!("delta_min = {:?} is not in (P, 2P)", m.delta_min()));
                }
                let taus = if sc.taus.is_empty() { alloc::vec![0.0, 0.1, 0.2, 0.3, 0.4] } else { sc.taus.clone() };
                let curve = attack_cost_curve(m, p, &taus)?;
                let decreasing = curve.windows(2).all(|w| w[1].cost < w[0].cost);
                notes.push(format!("closed-form curve strictly decreasing: {decreasing}"));
                let mut worst = 0.0f64;
                let mut first = f64::NAN;
                for pt in &curve {
                    let oc = oracle(&sc.dist, m, &BenchmarkSpec::TrimmedMean(pt.tau), p, &sc.search)?.cost;
                    if first.is_nan() {
                        first = oc;
                    }
                    worst = worst.max((pt.cost - oc).abs());
                }
                let ok = decreasing && worst <= sc.gap_tol;
                (curve[0].cost, first, None, ok)
            };
            (closed, oracle_cost, sym, ok)
        }
        PropId::P6Weighted => {
            let Some(pop) = &sc.population else {
                return unmet("scenario has no subpopulations".into());
            };
            let plan = match hetero_mean_attack(pop, p) {
                Err(Error::Unsupported { reason, .. }) => return unmet(reason),
                Err(Error::HypothesesUnmet(why)) => return unmet(why),
                r => r?,
            };
            let found = hetero_shift_oracle(pop, &plan.weights, p, &sc.search)?;
            let shifted = pop.shifted(&plan.deltas)?;
            let symmetric = shifted.components().iter().all(|(_, d)| d.is_symmetric(p, sc.symmetry_tol))
                && crate::hetero::find_witness(&shifted, crate::hetero::WITNESS_TOL)
                    .is_some_and(|w| (w.center - p).abs() <= sc.symmetry_tol);
            let stationary = plan.stationarity_residual <= 1e-9;
            let perturbed = perturbation_check(pop, &plan, 1e-3);
            let reached = (plan.achieved - p).abs() <= 1e-9;
            notes.push(format!(
                "weights {:?}, stationarity residual {:e}, perturbation check {perturbed}, oracle shifts {:?}",
                plan.weights, plan.stationarity_residual, found.deltas
            ));
            (plan.cost, found.cost, Some(symmetric), stationary && perturbed && reached)
        }
        PropId::P6Median => {
            let Some(pop) = &sc.population else {
                return unmet("scenario has no subpopulations".into());
            };
            let plan = match hetero_median_attack(pop, p) {
                Err(Error::Unsupported { reason, .. }) => return unmet(reason),
                r => r?,
            };
            let oc = pooled_median_oracle(pop, p, n)?;
            let mut symmetric = true;
            for t in &plan.transports {
                let g: PriceDist = t.induced_grid(DEFAULT_GRID_N)?.into();
                symmetric &= g.is_symmetric(p, sc.symmetry_tol);
            }
            let ks: Vec<f64> = pop.subpops().iter().map(|s| s.cost.k()).collect();
            if ks.iter().any(|k| *k != ks[0]) {
                notes.push(format!(
                    "unequal fixed costs {ks:?}: the pooled median can be moved for {oc:.6}, below the per-subpopulation cost"
                ));
            }
            (plan.cost, oc, Some(symmetric), true)
        }
    };
    let abs_gap = (closed - oracle_cost).abs();
    if id == PropId::P2Median {
        // the median oracle is exact up to one atom of mass
        extra_ok &= abs_gap <= sc.gap_tol.max(m.k() / n as f64);
    }
    let pass = abs_gap <= sc.gap_tol && extra_ok && symmetry_pass != Some(false);
    Ok(PropositionReport {
        id,
        scenario_id: sc.id.clone(),
        closed_form_cost: closed,
        oracle_cost,
        abs_gap,
        symmetry_pass,
        status: if pass { Status::Pass } else { Status::Fail },
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetero::Subpopulation;

    fn point() -> PriceDist {
        ParametricDist::degenerate(0.0).unwrap().into()
    }

    fn small() -> SearchConfig {
        SearchConfig { n_atoms: 200, delta_grid: 400, ..SearchConfig::default() }
    }

    #[test]
    fn mean_on_point_mass() {
        let m = CostModel::quadratic(8.0, 1.0).unwrap();
        let r = min_cost_attack(&point(), &m, &BenchmarkSpec::Mean, 1.0, &SearchConfig::default()).unwrap();
        assert!((r.cost - 4.0 * 2f64.sqrt()).abs() < 1e-3, "{}", r.cost);
        assert!((r.achieved - 1.0).abs() <= 1e-4);
        assert!((transport_cost(&m, &r.sources, &r.destinations) - r.cost).abs() < 1e-12);
    }

    #[test]
    fn median_by_count_on_uniform() {
        let u: PriceDist = ParametricDist::uniform(-1.0, 1.0).unwrap().into();
        let m = CostModel::fixed_only(1.0).unwrap();
        let r = min_cost_attack(&u, &m, &BenchmarkSpec::Median, 0.5, &SearchConfig::default()).unwrap();
        assert_eq!(r.moved, 500);
        assert!((r.cost - 0.25).abs() < 5e-4);
    }

    #[test]
    fn trimmed_on_point_mass() {
        let m = CostModel::quadratic(8.0, 1.0).unwrap();
        let spec = BenchmarkSpec::TrimmedMean(1.0 / 6.0);
        let r = min_cost_attack(&point(), &m, &spec, 1.0, &SearchConfig::default()).unwrap();
        assert!((r.cost - 6.0).abs() < 1e-3, "{}", r.cost);
    }

    #[test]
    fn downward_target_mirrors() {
        let m = CostModel::quadratic(1.0, 1.0).unwrap();
        let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
        let up = min_cost_attack(&tri, &m, &BenchmarkSpec::Mean, 0.7, &small()).unwrap();
        let down = min_cost_attack(&tri, &m, &BenchmarkSpec::Mean, -0.7, &small()).unwrap();
        assert!((up.cost - down.cost).abs() < 1e-12);
        assert!((up.achieved + down.achieved).abs() < 1e-12);
        // the mean only sees how much mass moves, so the winning atoms may differ
        assert!((up.delta + down.delta).abs() < 1e-12);
        assert_eq!(up.moved, down.moved);
    }

    #[test]
    fn job_order_does_not_change_the_result() {
        let m = CostModel::quadratic(2.0, 1.0).unwrap();
        let spec = BenchmarkSpec::TrimmedMean(0.2);
        let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
        let pb = Problem::new(&tri, &m, &spec, 0.4, &small()).unwrap();
        let jobs = pb.jobs();
        let all: Vec<Candidate> =
            jobs.iter().enumerate().filter_map(|(i, j)| pb.run(i, j, f64::INFINITY)).collect();
        let reversed = reduce(all.iter().rev().cloned());
        let forward = reduce(all.iter().cloned());
        assert_eq!(reversed, forward);
        let serial = min_cost_attack(&tri, &m, &spec, 0.4, &small()).unwrap();
        assert_eq!(pb.finish(forward).unwrap(), serial);
    }

    #[test]
    fn unreachable_and_trivial_targets() {
        let m = CostModel::quadratic(1.0, 1.0).unwrap();
        let spec = BenchmarkSpec::TrimmedMean(0.4);
        let cfg = SearchConfig { delta_grid: 10, ..small() };
        let r = min_cost_attack(&point(), &m, &spec, 1.0, &cfg);
        assert!(r.is_ok());
        assert!(matches!(
            min_cost_attack(&point(), &m, &BenchmarkSpec::Mean, 0.0, &cfg),
            Err(Error::TrivialTarget { .. })
        ));
        let fixed = CostModel::fixed_only(1.0).unwrap();
        let two: PriceDist = AtomDist::new(alloc::vec![(0.0, 0.5), (1.0, 0.5)]).unwrap().into();
        // only the atoms at 0 can be raised, and raising them to 5 overshoots
        let r = min_cost_attack(&two, &fixed, &BenchmarkSpec::Quantile(0.9), 5.0, &cfg);
        assert!(r.is_err());
    }

    #[test]
    fn search_config_validation() {
        assert!(SearchConfig { n_atoms: 1, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig { tol: 0.0, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig::default().validate().is_ok());
    }

    #[test]
    fn hetero_grid_oracle() {
        let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
        let pop = Population::new(alloc::vec![
            Subpopulation { mass: 0.5, dist: tri.clone(), cost: CostModel::quadratic(0.0, 1.0).unwrap() },
            Subpopulation { mass: 0.5, dist: tri, cost: CostModel::quadratic(0.0, 2.0).unwrap() },
        ])
        .unwrap();
        let r = hetero_shift_oracle(&pop, &[2.0 / 3.0, 4.0 / 3.0], 1.0, &SearchConfig::default()).unwrap();
        assert!((r.cost - 1.5).abs() < 1e-3);
        assert!(r.deltas.iter().all(|d| (d - 1.0).abs() < 1e-3));
    }

    #[test]
    fn pooled_median_prefers_cheap_prices() {
        let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
        let pop = Population::new(alloc::vec![
            Subpopulation { mass: 0.5, dist: tri.clone(), cost: CostModel::fixed_only(1.0).unwrap() },
            Subpopulation { mass: 0.5, dist: tri, cost: CostModel::fixed_only(2.0).unwrap() },
        ])
        .unwrap();
        let c = pooled_median_oracle(&pop, 0.5, 2000).unwrap();
        assert!((c - 0.375).abs() < 1e-3);
    }

    #[test]
    fn verify_reports() {
        let sc = Scenario::new("p4", point(), CostModel::quadratic(8.0, 1.0).unwrap(), 1.0);
        let r = verify_proposition(PropId::P4, &sc).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
        assert!((r.closed_form_cost - 6.0).abs() < 1e-9);

        let sc = Scenario::new("p5", point(), CostModel::quadratic(2.0, 1.0).unwrap(), 1.0);
        let r = verify_proposition(PropId::P4, &sc).unwrap();
        assert_eq!(r.status, Status::HypothesesUnmet);
        let r = verify_proposition(PropId::P5, &Scenario { search: small(), ..sc }).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");

        let tri: PriceDist = ParametricDist::triangular(0.0, 1.0).unwrap().into();
        let sc = Scenario::new("median", tri, CostModel::fixed_only(1.0).unwrap(), 0.5);
        let r = verify_proposition(PropId::P2Median, &sc).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
        assert!((r.closed_form_cost - 0.375).abs() < 1e-12);
    }

    #[test]
    fn prop_ids_round_trip() {
        for p in PropId::ALL {
            assert_eq!(PropId::parse(p.label()), Some(p));
        }
        assert_eq!(PropId::parse("p6_WEIGHTED"), Some(PropId::P6Weighted));
        assert_eq!(PropId::parse("P9"), None);
    }
}
