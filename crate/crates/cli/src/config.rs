//! Scenario files.
//!
//! A scenario is a TOML document. Every key except `distribution` (or
//! `population`), `cost` and `targets` is optional:
//!
//! ```toml
//! id = "trimmed_k8"
//! targets = [1.0]
//! benchmarks = ["mean", "median", "trimmed_mean(0.1)"]
//! taus = [0.0, 0.1, 0.2]
//! props = ["P4"]
//! output = "out/trimmed_k8"
//!
//! [distribution]
//! family = "degenerate"
//! params = { at = 0.0 }
//!
//! [cost]
//! k = 8.0
//! variable = { kind = "quadratic", params = { a = 1.0 } }
//!
//! [search]
//! n_atoms = 2000
//! ```
//!
//! Populations replace `distribution` and `cost` with a list of
//! `[[population]]` tables, each with `mass`, `distribution` and `cost`.

use std::path::{Path, PathBuf};

use manipcost_core::bench::BenchmarkSpec;
use manipcost_core::cost::{ConvexTable, CostModel, VariableCost};
use manipcost_core::dist::{AtomDist, GridDist, ParametricDist, PriceDist};
use manipcost_core::hetero::{Population, Subpopulation};
use manipcost_core::oracle::{PropId, Scenario, SearchConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistConfig {
    Degenerate { at: f64 },
    Uniform { lo: f64, hi: f64 },
    Triangular { center: f64, halfwidth: f64 },
    TruncatedGaussian { center: f64, sigma: f64, halfwidth: f64 },
    /// `[[position, mass], ...]` with masses summing to one.
    Atoms { atoms: Vec<(f64, f64)> },
    /// Piecewise-constant density on equal cells of `[lo, hi]`.
    Grid { lo: f64, hi: f64, density: Vec<f64> },
}

impl DistConfig {
    pub fn build(&self) -> manipcost_core::Result<PriceDist> {
        Ok(match self {
            DistConfig::Degenerate { at } => ParametricDist::degenerate(*at)?.into(),
            DistConfig::Uniform { lo, hi } => ParametricDist::uniform(*lo, *hi)?.into(),
            DistConfig::Triangular { center, halfwidth } => ParametricDist::triangular(*center, *halfwidth)?.into(),
            DistConfig::TruncatedGaussian { center, sigma, halfwidth } => {
                ParametricDist::truncated_gaussian(*center, *sigma, *halfwidth)?.into()
            }
            DistConfig::Atoms { atoms } => AtomDist::new(atoms.clone())?.into(),
            DistConfig::Grid { lo, hi, density } => GridDist::new(*lo, *hi, density.clone())?.into(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariableConfig {
    Zero,
    Quadratic { a: f64 },
    Power { a: f64, p: f64 },
    /// `[[q, c(q)], ...]` for `q >= 0`, interpolated linearly and mirrored.
    Table { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default)]
    pub k: f64,
    pub variable: VariableConfig,
}

impl CostConfig {
    pub fn build(&self) -> manipcost_core::Result<CostModel> {
        let v = match &self.variable {
            VariableConfig::Zero => VariableCost::Zero,
            VariableConfig::Quadratic { a } => VariableCost::Quadratic { a: *a },
            VariableConfig::Power { a, p } => VariableCost::Power { a: *a, p: *p },
            VariableConfig::Table { knots } => VariableCost::ConvexTable(ConvexTable::new(knots.clone())?),
        };
        CostModel::new(self.k, v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubpopConfig {
    pub mass: f64,
    pub distribution: DistConfig,
    pub cost: CostConfig,
}

/// Overrides of [`SearchConfig`] plus the verification tolerances.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchOverrides {
    pub n_atoms: Option<usize>,
    pub delta_grid: Option<usize>,
    pub mass_step: Option<usize>,
    pub refine_iters: Option<usize>,
    pub tol: Option<f64>,
    pub window_starts: Option<usize>,
    pub two_level_grid: Option<usize>,
    pub gap_tol: Option<f64>,
    pub symmetry_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_id")]
    pub id: String,
    pub targets: Vec<f64>,
    #[serde(default = "default_benchmarks")]
    pub benchmarks: Vec<String>,
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub props: Vec<String>,
    /// Per-subpopulation weights used by `weighted_mean`; derived from the costs when absent.
    pub weights: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub distribution: Option<DistConfig>,
    pub cost: Option<CostConfig>,
    #[serde(default)]
    pub population: Vec<SubpopConfig>,
    #[serde(default)]
    pub search: SearchOverrides,
}

fn default_id() -> String {
    "scenario".into()
}

fn default_benchmarks() -> Vec<String> {
    vec!["mean".into(), "median".into()]
}

/// Parses a benchmark name as printed by [`BenchmarkSpec::label`].
pub fn parse_benchmark(s: &str) -> Option<BenchmarkSpec> {
    let s = s.trim();
    let arg = |name: &str| -> Option<f64> {
        s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?.trim().parse().ok()
    };
    if let Some(inner) = s.strip_prefix("pooled_") {
        return parse_benchmark(inner).map(|b| BenchmarkSpec::Pooled(Box::new(b)));
    }
    Some(match s {
        "mean" => BenchmarkSpec::Mean,
        "median" => BenchmarkSpec::Median,
        "weighted_mean" => BenchmarkSpec::WeightedMean(Vec::new()),
        "median_of_medians" => BenchmarkSpec::MedianOfMedians,
        "mean_of_medians" => BenchmarkSpec::MeanOfMedians,
        "mass_weighted_mean_of_medians" => BenchmarkSpec::MassWeightedMeanOfMedians,
        _ => {
            if let Some(t) = arg("trimmed_mean") {
                BenchmarkSpec::TrimmedMean(t)
            } else {
                BenchmarkSpec::Quantile(arg("quantile")?)
            }
        }
    })
}

/// A validated scenario ready for the solvers.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub id: String,
    pub targets: Vec<f64>,
    pub benchmarks: Vec<BenchmarkSpec>,
    pub taus: Vec<f64>,
    pub props: Vec<PropId>,
    pub weights: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    /// Single distribution, or the pooled population when only subpopulations are given.
    pub dist: Option<PriceDist>,
    pub cost: Option<CostModel>,
    pub population: Option<Population>,
    pub search: SearchConfig,
    pub gap_tol: f64,
    pub symmetry_tol: f64,
}

/// Command-line overrides that reach into the scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
}

pub fn load(path: &Path, ov: Overrides) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, ov)
}

pub fn parse(text: &str, ov: Overrides) -> Result<Loaded, CliError> {
    let raw: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Config(format!("schema: {e}")))?;
    let bad = |what: String| CliError::Config(format!("schema: {what}"));
    if raw.targets.is_empty() {
        return Err(bad("need at least one target".into()));
    }
    if raw.benchmarks.is_empty() {
        return Err(bad("need at least one benchmark".into()));
    }
    if raw.targets.iter().any(|p| !p.is_finite()) {
        return Err(bad("targets must be finite".into()));
    }
    let mut benchmarks = Vec::with_capacity(raw.benchmarks.len());
    for name in &raw.benchmarks {
        let b = parse_benchmark(name).ok_or_else(|| bad(format!("unknown benchmark {name:?}")))?;
        if !matches!(b, BenchmarkSpec::WeightedMean(_)) {
            b.validate().map_err(|e| bad(e.to_string()))?;
        }
        benchmarks.push(b);
    }
    let mut props = Vec::with_capacity(raw.props.len());
    for p in &raw.props {
        props.push(PropId::parse(p).ok_or_else(|| bad(format!("unknown proposition id {p:?}")))?);
    }
    let core = |e: manipcost_core::Error| bad(e.to_string());
    let population = if raw.population.is_empty() {
        None
    } else {
        let mut subs = Vec::with_capacity(raw.population.len());
        for s in &raw.population {
            subs.push(Subpopulation { mass: s.mass, dist: s.distribution.build().map_err(core)?, cost: s.cost.build().map_err(core)? });
        }
        Some(Population::new(subs).map_err(core)?)
    };
    let dist = match (&raw.distribution, &population) {
        (Some(d), _) => Some(d.build().map_err(core)?),
        (None, Some(_)) => None,
        (None, None) => return Err(bad("need a distribution or a population".into())),
    };
    let cost = raw.cost.as_ref().map(|c| c.build()).transpose().map_err(core)?;
    if dist.is_some() && cost.is_none() {
        return Err(bad("a distribution needs a cost".into()));
    }
    if let (Some(w), Some(pop)) = (&raw.weights, &population) {
        if w.len() != pop.len() {
            return Err(bad(format!("{} weights for {} subpopulations", w.len(), pop.len())));
        }
    }
    let o = &raw.search;
    let d = SearchConfig::default();
    let search = SearchConfig {
        n_atoms: ov.grid_n.or(o.n_atoms).unwrap_or(d.n_atoms),
        delta_grid: o.delta_grid.unwrap_or(d.delta_grid),
        mass_step: o.mass_step.unwrap_or(d.mass_step),
        refine_iters: o.refine_iters.unwrap_or(d.refine_iters),
        tol: ov.tol.or(o.tol).unwrap_or(d.tol),
        window_starts: o.window_starts.unwrap_or(d.window_starts),
        two_level_grid: o.two_level_grid.unwrap_or(d.two_level_grid),
    };
    search.validate().map_err(core)?;
    Ok(Loaded {
        id: raw.id,
        targets: raw.targets,
        benchmarks,
        taus: raw.taus,
        props,
        weights: raw.weights,
        output: raw.output,
        dist,
        cost,
        population,
        search,
        gap_tol: o.gap_tol.unwrap_or(1e-3),
        symmetry_tol: o.symmetry_tol.unwrap_or(1e-6),
    })
}

impl Loaded {
    /// Verification inputs for target `p`.
    pub fn scenario(&self, p: f64) -> Scenario {
        let dist = self.dist.clone().unwrap_or_else(|| ParametricDist::Degenerate { at: 0.0 }.into());
        let cost = match (&self.cost, &self.population) {
            (Some(c), _) => c.clone(),
            (None, Some(pop)) => pop.subpops()[0].cost.clone(),
            (None, None) => unreachable!("parse requires a distribution or a population"),
        };
        let mut sc = Scenario::new(self.id.clone(), dist, cost, p);
        sc.taus = self.taus.clone();
        sc.population = self.population.clone();
        sc.search = self.search.clone();
        sc.gap_tol = self.gap_tol;
        sc.symmetry_tol = self.symmetry_tol;
        sc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P4: &str = r#"
        id = "k8"
        targets = [1.0]
        benchmarks = ["mean", "trimmed_mean(0.1)"]
        [distribution]
        family = "degenerate"
        params = { at = 0.0 }
        [cost]
        k = 8.0
        variable = { kind = "quadratic", params = { a = 1.0 } }
    "#;

    #[test]
    fn parses_a_point_mass_scenario() {
        let l = parse(P4, Overrides::default()).unwrap();
        assert_eq!(l.benchmarks, vec![BenchmarkSpec::Mean, BenchmarkSpec::TrimmedMean(0.1)]);
        assert_eq!(l.cost.unwrap().k(), 8.0);
        assert_eq!(l.search, SearchConfig::default());
    }

    #[test]
    fn flags_override_the_file() {
        let l = parse(P4, Overrides { grid_n: Some(300), tol: Some(1e-3) }).unwrap();
        assert_eq!(l.search.n_atoms, 300);
        assert_eq!(l.search.tol, 1e-3);
    }

    #[test]
    fn labels_parse_back() {
        for b in [
            BenchmarkSpec::Mean,
            BenchmarkSpec::Median,
            BenchmarkSpec::TrimmedMean(0.25),
            BenchmarkSpec::Quantile(0.3),
            BenchmarkSpec::MedianOfMedians,
            BenchmarkSpec::MeanOfMedians,
            BenchmarkSpec::MassWeightedMeanOfMedians,
            BenchmarkSpec::Pooled(Box::new(BenchmarkSpec::TrimmedMean(0.1))),
        ] {
            assert_eq!(parse_benchmark(&b.label()), Some(b));
        }
        assert_eq!(parse_benchmark("trimmed_mean(x)"), None);
    }

    #[test]
    fn schema_errors_are_config_errors() {
        for bad in [
            "targets = []\n[distribution]\nfamily='degenerate'\nparams={at=0.0}",
            "targets = [1.0]\nbenchmarks = ['nope']\n[distribution]\nfamily='degenerate'\nparams={at=0.0}\n[cost]\nvariable={kind='zero'}",
            "targets = [1.0]",
            "targets = [1.0]\n[distribution]\nfamily='uniform'\nparams={lo=1.0, hi=0.0}\n[cost]\nvariable={kind='zero'}",
            "targets = [1.0]\nunknown_key = 3",
        ] {
            assert!(matches!(parse(bad, Overrides::default()), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn population_scenario() {
        let text = r#"
            targets = [1.0]
            benchmarks = ["weighted_mean"]
            [[population]]
            mass = 0.5
            distribution = { family = "uniform", params = { lo = -1.0, hi = 1.0 } }
            cost = { variable = { kind = "quadratic", params = { a = 1.0 } } }
            [[population]]
            mass = 0.5
            distribution = { family = "uniform", params = { lo = -1.0, hi = 1.0 } }
            cost = { variable = { kind = "quadratic", params = { a = 2.0 } } }
        "#;
        let l = parse(text, Overrides::default()).unwrap();
        assert_eq!(l.population.unwrap().len(), 2);
        assert!(l.dist.is_none());
    }
}
