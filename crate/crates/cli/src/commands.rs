//! The five subcommands. Each returns a human-readable report, the tables it
//! wrote and an exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use manipcost_core::attack::{
    attack_cost_curve, mean_attack, median_attack_cost, median_symmetric_construction, symmetry_certificate,
    trimmed_attack, MassSelector, UniformShiftPlan,
};
use manipcost_core::bench::{evaluate, evaluate_population, median, BenchmarkSpec};
use manipcost_core::cost::CostModel;
use manipcost_core::dist::{AtomDist, Mixture, ParametricDist, PriceDist, DEFAULT_GRID_N};
use manipcost_core::hetero::{find_witness, hetero_mean_attack, hetero_median_attack, weighted_mean_weights, WITNESS_TOL};
use manipcost_core::oracle::{verify_proposition_with, PropId, Status};
use manipcost_core::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::Loaded;
use crate::csvio::{self, num, opt, Table};
use crate::{parallel, CliError, Exit};

/// Default trimming levels of `sweep-tau`.
pub const DEFAULT_TAUS: [f64; 10] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45];

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct Outcome {
    pub exit: Exit,
    pub report: String,
    pub files: Vec<PathBuf>,
}

fn out_dir(sc: Option<&Loaded>, flags: &Flags) -> PathBuf {
    flags
        .out
        .clone()
        .or_else(|| sc.and_then(|s| s.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out").join(sc.map_or("compare", |s| s.id.as_str())))
}

fn meta(cmd: &str, sc: &Loaded, extra: &str) -> String {
    let s = &sc.search;
    format!(
        "manipcost {} {cmd} scenario={} n_atoms={} tol={} delta_grid={}{extra}",
        env!("CARGO_PKG_VERSION"),
        sc.id,
        s.n_atoms,
        s.tol,
        s.delta_grid
    )
}

fn save(table: &Table, dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    table.write(&path)?;
    files.push(path);
    Ok(())
}

fn single(sc: &Loaded) -> Result<(&PriceDist, &CostModel), CliError> {
    match (&sc.dist, &sc.cost) {
        (Some(d), Some(c)) => Ok((d, c)),
        _ => Err(CliError::Config(format!("scenario {} has no single distribution", sc.id))),
    }
}

fn point_mass_at(d: &PriceDist) -> Option<f64> {
    match d {
        PriceDist::Parametric(ParametricDist::Degenerate { at }) => Some(*at),
        PriceDist::Atoms(a) if a.positions().first() == a.positions().last() => a.positions().first().copied(),
        _ => None,
    }
}

/// Fills in the weights of a bare `weighted_mean`.
fn resolve(spec: &BenchmarkSpec, sc: &Loaded) -> Result<BenchmarkSpec, CliError> {
    match (spec, &sc.population) {
        (BenchmarkSpec::WeightedMean(w), Some(pop)) if w.is_empty() => {
            let w = match &sc.weights {
                Some(w) => w.clone(),
                None => weighted_mean_weights(pop, sc.targets[0])?,
            };
            Ok(BenchmarkSpec::WeightedMean(w))
        }
        _ => Ok(spec.clone()),
    }
}

pub fn evaluate_cmd(sc: &Loaded, flags: &Flags, probe: usize) -> Result<Outcome, CliError> {
    let mut table = Table::new(meta("evaluate", sc, ""), &csvio::EVALUATE_HEADER);
    let mut report = String::new();
    for b in &sc.benchmarks {
        let spec = resolve(b, sc)?;
        let v = match (&sc.dist, &sc.population) {
            (Some(d), _) if !spec.is_population() => evaluate(&spec, d)?,
            (_, Some(pop)) if spec.is_population() => evaluate_population(&spec, pop.mixture())?,
            (_, Some(pop)) => evaluate_population(&BenchmarkSpec::Pooled(Box::new(spec.clone())), pop.mixture())?,
            _ => return Err(CliError::Config(format!("{} needs a population", spec.label()))),
        };
        writeln!(report, "{:<32} {v}", spec.label()).ok();
        table.push(vec![spec.label(), num(v)]);
    }
    if probe > 0 {
        report.push_str(&random_probe(&sc.benchmarks, probe, flags.seed));
    }
    let mut files = Vec::new();
    save(&table, &out_dir(Some(sc), flags), "evaluate.csv", &mut files)?;
    Ok(Outcome { exit: Exit::Success, report, files })
}

/// Checks each single-distribution benchmark on random atom lists that are
/// symmetric about a random center.
fn random_probe(benchmarks: &[BenchmarkSpec], trials: usize, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let c: f64 = rng.random_range(-5.0..5.0);
        let mut atoms = Vec::new();
        if rng.random_bool(0.5) {
            atoms.push((c, rng.random_range(0.1..1.0)));
        }
        for _ in 0..rng.random_range(1..8) {
            let o: f64 = rng.random_range(0.01..3.0);
            let w: f64 = rng.random_range(0.1..1.0);
            atoms.push((c - o, w));
            atoms.push((c + o, w));
        }
        cases.push((c, PriceDist::from(AtomDist::normalized(atoms).expect("positive masses"))));
    }
    let mut out = format!("random symmetric probe, seed {seed}, {trials} cases\n");
    for b in benchmarks.iter().filter(|b| !b.is_population()) {
        let hits = cases
            .iter()
            .filter(|(c, d)| evaluate(b, d).is_ok_and(|v| (v - c).abs() <= 1e-9 * (1.0 + c.abs())))
            .count();
        writeln!(out, "  {:<30} returns the center on {hits}/{trials}", b.label()).ok();
    }
    out
}

/// Closed-form plan for one benchmark and target, as an attack row.
struct Row {
    tau: Option<f64>,
    delta: f64,
    mass: f64,
    cost: f64,
    achieved: f64,
    symmetric: Option<bool>,
}

fn uniform_row(plan: &UniformShiftPlan, dist: &PriceDist, sc: &Loaded, spec: &BenchmarkSpec) -> Result<Row, CliError> {
    let fin = plan.final_distribution(dist, sc.search.n_atoms)?;
    let achieved = evaluate(spec, &fin)?;
    let cert = symmetry_certificate(&fin, plan.target, sc.symmetry_tol)?;
    Ok(Row {
        tau: spec.trimming(),
        delta: plan.delta,
        mass: plan.mass,
        cost: plan.cost,
        achieved,
        symmetric: Some(cert.passes(sc.symmetry_tol)),
    })
}

/// Re-expresses a plan built for a point mass at zero and target `p - at`.
fn anchored(mut plan: UniformShiftPlan, p: f64) -> UniformShiftPlan {
    plan.target = p;
    plan
}

fn single_row(spec: &BenchmarkSpec, p: f64, dist: &PriceDist, m: &CostModel, sc: &Loaded) -> Result<Row, CliError> {
    let trivial = |base: f64| Row {
        tau: spec.trimming(),
        delta: 0.0,
        mass: 0.0,
        cost: 0.0,
        achieved: base,
        symmetric: None,
    };
    match spec {
        BenchmarkSpec::Mean => {
            let base = dist.mean();
            match mean_attack(m, p - base) {
                Err(Error::TrivialTarget { .. }) => Ok(trivial(base)),
                r => uniform_row(&anchored(r?, p), dist, sc, spec),
            }
        }
        BenchmarkSpec::TrimmedMean(tau) => {
            let at = point_mass_at(dist).ok_or_else(|| {
                Error::HypothesesUnmet("the trimmed-mean closed form needs prices at a single point".into())
            })?;
            let rel = p - at;
            if rel == 0.0 {
                return Ok(trivial(at));
            }
            let mut plan = trimmed_attack(m, *tau, rel.abs())?;
            if rel < 0.0 {
                plan.delta = -plan.delta;
                plan.selector = MassSelector::Bottom;
            }
            uniform_row(&anchored(plan, p), dist, sc, spec)
        }
        BenchmarkSpec::Median => {
            if !m.variable().is_zero() {
                return Err(Error::HypothesesUnmet("the median closed form needs a zero variable cost".into()).into());
            }
            let base = median(dist);
            if p < base {
                let mirrored = mirror(dist);
                let r = single_row(spec, -p, &mirrored, m, sc)?;
                return Ok(Row { achieved: -r.achieved, ..r });
            }
            let mc = match median_attack_cost(m.k(), dist, p) {
                Err(Error::TrivialTarget { .. }) => return Ok(trivial(base)),
                r => r?,
            };
            let (achieved, symmetric) = match median_symmetric_construction(dist, p) {
                Ok(t) => {
                    let g: PriceDist = t.induced_grid(DEFAULT_GRID_N)?.into();
                    let cert = symmetry_certificate(&g, p, sc.symmetry_tol)?;
                    (median(&g), Some(cert.passes(sc.symmetry_tol)))
                }
                Err(_) => (f64::NAN, None),
            };
            Ok(Row { tau: Some(0.5), delta: f64::NAN, mass: mc.moved_mass, cost: mc.cost, achieved, symmetric })
        }
        other => Err(Error::Unsupported { op: "attack", reason: format!("no closed form for {}", other.label()) }.into()),
    }
}

fn mirror(d: &PriceDist) -> PriceDist {
    match d {
        PriceDist::Atoms(a) => AtomDist::normalized(a.iter().map(|(x, w)| (-x, w)).collect()).map_or_else(|_| d.clone(), Into::into),
        PriceDist::Parametric(ParametricDist::Triangular { center, halfwidth }) => {
            ParametricDist::Triangular { center: -center, halfwidth: *halfwidth }.into()
        }
        PriceDist::Parametric(ParametricDist::TruncatedGaussian { center, sigma, halfwidth }) => {
            ParametricDist::TruncatedGaussian { center: -center, sigma: *sigma, halfwidth: *halfwidth }.into()
        }
        PriceDist::Parametric(ParametricDist::Uniform { lo, hi }) => ParametricDist::Uniform { lo: -hi, hi: -lo }.into(),
        PriceDist::Parametric(ParametricDist::Degenerate { at }) => ParametricDist::Degenerate { at: -at }.into(),
        PriceDist::Grid(g) => {
            let dens: Vec<f64> = g.densities().iter().rev().copied().collect();
            manipcost_core::dist::GridDist::new(-g.hi(), -g.lo(), dens).map(Into::into).unwrap_or_else(|_| d.clone())
        }
    }
}

fn population_row(
    spec: &BenchmarkSpec,
    p: f64,
    sc: &Loaded,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<Row, CliError> {
    let pop = sc.population.as_ref().expect("population scenario");
    let mut hetero = Table::new(meta("attack", sc, &format!(" benchmark={} P={p}", spec.label())), &csvio::HETERO_HEADER);
    let row = match spec {
        BenchmarkSpec::WeightedMean(_) => {
            let plan = hetero_mean_attack(pop, p)?;
            for (i, s) in pop.subpops().iter().enumerate() {
                hetero.push(vec![
                    i.to_string(),
                    num(s.mass),
                    num(median(&s.dist)),
                    num(plan.weights[i]),
                    num(plan.deltas[i]),
                    num(plan.costs[i]),
                ]);
            }
            let shifted = pop.shifted(&plan.deltas)?;
            let symmetric = find_witness(&shifted, WITNESS_TOL).is_some_and(|w| (w.center - p).abs() <= sc.symmetry_tol);
            Row { tau: None, delta: p, mass: 1.0, cost: plan.cost, achieved: plan.achieved, symmetric: Some(symmetric) }
        }
        BenchmarkSpec::MedianOfMedians | BenchmarkSpec::Pooled(_) if spec_is_median(spec) => {
            let plan = hetero_median_attack(pop, p)?;
            let mut comps = Vec::with_capacity(pop.len());
            let mut symmetric = true;
            for (i, (s, t)) in pop.subpops().iter().zip(&plan.transports).enumerate() {
                hetero.push(vec![
                    i.to_string(),
                    num(s.mass),
                    num(median(&s.dist)),
                    String::new(),
                    String::new(),
                    num(s.mass * s.cost.k() * plan.moved[i]),
                ]);
                let g: PriceDist = t.induced_grid(DEFAULT_GRID_N)?.into();
                symmetric &= g.is_symmetric(p, sc.symmetry_tol);
                comps.push((s.mass, g));
            }
            let achieved = evaluate_population(spec, &Mixture::new(comps)?)?;
            let mass = pop.subpops().iter().zip(&plan.moved).map(|(s, m)| s.mass * m).sum();
            Row { tau: None, delta: f64::NAN, mass, cost: plan.cost, achieved, symmetric: Some(symmetric) }
        }
        other => {
            return Err(Error::Unsupported { op: "attack", reason: format!("no population closed form for {}", other.label()) }.into())
        }
    };
    save(&hetero, dir, &format!("hetero_{}_P{p}.csv", spec.label()), files)?;
    Ok(row)
}

fn spec_is_median(spec: &BenchmarkSpec) -> bool {
    match spec {
        BenchmarkSpec::MedianOfMedians => true,
        BenchmarkSpec::Pooled(inner) => **inner == BenchmarkSpec::Median,
        _ => false,
    }
}

/// Closed-form rows for every benchmark and target. Failed pairs are reported
/// and set the exit code.
/// Successful `(benchmark, P, row)` triples and messages for the pairs that failed.
type AttackRows = (Vec<(BenchmarkSpec, f64, Row)>, Vec<String>);

fn attack_rows(sc: &Loaded, dir: &Path, files: &mut Vec<PathBuf>) -> Result<AttackRows, CliError> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &p in &sc.targets {
        for b in &sc.benchmarks {
            let spec = resolve(b, sc)?;
            let r = if spec.is_population() {
                if sc.population.is_none() {
                    return Err(CliError::Config(format!("{} needs a population", spec.label())));
                }
                population_row(&spec, p, sc, dir, files)
            } else {
                let (d, m) = single(sc)?;
                single_row(&spec, p, d, m, sc)
            };
            match r {
                Ok(row) => rows.push((spec, p, row)),
                Err(CliError::Solver(e)) if !matches!(e, Error::Invalid { .. }) => {
                    failures.push(format!("{} at P={p}: {e}", spec.label()))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((rows, failures))
}

pub fn attack_cmd(sc: &Loaded, flags: &Flags) -> Result<Outcome, CliError> {
    let dir = out_dir(Some(sc), flags);
    let mut files = Vec::new();
    let (rows, failures) = attack_rows(sc, &dir, &mut files)?;
    let mut table = Table::new(meta("attack", sc, ""), &csvio::ATTACK_HEADER);
    let mut report = String::new();
    for (spec, p, r) in &rows {
        writeln!(
            report,
            "{:<24} P={p:<6} delta={:<10} Delta={:<10} cost={:<12} achieved={} symmetric={}",
            spec.label(),
            fmt(r.delta),
            fmt(r.mass),
            fmt(r.cost),
            fmt(r.achieved),
            r.symmetric.map_or("n/a", |s| if s { "yes" } else { "no" })
        )
        .ok();
        table.push(vec![
            spec.label(),
            opt(r.tau),
            num(*p),
            num(r.delta),
            num(r.mass),
            num(r.cost),
            num(r.achieved),
            r.symmetric.map_or_else(String::new, |s| s.to_string()),
        ]);
    }
    for f in &failures {
        writeln!(report, "skipped {f}").ok();
    }
    save(&table, &dir, "attack.csv", &mut files)?;
    let exit = if failures.is_empty() { Exit::Success } else { Exit::Unmet };
    Ok(Outcome { exit, report, files })
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.6}")
    }
}

pub fn sweep_cmd(sc: &Loaded, flags: &Flags) -> Result<Outcome, CliError> {
    let (d, m) = single(sc)?;
    let at = point_mass_at(d)
        .ok_or_else(|| Error::HypothesesUnmet("the trimmed-mean closed form needs prices at a single point".into()))?;
    let p = sc.targets[0];
    let taus: &[f64] = if sc.taus.is_empty() { &DEFAULT_TAUS } else { &sc.taus };
    let curve = attack_cost_curve(m, (p - at).abs(), taus)?;
    let mut table = Table::new(meta("sweep-tau", sc, &format!(" P={p}")), &csvio::SWEEP_HEADER);
    let mut report = format!("attack cost by trimming level at P={p}\n");
    for pt in &curve {
        let delta = if p < at { -pt.delta } else { pt.delta };
        writeln!(report, "  tau={:<6} delta={:.6} Delta={:.6} cost={:.6}", pt.tau, delta, pt.mass, pt.cost).ok();
        table.push(vec![num(pt.tau), num(delta), num(pt.mass), num(pt.cost)]);
    }
    if sc.targets.len() > 1 {
        writeln!(report, "only the first target is swept").ok();
    }
    let mut files = Vec::new();
    save(&table, &out_dir(Some(sc), flags), "sweep_tau.csv", &mut files)?;
    Ok(Outcome { exit: Exit::Success, report, files })
}

pub fn verify_cmd(sc: &Loaded, flags: &Flags, props: &[PropId]) -> Result<Outcome, CliError> {
    let ids: Vec<PropId> = if !props.is_empty() {
        props.to_vec()
    } else if !sc.props.is_empty() {
        sc.props.clone()
    } else {
        PropId::ALL.to_vec()
    };
    let oracle = |d: &PriceDist, m: &CostModel, s: &BenchmarkSpec, p: f64, c: &manipcost_core::oracle::SearchConfig| {
        parallel::min_cost_attack(d, m, s, p, c)
    };
    let mut table = Table::new(meta("verify", sc, ""), &csvio::VERIFY_HEADER);
    let mut report = String::new();
    let (mut failed, mut unmet) = (false, false);
    for &p in &sc.targets {
        let scenario = sc.scenario(p);
        for &id in &ids {
            let r = parallel::with_threads(flags.threads, || verify_proposition_with(id, &scenario, &oracle));
            match r {
                Ok(r) => {
                    failed |= r.status == Status::Fail;
                    unmet |= r.status == Status::HypothesesUnmet;
                    writeln!(
                        report,
                        "{} [{}] P={p}: closed form {} vs oracle {} (gap {}), symmetry {}, {}",
                        id.label(),
                        r.scenario_id,
                        fmt(r.closed_form_cost),
                        fmt(r.oracle_cost),
                        fmt(r.abs_gap),
                        r.symmetry_pass.map_or("n/a", |s| if s { "pass" } else { "fail" }),
                        r.status.label()
                    )
                    .ok();
                    for n in &r.notes {
                        writeln!(report, "    {n}").ok();
                    }
                    table.push(vec![
                        id.label().into(),
                        r.scenario_id.clone(),
                        num(r.closed_form_cost),
                        num(r.oracle_cost),
                        num(r.abs_gap),
                        r.symmetry_pass.map_or_else(String::new, |s| s.to_string()),
                        r.status.label().into(),
                    ]);
                }
                Err(e @ Error::Invalid { .. }) => return Err(e.into()),
                Err(e) => {
                    unmet = true;
                    writeln!(report, "{} [{}] P={p}: {e}", id.label(), sc.id).ok();
                    table.push(vec![
                        id.label().into(),
                        sc.id.clone(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "error".into(),
                    ]);
                }
            }
        }
    }
    let mut files = Vec::new();
    save(&table, &out_dir(Some(sc), flags), "verify.csv", &mut files)?;
    let exit = if failed {
        Exit::VerificationFailed
    } else if unmet {
        Exit::Unmet
    } else {
        Exit::Success
    };
    Ok(Outcome { exit, report, files })
}

/// One rankable entry read back from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub p: f64,
    pub benchmark: String,
    pub tau: Option<f64>,
    pub cost: f64,
}

/// Entries of any table this tool writes; tables without costs per
/// benchmark (evaluate, verify, hetero) give none.
pub fn entries(t: &Table) -> Result<Vec<Entry>, CliError> {
    let bad = |why: String| CliError::Config(format!("compare input: {why}"));
    let parse = |s: &str| -> Result<Option<f64>, CliError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("not a number: {s:?}")))
        }
    };
    let col = |name: &str| t.column(name);
    let meta_p = t
        .meta
        .iter()
        .flat_map(|m| m.split_whitespace())
        .find_map(|w| w.strip_prefix("P=").and_then(|v| v.parse::<f64>().ok()));
    let known = [
        &csvio::ATTACK_HEADER[..],
        &csvio::VERIFY_HEADER[..],
        &csvio::EVALUATE_HEADER[..],
        &csvio::SWEEP_HEADER[..],
        &csvio::COMPARE_HEADER[..],
        &csvio::HETERO_HEADER[..],
    ];
    if !known.iter().any(|h| h.iter().copied().eq(t.header.iter().map(String::as_str))) {
        return Err(bad(format!("unknown header {:?}", t.header)));
    }
    let (Some(ci), Some(ti)) = (col("cost"), col("tau")) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        let tau = parse(&r[ti])?;
        let benchmark = match col("benchmark") {
            Some(b) => r[b].clone(),
            None => BenchmarkSpec::TrimmedMean(tau.unwrap_or(0.0)).label(),
        };
        let p = match col("P") {
            Some(i) => parse(&r[i])?,
            None => meta_p,
        }
        .ok_or_else(|| bad("no target price".into()))?;
        let cost = parse(&r[ci])?.ok_or_else(|| bad("empty cost".into()))?;
        out.push(Entry { p, benchmark, tau, cost });
    }
    Ok(out)
}

/// Ranks by descending cost per target: rank 1 is the hardest benchmark to move.
pub fn rank(mut entries: Vec<Entry>) -> Vec<(usize, Entry)> {
    entries.sort_by(|a, b| a.p.total_cmp(&b.p).then(b.cost.total_cmp(&a.cost)).then(a.benchmark.cmp(&b.benchmark)));
    let mut out: Vec<(usize, Entry)> = Vec::with_capacity(entries.len());
    for e in entries {
        let r = match out.last() {
            Some((r, prev)) if prev.p == e.p => r + 1,
            _ => 1,
        };
        out.push((r, e));
    }
    out
}

pub fn compare_cmd(sc: Option<&Loaded>, flags: &Flags, from: Option<&Path>) -> Result<Outcome, CliError> {
    let mut files = Vec::new();
    let (found, meta_line, dir) = match (from, sc) {
        (Some(path), _) => {
            let t = Table::read(path)?;
            let dir = out_dir(sc, flags);
            (entries(&t)?, format!("manipcost {} compare from={}", env!("CARGO_PKG_VERSION"), path.display()), dir)
        }
        (None, Some(sc)) => {
            let dir = out_dir(Some(sc), flags);
            let (rows, _) = attack_rows(sc, &dir, &mut files)?;
            let found = rows
                .into_iter()
                .map(|(s, p, r)| Entry { p, benchmark: s.label(), tau: s.trimming(), cost: r.cost })
                .collect();
            (found, meta("compare", sc, ""), dir)
        }
        (None, None) => return Err(CliError::Config("compare needs a scenario or --from".into())),
    };
    let mut table = Table::new(meta_line, &csvio::COMPARE_HEADER);
    let mut report = String::new();
    let ranked = rank(found);
    if ranked.is_empty() {
        report.push_str("nothing to rank\n");
    }
    for (r, e) in &ranked {
        writeln!(report, "P={:<6} #{r:<3} {:<24} cost={}", e.p, e.benchmark, fmt(e.cost)).ok();
        table.push(vec![num(e.p), r.to_string(), e.benchmark.clone(), opt(e.tau), num(e.cost)]);
    }
    save(&table, &dir, "compare.csv", &mut files)?;
    Ok(Outcome { exit: Exit::Success, report, files })
}
