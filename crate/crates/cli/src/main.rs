use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manipcost::commands::{self, Flags, Outcome};
use manipcost::config::{self, Overrides};
use manipcost::CliError;
use manipcost_core::oracle::PropId;

/// Minimum manipulation costs of price benchmarks: closed forms checked against a brute-force oracle.
#[derive(Debug, Parser)]
#[command(name = "manipcost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Atoms used to discretize distributions (overrides `search.n_atoms`).
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Largest accepted |benchmark - P| in the oracle (overrides `search.tol`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory (default: the scenario's `output`, else `out/<id>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the optional randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads of the oracle.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Benchmark values on the unmanipulated prices.
    Evaluate {
        scenario: PathBuf,
        /// Also check each benchmark on this many random symmetric inputs.
        #[arg(long, default_value_t = 0)]
        probe: usize,
    },
    /// Closed-form cheapest attack per benchmark and target.
    Attack { scenario: PathBuf },
    /// Attack cost by trimming level on prices at a single point.
    SweepTau { scenario: PathBuf },
    /// Closed forms against the brute-force oracle.
    Verify {
        scenario: PathBuf,
        /// Statement to check (repeatable): P2_mean, P2_median, P3, P4, P5, P6_weighted, P6_median.
        #[arg(long = "prop", value_parser = parse_prop)]
        props: Vec<PropId>,
    },
    /// Ranks benchmarks by attack cost per target.
    Compare {
        scenario: Option<PathBuf>,
        /// Rank the rows of a CSV written by this tool instead.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

fn parse_prop(s: &str) -> Result<PropId, String> {
    PropId::parse(s).ok_or_else(|| {
        let all: Vec<&str> = PropId::ALL.iter().map(|p| p.label()).collect();
        format!("unknown proposition id {s:?}; expected one of {}", all.join(", "))
    })
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let ov = Overrides { grid_n: cli.grid_n, tol: cli.tol };
    let flags = Flags { out: cli.out, seed: cli.seed, threads: cli.threads };
    let load = |p: &PathBuf| config::load(p, ov);
    match cli.command {
        Command::Evaluate { scenario, probe } => commands::evaluate_cmd(&load(&scenario)?, &flags, probe),
        Command::Attack { scenario } => commands::attack_cmd(&load(&scenario)?, &flags),
        Command::SweepTau { scenario } => commands::sweep_cmd(&load(&scenario)?, &flags),
        Command::Verify { scenario, props } => commands::verify_cmd(&load(&scenario)?, &flags, &props),
        Command::Compare { scenario, from } => {
            let sc = scenario.as_ref().map(load).transpose()?;
            commands::compare_cmd(sc.as_ref(), &flags, from.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.report);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("manipcost: {e}");
            ExitCode::from(e.exit() as u8)
        }
    }
}
