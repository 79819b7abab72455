//! Command-line front end: validation, single solves and the full studies.
//! Exit codes: 0 pass, 2 hypothesis refusal, 3 assertion breach, 4 solver
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sola::config::load_study;
use sola::error::{Error, Result};
use sola::experiments;
use sola::report::print_verdict_line;

#[derive(Parser)]
#[command(
    name = "sola",
    about = "Solver and estimate monitors for singular parabolic problems with measure data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for fields/*.csv, monitors.csv and summary.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for the sampled validators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid override as NODESxSTEPS, e.g. 129x128.
    #[arg(long, global = true)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses on sampled points and classify the data.
    Validate { config: PathBuf },
    /// Solve a single rung of the approximation ladder.
    Solve {
        config: PathBuf,
        #[arg(long)]
        n: u32,
    },
    /// Ladder convergence study with the full monitor suite per rung.
    Converge { config: PathBuf },
    /// Two-path uniqueness test (refuses unless the hypotheses hold).
    Uniqueness { config: PathBuf },
    /// Gradient-energy ladders for the decay cases plus the growth control.
    Regularity { config: PathBuf },
    /// Substitution cross-check between the linear and singular pipelines.
    Example { config: PathBuf },
    /// Manufactured-solution convergence orders.
    Manufactured { config: PathBuf },
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let mut it = s.split('x');
    let nodes = it
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Config(format!("bad --grid value `{s}`; use NODESxSTEPS")))?;
    let steps = it
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Config(format!("bad --grid value `{s}`; use NODESxSTEPS")))?;
    Ok((nodes, steps))
}

fn run(cli: Cli) -> Result<bool> {
    let grid_override = cli.grid.as_deref().map(parse_grid).transpose()?;
    let load = |config: &PathBuf| load_study(config, grid_override, cli.seed, cli.out.clone());
    match &cli.command {
        Command::Validate { config } => {
            let loaded = load(config)?;
            let summary = experiments::run_validation(&loaded.study, 1000)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Solve { config, n } => {
            let loaded = load(config)?;
            let res = experiments::run_single_solve(&loaded.study, *n)?;
            let grid = &loaded.study.grid;
            let mass = grid.integrate_space(res.solution.slice(grid.time_steps));
            println!(
                "solved level {} on {}x{}: final slice mass {mass:.6e}, min value {:.3e}",
                n,
                grid.nodes_per_axis,
                grid.time_steps,
                res.solution.min_all()
            );
            Ok(true)
        }
        Command::Converge { config } => {
            let loaded = load(config)?;
            let rep = experiments::run_convergence_study(&loaded.study)?;
            for (i, gap) in rep.gaps.iter().enumerate() {
                println!(
                    "ladder gap {} -> {}: {gap:.6e}",
                    rep.levels[i],
                    rep.levels[i + 1]
                );
            }
            print_verdict_line(
                "converge",
                rep.pass,
                &format!(
                    "relative final gap {:.3e}, strictly decreasing {}",
                    rep.relative_final_gap, rep.strictly_decreasing
                ),
            );
            Ok(rep.pass)
        }
        Command::Uniqueness { config } => {
            let loaded = load(config)?;
            let rep = experiments::run_uniqueness_test(&loaded.study)?;
            print_verdict_line(
                "uniqueness",
                rep.pass,
                &format!(
                    "functional {:.3e}, relative L1 gap {:.3e}",
                    rep.functional_unit, rep.l1_gap_relative
                ),
            );
            Ok(rep.pass)
        }
        Command::Regularity { config } => {
            let loaded = load(config)?;
            if loaded.regularity_cases.is_empty() {
                return Err(Error::Config(
                    "no regularity cases in the study file".into(),
                ));
            }
            let rep = experiments::run_regularity_study(&loaded.study, &loaded.regularity_cases)?;
            for case in &rep.cases {
                print_verdict_line(
                    &format!("regularity[{}]", case.label),
                    case.pass,
                    &format!(
                        "upper-ladder ratio {:.4}, control={}",
                        case.upper_ratio, case.control
                    ),
                );
            }
            Ok(rep.pass)
        }
        Command::Example { config } => {
            let loaded = load(config)?;
            let rep =
                experiments::run_example_crosscheck(&loaded.study, &loaded.crosscheck_gammas)?;
            for o in &rep.outcomes {
                print_verdict_line(
                    &format!("example[gamma={}]", o.gamma),
                    o.pass,
                    &format!(
                        "relative L1 gap {:.3e} at level {}",
                        o.relative_gap, o.level
                    ),
                );
            }
            Ok(rep.pass)
        }
        Command::Manufactured { config } => {
            let loaded = load(config)?;
            let rep = experiments::run_manufactured(&loaded.study)?;
            print_verdict_line(
                "manufactured",
                rep.pass,
                &format!(
                    "spatial order {:.3}, temporal order {:.3}",
                    rep.spatial_order, rep.temporal_order
                ),
            );
            Ok(rep.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
