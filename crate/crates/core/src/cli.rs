//! Command-line interface. Results go to stdout or `--out`; logs and notes
//! go to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::balancer::{
    convergence_study, heuristic_balance_with, BalanceOptions, MatrixDistribution, StudyConfig,
    UpdateMode,
};
use crate::error::{Error, Result};
use crate::magnitude::MagnitudeMatrix;
use crate::report::{
    analyze, grid2x2, read_input, report_to_string, write_counterexamples, write_grid,
    write_grid_plot_script, write_report, write_study, write_trace, AnalyzeOptions,
    RobustnessReport,
};

#[derive(Debug, Parser)]
#[command(
    name = "nu-analyzer",
    version,
    about = "Robustness measures for nonnegative magnitude matrices"
)]
pub struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, env = "NU_ANALYZER_THREADS", default_value_t = 0, global = true)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    /// One size, a log-spaced tolerance grid.
    Tol,
    /// A grid of sizes at one tolerance.
    Size,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchMode::Tol)]
    pub mode: BenchMode,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
    )]
    pub thetas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Matrix size in `tol` mode.
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    /// Sizes in `size` mode.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    pub sizes: Vec<usize>,
    /// Tolerances [default: 1e-1 down to 1e-5 in half decades in `tol`
    /// mode, 1e-3 in `size` mode].
    #[arg(long, value_delimiter = ',')]
    tols: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// `uniform` or `sparse:<density>`.
    #[arg(long, default_value = "uniform")]
    distribution: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report μ, ν̄, the subset lower bound on ν and, when available, ν.
    Analyze {
        /// Matrix CSV, or a JSON system description (`.json`).
        input: PathBuf,
        /// Also run the brute-force ν oracle (n ≤ 4 only).
        #[arg(long)]
        oracle: bool,
        /// Largest principal subset searched for the lower bound [default: min(n, 12)].
        #[arg(long)]
        subset_max: Option<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the local balancing heuristic and summarize the run.
    Balance {
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Update coordinates in place instead of simultaneously.
        #[arg(long)]
        gauss_seidel: bool,
    },
    /// Tabulate μ, ν and ν̄ over the family `[[x, w], [w, y]]` on `[0, 1]³`.
    Grid2x2 {
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iteration counts of the heuristic over random matrices.
    Bench(BenchArgs),
    /// Analyze a ring with the given arc weights (or `--n` unit weights).
    Ring {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct BalanceSummary {
    converged: bool,
    oscillating: bool,
    iterations: usize,
    objective: f64,
    nubar: f64,
    scaling: Vec<f64>,
}

fn emit_json(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn emit_report(report: &RobustnessReport, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_report(report, p),
        None => emit_json(&report_to_string(report)?, None),
    }
}

fn default_tols(mode: BenchMode) -> Vec<f64> {
    match mode {
        BenchMode::Tol => (2..=10).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect(),
        BenchMode::Size => vec![1e-3],
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let cfg = StudyConfig {
        ns: match args.mode {
            BenchMode::Tol => vec![args.n],
            BenchMode::Size => args.sizes,
        },
        trials: args.trials,
        thetas: args.thetas,
        tols: args.tols.unwrap_or_else(|| default_tols(args.mode)),
        seed: args.seed,
        max_iter: args.max_iter,
        distribution: args.distribution.parse::<MatrixDistribution>()?,
    };
    let out = args.out.as_path();
    let study = convergence_study(&cfg)?;
    write_study(&study.rows, out)?;
    let bad: Vec<_> = study
        .outcomes
        .iter()
        .filter(|o| !o.converged || o.relative_gap() > 1e-2)
        .collect();
    if !bad.is_empty() {
        let path = sibling(out, ".counterexamples.csv");
        write_counterexamples(&bad, &path)?;
        log::warn!(
            "{} runs missed convergence or the optimum; see {}",
            bad.len(),
            path.display()
        );
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    match cli.command {
        Command::Analyze {
            input,
            oracle,
            subset_max,
            tol,
            out,
        } => {
            let m = read_input(&input)?;
            let report = analyze(
                &m,
                &AnalyzeOptions {
                    subset_max,
                    tol,
                    oracle,
                },
            )?;
            emit_report(&report, out.as_deref())
        }
        Command::Balance {
            input,
            theta,
            max_iter,
            tol,
            trace,
            gauss_seidel,
        } => {
            let m = read_input(&input)?;
            let mode = if gauss_seidel {
                UpdateMode::GaussSeidel
            } else {
                UpdateMode::Synchronous
            };
            let t = heuristic_balance_with(
                &m,
                &BalanceOptions {
                    theta,
                    max_iter,
                    tol,
                    mode,
                },
            )?;
            if let Some(p) = &trace {
                write_trace(&t, p)?;
            }
            if t.oscillating {
                eprintln!("oscillation detected");
            }
            let summary = BalanceSummary {
                converged: t.converged,
                oscillating: t.oscillating,
                iterations: t.steps(),
                objective: t.final_objective(),
                nubar: crate::nubar::nubar_exact(&m).value,
                scaling: t.final_scaling.as_slice().to_vec(),
            };
            let text = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Serialize(e.to_string()))?;
            emit_json(&text, None)
        }
        Command::Grid2x2 { steps, out } => {
            let records = grid2x2(steps)?;
            write_grid(&records, &out)?;
            let name = out
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            write_grid_plot_script(&name, &sibling(&out, ".gp"))
        }
        Command::Bench(args) => run_bench(args),
        Command::Ring { n, weights, out } => {
            let weights = match (n, weights) {
                (None, None) => return Err(Error::validation("give --n or --weights")),
                (Some(n), None) => vec![1.0; n],
                (None, Some(w)) => w,
                (Some(n), Some(w)) if n == w.len() => w,
                (Some(n), Some(w)) => {
                    return Err(Error::validation(format!(
                        "--n {n} disagrees with {} weights",
                        w.len()
                    )))
                }
            };
            let m = MagnitudeMatrix::ring(&weights)?;
            let report = analyze(&m, &AnalyzeOptions::default())?;
            emit_report(&report, out.as_deref())
        }
    }
}
