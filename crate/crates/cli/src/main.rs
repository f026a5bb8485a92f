use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wenk::samplers::Method;
use wenk::ProblemId;
use wenk_cli::experiment::{oracle_rows, write_oracle_rows, write_report};
use wenk_cli::{
    reproduce_table, run_experiment, weight_variance_report, CliError, ExperimentConfig,
    ProblemSpec, ReportOptions,
};

#[derive(Parser)]
#[command(
    name = "wenk",
    version,
    about = "Weighted ensemble Kalman sampler experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs only this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Moment tables of all six methods (example3 or example5).
    Table {
        #[arg(long)]
        example: ProblemId,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Runs only this seed instead of 0..9.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// `log(Var(Nw)+1)` series for is, wenki and wensrf.
    Variance {
        #[arg(long)]
        example: ProblemId,
        #[arg(long, value_delimiter = ',', default_value = "is,wenki,wensrf")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 1000)]
        n_particles: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Quadrature moments `E|u|^k` of the tempered density.
    Oracle {
        #[arg(long)]
        example: ProblemId,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        k: Vec<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Accepted for interface uniformity; the oracle is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let summary = run_experiment(&cfg)?;
            println!("k,oracle,estimate,rel_error");
            for r in summary.table.mean_rows() {
                println!(
                    "{},{:.6},{:.6},{:.6}",
                    r.k, r.oracle, r.estimate, r.rel_error
                );
            }
            eprintln!(
                "wrote {} files to {} in {:.1}s",
                summary.files.len(),
                cfg.out_dir.display(),
                summary.wall_clock_seconds
            );
        }
        Command::Table { example, out, seed } => {
            let seeds: Vec<u64> = seed.map_or_else(|| (0..10).collect(), |s| vec![s]);
            let set = reproduce_table(example, &seeds)?;
            let path = set.write(&out)?;
            println!("method,k,oracle,estimate,rel_error");
            for t in &set.tables {
                for r in t.mean_rows() {
                    println!(
                        "{},{},{:.6},{:.6},{:.6}",
                        t.method, r.k, r.oracle, r.estimate, r.rel_error
                    );
                }
            }
            eprintln!("wrote {}", path.display());
        }
        Command::Variance {
            example,
            methods,
            n_particles,
            dt,
            out,
            seed,
        } => {
            let opts = ReportOptions {
                n_particles,
                dt,
                seed,
            };
            let rows = weight_variance_report(&ProblemSpec::Builtin(example), &methods, &opts)?;
            let path = write_report(&out, example.as_str(), &rows)?;
            for m in &methods {
                if let Some(last) = rows.iter().rev().find(|r| r.method == m.as_str()) {
                    println!("{m}: log(Var+1) at t=1 is {:.6}", last.log_var_plus_one);
                }
            }
            eprintln!("wrote {}", path.display());
        }
        Command::Oracle {
            example,
            t,
            k,
            out,
            seed: _,
        } => {
            let rows = oracle_rows(&ProblemSpec::Builtin(example), t, &k, None)?;
            let path = write_oracle_rows(&out, &rows)?;
            println!("example,t,k,value");
            for r in &rows {
                println!("{},{},{},{:.10}", r.example, r.t, r.k, r.value);
            }
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
