use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use wenk::ensemble::{weight_variance, weighted_moment};
use wenk::oracle::{GridOracle, GridSpec};
use wenk::samplers::{
    importance_weights_at, prior_ensemble, run_with, step_count, Method, SamplerConfig,
};
use wenk::{builtin_problem, InverseProblem, ProblemId, RandomSource, WeightedEnsemble};

use crate::config::{ExperimentConfig, ProblemSpec};
use crate::io::{
    write_oracle, write_variance_report, write_weight_variance, Histogram, OracleRow,
    TrajectoryWriter, VarianceRow,
};
use crate::table::{write_moment_tables, MomentTable};
use crate::CliError;

pub const HISTOGRAM_BINS: usize = 100;

/// Outcome of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub table: MomentTable,
    pub wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    config: &'a ExperimentConfig,
    dt: f64,
    files: Vec<String>,
    seed_seconds: Vec<(u64, f64)>,
    wall_clock_seconds: f64,
    version: &'static str,
}

fn sampler_error(seed: u64) -> impl Fn(wenk::samplers::SamplerError) -> CliError {
    move |source| CliError::Sampler { seed, source }
}

/// Final ensemble of one seed; snapshots go to `observer`.
pub fn run_seed<F>(
    problem: &InverseProblem,
    config: &SamplerConfig,
    observer: F,
) -> Result<(WeightedEnsemble, Vec<(f64, f64)>), CliError>
where
    F: FnMut(usize, &WeightedEnsemble),
{
    let out = run_with(problem, config, observer).map_err(sampler_error(config.seed))?;
    Ok((out.final_ensemble, out.weight_variance))
}

pub fn moments(e: &WeightedEnsemble, orders: &[u32]) -> Vec<f64> {
    orders.iter().map(|k| weighted_moment(e, *k)).collect()
}

pub fn oracle_moments_at(
    problem: &InverseProblem,
    t: f64,
    orders: &[u32],
    grid: &GridSpec,
) -> Result<Vec<f64>, CliError> {
    let o = GridOracle::new(problem, t, grid)?;
    Ok(orders.iter().map(|k| o.grid_moment(*k)).collect())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Runs every seed of `config`, writing per seed the trajectory, the
/// weight-variance series and the final histogram, then the moment table
/// and `run_metadata.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let problem = config.validate()?;
    let started = Instant::now();
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let grid = config.grid_for(problem.dim_in());
    let oracle = oracle_moments_at(&problem, 1.0, &config.moment_orders, &grid)?;

    let mut files = Vec::new();
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    let mut seed_seconds = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let seed_start = Instant::now();
        let sc = config.sampler_config(seed);
        let last = sc.steps().map_err(sampler_error(seed))?;
        let traj_path = dir.join(format!("seed{seed}_trajectory.csv"));
        let mut writer = TrajectoryWriter::create(&traj_path, problem.dim_in())?;
        let mut write_err = None;
        let (final_e, series) = run_seed(&problem, &sc, |step, e| {
            let keep =
                step % config.snapshot_stride == 0 || step == last || sc.method.is_single_shot();
            if keep && write_err.is_none() {
                if let Err(err) = writer.write(e) {
                    write_err = Some(err);
                }
            }
        })?;
        if let Some(err) = write_err {
            return Err(err);
        }
        writer.finish()?;
        files.push(traj_path);

        let var_path = dir.join(format!("seed{seed}_weight_variance.csv"));
        write_weight_variance(&var_path, &series)?;
        files.push(var_path);

        let hist_path = dir.join(format!("seed{seed}_histogram.csv"));
        Histogram::from_ensemble(&final_e, &grid, HISTOGRAM_BINS).write(&hist_path)?;
        files.push(hist_path);

        per_seed.push((seed, moments(&final_e, &config.moment_orders)));
        seed_seconds.push((seed, seed_start.elapsed().as_secs_f64()));
    }

    let table = MomentTable::from_estimates(
        &config.problem.name(),
        config.method,
        &config.moment_orders,
        &oracle,
        &per_seed,
    );
    let table_path = dir.join("moments.csv");
    write_moment_tables(&table_path, std::slice::from_ref(&table))?;
    files.push(table_path);

    let wall_clock_seconds = started.elapsed().as_secs_f64();
    let meta_path = dir.join("run_metadata.json");
    let mut names: Vec<String> = files.iter().map(|p| file_name(p)).collect();
    names.push(file_name(&meta_path));
    let meta = RunMetadata {
        config,
        dt: config.dt(),
        files: names,
        seed_seconds,
        wall_clock_seconds,
        version: env!("CARGO_PKG_VERSION"),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(&meta_path, text).map_err(|e| CliError::io(&meta_path, e))?;
    files.push(meta_path);

    Ok(RunSummary {
        files,
        table,
        wall_clock_seconds,
    })
}

/// Particle counts of the reference moment tables.
pub fn table_particles(example: ProblemId) -> Result<usize, CliError> {
    match example {
        ProblemId::Example3 => Ok(2000),
        ProblemId::Example5 => Ok(1000),
        other => Err(CliError::Config(format!(
            "moment tables exist for example3 and example5, not {other}"
        ))),
    }
}

pub const TABLE_DT: f64 = 1e-3;
pub const TABLE_ORDERS: [u32; 5] = [1, 2, 3, 4, 5];

/// Moment tables of all six methods on one example.
#[derive(Clone, Debug)]
pub struct TableSet {
    pub example: ProblemId,
    pub oracle: Vec<f64>,
    pub tables: Vec<MomentTable>,
}

impl TableSet {
    pub fn table(&self, method: Method) -> Option<&MomentTable> {
        self.tables.iter().find(|t| t.method == method)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(format!("table_{}.csv", self.example));
        write_moment_tables(&path, &self.tables)?;
        Ok(path)
    }
}

/// All six methods with the reference table settings, averaged over `seeds`.
pub fn reproduce_table(example: ProblemId, seeds: &[u64]) -> Result<TableSet, CliError> {
    let n = table_particles(example)?;
    if seeds.is_empty() {
        return Err(CliError::Config("seeds must not be empty".into()));
    }
    let problem = builtin_problem(example);
    let grid = GridSpec::default_for(problem.dim_in());
    let oracle = oracle_moments_at(&problem, 1.0, &TABLE_ORDERS, &grid)?;
    let mut tables = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let sc = SamplerConfig::new(method, n, TABLE_DT, seed);
            let (e, _) = run_seed(&problem, &sc, |_, _| {})?;
            per_seed.push((seed, moments(&e, &TABLE_ORDERS)));
        }
        tables.push(MomentTable::from_estimates(
            example.as_str(),
            method,
            &TABLE_ORDERS,
            &oracle,
            &per_seed,
        ));
    }
    Ok(TableSet {
        example,
        oracle,
        tables,
    })
}

/// Overrides for [`weight_variance_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    pub n_particles: usize,
    /// Defaults per problem when absent.
    pub dt: Option<f64>,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            n_particles: 1000,
            dt: None,
            seed: 0,
        }
    }
}

/// `log(Var(Nw) + 1)` over time. Importance sampling weighs one set of
/// prior draws by `exp(-tΦ)` at each time of the flow grid.
pub fn weight_variance_report(
    example: &ProblemSpec,
    methods: &[Method],
    opts: &ReportOptions,
) -> Result<Vec<VarianceRow>, CliError> {
    if let Some(m) = methods
        .iter()
        .find(|m| !matches!(m, Method::Is | Method::Wenki | Method::Wensrf))
    {
        return Err(CliError::Config(format!(
            "weight-variance report supports is, wenki and wensrf, not {m}"
        )));
    }
    if opts.n_particles == 0 {
        return Err(CliError::Config("n_particles must be at least 1".into()));
    }
    let problem = example.build()?;
    let dt = opts.dt.unwrap_or_else(|| example.default_dt());
    let steps = step_count(dt).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for &method in methods {
        let series: Vec<(f64, f64)> = match method {
            Method::Is => {
                let mut rng = RandomSource::new(opts.seed);
                let prior = prior_ensemble(&problem, opts.n_particles, &mut rng)
                    .map_err(sampler_error(opts.seed))?;
                (0..=steps)
                    .map(|m| {
                        let t = m as f64 / steps as f64;
                        let e = importance_weights_at(&problem, prior.particles(), t)
                            .map_err(sampler_error(opts.seed))?;
                        Ok((t, weight_variance(&e)))
                    })
                    .collect::<Result<_, CliError>>()?
            }
            _ => {
                let sc = SamplerConfig::new(method, opts.n_particles, dt, opts.seed);
                run_seed(&problem, &sc, |_, _| {})?.1
            }
        };
        rows.extend(series.into_iter().map(|(t, v)| VarianceRow {
            t,
            method: method.to_string(),
            log_var_plus_one: v.ln_1p(),
        }));
    }
    Ok(rows)
}

pub fn write_report(dir: &Path, example: &str, rows: &[VarianceRow]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(format!("weight_variance_{example}.csv"));
    write_variance_report(&path, rows)?;
    Ok(path)
}

/// Quadrature moments `E|u|ᵏ` at time `t`.
pub fn oracle_rows(
    example: &ProblemSpec,
    t: f64,
    orders: &[u32],
    grid: Option<&GridSpec>,
) -> Result<Vec<OracleRow>, CliError> {
    let problem = example.build()?;
    let grid = grid
        .cloned()
        .unwrap_or_else(|| GridSpec::default_for(problem.dim_in()));
    let values = oracle_moments_at(&problem, t, orders, &grid)?;
    Ok(orders
        .iter()
        .zip(values)
        .map(|(k, value)| OracleRow {
            example: example.name(),
            t,
            k: *k,
            value,
        })
        .collect())
}

pub fn write_oracle_rows(dir: &Path, rows: &[OracleRow]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("oracle.csv");
    write_oracle(&path, rows)?;
    Ok(path)
}
