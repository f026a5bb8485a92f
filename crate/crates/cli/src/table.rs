use std::path::Path;

use wenk::samplers::Method;

use crate::io::{create as create_csv, fmt_f64, parse_f64, parse_int, read_rows};
use crate::CliError;

/// One `(k, oracle, estimate, relative error)` entry. `seed` is `None` for
/// the seed-mean row.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRow {
    pub seed: Option<u64>,
    pub k: u32,
    pub oracle: f64,
    pub estimate: f64,
    pub rel_error: f64,
}

impl MomentRow {
    pub fn new(seed: Option<u64>, k: u32, oracle: f64, estimate: f64) -> Self {
        MomentRow {
            seed,
            k,
            oracle,
            estimate,
            rel_error: (estimate - oracle).abs() / oracle.abs(),
        }
    }
}

/// Moment estimates of one method on one problem: per-seed rows followed
/// by seed-mean rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    pub example: String,
    pub method: Method,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    /// `oracle[i]` is the reference for `orders[i]`; `per_seed[s].1[i]` the
    /// estimate of seed `s`.
    pub fn from_estimates(
        example: &str,
        method: Method,
        orders: &[u32],
        oracle: &[f64],
        per_seed: &[(u64, Vec<f64>)],
    ) -> Self {
        let mut rows = Vec::with_capacity((per_seed.len() + 1) * orders.len());
        for (seed, est) in per_seed {
            for ((k, o), e) in orders.iter().zip(oracle).zip(est) {
                rows.push(MomentRow::new(Some(*seed), *k, *o, *e));
            }
        }
        let n = per_seed.len() as f64;
        for (i, (k, o)) in orders.iter().zip(oracle).enumerate() {
            let mean = per_seed.iter().map(|(_, est)| est[i]).sum::<f64>() / n;
            rows.push(MomentRow::new(None, *k, *o, mean));
        }
        MomentTable {
            example: example.to_string(),
            method,
            rows,
        }
    }

    pub fn mean_rows(&self) -> impl Iterator<Item = &MomentRow> {
        self.rows.iter().filter(|r| r.seed.is_none())
    }

    pub fn mean_row(&self, k: u32) -> Option<&MomentRow> {
        self.mean_rows().find(|r| r.k == k)
    }

    /// Largest seed-mean relative error over the table's moment orders.
    pub fn max_rel_error(&self) -> f64 {
        self.mean_rows().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    /// Largest discrepancy between the stored and the recomputed relative
    /// error column.
    pub fn consistency_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.rel_error - (r.estimate - r.oracle).abs() / r.oracle.abs()).abs())
            .fold(0.0, f64::max)
    }
}

const HEADER: [&str; 7] = [
    "example",
    "method",
    "seed",
    "k",
    "oracle",
    "estimate",
    "rel_error",
];

/// `example,method,seed,k,oracle,estimate,rel_error`; the seed column holds
/// `mean` on aggregate rows.
pub fn write_moment_tables(path: &Path, tables: &[MomentTable]) -> Result<(), CliError> {
    let mut w = create_csv(path)?;
    w.write_record(HEADER)?;
    for t in tables {
        for r in &t.rows {
            w.write_record([
                t.example.clone(),
                t.method.to_string(),
                r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
                r.k.to_string(),
                fmt_f64(r.oracle),
                fmt_f64(r.estimate),
                fmt_f64(r.rel_error),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_moment_tables(path: &Path) -> Result<Vec<MomentTable>, CliError> {
    let mut tables: Vec<MomentTable> = Vec::new();
    for r in read_rows(path, &HEADER)? {
        let method: Method = r[1]
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let row = MomentRow {
            seed: match &r[2] {
                "mean" => None,
                s => Some(parse_int(s)?),
            },
            k: parse_int(&r[3])?,
            oracle: parse_f64(&r[4])?,
            estimate: parse_f64(&r[5])?,
            rel_error: parse_f64(&r[6])?,
        };
        match tables.last_mut() {
            Some(t) if t.example == r[0] && t.method == method => t.rows.push(row),
            _ => tables.push(MomentTable {
                example: r[0].to_string(),
                method,
                rows: vec![row],
            }),
        }
    }
    Ok(tables)
}
