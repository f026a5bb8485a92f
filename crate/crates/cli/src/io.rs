//! CSV artifacts. Floats are written with 17 significant digits so that
//! parsing a file reproduces the in-memory values exactly.

use std::fs::File;
use std::path::{Path, PathBuf};

use wenk::oracle::GridSpec;
use wenk::WeightedEnsemble;

use crate::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("not a number: {s:?}")))
}

pub(crate) fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("not an integer: {s:?}")))
}

pub(crate) fn create(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub(crate) fn read_rows(
    path: &Path,
    expected_header: &[&str],
) -> Result<Vec<csv::StringRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers()?.clone();
    let prefix_ok = expected_header
        .iter()
        .zip(header.iter())
        .all(|(a, b)| *a == b);
    if !prefix_ok || header.len() < expected_header.len() {
        return Err(CliError::Config(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header
        )));
    }
    Ok(reader.records().collect::<Result<_, _>>()?)
}

/// Streams snapshots as `t,particle_index,w,u_1..u_L`.
pub struct TrajectoryWriter {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl TrajectoryWriter {
    pub fn create(path: &Path, dim: usize) -> Result<Self, CliError> {
        let mut writer = create(path)?;
        let mut header = vec!["t".to_string(), "particle_index".into(), "w".into()];
        header.extend((1..=dim).map(|i| format!("u_{i}")));
        writer.write_record(&header)?;
        Ok(TrajectoryWriter {
            writer,
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, e: &WeightedEnsemble) -> Result<(), CliError> {
        let t = fmt_f64(e.t());
        for (i, (u, w)) in e.particles().iter().zip(e.weights()).enumerate() {
            let mut rec = vec![t.clone(), i.to_string(), fmt_f64(w)];
            rec.extend(u.iter().map(|x| fmt_f64(*x)));
            self.writer.write_record(&rec)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub particle_index: usize,
    pub w: f64,
    pub u: Vec<f64>,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    read_rows(path, &["t", "particle_index", "w"])?
        .iter()
        .map(|r| {
            Ok(TrajectoryRow {
                t: parse_f64(&r[0])?,
                particle_index: parse_int(&r[1])?,
                w: parse_f64(&r[2])?,
                u: r.iter().skip(3).map(parse_f64).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

/// `t,var_nw`
pub fn write_weight_variance(path: &Path, series: &[(f64, f64)]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["t", "var_nw"])?;
    for (t, v) in series {
        w.write_record([fmt_f64(*t), fmt_f64(*v)])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_weight_variance(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    read_rows(path, &["t", "var_nw"])?
        .iter()
        .map(|r| Ok((parse_f64(&r[0])?, parse_f64(&r[1])?)))
        .collect()
}

/// Weighted counts on a uniform tensor grid of bins; particles outside the
/// bounds are not counted.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bins: usize,
    /// Row-major over axes, first axis slowest.
    pub weights: Vec<f64>,
}

impl Histogram {
    pub fn from_ensemble(e: &WeightedEnsemble, grid: &GridSpec, bins: usize) -> Self {
        let dim = e.dim();
        let mut weights = vec![0.0; bins.pow(dim as u32)];
        for (u, w) in e.particles().iter().zip(e.weights()) {
            let mut index = 0;
            let mut inside = true;
            for a in 0..dim {
                let width = (grid.upper[a] - grid.lower[a]) / bins as f64;
                let pos = (u[a] - grid.lower[a]) / width;
                if !(0.0..=bins as f64).contains(&pos) {
                    inside = false;
                    break;
                }
                index = index * bins + (pos as usize).min(bins - 1);
            }
            if inside {
                weights[index] += w;
            }
        }
        Histogram {
            lower: grid.lower.clone(),
            upper: grid.upper.clone(),
            bins,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn edges(&self, axis: usize, b: usize) -> (f64, f64) {
        let width = (self.upper[axis] - self.lower[axis]) / self.bins as f64;
        (
            self.lower[axis] + b as f64 * width,
            self.lower[axis] + (b + 1) as f64 * width,
        )
    }

    /// `u_1_lower,u_1_upper[,u_2_lower,u_2_upper],weight`
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = create(path)?;
        let mut header = Vec::new();
        for a in 1..=self.dim() {
            header.push(format!("u_{a}_lower"));
            header.push(format!("u_{a}_upper"));
        }
        header.push("weight".into());
        w.write_record(&header)?;
        for (flat, weight) in self.weights.iter().enumerate() {
            let mut rec = Vec::with_capacity(header.len());
            let mut rest = flat;
            let mut idx = vec![0; self.dim()];
            for a in (0..self.dim()).rev() {
                idx[a] = rest % self.bins;
                rest /= self.bins;
            }
            for (a, b) in idx.iter().enumerate() {
                let (lo, hi) = self.edges(a, *b);
                rec.push(fmt_f64(lo));
                rec.push(fmt_f64(hi));
            }
            rec.push(fmt_f64(*weight));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

/// Bin edges per axis and the weight.
pub type HistogramRow = (Vec<(f64, f64)>, f64);

pub fn read_histogram(path: &Path) -> Result<Vec<HistogramRow>, CliError> {
    read_rows(path, &["u_1_lower", "u_1_upper"])?
        .iter()
        .map(|r| {
            let vals: Vec<f64> = r.iter().map(parse_f64).collect::<Result<_, _>>()?;
            let (edges, w) = vals.split_at(vals.len() - 1);
            Ok((edges.chunks(2).map(|c| (c[0], c[1])).collect(), w[0]))
        })
        .collect()
}

/// One row of `t,method,log_var_plus_one`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub t: f64,
    pub method: String,
    pub log_var_plus_one: f64,
}

pub fn write_variance_report(path: &Path, rows: &[VarianceRow]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["t", "method", "log_var_plus_one"])?;
    for r in rows {
        w.write_record([fmt_f64(r.t), r.method.clone(), fmt_f64(r.log_var_plus_one)])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_variance_report(path: &Path) -> Result<Vec<VarianceRow>, CliError> {
    read_rows(path, &["t", "method", "log_var_plus_one"])?
        .iter()
        .map(|r| {
            Ok(VarianceRow {
                t: parse_f64(&r[0])?,
                method: r[1].to_string(),
                log_var_plus_one: parse_f64(&r[2])?,
            })
        })
        .collect()
}

/// One row of `example,t,k,value`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub example: String,
    pub t: f64,
    pub k: u32,
    pub value: f64,
}

pub fn write_oracle(path: &Path, rows: &[OracleRow]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["example", "t", "k", "value"])?;
    for r in rows {
        w.write_record([
            r.example.clone(),
            fmt_f64(r.t),
            r.k.to_string(),
            fmt_f64(r.value),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_oracle(path: &Path) -> Result<Vec<OracleRow>, CliError> {
    read_rows(path, &["example", "t", "k", "value"])?
        .iter()
        .map(|r| {
            Ok(OracleRow {
                example: r[0].to_string(),
                t: parse_f64(&r[1])?,
                k: parse_int(&r[2])?,
                value: parse_f64(&r[3])?,
            })
        })
        .collect()
}
