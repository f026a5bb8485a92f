use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SamplerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Is,
    Ensrf,
    Enki,
    Wensrf,
    Wenki,
    Wenkf,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Wenki,
        Method::Wensrf,
        Method::Enki,
        Method::Ensrf,
        Method::Wenkf,
        Method::Is,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Is => "is",
            Method::Ensrf => "ensrf",
            Method::Enki => "enki",
            Method::Wensrf => "wensrf",
            Method::Wenki => "wenki",
            Method::Wenkf => "wenkf",
        }
    }

    /// `is` and `wenkf` produce their ensemble in one shot, without a time loop.
    pub fn is_single_shot(&self) -> bool {
        matches!(self, Method::Is | Method::Wenkf)
    }

    /// The flow methods that also evolve weights.
    pub fn is_weighted_flow(&self) -> bool {
        matches!(self, Method::Wensrf | Method::Wenki)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SamplerError::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
    /// Use `Σ wⁿ ·` statistics inside the flow instead of `1/N Σ ·`.
    /// Defaults to true for the weighted flows only.
    pub stats_weighted: bool,
}

impl SamplerConfig {
    pub fn new(method: Method, n_particles: usize, dt: f64, seed: u64) -> Self {
        SamplerConfig {
            method,
            n_particles,
            dt,
            seed,
            stats_weighted: method.is_weighted_flow(),
        }
    }

    /// Number of steps `M = 1/Δt`; `Δt` must divide one.
    pub fn steps(&self) -> Result<usize, SamplerError> {
        if self.n_particles == 0 {
            return Err(SamplerError::Config(
                "n_particles must be at least 1".into(),
            ));
        }
        if self.method.is_single_shot() {
            return Ok(1);
        }
        step_count(self.dt)
    }
}

/// `M = round(1/Δt)`, rejecting steps that do not divide the unit interval.
pub fn step_count(dt: f64) -> Result<usize, SamplerError> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(SamplerError::Config(format!(
            "dt = {dt} must lie in (0, 1]"
        )));
    }
    let m = (1.0 / dt).round();
    if (m * dt - 1.0).abs() > 1e-12 {
        return Err(SamplerError::Config(format!("dt = {dt} does not divide 1")));
    }
    Ok(m as usize)
}
