//! Experiment configuration, receiver specifications and presets.
//!
//! The configuration is a flat TOML document whose keys are the fields of
//! [`ExperimentConfig`]. Receivers are written as short strings:
//!
//! ```text
//! jio-mber:8           fixed rank 8
//! jio-mber:auto(3,20)  automatic rank selection in [3, 20]
//! mwf-mber:8  eig:8  jio-lms:8  mwf-lms:8
//! full-rank-mber  full-rank-lms
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::channel::{noise_variance_for_snr, ChannelConfig};
use crate::complexity::Algorithm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankSpec {
    Fixed(usize),
    Auto { min: usize, max: usize },
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ReceiverSpec {
    pub algorithm: Algorithm,
    pub rank: RankSpec,
}

impl ReceiverSpec {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Largest rank the receiver uses, `M` for full-rank receivers.
    pub fn max_rank(&self, num_antennas: usize) -> usize {
        match self.rank {
            RankSpec::Fixed(d) => d,
            RankSpec::Auto { max, .. } => max,
            RankSpec::Full => num_antennas,
        }
    }

    pub fn validate(&self, num_antennas: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::config("receivers", self, reason));
        match self.rank {
            RankSpec::Fixed(d) if d == 0 || d > num_antennas => bad(format!("rank must be in [1, {num_antennas}]")),
            RankSpec::Auto { min, max } if min == 0 || min > max || max > num_antennas => {
                bad(format!("need 1 <= D_min <= D_max <= {num_antennas}"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ReceiverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.algorithm.label())?;
        match self.rank {
            RankSpec::Fixed(d) => write!(f, ":{d}"),
            RankSpec::Auto { min, max } => write!(f, ":auto({min},{max})"),
            RankSpec::Full => Ok(()),
        }
    }
}

impl FromStr for ReceiverSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::config("receivers", s, reason);
        let (name, rank) = match s.trim().split_once(':') {
            Some((name, rank)) => (name.trim(), Some(rank.trim())),
            None => (s.trim(), None),
        };
        let algorithm = match name {
            "jio-mber" => Algorithm::JioMber,
            other => BaselineKind::ALL
                .into_iter()
                .find(|k| k.label() == other)
                .map(Algorithm::Baseline)
                .ok_or_else(|| bad("unknown receiver; expected one of jio-mber, full-rank-lms, full-rank-mber, jio-lms, mwf-lms, mwf-mber, eig"))?,
        };
        let full = matches!(algorithm, Algorithm::Baseline(k) if k.is_full_rank());
        let rank = match (full, rank) {
            (true, None) => RankSpec::Full,
            (true, Some(_)) => return Err(bad("full-rank receivers take no rank")),
            (false, None) => return Err(bad("reduced-rank receivers need a rank, e.g. `:8`")),
            (false, Some(r)) => {
                if let Some(inner) = r.strip_prefix("auto(").and_then(|r| r.strip_suffix(')')) {
                    if algorithm != Algorithm::JioMber {
                        return Err(bad("automatic rank selection is only available for jio-mber"));
                    }
                    let (lo, hi) = inner.split_once(',').ok_or_else(|| bad("expected auto(D_min,D_max)"))?;
                    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("rank bounds must be integers"));
                    RankSpec::Auto {
                        min: parse(lo)?,
                        max: parse(hi)?,
                    }
                } else {
                    RankSpec::Fixed(r.parse().map_err(|_| bad("rank must be a positive integer or auto(D_min,D_max)"))?)
                }
            }
        };
        Ok(Self { algorithm, rank })
    }
}

impl TryFrom<String> for ReceiverSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ReceiverSpec> for String {
    fn from(spec: ReceiverSpec) -> String {
        spec.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    /// Learning curve over the received symbols of one configuration.
    Symbols,
    Snr,
    Users,
    Doppler,
}

impl Sweep {
    pub fn axis_name(self) -> &'static str {
        match self {
            Sweep::Symbols => "symbol",
            Sweep::Snr => "snr_db",
            Sweep::Users => "num_users",
            Sweep::Doppler => "doppler",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_antennas: usize,
    pub num_users: usize,
    pub snr_db: f64,
    /// `f_d T_s`, cycles per symbol.
    pub doppler: f64,
    /// Per-user amplitudes; empty means unit amplitude for every user.
    pub amplitudes: Vec<f64>,
    /// `rho = kernel_radius_factor * sigma`.
    pub kernel_radius_factor: f64,
    /// JIO-MBER filter step `mu_w`.
    pub step_w: f64,
    /// JIO-MBER projection step `mu_S`.
    pub step_s: f64,
    pub step_lms: f64,
    pub step_mber: f64,
    /// Step of the conventional reduced-rank receivers.
    pub step_reduced: f64,
    /// Forgetting factor of the MWF and EIG covariance estimates.
    pub forgetting: f64,
    pub receivers: Vec<ReceiverSpec>,
    pub training_symbols: usize,
    pub data_symbols: usize,
    pub monte_carlo_runs: usize,
    pub sweep: Sweep,
    /// Values of the swept parameter; unused for the symbols sweep.
    pub grid: Vec<f64>,
    /// Sliding window (symbols) of learning curves and terminal BER.
    pub window: usize,
    pub base_seed: u64,
}

/// Preset names accepted by [`preset`].
pub const PRESETS: [&str; 9] = ["fig2", "fig3", "fig4", "fig5", "fading", "fig6", "ci", "high-load", "snr-ci"];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.num_antennas;
        self.channel_at(self.grid.first().copied(), 0)?;
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, v, "must be positive"))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, v, "must be non-negative"))
            }
        };
        positive("kernel_radius_factor", self.kernel_radius_factor)?;
        for (key, v) in [
            ("step_w", self.step_w),
            ("step_s", self.step_s),
            ("step_lms", self.step_lms),
            ("step_mber", self.step_mber),
            ("step_reduced", self.step_reduced),
        ] {
            non_negative(key, v)?;
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::config("forgetting", self.forgetting, "must be in (0, 1]"));
        }
        if self.receivers.is_empty() {
            return Err(Error::config("receivers", "[]", "at least one receiver is required"));
        }
        for spec in &self.receivers {
            spec.validate(m)?;
        }
        if self.data_symbols == 0 {
            return Err(Error::config("data_symbols", 0, "must be at least 1"));
        }
        if self.monte_carlo_runs == 0 {
            return Err(Error::config("monte_carlo_runs", 0, "must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::config("window", 0, "must be at least 1"));
        }
        if self.base_seed > i64::MAX as u64 {
            return Err(Error::config("base_seed", self.base_seed, "must fit in a signed 64-bit integer"));
        }
        if self.sweep != Sweep::Symbols {
            if self.grid.is_empty() {
                return Err(Error::config("grid", "[]", "sweeps over snr, users or doppler need a non-empty grid"));
            }
            if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::config("grid", format!("{:?}", self.grid), "must be strictly increasing"));
            }
            for g in 0..self.grid.len() {
                self.channel_at(Some(self.grid[g]), 0)?;
            }
        }
        Ok(())
    }

    /// Grid of the swept parameter; the symbols sweep has a single point.
    pub fn points(&self) -> Vec<Option<f64>> {
        match self.sweep {
            Sweep::Symbols => vec![None],
            _ => self.grid.iter().copied().map(Some).collect(),
        }
    }

    /// Channel of one grid point for one run seed.
    pub fn channel_at(&self, point: Option<f64>, seed: u64) -> Result<ChannelConfig> {
        let (mut snr, mut users, mut doppler) = (self.snr_db, self.num_users, self.doppler);
        match (self.sweep, point) {
            (Sweep::Snr, Some(v)) => snr = v,
            (Sweep::Users, Some(v)) => {
                if !(v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64) {
                    return Err(Error::config("grid", v, "user counts must be positive integers"));
                }
                users = v as usize;
            }
            (Sweep::Doppler, Some(v)) => doppler = v,
            _ => {}
        }
        if !snr.is_finite() {
            return Err(Error::config("snr_db", snr, "must be finite"));
        }
        let amplitudes = if self.amplitudes.is_empty() {
            vec![1.0; users]
        } else {
            self.amplitudes.clone()
        };
        let first = amplitudes.first().copied().unwrap_or(1.0);
        let config = ChannelConfig {
            num_users: users,
            num_antennas: self.num_antennas,
            amplitudes,
            noise_variance: noise_variance_for_snr(snr, first),
            normalized_doppler: doppler,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (key, value) = locate(&e, text);
            Error::config(key, value, e.message())
        })
    }

    /// Sets one top-level key from its textual value. The value is read as a
    /// TOML value when possible and as a bare string otherwise, so both
    /// `snr_db=10` and `sweep=snr` work.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).expect("configuration serializes to a table");
        if !table.contains_key(key) {
            let known: Vec<&str> = table.keys().map(String::as_str).collect();
            return Err(Error::config(key, value, format!("unknown key; known keys: {}", known.join(", "))));
        }
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let parsed = match (key, parsed) {
            // a single receiver may be given without list brackets
            ("receivers", toml::Value::String(s)) => toml::Value::Array(
                s.split(';').map(|p| toml::Value::String(p.trim().to_string())).collect(),
            ),
            (_, v) => v,
        };
        table.insert(key.to_string(), parsed);
        *self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(key, value, e.message()))?;
        Ok(())
    }
}

/// Key and value text of the line a TOML error points at.
fn locate(e: &toml::de::Error, text: &str) -> (String, String) {
    let quoted = e.message().split('`').nth(1).map(str::to_string);
    let line = e.span().and_then(|span| {
        let start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
        text[start..].lines().next()
    });
    match line.and_then(|l| l.split_once('=')) {
        Some((key, value)) => (key.trim().to_string(), value.trim().to_string()),
        None => (quoted.unwrap_or_else(|| "config".to_string()), line.unwrap_or_default().trim().to_string()),
    }
}

fn parse_receivers(list: &[&str]) -> Vec<ReceiverSpec> {
    list.iter().map(|s| s.parse().expect("preset receiver strings are valid")).collect()
}

/// Receivers compared in the simulation figures.
pub const FIGURE_RECEIVERS: [&str; 6] = [
    "jio-mber:auto(3,20)",
    "jio-mber:8",
    "full-rank-mber",
    "mwf-mber:8",
    "eig:8",
    "full-rank-lms",
];

fn figure_base() -> ExperimentConfig {
    ExperimentConfig {
        num_antennas: 32,
        num_users: 7,
        snr_db: 15.0,
        doppler: 1e-5,
        amplitudes: Vec::new(),
        kernel_radius_factor: 2.0,
        step_w: 0.01,
        step_s: 0.025,
        step_lms: 0.085,
        step_mber: 0.05,
        step_reduced: 0.035,
        forgetting: 0.998,
        receivers: parse_receivers(&FIGURE_RECEIVERS),
        training_symbols: 250,
        data_symbols: 1500,
        monte_carlo_runs: 100,
        sweep: Sweep::Symbols,
        grid: Vec::new(),
        window: 200,
        base_seed: 1,
    }
}

/// Named experiment configurations.
///
/// `fig2`/`fig3` are learning curves with 7 and 17 users, `fig4` sweeps the
/// SNR with 10 users, `fig5` sweeps the number of users and `fading` (alias
/// `fig6`) sweeps the fading rate with 17 users. `ci` is a reduced
/// learning-curve setup (M = 16, K = 8, 30 runs), `high-load` is `fig3` at
/// 20 runs without the eigen-decomposition receiver and `snr-ci` is `fig4`
/// at 20 runs on the same receivers.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = figure_base();
    let config = match name {
        "fig2" => base,
        "fig3" => ExperimentConfig { num_users: 17, ..base },
        "fig4" => ExperimentConfig {
            num_users: 10,
            sweep: Sweep::Snr,
            grid: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
            ..base
        },
        "fig5" => ExperimentConfig {
            sweep: Sweep::Users,
            grid: vec![4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0],
            ..base
        },
        "fading" | "fig6" => ExperimentConfig {
            num_users: 17,
            sweep: Sweep::Doppler,
            grid: vec![1e-6, 1e-5, 1e-4, 1e-3],
            ..base
        },
        "ci" => ExperimentConfig {
            num_antennas: 16,
            num_users: 8,
            receivers: parse_receivers(&["jio-mber:auto(3,16)", "jio-mber:8", "full-rank-mber", "mwf-mber:8", "full-rank-lms"]),
            monte_carlo_runs: 30,
            ..base
        },
        "high-load" => ExperimentConfig {
            num_users: 17,
            receivers: parse_receivers(&["jio-mber:8", "full-rank-mber"]),
            monte_carlo_runs: 20,
            ..base
        },
        "snr-ci" => ExperimentConfig {
            num_users: 10,
            sweep: Sweep::Snr,
            grid: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
            receivers: parse_receivers(&["jio-mber:auto(3,20)", "jio-mber:8", "full-rank-mber", "mwf-mber:8", "full-rank-lms"]),
            monte_carlo_runs: 20,
            ..base
        },
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                valid: PRESETS.join(", "),
            })
        }
    };
    Ok(config)
}
