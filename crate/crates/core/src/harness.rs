//! Monte-Carlo BER experiments.
//!
//! A run draws one channel trajectory with its symbols and noise, and
//! feeds every configured receiver the same received vectors in lockstep:
//! training symbols first, then decision-directed data symbols. Only data
//! symbols of the desired user (user 1) are scored. Runs are independent
//! and may execute in parallel; results are always reduced in run order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineParams, BaselineReceiver};
use crate::channel::{ChannelConfig, SignalSource};
use crate::complexity::Algorithm;
use crate::config::{ExperimentConfig, RankSpec, ReceiverSpec, Sweep};
use crate::error::{Error, Result};
use crate::jio_mber::JioMberReceiver;
use crate::linalg::ComplexVector;
use crate::rank_selection::RankBank;
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` at grid point `grid_index`. Adding grid points or
/// runs never changes the seeds of existing ones.
pub fn derive_seed(base_seed: u64, grid_index: usize, run: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ splitmix64(grid_index as u64 ^ 0x6A09_E667_F3BC_C908));
    splitmix64(h ^ splitmix64(run as u64 ^ 0xBB67_AE85_84CA_A73B))
}

/// FNV-1a digest of a sequence of received vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StreamDigest(u64);

impl StreamDigest {
    fn new() -> Self {
        StreamDigest(0xCBF2_9CE4_8422_2325)
    }

    fn absorb(&mut self, r: &ComplexVector) {
        for z in r.iter() {
            for word in [z.re.to_bits(), z.im.to_bits()] {
                for byte in word.to_le_bytes() {
                    self.0 ^= u64::from(byte);
                    self.0 = self.0.wrapping_mul(0x0100_0000_01B3);
                }
            }
        }
    }
}

/// Counters of unusual receiver events over a run or an aggregate of runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Annotations {
    /// Steps whose post-update filter energy was too small to rescale.
    pub unscaled_steps: u64,
    /// Candidate ranks skipped for zero truncated energy.
    pub excluded_ranks: u64,
    /// Symbols on which an MWF or EIG projection could not be rebuilt.
    pub construction_fallbacks: u64,
    /// Steps that returned an error; the symbol is then decided as +1.
    pub step_errors: u64,
    /// Runs that ended with a non-finite filter or projection.
    pub non_finite_states: u64,
}

impl Annotations {
    fn add(&mut self, other: &Annotations) {
        self.unscaled_steps += other.unscaled_steps;
        self.excluded_ranks += other.excluded_ranks;
        self.construction_fallbacks += other.construction_fallbacks;
        self.step_errors += other.step_errors;
        self.non_finite_states += other.non_finite_states;
    }
}

enum Detector {
    Fixed(JioMberReceiver),
    Auto(RankBank),
    Baseline(BaselineReceiver),
}

impl Detector {
    fn build(spec: &ReceiverSpec, config: &ExperimentConfig, channel: &ChannelConfig) -> Result<Self> {
        let m = config.num_antennas;
        let rho = config.kernel_radius_factor * channel.noise_std();
        let tr = config.training_symbols;
        Ok(match (spec.algorithm, spec.rank) {
            (Algorithm::JioMber, RankSpec::Fixed(d)) => {
                Detector::Fixed(JioMberReceiver::new(m, d, rho, config.step_w, config.step_s, tr)?)
            }
            (Algorithm::JioMber, RankSpec::Auto { min, max }) => {
                Detector::Auto(RankBank::new(m, min, max, rho, config.step_w, config.step_s, tr)?)
            }
            (Algorithm::JioMber, RankSpec::Full) => {
                Detector::Fixed(JioMberReceiver::new(m, m, rho, config.step_w, config.step_s, tr)?)
            }
            (Algorithm::Baseline(kind), rank) => {
                let step = match kind {
                    BaselineKind::FullRankLms => config.step_lms,
                    BaselineKind::FullRankMber => config.step_mber,
                    _ => config.step_reduced,
                };
                let params = BaselineParams {
                    step,
                    step_s: config.step_reduced,
                    kernel_radius: rho,
                    forgetting: config.forgetting,
                    input_gain: 1.0 / (m as f64).sqrt(),
                };
                let d = match rank {
                    RankSpec::Fixed(d) => d,
                    _ => m,
                };
                Detector::Baseline(BaselineReceiver::new(kind, m, d, params, tr)?)
            }
        })
    }

    fn step(&mut self, r: &ComplexVector, b: Symbol, notes: &mut Annotations) -> Result<(Symbol, Option<usize>)> {
        match self {
            Detector::Fixed(rx) => {
                let out = rx.step(r, Some(b))?;
                notes.unscaled_steps += u64::from(!out.scaled);
                Ok((out.decision, None))
            }
            Detector::Auto(bank) => {
                let out = bank.step(r, Some(b))?;
                notes.unscaled_steps += u64::from(!out.scaled);
                notes.excluded_ranks += out.excluded as u64;
                Ok((out.decision, Some(out.rank)))
            }
            Detector::Baseline(rx) => {
                let out = rx.step(r, Some(b))?;
                let mber = matches!(rx.kind, BaselineKind::FullRankMber | BaselineKind::MwfMber | BaselineKind::Eig);
                notes.unscaled_steps += u64::from(mber && !out.scaled);
                Ok((out.decision, None))
            }
        }
    }

    fn finish(&self, notes: &mut Annotations) {
        let state = match self {
            Detector::Fixed(rx) => &rx.state,
            Detector::Auto(bank) => &bank.receiver.state,
            Detector::Baseline(rx) => {
                notes.construction_fallbacks += rx.construction_fallbacks as u64;
                &rx.state
            }
        };
        notes.non_finite_states += u64::from(!(state.filter.is_finite() && state.projection.is_finite()));
    }
}

/// Outcome of one receiver in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverTrace {
    pub receiver: String,
    /// Decisions on the desired user's data symbols.
    pub decisions: Vec<Symbol>,
    /// Error indicator per data symbol.
    pub errors: Vec<bool>,
    /// Selected rank per symbol (training and data) for automatic rank selection.
    pub selected_ranks: Option<Vec<usize>>,
    pub annotations: Annotations,
}

impl ReceiverTrace {
    pub fn error_count(&self) -> u64 {
        self.errors.iter().filter(|&&e| e).count() as u64
    }

    /// Errors over the last `window` data symbols.
    pub fn terminal_errors(&self, window: usize) -> (u64, u64) {
        let n = self.errors.len();
        let tail = &self.errors[n - window.min(n)..];
        (tail.iter().filter(|&&e| e).count() as u64, tail.len() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub receivers: Vec<ReceiverTrace>,
    /// Digest of the received-vector sequence, identical for every receiver.
    pub stream_digest: u64,
}

/// One realization at grid point `point` (ignored for the symbols sweep).
pub fn run_single(config: &ExperimentConfig, point: Option<f64>, seed: u64) -> Result<RunResult> {
    run_on_channel(config, config.channel_at(point, seed)?)
}

/// One realization on an explicit channel configuration.
pub fn run_on_channel(config: &ExperimentConfig, channel: ChannelConfig) -> Result<RunResult> {
    if channel.num_antennas != config.num_antennas {
        return Err(Error::DimensionMismatch {
            op: "run_on_channel",
            expected: config.num_antennas,
            found: channel.num_antennas,
        });
    }
    let seed = channel.seed;
    let mut detectors = config
        .receivers
        .iter()
        .map(|spec| Detector::build(spec, config, &channel))
        .collect::<Result<Vec<_>>>()?;
    let n = detectors.len();
    let mut notes = vec![Annotations::default(); n];
    let mut digests = vec![StreamDigest::new(); n];
    let mut source_digest = StreamDigest::new();
    let mut decisions = vec![Vec::with_capacity(config.data_symbols); n];
    let mut errors = vec![Vec::with_capacity(config.data_symbols); n];
    let mut ranks: Vec<Option<Vec<usize>>> = detectors
        .iter()
        .map(|d| matches!(d, Detector::Auto(_)).then(Vec::new))
        .collect();

    let mut source = SignalSource::new(channel)?;
    let total = config.training_symbols + config.data_symbols;
    for i in 0..total {
        let frame = source.next_frame();
        let b = frame.symbols[0];
        source_digest.absorb(&frame.received);
        for (k, det) in detectors.iter_mut().enumerate() {
            digests[k].absorb(&frame.received);
            let (decision, rank) = match det.step(&frame.received, b, &mut notes[k]) {
                Ok(v) => v,
                Err(_) => {
                    notes[k].step_errors += 1;
                    (Symbol::Plus, None)
                }
            };
            if let (Some(history), Some(rank)) = (&mut ranks[k], rank) {
                history.push(rank);
            }
            if i >= config.training_symbols {
                decisions[k].push(decision);
                errors[k].push(decision != b);
            }
        }
    }

    if digests.iter().any(|d| *d != source_digest) {
        return Err(Error::StreamMismatch);
    }
    let receivers = detectors
        .iter()
        .zip(&config.receivers)
        .zip(notes.iter_mut())
        .zip(decisions.into_iter().zip(errors).zip(ranks))
        .map(|(((det, spec), notes), ((decisions, errors), selected_ranks))| {
            det.finish(notes);
            ReceiverTrace {
                receiver: spec.label(),
                decisions,
                errors,
                selected_ranks,
                annotations: *notes,
            }
        })
        .collect();
    Ok(RunResult {
        seed,
        receivers,
        stream_digest: source_digest.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub x: f64,
    pub ber: f64,
    pub errors: u64,
    pub bits: u64,
    /// Standard error of the mean of the per-run BER.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub receiver: String,
    pub x_name: String,
    pub points: Vec<BerPoint>,
    pub runs: usize,
    pub seed: u64,
    pub annotations: Annotations,
}

/// Errors of one receiver in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub errors: u64,
    pub bits: u64,
    pub terminal_errors: u64,
    pub terminal_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// `key=value` overrides applied on top of the base configuration.
    pub overrides: Vec<String>,
    pub curves: Vec<BerCurve>,
    /// Per grid point, per run, per receiver.
    pub runs: Vec<Vec<Vec<RunSummary>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStats {
    pub mean: f64,
    pub std_error: f64,
}

/// Mean and standard error of the mean; zero spread for a single value.
pub fn mean_stats(values: &[f64]) -> MeanStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    MeanStats { mean, std_error }
}

fn ratio(errors: u64, bits: u64) -> f64 {
    errors as f64 / bits as f64
}

impl ExperimentResult {
    pub fn receiver_index(&self, label: &str) -> Option<usize> {
        self.config.receivers.iter().position(|s| s.label() == label)
    }

    /// Terminal-window BER of one receiver at one grid point across runs.
    pub fn terminal_ber(&self, grid_index: usize, receiver: usize) -> MeanStats {
        let values: Vec<f64> = self.runs[grid_index]
            .iter()
            .map(|run| ratio(run[receiver].terminal_errors, run[receiver].terminal_bits))
            .collect();
        mean_stats(&values)
    }

    /// Paired per-run difference of terminal BER, `a - b`.
    pub fn terminal_difference(&self, grid_index: usize, a: usize, b: usize) -> MeanStats {
        let values: Vec<f64> = self.runs[grid_index]
            .iter()
            .map(|run| {
                ratio(run[a].terminal_errors, run[a].terminal_bits) - ratio(run[b].terminal_errors, run[b].terminal_bits)
            })
            .collect();
        mean_stats(&values)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["receiver", "x_name", "x_value", "ber", "errors", "bits", "runs", "seed"])?;
        for curve in &self.curves {
            for p in &curve.points {
                w.write_record([
                    curve.receiver.clone(),
                    curve.x_name.clone(),
                    p.x.to_string(),
                    p.ber.to_string(),
                    p.errors.to_string(),
                    p.bits.to_string(),
                    curve.runs.to_string(),
                    curve.seed.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Runs every grid point and Monte-Carlo run and aggregates BER curves.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentResult> {
    config.validate()?;
    let points = config.points();
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..config.monte_carlo_runs).map(move |r| (g, r)))
        .collect();
    let run = |&(g, r): &(usize, usize)| run_single(config, points[g], derive_seed(config.base_seed, g, r));
    let results: Vec<RunResult> = match execution {
        Execution::Serial => tasks.iter().map(run).collect::<Result<_>>()?,
        Execution::Parallel => tasks.par_iter().map(run).collect::<Result<_>>()?,
    };
    Ok(aggregate(config, &points, &results))
}

fn aggregate(config: &ExperimentConfig, points: &[Option<f64>], results: &[RunResult]) -> ExperimentResult {
    let runs_per_point = config.monte_carlo_runs;
    let by_point: Vec<&[RunResult]> = results.chunks(runs_per_point).collect();

    let summaries: Vec<Vec<Vec<RunSummary>>> = by_point
        .iter()
        .map(|runs| {
            runs.iter()
                .map(|run| {
                    run.receivers
                        .iter()
                        .map(|t| {
                            let (terminal_errors, terminal_bits) = t.terminal_errors(config.window);
                            RunSummary {
                                errors: t.error_count(),
                                bits: t.errors.len() as u64,
                                terminal_errors,
                                terminal_bits,
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let curves = config
        .receivers
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let mut annotations = Annotations::default();
            for run in results {
                annotations.add(&run.receivers[k].annotations);
            }
            let points = match config.sweep {
                Sweep::Symbols => learning_curve(config, by_point[0], k),
                _ => points
                    .iter()
                    .zip(&summaries)
                    .map(|(x, runs)| {
                        let errors = runs.iter().map(|r| r[k].errors).sum();
                        let bits = runs.iter().map(|r| r[k].bits).sum();
                        let per_run: Vec<f64> = runs.iter().map(|r| ratio(r[k].errors, r[k].bits)).collect();
                        BerPoint {
                            x: x.expect("grid sweeps have values"),
                            ber: ratio(errors, bits),
                            errors,
                            bits,
                            std_error: mean_stats(&per_run).std_error,
                        }
                    })
                    .collect(),
            };
            BerCurve {
                receiver: spec.label(),
                x_name: config.sweep.axis_name().to_string(),
                points,
                runs: runs_per_point,
                seed: config.base_seed,
                annotations,
            }
        })
        .collect();

    ExperimentResult {
        config: config.clone(),
        overrides: Vec::new(),
        curves,
        runs: summaries,
    }
}

/// Sliding-window BER at every data symbol, averaged across runs. The
/// window covers the last `window` data symbols up to and including the
/// point; `x` is the 1-based index among all received symbols.
fn learning_curve(config: &ExperimentConfig, runs: &[RunResult], k: usize) -> Vec<BerPoint> {
    let prefix: Vec<Vec<u64>> = runs
        .iter()
        .map(|run| {
            let mut acc = vec![0u64];
            for &e in &run.receivers[k].errors {
                acc.push(acc.last().copied().unwrap_or(0) + u64::from(e));
            }
            acc
        })
        .collect();
    (0..config.data_symbols)
        .map(|i| {
            let lo = (i + 1).saturating_sub(config.window);
            let len = (i + 1 - lo) as u64;
            let per_run: Vec<u64> = prefix.iter().map(|p| p[i + 1] - p[lo]).collect();
            let errors = per_run.iter().sum();
            let bits = len * runs.len() as u64;
            let rates: Vec<f64> = per_run.iter().map(|&e| ratio(e, len)).collect();
            BerPoint {
                x: (config.training_symbols + i + 1) as f64,
                ber: ratio(errors, bits),
                errors,
                bits,
                std_error: mean_stats(&rates).std_error,
            }
        })
        .collect()
}
