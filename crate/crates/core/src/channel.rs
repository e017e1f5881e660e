//! Uplink multiuser MIMO signal generation.
//!
//! Each of the `K x M` channel coefficients `h_{k,f}(i)` is an independent
//! unit-variance Rayleigh process built from a sum of sinusoids
//! (Zheng-Xiao form of the Jakes model) with its own random angles and
//! phases. Its autocorrelation approaches `J0(2 pi f_d T_s tau)`.
//!
//! The received vector is `r(i) = sum_k A_k h_k(i) b_k(i) + n(i)` with
//! circularly-symmetric complex Gaussian noise of covariance `sigma^2 I`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, C64};
use crate::symbol::Symbol;

/// Sinusoids per channel coefficient.
pub const OSCILLATORS: usize = 16;

/// Stream ids used to split a run seed into independent generators.
pub mod stream {
    pub const CHANNEL: u64 = 1;
    pub const SYMBOLS: u64 = 2;
    pub const NOISE: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    pub amplitudes: Vec<f64>,
    pub noise_variance: f64,
    /// `f_d T_s`, cycles per symbol. Shared by all users.
    pub normalized_doppler: f64,
    pub seed: u64,
}

impl ChannelConfig {
    /// All users at unit amplitude, noise set from `SNR = 10 log10(A_1^2 / sigma^2)`.
    pub fn with_snr_db(num_users: usize, num_antennas: usize, snr_db: f64, normalized_doppler: f64, seed: u64) -> Result<Self> {
        let config = Self {
            num_users,
            num_antennas,
            amplitudes: vec![1.0; num_users],
            noise_variance: noise_variance_for_snr(snr_db, 1.0),
            normalized_doppler,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::config("num_antennas", self.num_antennas, "must be at least 1"));
        }
        if self.num_users == 0 || self.num_users > self.num_antennas {
            return Err(Error::config(
                "num_users",
                self.num_users,
                format!("need 1 <= K <= M = {}", self.num_antennas),
            ));
        }
        if self.amplitudes.len() != self.num_users {
            return Err(Error::config(
                "amplitudes",
                format!("{:?}", self.amplitudes),
                format!("need one amplitude per user ({})", self.num_users),
            ));
        }
        if let Some(a) = self.amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::config("amplitudes", a, "amplitudes must be positive"));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::config("noise_variance", self.noise_variance, "must be positive"));
        }
        if !(self.normalized_doppler.is_finite() && self.normalized_doppler >= 0.0) {
            return Err(Error::config("doppler", self.normalized_doppler, "must be non-negative"));
        }
        Ok(())
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_variance.sqrt()
    }
}

pub fn noise_variance_for_snr(snr_db: f64, amplitude: f64) -> f64 {
    amplitude * amplitude / 10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone)]
struct ElementOscillators {
    in_phase_gain: [f64; OSCILLATORS],
    quadrature_gain: [f64; OSCILLATORS],
    in_phase_freq: [f64; OSCILLATORS],
    quadrature_freq: [f64; OSCILLATORS],
    phase: f64,
}

impl ElementOscillators {
    fn draw(rng: &mut impl Rng, omega: f64) -> Self {
        let theta = rng.random_range(-PI..PI);
        let phase = rng.random_range(-PI..PI);
        let norm = (2.0 / OSCILLATORS as f64).sqrt();
        let mut osc = Self {
            in_phase_gain: [0.0; OSCILLATORS],
            quadrature_gain: [0.0; OSCILLATORS],
            in_phase_freq: [0.0; OSCILLATORS],
            quadrature_freq: [0.0; OSCILLATORS],
            phase,
        };
        for n in 0..OSCILLATORS {
            let psi = rng.random_range(-PI..PI);
            let alpha = (2.0 * PI * (n + 1) as f64 - PI + theta) / (4.0 * OSCILLATORS as f64);
            osc.in_phase_gain[n] = norm * psi.cos();
            osc.quadrature_gain[n] = norm * psi.sin();
            osc.in_phase_freq[n] = omega * alpha.cos();
            osc.quadrature_freq[n] = omega * alpha.sin();
        }
        osc
    }

    fn at(&self, index: u64) -> C64 {
        let t = index as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for n in 0..OSCILLATORS {
            re += self.in_phase_gain[n] * (self.in_phase_freq[n] * t + self.phase).cos();
            im += self.quadrature_gain[n] * (self.quadrature_freq[n] * t + self.phase).cos();
        }
        C64::new(re, im)
    }
}

/// The fixed oscillator bank of one channel realization.
#[derive(Debug, Clone)]
pub struct JakesFading {
    num_users: usize,
    num_antennas: usize,
    // user-major: element (k, f) at k * M + f
    elements: Vec<ElementOscillators>,
}

/// Fading vectors `h_k(i)` for one symbol index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub index: u64,
    pub fading: Vec<ComplexVector>,
}

impl JakesFading {
    pub fn new(config: &ChannelConfig, rng: &mut impl Rng) -> Self {
        let omega = 2.0 * PI * config.normalized_doppler;
        let elements = (0..config.num_users * config.num_antennas)
            .map(|_| ElementOscillators::draw(rng, omega))
            .collect();
        Self {
            num_users: config.num_users,
            num_antennas: config.num_antennas,
            elements,
        }
    }

    pub fn state_at(&self, index: u64) -> ChannelState {
        let fading = (0..self.num_users)
            .map(|k| {
                let row = &self.elements[k * self.num_antennas..(k + 1) * self.num_antennas];
                ComplexVector::new(row.iter().map(|e| e.at(index)).collect()).expect("M >= 1")
            })
            .collect();
        ChannelState { index, fading }
    }

    /// Fading vectors for the symbol after `state`.
    pub fn advance(&self, state: &ChannelState) -> ChannelState {
        self.state_at(state.index + 1)
    }

    /// Single coefficient `h_{k,f}(i)`.
    pub fn coefficient(&self, user: usize, antenna: usize, index: u64) -> C64 {
        self.elements[user * self.num_antennas + antenna].at(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Symbol>,
    pub noise: ComplexVector,
    pub received: ComplexVector,
}

/// `sum_k A_k h_k b_k + n`, accumulated user by user and then the noise.
pub fn compose_received(
    fading: &[ComplexVector],
    amplitudes: &[f64],
    symbols: &[Symbol],
    noise: &ComplexVector,
) -> ComplexVector {
    let m = noise.len();
    let mut r = vec![C64::new(0.0, 0.0); m];
    for ((h, &a), b) in fading.iter().zip(amplitudes).zip(symbols) {
        let gain = a * b.value();
        for (rf, hf) in r.iter_mut().zip(h.iter()) {
            *rf += hf * gain;
        }
    }
    for (rf, nf) in r.iter_mut().zip(noise.iter()) {
        *rf += nf;
    }
    ComplexVector::new(r).expect("M >= 1")
}

pub fn complex_gaussian(rng: &mut impl Rng, len: usize, variance: f64) -> ComplexVector {
    let std = (variance / 2.0).sqrt();
    let v = (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(std * re, std * im)
        })
        .collect();
    ComplexVector::new(v).expect("len >= 1")
}

/// Draws symbols and noise for one symbol period and assembles `r(i)`.
pub fn emit_frame(
    state: &ChannelState,
    config: &ChannelConfig,
    symbol_rng: &mut impl Rng,
    noise_rng: &mut impl Rng,
) -> SymbolFrame {
    let symbols: Vec<Symbol> = (0..config.num_users).map(|_| Symbol::from(symbol_rng.random::<bool>())).collect();
    let noise = complex_gaussian(noise_rng, config.num_antennas, config.noise_variance);
    let received = compose_received(&state.fading, &config.amplitudes, &symbols, &noise);
    SymbolFrame {
        symbols,
        noise,
        received,
    }
}

/// Sequential frame generator owning the three random streams of a run.
#[derive(Debug, Clone)]
pub struct SignalSource {
    config: ChannelConfig,
    fading: JakesFading,
    state: ChannelState,
    symbol_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

impl SignalSource {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        config.validate()?;
        let mut channel_rng = seeded_stream(config.seed, stream::CHANNEL);
        let fading = JakesFading::new(&config, &mut channel_rng);
        let state = fading.state_at(0);
        Ok(Self {
            symbol_rng: seeded_stream(config.seed, stream::SYMBOLS),
            noise_rng: seeded_stream(config.seed, stream::NOISE),
            config,
            fading,
            state,
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn state(&self) -> &ChannelState {
        &self.state
    }

    /// Emits the frame for the current symbol and moves the channel on.
    pub fn next_frame(&mut self) -> SymbolFrame {
        let frame = emit_frame(&self.state, &self.config, &mut self.symbol_rng, &mut self.noise_rng);
        if self.config.normalized_doppler == 0.0 {
            self.state.index += 1;
        } else {
            self.state = self.fading.advance(&self.state);
        }
        frame
    }
}

pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
