//! Automatic rank selection by minimum estimated error probability.
//!
//! One JIO-MBER filter pair is adapted at the largest allowed rank
//! `D_max`. For each symbol, every candidate rank `D` in `[D_min, D_max]`
//! reuses the leading `D` columns of the projection and the leading `D`
//! filter taps. All candidate outputs come from a single pass as prefix
//! sums of the per-branch contributions `conj(w_d) s_d^H r`, and the rank
//! with the smallest kernel error estimate decides the symbol.

use crate::error::{Error, Result};
use crate::jio_mber::{mode_at, JioMberReceiver};
use crate::linalg::{ComplexVector, C64};
use crate::receiver::{decide, q_function, Mode, ReceiverState};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq)]
pub struct RankBank {
    /// Filter pair at rank `D_max`.
    pub receiver: JioMberReceiver,
    pub min_rank: usize,
    pub max_rank: usize,
    pub selected_rank_history: Vec<usize>,
}

/// Error estimate of one candidate rank; `None` when the truncated filter
/// has zero energy and the rank cannot be evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCandidate {
    pub rank: usize,
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoStepOutcome {
    pub decision: Symbol,
    pub rank: usize,
    pub reference: Symbol,
    /// Candidate ranks skipped because of zero truncated energy.
    pub excluded: usize,
    pub scaled: bool,
}

impl RankBank {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_antennas: usize,
        min_rank: usize,
        max_rank: usize,
        kernel_radius: f64,
        step_w: f64,
        step_s: f64,
        training_length: usize,
    ) -> Result<Self> {
        if min_rank == 0 || min_rank > max_rank || max_rank > num_antennas {
            return Err(Error::UnsupportedDimensions {
                m: num_antennas,
                d: if min_rank == 0 { 0 } else { max_rank },
            });
        }
        Ok(Self {
            receiver: JioMberReceiver::new(num_antennas, max_rank, kernel_radius, step_w, step_s, training_length)?,
            min_rank,
            max_rank,
            selected_rank_history: Vec::new(),
        })
    }

    pub fn state(&self) -> &ReceiverState {
        &self.receiver.state
    }

    /// Per-branch contributions `conj(w_d) (s_d^H r)` for `d = 1..D_max`.
    fn branch_terms(&self, r: &ComplexVector) -> Result<(ComplexVector, Vec<C64>)> {
        let state = self.state();
        let r_bar = state.projection.hermitian_apply(r)?;
        let terms = state.filter.iter().zip(r_bar.iter()).map(|(w, x)| w.conj() * x).collect();
        Ok((r_bar, terms))
    }

    /// Candidate ranks that would be selected for `r`, with their estimates.
    pub fn rank_error_probabilities(&self, r: &ComplexVector, b: Symbol, kernel_radius: f64) -> Result<Vec<RankCandidate>> {
        let outputs = self.partial_outputs(r)?;
        Ok(self.candidates_from(&outputs, b, kernel_radius))
    }

    fn candidates_from(&self, outputs: &[C64], b: Symbol, kernel_radius: f64) -> Vec<RankCandidate> {
        let energies = truncated_energies(self.state());
        (self.min_rank..=self.max_rank)
            .map(|rank| {
                let energy = energies[rank - 1];
                let probability = (energy > 0.0 && energy.is_finite())
                    .then(|| q_function(b.value() * outputs[rank - 1].re / (kernel_radius * energy.sqrt())));
                RankCandidate { rank, probability }
            })
            .collect()
    }

    /// `x^D` for `D = 1..D_max` (index `D - 1`).
    pub fn partial_outputs(&self, r: &ComplexVector) -> Result<Vec<C64>> {
        let (_, terms) = self.branch_terms(r)?;
        Ok(prefix_sums(&terms))
    }

    /// Selects a rank, decides with it, and adapts the full `D_max` pair.
    pub fn step(&mut self, r: &ComplexVector, training: Option<Symbol>) -> Result<AutoStepOutcome> {
        let (r_bar, terms) = self.branch_terms(r)?;
        let outputs = prefix_sums(&terms);
        let previous = self.selected_rank_history.last().copied().unwrap_or(self.max_rank);

        let reference = match self.receiver.state.mode {
            Mode::Training => training.ok_or(Error::MissingTrainingSymbol)?,
            Mode::DecisionDirected => decide(outputs[previous - 1]),
        };
        let candidates = self.candidates_from(&outputs, reference, self.state().kernel_radius);
        let excluded = candidates.iter().filter(|c| c.probability.is_none()).count();
        let rank = match select_rank(&candidates) {
            Ok(rank) => rank,
            Err(_) => previous,
        };
        let decision = decide(outputs[rank - 1]);

        let full = outputs[self.max_rank - 1];
        let scaled = self.receiver.adapt(r, &r_bar, full, reference)?;
        self.receiver.symbol_index += 1;
        self.receiver.state.mode = mode_at(self.receiver.symbol_index, self.receiver.training_length);
        self.selected_rank_history.push(rank);

        Ok(AutoStepOutcome {
            decision,
            rank,
            reference,
            excluded,
            scaled,
        })
    }
}

fn prefix_sums(terms: &[C64]) -> Vec<C64> {
    terms
        .iter()
        .scan(C64::new(0.0, 0.0), |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect()
}

/// `||S'_D w'_D||^2` for every leading truncation `D = 1..D_max`.
fn truncated_energies(state: &ReceiverState) -> Vec<f64> {
    let m = state.num_antennas();
    let mut combiner = vec![C64::new(0.0, 0.0); m];
    (0..state.rank())
        .map(|d| {
            let w = state.filter[d];
            for (f, y) in combiner.iter_mut().enumerate() {
                *y += state.projection[(f, d)] * w;
            }
            combiner.iter().fold(0.0, |acc, z| acc + z.norm_sqr())
        })
        .collect()
}

/// `argmin_D P_D` over the evaluable candidates; ties go to the smallest rank.
pub fn select_rank(candidates: &[RankCandidate]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        if let Some(p) = c.probability {
            match best {
                Some((rank, q)) if q < p || (q == p && rank <= c.rank) => {}
                _ => best = Some((c.rank, p)),
            }
        }
    }
    best.map(|(rank, _)| rank).ok_or(Error::NoCandidates)
}
