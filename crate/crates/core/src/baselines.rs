//! Comparison receivers: full-rank LMS and MBER, JIO-LMS, and the
//! MWF and eigen-decomposition reduced-rank schemes.
//!
//! MSE-criterion receivers (LMS, JIO-LMS, MWF-LMS) operate on the
//! observation scaled by an input gain, see [`BaselineParams::input_gain`].
//! MBER receivers are invariant to that scaling and always see `r` as is.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eigen::HermitianEigen;
use crate::error::{Error, Result};
use crate::jio_mber::{constrained_update, mode_at, StepOutcome};
use crate::linalg::{inner, ComplexMatrix, ComplexVector, C64};
use crate::receiver::{decide, Mode, ReceiverState};
use crate::symbol::Symbol;

/// Relative residual below which a Krylov stage is treated as rank deficient.
pub const MWF_BREAKDOWN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    FullRankLms,
    FullRankMber,
    JioLms,
    MwfLms,
    MwfMber,
    Eig,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::FullRankLms,
        BaselineKind::FullRankMber,
        BaselineKind::JioLms,
        BaselineKind::MwfLms,
        BaselineKind::MwfMber,
        BaselineKind::Eig,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::FullRankLms => "full-rank-lms",
            BaselineKind::FullRankMber => "full-rank-mber",
            BaselineKind::JioLms => "jio-lms",
            BaselineKind::MwfLms => "mwf-lms",
            BaselineKind::MwfMber => "mwf-mber",
            BaselineKind::Eig => "eig",
        }
    }

    pub fn is_full_rank(self) -> bool {
        matches!(self, BaselineKind::FullRankLms | BaselineKind::FullRankMber)
    }

    fn is_mse(self) -> bool {
        matches!(self, BaselineKind::FullRankLms | BaselineKind::JioLms | BaselineKind::MwfLms)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn resolve(x: C64, reference: Option<Symbol>) -> (Symbol, Symbol) {
    let decision = decide(x);
    (decision, reference.unwrap_or(decision))
}

/// One LMS iteration: `e = b - w^H r`, `w <- w + mu conj(e) r`.
/// `reference = None` adapts on the receiver's own decision.
pub fn full_rank_lms_step(
    w: &mut ComplexVector,
    r: &ComplexVector,
    reference: Option<Symbol>,
    mu: f64,
) -> Result<StepOutcome> {
    let x = inner(w, r)?;
    let (decision, b) = resolve(x, reference);
    let e = C64::new(b.value(), 0.0) - x;
    w.axpy(e.conj() * mu, r)?;
    Ok(StepOutcome {
        output: x,
        decision,
        reference: b,
        scaled: false,
    })
}

/// Full-rank constrained MBER iteration:
/// `w <- w + mu g (r - Re(x) w)`, then `w <- w / ||w||`.
pub fn full_rank_mber_step(
    w: &mut ComplexVector,
    r: &ComplexVector,
    reference: Option<Symbol>,
    mu: f64,
    rho: f64,
) -> Result<StepOutcome> {
    let x = inner(w, r)?;
    let (decision, b) = resolve(x, reference);
    let g = crate::jio_mber::update_factor(x.re, b, rho);

    let mut dir = r.clone();
    dir.axpy(C64::new(-x.re, 0.0), w)?;
    w.axpy(C64::new(mu * g, 0.0), &dir)?;

    let energy = w.norm_sqr();
    let scaled = energy > crate::jio_mber::SCALING_EPSILON;
    if scaled {
        w.scale(1.0 / energy.sqrt());
    }
    Ok(StepOutcome {
        output: x,
        decision,
        reference: b,
        scaled,
    })
}

/// Joint LMS update of projection and reduced filter, both from the
/// pre-update snapshot:
///
/// ```text
/// e = b - w^H S^H r
/// w <- w + mu_w conj(e) S^H r
/// S <- S + mu_S conj(e) r w^H
/// ```
pub fn jio_lms_step(
    projection: &mut ComplexMatrix,
    w: &mut ComplexVector,
    r: &ComplexVector,
    reference: Option<Symbol>,
    mu_w: f64,
    mu_s: f64,
) -> Result<StepOutcome> {
    let r_bar = projection.hermitian_apply(r)?;
    let x = inner(w, &r_bar)?;
    let (decision, b) = resolve(x, reference);
    let e = C64::new(b.value(), 0.0) - x;
    if mu_s != 0.0 {
        projection.rank_one_update(e.conj() * mu_s, r, w)?;
    }
    w.axpy(e.conj() * mu_w, &r_bar)?;
    Ok(StepOutcome {
        output: x,
        decision,
        reference: b,
        scaled: false,
    })
}

/// Krylov stage basis of a multistage Wiener filter.
#[derive(Debug, Clone, PartialEq)]
pub struct MwfBasis {
    /// `M x stages` with orthonormal columns, `stages <= D`; `None` when
    /// the steering vector is zero.
    pub projection: Option<ComplexMatrix>,
    /// True when the recursion stopped before `D` stages.
    pub truncated: bool,
}

/// Forward recursion of the multistage Wiener filter.
///
/// Stage one is the normalized steering vector; each later stage is the
/// covariance applied to the previous stage with all earlier stages
/// subtracted (two Gram-Schmidt passes). With this orthogonal
/// correlation-subtraction form the stages span the Krylov subspace
/// `{p, Rp, ..., R^(D-1) p}`.
pub fn mwf_construct(covariance: &ComplexMatrix, steering: &ComplexVector, rank: usize) -> Result<MwfBasis> {
    let m = covariance.rows();
    if covariance.cols() != m {
        return Err(Error::DimensionMismatch {
            op: "mwf_construct",
            expected: m,
            found: covariance.cols(),
        });
    }
    if steering.len() != m {
        return Err(Error::DimensionMismatch {
            op: "mwf_construct",
            expected: m,
            found: steering.len(),
        });
    }
    if rank == 0 || rank > m {
        return Err(Error::UnsupportedDimensions { m, d: rank });
    }

    let p_norm = steering.norm();
    if !(p_norm > 0.0 && p_norm.is_finite()) {
        return Ok(MwfBasis {
            projection: None,
            truncated: true,
        });
    }
    let scale = covariance.frobenius_norm();
    let mut stages = vec![steering.scaled(C64::new(1.0 / p_norm, 0.0))];
    while stages.len() < rank {
        let mut v = covariance.apply(stages.last().expect("non-empty"))?;
        let before = v.norm();
        for _ in 0..2 {
            for t in &stages {
                let c = inner(t, &v)?;
                v.axpy(-c, t)?;
            }
        }
        let residual = v.norm();
        if !(residual > MWF_BREAKDOWN_TOL * scale && residual > MWF_BREAKDOWN_TOL * before) {
            break;
        }
        v.scale(1.0 / residual);
        stages.push(v);
    }
    Ok(MwfBasis {
        truncated: stages.len() < rank,
        projection: Some(ComplexMatrix::from_columns(&stages)?),
    })
}

/// `D` principal eigenvectors of a Hermitian covariance.
pub fn eig_construct(covariance: &ComplexMatrix, rank: usize) -> Result<ComplexMatrix> {
    principal_subspace(&HermitianEigen::compute(covariance)?, rank)
}

fn principal_subspace(eigen: &HermitianEigen, rank: usize) -> Result<ComplexMatrix> {
    let m = eigen.vectors.rows();
    if rank == 0 || rank > m {
        return Err(Error::UnsupportedDimensions { m, d: rank });
    }
    Ok(eigen.vectors.leading_columns(rank))
}

/// Exponentially weighted covariance and training cross-correlation:
/// `R <- lambda R + r r^H`, `p <- lambda p + b r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStatistics {
    pub covariance: ComplexMatrix,
    pub steering: ComplexVector,
    pub forgetting: f64,
}

impl SampleStatistics {
    pub fn new(num_antennas: usize, forgetting: f64) -> Self {
        Self {
            covariance: ComplexMatrix::zeros(num_antennas, num_antennas),
            steering: ComplexVector::zeros(num_antennas),
            forgetting,
        }
    }

    pub fn update(&mut self, r: &ComplexVector, b: Symbol) -> Result<()> {
        self.covariance.forget_and_accumulate(self.forgetting, r)?;
        self.steering.scale(self.forgetting);
        self.steering.axpy(C64::new(b.value(), 0.0), r)
    }
}

/// Parameters shared by the comparison receivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    /// Filter step size (`mu_w` for JIO-LMS).
    pub step: f64,
    /// Projection step size, used by JIO-LMS only.
    pub step_s: f64,
    /// Kernel radius for the MBER receivers.
    pub kernel_radius: f64,
    /// Forgetting factor of the MWF and EIG statistics.
    pub forgetting: f64,
    /// Gain applied to `r` before the MSE-criterion receivers see it.
    pub input_gain: f64,
}

/// A comparison receiver with its own adaptation state.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReceiver {
    pub kind: BaselineKind,
    /// Projection and reduced filter; full-rank kinds use `S = I_M`.
    pub state: ReceiverState,
    pub statistics: Option<SampleStatistics>,
    /// Full eigenvector matrix of the previous symbol, for warm starts.
    eigenvectors: Option<ComplexMatrix>,
    input_gain: f64,
    pub training_length: usize,
    pub symbol_index: usize,
    /// Symbols on which the projection could not be rebuilt and the
    /// previous one was kept.
    pub construction_fallbacks: usize,
}

impl BaselineReceiver {
    pub fn new(
        kind: BaselineKind,
        num_antennas: usize,
        rank: usize,
        params: BaselineParams,
        training_length: usize,
    ) -> Result<Self> {
        let rank = if kind.is_full_rank() { num_antennas } else { rank };
        let step_s = if kind == BaselineKind::JioLms { params.step_s } else { 0.0 };
        let mut state = ReceiverState::initial(num_antennas, rank, params.kernel_radius, params.step, step_s)?;
        state.mode = mode_at(0, training_length);
        let statistics = matches!(kind, BaselineKind::MwfLms | BaselineKind::MwfMber | BaselineKind::Eig)
            .then(|| SampleStatistics::new(num_antennas, params.forgetting));
        Ok(Self {
            kind,
            state,
            statistics,
            eigenvectors: None,
            input_gain: if kind.is_mse() { params.input_gain } else { 1.0 },
            training_length,
            symbol_index: 0,
            construction_fallbacks: 0,
        })
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn step(&mut self, r: &ComplexVector, training: Option<Symbol>) -> Result<StepOutcome> {
        let reference = match self.state.mode {
            Mode::Training => Some(training.ok_or(Error::MissingTrainingSymbol)?),
            Mode::DecisionDirected => None,
        };
        if self.statistics.is_some() {
            self.refresh_projection()?;
        }

        let state = &mut self.state;
        let outcome = match self.kind {
            BaselineKind::FullRankLms => {
                full_rank_lms_step(&mut state.filter, &r.scaled(C64::new(self.input_gain, 0.0)), reference, state.step_w)?
            }
            BaselineKind::FullRankMber => {
                full_rank_mber_step(&mut state.filter, r, reference, state.step_w, state.kernel_radius)?
            }
            BaselineKind::JioLms | BaselineKind::MwfLms => {
                let (mu_w, mu_s) = (state.step_w, state.step_s);
                jio_lms_step(
                    &mut state.projection,
                    &mut state.filter,
                    &r.scaled(C64::new(self.input_gain, 0.0)),
                    reference,
                    mu_w,
                    mu_s,
                )?
            }
            BaselineKind::MwfMber | BaselineKind::Eig => reduced_mber_step(state, r, reference)?,
        };

        if let Some(stats) = &mut self.statistics {
            stats.update(r, outcome.reference)?;
        }
        self.symbol_index += 1;
        self.state.mode = mode_at(self.symbol_index, self.training_length);
        Ok(outcome)
    }

    /// Rebuilds `S_D` from the statistics gathered up to the previous symbol.
    fn refresh_projection(&mut self) -> Result<()> {
        let stats = self.statistics.as_ref().expect("subspace receivers carry statistics");
        let rank = self.state.rank();
        if stats.covariance.frobenius_norm() == 0.0 {
            self.construction_fallbacks += 1;
            return Ok(());
        }
        match self.kind {
            BaselineKind::MwfLms | BaselineKind::MwfMber => {
                let basis = mwf_construct(&stats.covariance, &stats.steering, rank)?;
                match basis.projection {
                    Some(projection) if !basis.truncated => self.install(projection)?,
                    _ => self.construction_fallbacks += 1,
                }
            }
            BaselineKind::Eig => {
                let eigen = match &self.eigenvectors {
                    Some(start) => HermitianEigen::compute_from(&stats.covariance, start)?,
                    None => HermitianEigen::compute(&stats.covariance)?,
                };
                let projection = principal_subspace(&eigen, rank)?;
                self.install(projection)?;
                self.eigenvectors = Some(eigen.vectors);
            }
            _ => {}
        }
        Ok(())
    }
}

impl BaselineReceiver {
    /// Switches to a new basis, carrying the equivalent full-rank combiner
    /// over: `w <- S_new^H S_old w`.
    fn install(&mut self, projection: ComplexMatrix) -> Result<()> {
        let combiner = self.state.combiner()?;
        self.state.filter = projection.hermitian_apply(&combiner)?;
        self.state.projection = projection;
        Ok(())
    }
}

/// Constrained MBER update of `w` for a given (not adapted) projection.
pub fn reduced_mber_step(state: &mut ReceiverState, r: &ComplexVector, reference: Option<Symbol>) -> Result<StepOutcome> {
    let r_bar = state.projection.hermitian_apply(r)?;
    let x = inner(&state.filter, &r_bar)?;
    let (decision, b) = resolve(x, reference);
    let step_s = std::mem::replace(&mut state.step_s, 0.0);
    let scaled = constrained_update(state, r, &r_bar, x, b);
    state.step_s = step_s;
    Ok(StepOutcome {
        output: x,
        decision,
        reference: b,
        scaled: scaled?,
    })
}
