//! Joint iterative optimization of the projection matrix and the
//! reduced-rank filter under the minimum-BER criterion.
//!
//! Each symbol runs one stochastic-gradient step on the kernel BER estimate
//! for both `w` and `S_D`, computed from the same pre-update snapshot, and
//! then rescales `w` so that `w^H S_D^H S_D w = 1`. Under that constraint
//! the norm terms in the gradients are one, which gives the update
//!
//! ```text
//! g      = exp(-Re(x)^2 / (2 rho^2)) sign(b) / (2 sqrt(2 pi) rho)
//! w   <- w   + mu_w g (S^H r - Re(x) S^H S w)
//! S_D <- S_D + mu_S g (r w^H - S w w^H Re(x))
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{inner, outer, ComplexMatrix, ComplexVector, C64};
use crate::receiver::{decide, Mode, ReceiverState};
use crate::symbol::Symbol;

/// Below this value of `w^H S^H S w` the filter is left unscaled.
pub const SCALING_EPSILON: f64 = 1e-12;

/// Common factor `-exp(-Re(x)^2 / (2 rho^2 n)) sign(b) / (2 sqrt(2 pi) rho)`
/// of the unconstrained gradients, with `n = w^H S^H S w`.
fn gradient_factor(x_re: f64, b: Symbol, rho: f64, energy: f64) -> f64 {
    -(-(x_re * x_re) / (2.0 * rho * rho * energy)).exp() * b.value() / (2.0 * (2.0 * PI).sqrt() * rho)
}

/// Step factor of the constrained updates (`n = 1`, sign flipped for descent).
pub(crate) fn update_factor(x_re: f64, b: Symbol, rho: f64) -> f64 {
    (-(x_re * x_re) / (2.0 * rho * rho)).exp() * b.value() / (2.0 * (2.0 * PI).sqrt() * rho)
}

fn energy_or_err(state: &ReceiverState) -> Result<(ComplexVector, f64)> {
    let combiner = state.combiner()?;
    let energy = combiner.norm_sqr();
    if energy > 0.0 && energy.is_finite() {
        Ok((combiner, energy))
    } else {
        Err(Error::DegenerateFilter)
    }
}

/// `dP_e / dw*` in its general form, without assuming unit filter energy.
pub fn grad_w(state: &ReceiverState, r: &ComplexVector, b: Symbol) -> Result<ComplexVector> {
    let (combiner, energy) = energy_or_err(state)?;
    let r_bar = state.projection.hermitian_apply(r)?;
    let x = inner(&state.filter, &r_bar)?;
    let g = gradient_factor(x.re, b, state.kernel_radius, energy);
    let gram_w = state.projection.hermitian_apply(&combiner)?;

    let mut out = r_bar.scaled(C64::new(g / energy.sqrt(), 0.0));
    out.axpy(C64::new(-g * x.re / energy.powf(1.5), 0.0), &gram_w)?;
    Ok(out)
}

/// `dP_e / dS_D*` in its general form.
pub fn grad_s(state: &ReceiverState, r: &ComplexVector, b: Symbol) -> Result<ComplexMatrix> {
    let (combiner, energy) = energy_or_err(state)?;
    let x = inner(&state.filter, &state.projection.hermitian_apply(r)?)?;
    let g = gradient_factor(x.re, b, state.kernel_radius, energy);

    let mut out = outer(r, &state.filter);
    out.scale(g / energy.sqrt());
    out.rank_one_update(C64::new(-g * x.re / energy.powf(1.5), 0.0), &combiner, &state.filter)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub output: C64,
    pub decision: Symbol,
    /// The symbol that drove the update (training symbol or decision).
    pub reference: Symbol,
    /// False when the post-update energy was at or below [`SCALING_EPSILON`].
    pub scaled: bool,
}

/// Adaptive JIO-MBER receiver for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct JioMberReceiver {
    pub state: ReceiverState,
    pub training_length: usize,
    pub symbol_index: usize,
}

impl JioMberReceiver {
    pub fn new(
        num_antennas: usize,
        rank: usize,
        kernel_radius: f64,
        step_w: f64,
        step_s: f64,
        training_length: usize,
    ) -> Result<Self> {
        Ok(Self::from_state(
            ReceiverState::initial(num_antennas, rank, kernel_radius, step_w, step_s)?,
            training_length,
        ))
    }

    pub fn from_state(mut state: ReceiverState, training_length: usize) -> Self {
        state.mode = mode_at(0, training_length);
        Self {
            state,
            training_length,
            symbol_index: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    /// Processes one received vector: decide, adapt, rescale.
    pub fn step(&mut self, r: &ComplexVector, training: Option<Symbol>) -> Result<StepOutcome> {
        let r_bar = self.state.projection.hermitian_apply(r)?;
        let x = inner(&self.state.filter, &r_bar)?;
        let decision = decide(x);
        let reference = match self.state.mode {
            Mode::Training => training.ok_or(Error::MissingTrainingSymbol)?,
            Mode::DecisionDirected => decision,
        };
        let scaled = self.adapt(r, &r_bar, x, reference)?;
        self.advance();
        Ok(StepOutcome {
            output: x,
            decision,
            reference,
            scaled,
        })
    }

    pub(crate) fn adapt(&mut self, r: &ComplexVector, r_bar: &ComplexVector, x: C64, b: Symbol) -> Result<bool> {
        constrained_update(&mut self.state, r, r_bar, x, b)
    }

    fn advance(&mut self) {
        self.symbol_index += 1;
        self.state.mode = mode_at(self.symbol_index, self.training_length);
    }
}

/// Applies both constrained updates from the current snapshot, then
/// rescales `w`. Returns whether the rescale happened. With `step_s = 0`
/// the projection is left untouched.
pub(crate) fn constrained_update(
    state: &mut ReceiverState,
    r: &ComplexVector,
    r_bar: &ComplexVector,
    x: C64,
    b: Symbol,
) -> Result<bool> {
    let g = update_factor(x.re, b, state.kernel_radius);
    let combiner = state.projection.apply(&state.filter)?;

    let mut w_dir = r_bar.clone();
    w_dir.axpy(C64::new(-x.re, 0.0), &state.projection.hermitian_apply(&combiner)?)?;

    if state.step_s != 0.0 {
        // r w^H - S w w^H Re(x) = (r - Re(x) S w) w^H
        let mut s_dir = r.clone();
        s_dir.axpy(C64::new(-x.re, 0.0), &combiner)?;
        state
            .projection
            .rank_one_update(C64::new(state.step_s * g, 0.0), &s_dir, &state.filter)?;
    }
    state.filter.axpy(C64::new(state.step_w * g, 0.0), &w_dir)?;

    rescale(state)
}

/// `w <- w / sqrt(w^H S^H S w)` when the energy exceeds [`SCALING_EPSILON`].
pub(crate) fn rescale(state: &mut ReceiverState) -> Result<bool> {
    let energy = state.filter_energy()?;
    if energy > SCALING_EPSILON {
        state.filter.scale(1.0 / energy.sqrt());
        Ok(true)
    } else {
        Ok(false)
    }
}

pub(crate) fn mode_at(index: usize, training_length: usize) -> Mode {
    if index < training_length {
        Mode::Training
    } else {
        Mode::DecisionDirected
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::{error_probability, output};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_vector(rng: &mut impl Rng, n: usize) -> ComplexVector {
        ComplexVector::new((0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .unwrap()
    }

    fn random_matrix(rng: &mut impl Rng, m: usize, d: usize) -> ComplexMatrix {
        let data = (0..m * d)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_row_major(m, d, data).unwrap()
    }

    /// Random state whose kernel argument lies in a non-saturated range.
    fn random_case(rng: &mut impl Rng, m: usize, d: usize) -> (ReceiverState, ComplexVector, Symbol) {
        let mut state = ReceiverState {
            projection: random_matrix(rng, m, d),
            filter: random_vector(rng, d),
            kernel_radius: 1.0,
            step_w: 0.01,
            step_s: 0.025,
            mode: Mode::Training,
        };
        let r = random_vector(rng, m);
        let x = output(&state, &r).unwrap();
        let energy = state.filter_energy().unwrap();
        let target = rng.random_range(0.2..2.0);
        state.kernel_radius = x.re.abs().max(1e-3) / (energy.sqrt() * target);
        let b = Symbol::from(rng.random::<bool>());
        (state, r, b)
    }

    fn pe(state: &ReceiverState, r: &ComplexVector, b: Symbol) -> f64 {
        error_probability(state, output(state, r).unwrap(), b).unwrap()
    }

    /// `dP/dz* = (dP/da + i dP/db) / 2` by central differences.
    fn fd_wirtinger(f: impl Fn(C64) -> f64, h: f64) -> C64 {
        let da = (f(c(h, 0.0)) - f(c(-h, 0.0))) / (2.0 * h);
        let db = (f(c(0.0, h)) - f(c(0.0, -h))) / (2.0 * h);
        c(0.5 * da, 0.5 * db)
    }

    fn fd_grad_w(state: &ReceiverState, r: &ComplexVector, b: Symbol) -> Vec<C64> {
        (0..state.rank())
            .map(|d| {
                fd_wirtinger(
                    |delta| {
                        let mut s = state.clone();
                        s.filter[d] += delta;
                        pe(&s, r, b)
                    },
                    1e-6,
                )
            })
            .collect()
    }

    fn fd_grad_s(state: &ReceiverState, r: &ComplexVector, b: Symbol) -> Vec<C64> {
        let (m, d) = (state.num_antennas(), state.rank());
        (0..m * d)
            .map(|i| {
                fd_wirtinger(
                    |delta| {
                        let mut s = state.clone();
                        s.projection[(i / d, i % d)] += delta;
                        pe(&s, r, b)
                    },
                    1e-6,
                )
            })
            .collect()
    }

    fn rel_err(got: &[C64], want: &[C64]) -> f64 {
        let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = want.iter().map(|z| z.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let m = rng.random_range(1..=10);
            let d = rng.random_range(1..=m.min(5));
            let (state, r, b) = random_case(&mut rng, m, d);
            let gw = grad_w(&state, &r, b).unwrap();
            assert!(rel_err(gw.as_slice(), &fd_grad_w(&state, &r, b)) < 1e-5);
            let gs = grad_s(&state, &r, b).unwrap();
            assert!(rel_err(gs.as_slice(), &fd_grad_s(&state, &r, b)) < 1e-5);
        }
    }

    #[test]
    fn scalar_gradient_by_hand() {
        // M = D = 1: x = conj(w) conj(s) r, n = |s w|^2
        let (s, w, r, rho) = (c(0.8, -0.3), c(0.5, 0.4), c(-0.7, 1.1), 0.9);
        let state = ReceiverState {
            projection: ComplexMatrix::from_row_major(1, 1, vec![s]).unwrap(),
            filter: ComplexVector::new(vec![w]).unwrap(),
            kernel_radius: rho,
            step_w: 0.0,
            step_s: 0.0,
            mode: Mode::Training,
        };
        let rv = ComplexVector::new(vec![r]).unwrap();
        let x = (w.conj() * s.conj() * r).re;
        let n = (s * w).norm_sqr();
        let b = 1.0;
        // P = Q(u), u = b x / (rho sqrt n); dP/dz* = -phi(u) du/dz*
        let phi = (-(b * x / (rho * n.sqrt())).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
        // dx/dw* = conj(s) r / 2, dn/dw* = |s|^2 w ; dx/ds* = conj(w) r / 2, dn/ds* = |w|^2 s
        let du_dw = (s.conj() * r / 2.0) * (b / (rho * n.sqrt())) - w * s.norm_sqr() * (b * x / (2.0 * rho * n.powf(1.5)));
        let du_ds = (w.conj() * r / 2.0) * (b / (rho * n.sqrt())) - s * w.norm_sqr() * (b * x / (2.0 * rho * n.powf(1.5)));
        let gw = grad_w(&state, &rv, Symbol::Plus).unwrap();
        let gs = grad_s(&state, &rv, Symbol::Plus).unwrap();
        assert!((gw[0] - (-phi * du_dw)).norm() < 1e-14);
        assert!((gs[(0, 0)] - (-phi * du_ds)).norm() < 1e-14);
    }

    #[test]
    fn gradient_at_decision_boundary() {
        // unit-energy filter, Re(x) = 0: only the first term survives
        let state = ReceiverState {
            projection: ComplexMatrix::truncation(3, 2),
            filter: ComplexVector::basis(2, 0),
            kernel_radius: 0.5,
            step_w: 0.0,
            step_s: 0.0,
            mode: Mode::Training,
        };
        let r = ComplexVector::new(vec![c(0.0, 2.0), c(1.0, -1.0), c(3.0, 0.5)]).unwrap();
        let k = -1.0 / (2.0 * (2.0 * PI).sqrt() * 0.5);
        let gw = grad_w(&state, &r, Symbol::Plus).unwrap();
        let r_bar = state.projection.hermitian_apply(&r).unwrap();
        for dd in 0..2 {
            assert!((gw[dd] - r_bar[dd] * k).norm() < 1e-15);
        }
        let gs = grad_s(&state, &r, Symbol::Minus).unwrap();
        let expect = outer(&r, &state.filter);
        for f in 0..3 {
            for dd in 0..2 {
                assert!((gs[(f, dd)] - expect[(f, dd)] * (-k)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gradient_vanishes_when_saturated() {
        let mut state = ReceiverState::initial(2, 1, 0.01, 0.0, 0.0).unwrap();
        state.filter = ComplexVector::basis(1, 0);
        let r = ComplexVector::from_real(&[5.0, 1.0]).unwrap();
        assert!(grad_w(&state, &r, Symbol::Plus).unwrap().norm() < 1e-300);
        assert!(grad_s(&state, &r, Symbol::Plus).unwrap().frobenius_norm() < 1e-300);
    }

    #[test]
    fn degenerate_filter_is_an_error() {
        let state = ReceiverState::initial(3, 2, 1.0, 0.1, 0.1).unwrap();
        let r = ComplexVector::zeros(3);
        assert!(matches!(grad_w(&state, &r, Symbol::Plus), Err(Error::DegenerateFilter)));
        assert!(matches!(grad_s(&state, &r, Symbol::Plus), Err(Error::DegenerateFilter)));
    }

    #[test]
    fn first_step_from_zero_filter() {
        let (m, d, rho, mu_w) = (5, 3, 0.4, 0.01);
        let mut rx = JioMberReceiver::new(m, d, rho, mu_w, 0.025, 10).unwrap();
        let r = ComplexVector::new(vec![c(0.3, 1.0), c(-1.0, 0.2), c(0.5, 0.5), c(2.0, 0.0), c(0.0, -1.0)]).unwrap();
        let s0 = rx.state.projection.clone();
        let out = rx.step(&r, Some(Symbol::Minus)).unwrap();
        assert_eq!(out.output, c(0.0, 0.0));
        assert_eq!(out.decision, Symbol::Plus);
        assert!(out.scaled);
        // w = mu_w * (-1) / (2 sqrt(2 pi) rho) * S^H r, scaled to unit energy
        let mut w = s0.hermitian_apply(&r).unwrap();
        w.scale(-mu_w / (2.0 * (2.0 * PI).sqrt() * rho));
        let mut expect = w.clone();
        expect.scale(1.0 / s0.apply(&w).unwrap().norm());
        for i in 0..d {
            assert!((rx.state.filter[i] - expect[i]).norm() < 1e-14);
        }
        assert_eq!(rx.state.projection, s0);
    }

    #[test]
    fn zero_steps_leave_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rx = JioMberReceiver::new(6, 3, 0.5, 0.0, 0.0, 2).unwrap();
        let before = rx.state.clone();
        rx.step(&random_vector(&mut rng, 6), Some(Symbol::Plus)).unwrap();
        assert_eq!(rx.state.filter, before.filter);
        assert_eq!(rx.state.projection, before.projection);

        let mut rx = JioMberReceiver::new(6, 3, 0.5, 0.05, 0.05, 2).unwrap();
        rx.step(&random_vector(&mut rng, 6), Some(Symbol::Plus)).unwrap();
        rx.state.step_w = 0.0;
        rx.state.step_s = 0.0;
        let before = rx.state.clone();
        rx.step(&random_vector(&mut rng, 6), Some(Symbol::Plus)).unwrap();
        assert_eq!(rx.state.projection, before.projection);
        for i in 0..3 {
            assert!((rx.state.filter[i] - before.filter[i]).norm() < 1e-15);
        }
        assert_eq!(rx.mode(), Mode::DecisionDirected);
        assert_eq!(rx.symbol_index, 2);
    }

    #[test]
    fn training_requires_symbol() {
        let mut rx = JioMberReceiver::new(3, 2, 0.5, 0.01, 0.01, 1).unwrap();
        let r = ComplexVector::zeros(3);
        assert!(matches!(rx.step(&r, None), Err(Error::MissingTrainingSymbol)));
    }

    #[test]
    fn unit_energy_and_determinism_along_trajectory() {
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rx = JioMberReceiver::new(8, 3, 0.3, 0.01, 0.025, 20).unwrap();
            let mut trace = Vec::new();
            for _ in 0..200 {
                let r = random_vector(&mut rng, 8);
                let b = Symbol::from(rng.random::<bool>());
                let out = rx.step(&r, Some(b)).unwrap();
                if out.scaled {
                    assert!((rx.state.filter_energy().unwrap() - 1.0).abs() <= 1e-10);
                }
                trace.push(out.decision);
            }
            (trace, rx)
        };
        let (a, rxa) = run(8);
        let (b, rxb) = run(8);
        assert_eq!(a, b);
        assert_eq!(rxa, rxb);
    }

    #[test]
    fn converges_on_static_noise_free_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let h = random_vector(&mut rng, 8);
        let mut rx = JioMberReceiver::new(8, 3, 0.1, 0.01, 0.025, 50).unwrap();
        let mut errors_after_training = 0;
        for i in 0..500 {
            let b = Symbol::from(rng.random::<bool>());
            let r = h.scaled(c(b.value(), 0.0));
            let out = rx.step(&r, Some(b)).unwrap();
            if i >= 50 && out.decision != b {
                errors_after_training += 1;
            }
        }
        assert_eq!(errors_after_training, 0);
    }

    proptest! {
        #[test]
        fn decision_invariant_to_filter_scaling(seed in 0u64..500, scale in 1e-2f64..1e2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (state, r, b) = random_case(&mut rng, 6, 3);
            let mut a = JioMberReceiver::from_state(state.clone(), 10);
            let mut scaled_state = state;
            scaled_state.filter.scale(scale);
            let mut bb = JioMberReceiver::from_state(scaled_state, 10);
            let oa = a.step(&r, Some(b)).unwrap();
            let ob = bb.step(&r, Some(b)).unwrap();
            prop_assert_eq!(oa.decision, ob.decision);
        }
    }
}
