//! Reduced-rank receiver mathematics shared by every detector.
//!
//! A receiver projects the `M`-dimensional observation onto `D` dimensions
//! with `S_D`, combines with `w`, and slices the real part:
//!
//! ```text
//! r_bar = S_D^H r        x_bar = w^H r_bar        b_hat = sign(Re x_bar)
//! ```
//!
//! The bit error probability is estimated with a single-point Gaussian
//! kernel of radius `rho` around the observed decision statistic.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, ComplexMatrix, ComplexVector, C64};
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Training: the transmitted symbol supervises adaptation.
    Training,
    /// Decision directed: the receiver's own decision supervises adaptation.
    DecisionDirected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverState {
    /// `S_D`, `M x D`.
    pub projection: ComplexMatrix,
    /// `w`, length `D`.
    pub filter: ComplexVector,
    pub kernel_radius: f64,
    pub step_w: f64,
    pub step_s: f64,
    pub mode: Mode,
}

impl ReceiverState {
    /// Zero filter and `S_D = [I_D, 0]^T`.
    pub fn initial(num_antennas: usize, rank: usize, kernel_radius: f64, step_w: f64, step_s: f64) -> Result<Self> {
        if rank == 0 || rank > num_antennas {
            return Err(Error::UnsupportedDimensions {
                m: num_antennas,
                d: rank,
            });
        }
        Ok(Self {
            projection: ComplexMatrix::truncation(num_antennas, rank),
            filter: ComplexVector::zeros(rank),
            kernel_radius,
            step_w,
            step_s,
            mode: Mode::Training,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.projection.rows()
    }

    pub fn rank(&self) -> usize {
        self.projection.cols()
    }

    /// `S_D w`, the equivalent full-rank combiner.
    pub fn combiner(&self) -> Result<ComplexVector> {
        self.projection.apply(&self.filter)
    }

    /// `w^H S_D^H S_D w`.
    pub fn filter_energy(&self) -> Result<f64> {
        Ok(self.combiner()?.norm_sqr())
    }

    pub fn project(&self, r: &ComplexVector) -> Result<ComplexVector> {
        project(self, r)
    }

    pub fn output(&self, r: &ComplexVector) -> Result<C64> {
        output(self, r)
    }
}

/// `r_bar = S_D^H r`.
pub fn project(state: &ReceiverState, r: &ComplexVector) -> Result<ComplexVector> {
    state.projection.hermitian_apply(r)
}

/// `x_bar = w^H S_D^H r`.
pub fn output(state: &ReceiverState, r: &ComplexVector) -> Result<C64> {
    inner(&state.filter, &project(state, r)?)
}

/// `sign(Re x_bar)`; a zero real part decides `+1`.
pub fn decide(x: C64) -> Symbol {
    Symbol::from_sign(x.re)
}

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Kernel estimate of the error probability,
/// `Q(sign(b) Re x_bar / (rho sqrt(w^H S^H S w)))`.
pub fn error_probability(state: &ReceiverState, x: C64, b: Symbol) -> Result<f64> {
    let energy = nonzero_energy(state)?;
    Ok(q_function(b.value() * x.re / (state.kernel_radius * energy.sqrt())))
}

/// Single-point Gaussian kernel density at `x_tilde`, centred on
/// `sign(b) Re x_bar` with standard deviation `rho sqrt(w^H S^H S w)`.
pub fn kernel_density(state: &ReceiverState, x_tilde: f64, x: C64, b: Symbol) -> Result<f64> {
    let energy = nonzero_energy(state)?;
    let rho = state.kernel_radius;
    let centre = b.value() * x.re;
    let d = x_tilde - centre;
    Ok((-(d * d) / (2.0 * energy * rho * rho)).exp() / (rho * (2.0 * PI * energy).sqrt()))
}

fn nonzero_energy(state: &ReceiverState) -> Result<f64> {
    let energy = state.filter_energy()?;
    if energy > 0.0 && energy.is_finite() {
        Ok(energy)
    } else {
        Err(Error::DegenerateFilter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_apply;
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

    fn random_state(rng: &mut impl Rng, m: usize, d: usize) -> ReceiverState {
        let data = (0..m * d)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ReceiverState {
            projection: ComplexMatrix::from_row_major(m, d, data).unwrap(),
            filter: random_vector(rng, d),
            kernel_radius: rng.random_range(0.2..2.0),
            step_w: 0.01,
            step_s: 0.025,
            mode: Mode::Training,
        }
    }

    /// Composite Gauss-Legendre (5 point) quadrature.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut s = 0.0;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                s += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * s;
        }
        total
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_vector(&mut rng, 6);
        let s = ReceiverState::initial(6, 3, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(project(&s, &r).unwrap().as_slice(), &r.as_slice()[..3]);
        let full = ReceiverState::initial(6, 6, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(project(&full, &r).unwrap(), r);

        let s = random_state(&mut rng, 7, 3);
        assert_eq!(project(&s, &r.truncated(6)).is_err(), true);
        let r7 = random_vector(&mut rng, 7);
        assert_eq!(project(&s, &r7).unwrap(), hermitian_apply(&s.projection, &r7).unwrap());
    }

    #[test]
    fn output_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_vector(&mut rng, 5);
        let mut s = ReceiverState::initial(5, 3, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(output(&s, &r).unwrap(), c(0.0, 0.0));
        s.filter = ComplexVector::basis(3, 0);
        assert_eq!(output(&s, &r).unwrap(), r[0]);

        let s = random_state(&mut rng, 5, 2);
        let composed = inner(&s.filter, &project(&s, &r).unwrap()).unwrap();
        assert_eq!(output(&s, &r).unwrap(), composed);
    }

    #[test]
    fn decision_examples() {
        assert_eq!(decide(c(-0.3, 7.0)), Symbol::Minus);
        assert_eq!(decide(c(2.0, 0.0)), Symbol::Plus);
        assert_eq!(decide(c(0.0, 1.0)), Symbol::Plus);
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.7) + q_function(-1.7) - 1.0).abs() < 1e-15);
        // reference from quadrature of the normal density over [1, 41]
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
        let reference = integrate(pdf, 1.0, 41.0, 4000);
        assert!((reference - 0.158_655_253_931).abs() < 1e-12);
        assert!((q_function(1.0) - reference).abs() <= 1e-12 * reference);
    }

    #[test]
    fn q_function_relative_accuracy_against_quadrature() {
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
        for i in 0..=32 {
            let x = -8.0 + 0.5 * i as f64;
            let reference = if x >= 0.0 {
                integrate(pdf, x, x + 40.0, 4000)
            } else {
                1.0 - integrate(pdf, -x, -x + 40.0, 4000)
            };
            let got = q_function(x);
            assert!((got - reference).abs() <= 1e-12 * reference, "x = {x}: {got} vs {reference}");
        }
    }

    #[test]
    fn error_probability_examples() {
        let mut s = ReceiverState::initial(3, 2, 0.7, 0.1, 0.1).unwrap();
        assert!(matches!(error_probability(&s, c(1.0, 0.0), Symbol::Plus), Err(Error::DegenerateFilter)));
        s.filter = ComplexVector::basis(2, 1);
        assert_eq!(error_probability(&s, c(0.0, 3.0), Symbol::Plus).unwrap(), 0.5);
        assert_eq!(error_probability(&s, c(0.0, 3.0), Symbol::Minus).unwrap(), 0.5);
        assert_eq!(error_probability(&s, c(0.7, 0.0), Symbol::Plus).unwrap(), q_function(1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = random_state(&mut rng, 6, 3);
            let x = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            // norm via explicit double loop over S w
            let mut energy = 0.0;
            for f in 0..6 {
                let mut acc = c(0.0, 0.0);
                for d in 0..3 {
                    acc += s.projection[(f, d)] * s.filter[d];
                }
                energy += acc.norm_sqr();
            }
            let want = 0.5 * libm::erfc(-x.re / (s.kernel_radius * energy.sqrt()) / SQRT_2);
            let got = error_probability(&s, x, Symbol::Minus).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
        }
    }

    #[test]
    fn kernel_density_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = random_state(&mut rng, 5, 2);
            let energy = s.filter_energy().unwrap();
            let x = c(rng.random_range(-2.0..2.0), 0.3);
            let b = Symbol::Minus;
            let centre = -x.re;
            let peak = kernel_density(&s, centre, x, b).unwrap();
            assert!((peak - 1.0 / (s.kernel_radius * (2.0 * PI * energy).sqrt())).abs() < 1e-12 * peak);
            let left = kernel_density(&s, centre - 0.37, x, b).unwrap();
            let right = kernel_density(&s, centre + 0.37, x, b).unwrap();
            assert!((left - right).abs() <= 1e-15 * peak);

            let width = s.kernel_radius * energy.sqrt();
            let mass = integrate(
                |t| kernel_density(&s, t, x, b).unwrap(),
                centre - 20.0 * width,
                centre + 20.0 * width,
                2000,
            );
            assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        }
    }

    #[test]
    fn initial_rejects_bad_rank() {
        assert!(ReceiverState::initial(4, 0, 1.0, 0.1, 0.1).is_err());
        assert!(ReceiverState::initial(4, 5, 1.0, 0.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn error_probability_decreasing_in_margin(seed in 0u64..1000, a in -5.0f64..5.0, delta in 1e-3f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(&mut rng, 4, 2);
            let p1 = error_probability(&s, c(a, 0.0), Symbol::Plus).unwrap();
            let p2 = error_probability(&s, c(a + delta, 0.0), Symbol::Plus).unwrap();
            // Q saturates to 1 or 0 in double precision at large |argument|
            prop_assert!(p2 <= p1);
            if p1 > 1e-300 && p1 < 0.999 {
                prop_assert!(p2 < p1);
            }
        }

        #[test]
        fn positive_scaling_leaves_estimate_and_decision(seed in 0u64..1000, scale in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(&mut rng, 6, 3);
            let r = random_vector(&mut rng, 6);
            let mut scaled = s.clone();
            scaled.filter.scale(scale);
            let x = output(&s, &r).unwrap();
            let xs = output(&scaled, &r).unwrap();
            let p = error_probability(&s, x, Symbol::Plus).unwrap();
            let ps = error_probability(&scaled, xs, Symbol::Plus).unwrap();
            prop_assert!((p - ps).abs() <= 1e-12 * p.max(1e-300));
            prop_assert_eq!(decide(x), decide(xs));
        }
    }
}
