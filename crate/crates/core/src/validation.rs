//! Self-checks of the library's structural invariants, run by the
//! `validate` command. Each check is fast and deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{eig_construct, full_rank_mber_step, mwf_construct, BaselineKind};
use crate::channel::{seeded_stream, stream, ChannelConfig, JakesFading};
use crate::complexity::{count_ops, Algorithm, Complexity};
use crate::config::{preset, Sweep};
use crate::harness::{run_experiment, Execution};
use crate::jio_mber::{JioMberReceiver, SCALING_EPSILON};
use crate::linalg::{ComplexMatrix, ComplexVector, C64};
use crate::rank_selection::RankBank;
use crate::symbol::Symbol;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn random_vector(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexVector {
    ComplexVector::new(
        (0..n)
            .map(|_| C64::new(scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)))
            .collect(),
    )
    .expect("n >= 1")
}

fn complexity_numbers() -> Result<CheckOutcome> {
    let jio = count_ops(Algorithm::JioMber, 32, 6)?;
    let mwf = count_ops(Algorithm::Baseline(BaselineKind::MwfMber), 32, 6)?;
    let want = |m, a| Complexity::Counts {
        multiplications: m,
        additions: a,
    };
    Ok(outcome(
        "complexity (M=32, D=6)",
        jio == want(1225, 933) && mwf == want(7836, 5517),
        format!("jio-mber {jio}, mwf-mber {mwf}"),
    ))
}

fn unit_energy_trajectory() -> Result<CheckOutcome> {
    let config = ChannelConfig::with_snr_db(7, 32, 15.0, 1e-5, 3)?;
    let rho = 2.0 * config.noise_std();
    let mut source = crate::channel::SignalSource::new(config)?;
    let mut rx = JioMberReceiver::new(32, 8, rho, 0.01, 0.025, 250)?;
    let mut worst: f64 = 0.0;
    for _ in 0..1750 {
        let frame = source.next_frame();
        let out = rx.step(&frame.received, Some(frame.symbols[0]))?;
        if out.scaled {
            worst = worst.max((rx.state.filter_energy()? - 1.0).abs());
        }
    }
    Ok(outcome(
        "unit filter energy along 1750 symbols",
        worst <= 1e-10,
        format!("max |w^H S^H S w - 1| = {worst:.2e} (rescale threshold {SCALING_EPSILON:.0e})"),
    ))
}

fn reductions() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = 8;
    let mut jio = JioMberReceiver::new(m, m, 0.5, 0.05, 0.0, 100)?;
    jio.state.projection = ComplexMatrix::identity(m);
    let mut w = ComplexVector::zeros(m);
    let mut bank = RankBank::new(m, 4, 4, 0.5, 0.01, 0.025, 100)?;
    let mut fixed = JioMberReceiver::new(m, 4, 0.5, 0.01, 0.025, 100)?;
    let mut mismatches = 0;
    for i in 0..1000 {
        let r = random_vector(&mut rng, m, 1.0);
        let b = Symbol::from(rng.random::<bool>());
        let a = jio.step(&r, Some(b))?;
        let f = full_rank_mber_step(&mut w, &r, (i < 100).then_some(b), 0.05, 0.5)?;
        let x = bank.step(&r, Some(b))?;
        let y = fixed.step(&r, Some(b))?;
        mismatches += usize::from(a.decision != f.decision) + usize::from(x.decision != y.decision);
    }
    Ok(outcome(
        "reduction equivalences over 1000 symbols",
        mismatches == 0,
        format!("{mismatches} differing decisions"),
    ))
}

fn orthonormal_projections() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(4..16);
        let d = rng.random_range(1..=m.min(8));
        let mut cov = ComplexMatrix::zeros(m, m);
        for _ in 0..2 * m {
            cov.forget_and_accumulate(0.998, &random_vector(&mut rng, m, 1.0))?;
        }
        let p = random_vector(&mut rng, m, 1.0);
        let mut projections = vec![eig_construct(&cov, d)?];
        projections.extend(mwf_construct(&cov, &p, d)?.projection);
        for s in projections {
            let gram = s.hermitian_transpose().matmul(&s)?;
            worst = worst.max(gram.max_abs_diff(&ComplexMatrix::identity(s.cols())));
        }
    }
    Ok(outcome(
        "MWF and EIG projections orthonormal",
        worst <= 1e-10,
        format!("max |S^H S - I| = {worst:.2e}"),
    ))
}

fn jakes_autocorrelation() -> Result<CheckOutcome> {
    let config = ChannelConfig::with_snr_db(1, 1, 15.0, 1e-5, 23)?;
    let fading = JakesFading::new(&config, &mut seeded_stream(23, stream::CHANNEL));
    let (lag, n) = (1000u64, 100_000u64);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let a = fading.coefficient(0, 0, i);
        num += (fading.coefficient(0, 0, i + lag) * a.conj()).re;
        den += a.norm_sqr();
    }
    let got = num / den;
    let want = libm::j0(2.0 * std::f64::consts::PI * 1e-5 * lag as f64);
    Ok(outcome(
        "Jakes autocorrelation at lag 1000",
        (got - want).abs() <= 0.02,
        format!("{got:.4} vs J0 = {want:.4}"),
    ))
}

fn serial_parallel_determinism() -> Result<CheckOutcome> {
    let mut config = preset("ci")?;
    config.num_antennas = 8;
    config.num_users = 3;
    config.receivers = vec!["jio-mber:auto(2,6)".parse()?, "mwf-mber:3".parse()?, "full-rank-lms".parse()?];
    config.training_symbols = 50;
    config.data_symbols = 200;
    config.monte_carlo_runs = 4;
    config.sweep = Sweep::Snr;
    config.grid = vec![5.0, 10.0];
    let csv = |execution| -> Result<Vec<u8>> {
        let mut out = Vec::new();
        run_experiment(&config, execution)?.write_csv(&mut out)?;
        Ok(out)
    };
    let a = csv(Execution::Serial)?;
    let b = csv(Execution::Parallel)?;
    let c = csv(Execution::Parallel)?;
    Ok(outcome(
        "serial and parallel runs byte-identical",
        a == b && b == c,
        format!("{} bytes", a.len()),
    ))
}

/// Runs every check; a check that errors counts as failed.
pub fn run_all() -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn() -> Result<CheckOutcome>); 6] = [
        ("complexity", complexity_numbers),
        ("unit energy", unit_energy_trajectory),
        ("reductions", reductions),
        ("orthonormality", orthonormal_projections),
        ("jakes", jakes_autocorrelation),
        ("determinism", serial_parallel_determinism),
    ];
    checks
        .iter()
        .map(|(name, check)| check().unwrap_or_else(|e| outcome(name, false, format!("error: {e}"))))
        .collect()
}
