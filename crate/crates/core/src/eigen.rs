//! Cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` and then
//! applies an ordinary real Jacobi rotation, so the working matrix stays
//! Hermitian and the accumulated eigenvector matrix stays unitary.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// Off-diagonal Frobenius norm, relative to the matrix norm, at which the
/// sweeps stop.
pub const CONVERGENCE_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors as columns, in the same order as `values`.
    pub vectors: ComplexMatrix,
    pub sweeps: usize,
}

impl HermitianEigen {
    pub fn compute(a: &ComplexMatrix) -> Result<Self> {
        square(a)?;
        jacobi(a.clone(), ComplexMatrix::identity(a.rows()))
    }

    /// Starts the rotations from a previous unitary eigenvector estimate.
    /// When `start` is close to the answer, `start^H A start` is nearly
    /// diagonal and one or two sweeps suffice.
    pub fn compute_from(a: &ComplexMatrix, start: &ComplexMatrix) -> Result<Self> {
        let n = square(a)?;
        if start.rows() != n || start.cols() != n {
            return Err(Error::DimensionMismatch {
                op: "HermitianEigen::compute_from",
                expected: n,
                found: start.rows(),
            });
        }
        let work = start.hermitian_transpose().matmul(a)?.matmul(start)?;
        jacobi(work, start.clone())
    }
}

fn square(a: &ComplexMatrix) -> Result<usize> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "HermitianEigen",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    Ok(a.rows())
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn jacobi(mut a: ComplexMatrix, mut v: ComplexMatrix) -> Result<HermitianEigen> {
    let n = a.rows();
    // symmetrize so round-off in the input cannot break the rotations
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let m = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = m;
            a[(j, i)] = m.conj();
        }
    }
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > CONVERGENCE_TOL * scale && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for f in 0..n {
            vectors[(f, dst)] = v[(f, src)];
        }
    }
    Ok(HermitianEigen {
        values,
        vectors,
        sweeps,
    })
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let magnitude = apq.norm();
    if magnitude == 0.0 {
        return;
    }
    let n = a.rows();
    let phase = apq / magnitude;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;

    let theta = (aqq - app) / (2.0 * magnitude);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // J restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    // A <- A J
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c + akq * jqp;
        a[(k, q)] = akp * s + akq * jqq;
    }
    // A <- J^H A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c + aqk * jqp.conj();
        a[(q, k)] = apk * s + aqk * jqq.conj();
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    // V <- V J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c + vkq * jqp;
        v[(k, q)] = vkp * s + vkq * jqq;
    }
}
