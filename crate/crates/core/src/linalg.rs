//! Dense complex vectors and matrices.
//!
//! Only the handful of operations the receivers need: `S^H v`, `S v`, inner
//! and outer products, rank-one updates and norms. Matrices are stored
//! row-major, but every operation is defined by its index formula. All
//! reductions sum left to right so results are reproducible run to run.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Per-thread counters of complex multiplications and additions performed
/// by the primitives in this module.
pub mod op_count {
    use std::cell::Cell;

    thread_local! {
        static MULS: Cell<u64> = const { Cell::new(0) };
        static ADDS: Cell<u64> = const { Cell::new(0) };
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct OpCount {
        pub multiplications: u64,
        pub additions: u64,
    }

    pub fn reset() {
        MULS.with(|c| c.set(0));
        ADDS.with(|c| c.set(0));
    }

    pub fn snapshot() -> OpCount {
        OpCount {
            multiplications: MULS.with(Cell::get),
            additions: ADDS.with(Cell::get),
        }
    }

    #[inline]
    pub(crate) fn record(muls: usize, adds: usize) {
        MULS.with(|c| c.set(c.get() + muls as u64));
        ADDS.with(|c| c.set(c.get() + adds as u64));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn new(elements: Vec<C64>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self(elements))
    }

    /// Builds a vector from real parts only.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be at least 1");
        Self(vec![C64::new(0.0, 0.0); len])
    }

    /// `e_k`: zero vector with a one at position `k` (zero-based).
    pub fn basis(len: usize, k: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[k] = C64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    /// First `len` entries as a new vector.
    pub fn truncated(&self, len: usize) -> Self {
        assert!(len >= 1 && len <= self.len());
        Self(self.0[..len].to_vec())
    }

    /// `||v||^2`, summed left to right.
    pub fn norm_sqr(&self) -> f64 {
        op_count::record(self.len(), self.len() - 1);
        self.0.iter().fold(0.0, |acc, z| acc + z.norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        op_count::record(self.len(), 0);
        for z in &mut self.0 {
            *z *= alpha;
        }
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        op_count::record(self.len(), 0);
        Self(self.0.iter().map(|z| z * alpha).collect())
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: C64, x: &ComplexVector) -> Result<()> {
        check("axpy", self.len(), x.len())?;
        op_count::record(self.len(), self.len());
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += alpha * xi;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl From<ComplexVector> for Vec<C64> {
    fn from(v: ComplexVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::truncation(n, n)
    }

    /// `[I_D, 0]^T`: the `rows x cols` matrix that keeps the first `cols`
    /// entries of a vector under `S^H v`.
    pub fn truncation(rows: usize, cols: usize) -> Self {
        assert!(cols <= rows);
        let mut m = Self::zeros(rows, cols);
        for d in 0..cols {
            m[(d, d)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        check("from_row_major", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[ComplexVector]) -> Result<Self> {
        let first = columns.first().ok_or(Error::Empty)?;
        let rows = first.len();
        let mut m = Self::zeros(rows, columns.len());
        for (d, col) in columns.iter().enumerate() {
            check("from_columns", rows, col.len())?;
            for f in 0..rows {
                m[(f, d)] = col[f];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, d: usize) -> ComplexVector {
        ComplexVector((0..self.rows).map(|f| self[(f, d)]).collect())
    }

    /// The leading `cols` columns.
    pub fn leading_columns(&self, cols: usize) -> Self {
        assert!(cols >= 1 && cols <= self.cols);
        let mut m = Self::zeros(self.rows, cols);
        for f in 0..self.rows {
            for d in 0..cols {
                m[(f, d)] = self[(f, d)];
            }
        }
        m
    }

    pub fn hermitian_transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for f in 0..self.rows {
            for d in 0..self.cols {
                m[(d, f)] = self[(f, d)].conj();
            }
        }
        m
    }

    /// `S^H v`: element `d` is `sum_f conj(S[f,d]) v[f]`.
    pub fn hermitian_apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        check("hermitian_apply", self.rows, v.len())?;
        op_count::record(self.rows * self.cols, (self.rows - 1) * self.cols);
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (d, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for f in 0..self.rows {
                acc += self.data[f * self.cols + d].conj() * v.0[f];
            }
            *o = acc;
        }
        Ok(ComplexVector(out))
    }

    /// `S v`.
    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        check("apply", self.cols, v.len())?;
        op_count::record(self.rows * self.cols, self.rows * (self.cols - 1));
        let out = self
            .data
            .chunks_exact(self.cols)
            .map(|row| {
                row.iter()
                    .zip(&v.0)
                    .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
            })
            .collect();
        Ok(ComplexVector(out))
    }

    /// `self += alpha * a b^H`.
    pub fn rank_one_update(&mut self, alpha: C64, a: &ComplexVector, b: &ComplexVector) -> Result<()> {
        check("rank_one_update", self.rows, a.len())?;
        check("rank_one_update", self.cols, b.len())?;
        op_count::record(self.rows + self.rows * self.cols, self.rows * self.cols);
        for f in 0..self.rows {
            let af = alpha * a.0[f];
            let row = &mut self.data[f * self.cols..(f + 1) * self.cols];
            for (x, bd) in row.iter_mut().zip(&b.0) {
                *x += af * bd.conj();
            }
        }
        Ok(())
    }

    /// `self = lambda * self + v v^H`, the exponentially weighted covariance
    /// recursion.
    pub fn forget_and_accumulate(&mut self, lambda: f64, v: &ComplexVector) -> Result<()> {
        check("forget_and_accumulate", self.rows, v.len())?;
        check("forget_and_accumulate", self.cols, v.len())?;
        for f in 0..self.rows {
            for d in 0..self.cols {
                let x = &mut self.data[f * self.cols + d];
                *x = *x * lambda + v.0[f] * v.0[d].conj();
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        op_count::record(self.data.len(), 0);
        for z in &mut self.data {
            *z *= alpha;
        }
    }

    pub fn add_scaled(&mut self, alpha: C64, other: &ComplexMatrix) -> Result<()> {
        check("add_scaled", self.rows, other.rows)?;
        check("add_scaled", self.cols, other.cols)?;
        op_count::record(self.data.len(), self.data.len());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        check("matmul", self.cols, other.rows)?;
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in dst.iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc + z.norm_sqr()).sqrt()
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// `S^H v`.
pub fn hermitian_apply(m: &ComplexMatrix, v: &ComplexVector) -> Result<ComplexVector> {
    m.hermitian_apply(v)
}

/// `a^H b = sum_j conj(a_j) b_j`.
pub fn inner(a: &ComplexVector, b: &ComplexVector) -> Result<C64> {
    check("inner", a.len(), b.len())?;
    op_count::record(a.len(), a.len() - 1);
    Ok(a.0
        .iter()
        .zip(&b.0)
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y))
}

/// `a b^H`: element `[f, d]` is `a_f conj(b_d)`.
pub fn outer(a: &ComplexVector, b: &ComplexVector) -> ComplexMatrix {
    op_count::record(a.len() * b.len(), 0);
    let mut m = ComplexMatrix::zeros(a.len(), b.len());
    for f in 0..a.len() {
        for d in 0..b.len() {
            m[(f, d)] = a.0[f] * b.0[d].conj();
        }
    }
    m
}

fn check(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            op,
            expected,
            found,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        let data = (0..rows * cols)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_row_major(rows, cols, data).unwrap()
    }

    #[test]
    fn hermitian_apply_identity() {
        let v = ComplexVector::new(vec![c(1.0, 1.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(hermitian_apply(&ComplexMatrix::identity(2), &v).unwrap(), v);
    }

    #[test]
    fn hermitian_apply_conjugates() {
        let m = ComplexMatrix::from_row_major(2, 1, vec![c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        let v = ComplexVector::from_real(&[1.0, 5.0]).unwrap();
        let out = hermitian_apply(&m, &v).unwrap();
        assert_eq!(out.as_slice(), &[c(0.0, -1.0)]);
    }

    #[test]
    fn hermitian_apply_dimension_error() {
        let m = ComplexMatrix::zeros(3, 2);
        let err = hermitian_apply(&m, &ComplexVector::zeros(4)).unwrap_err();
        match err {
            Error::DimensionMismatch { expected, found, .. } => assert_eq!((expected, found), (3, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hermitian_apply_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(rows, cols) in &[(8, 3), (64, 32), (5, 5), (1, 1)] {
            let m = random_matrix(&mut rng, rows, cols);
            let v = random_vector(&mut rng, rows);
            let got = hermitian_apply(&m, &v).unwrap();
            for d in 0..cols {
                let mut acc = c(0.0, 0.0);
                for f in 0..rows {
                    acc += m[(f, d)].conj() * v[f];
                }
                assert_eq!(got[d], acc);
            }
        }
    }

    #[test]
    fn inner_examples() {
        let a = ComplexVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(inner(&a, &a).unwrap(), c(2.0, 0.0));
        let e0 = ComplexVector::basis(2, 0);
        let e1 = ComplexVector::basis(2, 1);
        assert_eq!(inner(&e0, &e1).unwrap(), c(0.0, 0.0));
        assert!(inner(&e0, &ComplexVector::zeros(3)).is_err());
    }

    #[test]
    fn inner_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_vector(&mut rng, 16);
        let b = random_vector(&mut rng, 16);
        let mut acc = c(0.0, 0.0);
        for j in 0..16 {
            acc += a[j].conj() * b[j];
        }
        assert_eq!(inner(&a, &b).unwrap(), acc);
    }

    #[test]
    fn outer_examples() {
        let m = outer(&ComplexVector::basis(2, 0), &ComplexVector::basis(1, 0));
        assert_eq!(m.as_slice(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let i = ComplexVector::new(vec![c(0.0, 1.0)]).unwrap();
        assert_eq!(outer(&i, &i).as_slice(), &[c(1.0, 0.0)]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_vector(&mut rng, 4);
        let b = random_vector(&mut rng, 2);
        let m = outer(&a, &b);
        for f in 0..4 {
            for d in 0..2 {
                assert_eq!(m[(f, d)], a[f] * b[d].conj());
            }
        }
    }

    #[test]
    fn rank_one_update_matches_outer() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = random_matrix(&mut rng, 5, 3);
        let a = random_vector(&mut rng, 5);
        let b = random_vector(&mut rng, 3);
        let alpha = c(0.3, -0.2);
        let mut lhs = base.clone();
        lhs.rank_one_update(alpha, &a, &b).unwrap();
        let mut rhs = base;
        rhs.add_scaled(alpha, &outer(&a, &b)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn apply_and_matmul_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 4, 3);
        let b = random_matrix(&mut rng, 3, 2);
        let v = random_vector(&mut rng, 2);
        let lhs = a.apply(&b.apply(&v).unwrap()).unwrap();
        let rhs = a.matmul(&b).unwrap().apply(&v).unwrap();
        for i in 0..4 {
            assert!((lhs[i] - rhs[i]).norm() < 1e-13);
        }
        let sh = a.hermitian_transpose();
        let u = random_vector(&mut rng, 4);
        let x = sh.apply(&u).unwrap();
        let y = a.hermitian_apply(&u).unwrap();
        for i in 0..3 {
            assert!((x[i] - y[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(ComplexVector::new(vec![]), Err(Error::Empty)));
        assert!(ComplexMatrix::from_row_major(0, 2, vec![]).is_err());
        assert!(ComplexMatrix::from_row_major(2, 2, vec![c(0.0, 0.0); 3]).is_err());
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>)> {
        (1usize..24).prop_flat_map(|n| {
            let elem = (-10.0f64..10.0, -10.0f64..10.0);
            (prop::collection::vec(elem.clone(), n), prop::collection::vec(elem, n))
        })
    }

    fn to_vec(v: &[(f64, f64)]) -> ComplexVector {
        ComplexVector::new(v.iter().map(|&(re, im)| c(re, im)).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn self_inner_is_real_nonnegative((a, _) in arb_pair()) {
            let a = to_vec(&a);
            let z = inner(&a, &a).unwrap();
            prop_assert!(z.re >= 0.0);
            prop_assert!(z.im.abs() <= 1e-14 * (1.0 + z.re));
        }

        #[test]
        fn inner_is_conjugate_symmetric((a, b) in arb_pair()) {
            let a = to_vec(&a);
            let b = to_vec(&b);
            let ab = inner(&a, &b).unwrap();
            let ba = inner(&b, &a).unwrap().conj();
            let scale = a.norm() * b.norm() + 1e-300;
            prop_assert!((ab - ba).norm() <= 1e-12 * scale);
        }
    }
}
