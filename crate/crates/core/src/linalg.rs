//! Dense complex linear algebra for the small matrices the simulator needs
//! (dimension at most 64).

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SqkdError};
use crate::rng::RandomSource;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `Σ conj(a_i) b_i`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

/// Returns `v / ‖v‖`, or `None` for a (numerically) zero vector.
pub fn normalized(v: &[C64]) -> Option<Vec<C64>> {
    let n = norm_sqr(v).sqrt();
    if n < 1e-300 {
        return None;
    }
    Some(v.iter().map(|x| x / n).collect())
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(SqkdError::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        if !all_finite(&data) {
            return Err(SqkdError::NonFinite);
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix whose columns are `cols`.
    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let n = cols.len();
        let mut m = Self::zeros(n);
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), n, "column length");
            for (r, &v) in col.iter().enumerate() {
                m.data[r * n + c] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.n + c] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.n)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m.data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matmul dimension");
        let n = self.n;
        let mut m = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    m.data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        m
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len(), "matrix-vector dimension");
        self.rows().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.n, other.n);
        let mut out = Self::zeros(n * m);
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self.get(r1, c1);
                if a == ZERO {
                    continue;
                }
                for r2 in 0..m {
                    for c2 in 0..m {
                        out.set(r1 * m + r2, c1 * m + c2, a * other.get(r2, c2));
                    }
                }
            }
        }
        out
    }

    /// Block-diagonal matrix `Σ_i |i⟩⟨i| ⊗ blocks[i]`.
    pub fn block_diagonal(blocks: &[CMatrix]) -> Self {
        let d = blocks.first().map_or(0, CMatrix::dim);
        let mut out = Self::zeros(blocks.len() * d);
        for (b, block) in blocks.iter().enumerate() {
            assert_eq!(block.dim(), d, "blocks must share a dimension");
            for r in 0..d {
                for c in 0..d {
                    out.set(b * d + r, b * d + c, block.get(r, c));
                }
            }
        }
        out
    }

    /// Largest entry magnitude of `U†U − I`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.adjoint().matmul(self);
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((g.get(r, c) - target).norm());
            }
        }
        worst
    }

    /// Errors with the residual when `U†U` deviates from `I` by more than `tol`.
    pub fn check_unitary(&self, tol: f64) -> Result<()> {
        let residual = self.unitarity_residual();
        if residual.is_finite() && residual <= tol {
            Ok(())
        } else {
            Err(SqkdError::NonUnitary { residual })
        }
    }

    /// Haar-distributed unitary: Gram-Schmidt orthonormalization of the
    /// columns of a complex Ginibre matrix.
    pub fn haar_unitary(n: usize, rng: &mut RandomSource) -> Self {
        loop {
            let cols: Vec<Vec<C64>> = (0..n).map(|_| gaussian_vector(n, rng)).collect();
            if let Some(q) = gram_schmidt(cols) {
                return Self::from_columns(&q);
            }
        }
    }
}

/// Uniformly random unit vector in `C^n`.
pub fn random_unit_vector(n: usize, rng: &mut RandomSource) -> Vec<C64> {
    loop {
        if let Some(v) = normalized(&gaussian_vector(n, rng)) {
            return v;
        }
    }
}

fn gaussian_vector(n: usize, rng: &mut RandomSource) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Modified Gram-Schmidt; `None` if the columns are (numerically) dependent.
fn gram_schmidt(mut cols: Vec<Vec<C64>>) -> Option<Vec<Vec<C64>>> {
    for i in 0..cols.len() {
        for j in 0..i {
            let (done, rest) = cols.split_at_mut(i);
            let proj = inner(&done[j], &rest[0]);
            for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                *x -= proj * q;
            }
        }
        if norm_sqr(&cols[i]) < 1e-20 {
            return None;
        }
        cols[i] = normalized(&cols[i])?;
    }
    Some(cols)
}
