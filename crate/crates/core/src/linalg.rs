//! Dense symmetric matrices and the Max-Cut specializations of the
//! normal-equations system.
//!
//! Storage is full row-major (both triangles), kept symmetric by every
//! constructor and setter. Entries are either extended-precision values
//! sharing one [`PrecisionContext`] or native doubles; the latter is what
//! the weight matrix `C` and the CG input matrix `M` use.
//!
//! With constraint matrices `A_i = e_i e_iᵀ` the general trace formulas
//! collapse: `Tr(A_i X A_j X) = X_ij²` and `Tr(A_i X C X) = (XCX)_ii`. The
//! constraint matrices are never built.

use nalgebra::{DMatrix, SymmetricEigen};
use rug::{Assign, Float};

use crate::arith::{dot_raw, ExtFloat, ExtVector, PrecisionContext};
use crate::error::{Error, Result};

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for crate::arith::ExtFloat {}
}

/// Scalar types a [`SymMatrix`] can hold.
pub trait Entry: sealed::Sealed + Clone + std::fmt::Debug {
    /// `prod <- self * v`, rounded at `prod`'s precision.
    fn mul_into(&self, v: &Float, prod: &mut Float);
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn to_float(&self, bits: u32) -> Float;
}

impl Entry for f64 {
    fn mul_into(&self, v: &Float, prod: &mut Float) {
        prod.assign(v * *self);
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_float(&self, bits: u32) -> Float {
        Float::with_val(bits, *self)
    }
}

impl Entry for ExtFloat {
    fn mul_into(&self, v: &Float, prod: &mut Float) {
        prod.assign(&self.0 * v);
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn to_float(&self, bits: u32) -> Float {
        Float::with_val(bits, &self.0)
    }
}

/// Dense symmetric matrix of order `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T = ExtFloat> {
    n: usize,
    bits: u32,
    data: Vec<T>,
}

impl<T: Entry> SymMatrix<T> {
    pub fn order(&self) -> usize {
        self.n
    }

    /// Mantissa width of the stored entries (53 for `f64`).
    pub fn storage_bits(&self) -> u32 {
        self.bits
    }

    pub fn entry(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Nearest-double copy.
    pub fn to_f64(&self) -> SymMatrix<f64> {
        SymMatrix { n: self.n, bits: 53, data: self.data.iter().map(Entry::to_f64).collect() }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j).to_f64())
    }

    /// Rounds every entry into `ctx`.
    pub fn to_ext(&self, ctx: PrecisionContext) -> SymMatrix<ExtFloat> {
        SymMatrix {
            n: self.n,
            bits: ctx.bits(),
            data: self.data.iter().map(|e| ExtFloat(e.to_float(ctx.bits()))).collect(),
        }
    }

    /// Number of nonzero entries in the full square.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|e| !e.is_zero()).count()
    }

    pub fn frobenius_f64(&self) -> f64 {
        self.data.iter().map(|e| e.to_f64().powi(2)).sum::<f64>().sqrt()
    }
}

impl SymMatrix<f64> {
    /// Builds from a function evaluated on the upper triangle.
    pub fn from_fn_f64(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, bits: 53, data }
    }

    pub fn zeros_f64(n: usize) -> Self {
        Self { n, bits: 53, data: vec![0.0; n * n] }
    }

    pub fn set_f64(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Checks symmetry of `rows` and stores them.
    pub fn from_rows_f64(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn_f64(n, |i, j| rows[i][j]))
    }

    pub fn get_f64(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

impl SymMatrix<ExtFloat> {
    pub fn zeros(n: usize, ctx: PrecisionContext) -> Self {
        Self { n, bits: ctx.bits(), data: (0..n * n).map(|_| ctx.zero()).collect() }
    }

    pub fn identity(n: usize, ctx: PrecisionContext) -> Self {
        let mut m = Self::zeros(n, ctx);
        for i in 0..n {
            m.data[i * n + i] = ctx.one();
        }
        m
    }

    /// Builds from `f(i, j)` on the upper triangle, rounded into `ctx`.
    pub fn from_fn(n: usize, ctx: PrecisionContext, mut f: impl FnMut(usize, usize) -> ExtFloat) -> Self {
        let mut m = Self::zeros(n, ctx);
        for i in 0..n {
            for j in i..n {
                let v = ctx.round(&f(i, j));
                m.data[j * n + i] = v.clone();
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>], ctx: PrecisionContext) -> Result<Self> {
        Ok(SymMatrix::from_rows_f64(rows)?.to_ext(ctx))
    }

    pub fn ctx(&self) -> PrecisionContext {
        PrecisionContext::new(self.bits).expect("matrix built from a valid context")
    }

    pub fn get(&self, i: usize, j: usize) -> ExtFloat {
        self.data[i * self.n + j].clone()
    }

    /// Sets `(i, j)` and `(j, i)`, rounding into the matrix context.
    pub fn set(&mut self, i: usize, j: usize, v: &ExtFloat) {
        let v = ExtFloat(Float::with_val(self.bits, &v.0));
        self.data[j * self.n + i] = v.clone();
        self.data[i * self.n + j] = v;
    }

    pub fn diagonal(&self) -> ExtVector {
        ExtVector::from_raw((0..self.n).map(|i| self.data[i * self.n + i].0.clone()).collect(), self.ctx())
    }

    pub(crate) fn raw(&self, i: usize, j: usize) -> &Float {
        &self.data[i * self.n + j].0
    }

    /// `self + alpha * d`, entrywise with the product and the sum each rounded.
    pub fn add_scaled(&self, alpha: &ExtFloat, d: &SymMatrix) -> Result<SymMatrix> {
        check_order(self.n, d.n)?;
        let bits = self.bits.max(d.bits);
        let mut prod = Float::new(bits);
        let mut out = SymMatrix::zeros(self.n, PrecisionContext::new(bits)?);
        for i in 0..self.n {
            for j in i..self.n {
                prod.assign(&alpha.0 * d.raw(i, j));
                let v = Float::with_val(bits, self.raw(i, j) + &prod);
                out.data[j * self.n + i] = ExtFloat(v.clone());
                out.data[i * self.n + j] = ExtFloat(v);
            }
        }
        Ok(out)
    }

    /// `self - other`, entrywise rounded.
    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_order(self.n, other.n)?;
        let bits = self.bits.max(other.bits);
        let ctx = PrecisionContext::new(bits)?;
        Ok(SymMatrix::from_fn(self.n, ctx, |i, j| {
            ExtFloat(Float::with_val(bits, self.raw(i, j) - other.raw(i, j)))
        }))
    }

    /// Trace, accumulated in index order at the matrix precision.
    pub fn trace(&self) -> ExtFloat {
        let mut acc = Float::new(self.bits);
        for i in 0..self.n {
            acc += self.raw(i, i);
        }
        ExtFloat(acc)
    }

    /// Frobenius norm at the matrix precision.
    pub fn frobenius(&self) -> ExtFloat {
        let flat: Vec<Float> = self.data.iter().map(|e| e.0.clone()).collect();
        let sq = dot_raw(&flat, &flat, self.bits);
        ExtFloat(Float::with_val(self.bits, sq.sqrt_ref()))
    }
}

fn check_order(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `M·v`. Accumulation runs at the widest of `ctx` and `v`'s context; each
/// row is reduced left to right. Matrix entries enter the products exactly.
pub fn matvec<T: Entry>(m: &SymMatrix<T>, v: &ExtVector, ctx: PrecisionContext) -> Result<ExtVector> {
    check_order(m.n, v.len())?;
    let ctx = ctx.widest(v.ctx());
    let v = if v.ctx() == ctx { v.clone() } else { v.with_ctx(ctx) };
    let mut out = ExtVector::zeros(m.n, ctx);
    matvec_into(m, v.raw(), out.raw_mut());
    Ok(out)
}

/// Raw kernel: `out <- M·v` at `out`'s precision.
pub(crate) fn matvec_into<T: Entry>(m: &SymMatrix<T>, v: &[Float], out: &mut [Float]) {
    let Some(first) = out.first() else { return };
    let mut prod = Float::new(first.prec());
    for (i, acc) in out.iter_mut().enumerate() {
        acc.assign(0);
        for (e, vj) in m.row(i).iter().zip(v) {
            e.mul_into(vj, &mut prod);
            *acc += &prod;
        }
    }
}

/// The Max-Cut normal matrix `M_ij = Tr(A_i X A_j X) = X_ij²`, at `X`'s
/// precision.
pub fn normal_matrix(x: &SymMatrix) -> SymMatrix {
    let ctx = x.ctx();
    SymMatrix::from_fn(x.n, ctx, |i, j| ctx.mul(&x.get(i, j), &x.get(i, j)))
}

/// `X·C` as a full (non-symmetric) row-major product at `X`'s precision.
/// Zero entries of `C` are skipped; adding an exact zero never changes a
/// rounded sum, so the result is bitwise that of the dense loop.
pub(crate) fn mul_dense_sparse<T: Entry>(x: &SymMatrix, c: &SymMatrix<T>) -> Vec<Float> {
    let n = x.n;
    let bits = x.bits;
    // Column lists of C (== row lists by symmetry).
    let cols: Vec<Vec<(usize, &T)>> = (0..n)
        .map(|j| c.row(j).iter().enumerate().filter(|(_, e)| !e.is_zero()).collect())
        .collect();
    let mut out: Vec<Float> = (0..n * n).map(|_| Float::new(bits)).collect();
    let mut prod = Float::new(bits);
    for i in 0..n {
        for j in 0..n {
            let acc = &mut out[i * n + j];
            for &(k, e) in &cols[j] {
                e.mul_into(x.raw(i, k), &mut prod);
                *acc += &prod;
            }
        }
    }
    out
}

/// `diag(P·X)` for a full row-major `P`, at `X`'s precision.
pub(crate) fn diag_of_product(p: &[Float], x: &SymMatrix) -> Vec<Float> {
    let n = x.n;
    (0..n)
        .map(|i| {
            let mut acc = Float::new(x.bits);
            let mut prod = Float::new(x.bits);
            for k in 0..n {
                prod.assign(&p[i * n + k] * x.raw(k, i));
                acc += &prod;
            }
            acc
        })
        .collect()
}

/// `rhs_i = Tr(A_i X C X) - μ Tr(A_i X) = (XCX)_ii - μ X_ii`, at `X`'s
/// precision. `XC` is formed first, then the diagonal of `(XC)X`.
pub fn newton_rhs<T: Entry>(x: &SymMatrix, c: &SymMatrix<T>, mu: &ExtFloat) -> Result<ExtVector> {
    check_order(x.n, c.n)?;
    let xc = mul_dense_sparse(x, c);
    Ok(rhs_from_xc(&xc, x, mu))
}

pub(crate) fn rhs_from_xc(xc: &[Float], x: &SymMatrix, mu: &ExtFloat) -> ExtVector {
    let mut d = diag_of_product(xc, x);
    let mut prod = Float::new(x.bits);
    for (i, di) in d.iter_mut().enumerate() {
        prod.assign(&mu.0 * x.raw(i, i));
        *di -= &prod;
    }
    ExtVector::from_raw(d, x.ctx())
}

/// `(X·Z)·X` with `Z` given as `XZ` already formed. Only the upper triangle
/// is computed; the result is mirrored.
pub(crate) fn right_mul_sym(xz: &[Float], x: &SymMatrix) -> SymMatrix {
    let n = x.n;
    let ctx = x.ctx();
    let mut out = SymMatrix::zeros(n, ctx);
    let mut prod = Float::new(x.bits);
    for i in 0..n {
        for j in i..n {
            let mut acc = Float::new(x.bits);
            for k in 0..n {
                prod.assign(&xz[i * n + k] * x.raw(k, j));
                acc += &prod;
            }
            out.data[j * n + i] = ExtFloat(acc.clone());
            out.data[i * n + j] = ExtFloat(acc);
        }
    }
    out
}

/// Lower-triangular factor `L` with `X = L Lᵀ`, computed at the storage
/// precision of `X`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    bits: u32,
    l: Vec<Float>,
}

impl Cholesky {
    /// Returns `None` when a pivot fails the strict positivity test
    /// `pivot > n·ε·max_i X_ii`.
    pub fn factor<T: Entry>(x: &SymMatrix<T>) -> Option<Cholesky> {
        let n = x.n;
        let bits = x.bits;
        let eps = 2f64.powi(1 - bits as i32);
        let max_diag = (0..n).map(|i| x.entry(i, i).to_f64()).fold(0.0f64, f64::max);
        let threshold = Float::with_val(bits, n as f64 * eps * max_diag);
        let mut l: Vec<Float> = (0..n * n).map(|_| Float::new(bits)).collect();
        let mut acc = Float::new(bits);
        let mut prod = Float::new(bits);
        for j in 0..n {
            acc.assign(&x.entry(j, j).to_float(bits));
            for k in 0..j {
                prod.assign(l[j * n + k].square_ref());
                acc -= &prod;
            }
            if !(acc > threshold) || acc <= 0 {
                return None;
            }
            let d = Float::with_val(bits, acc.sqrt_ref());
            for i in j + 1..n {
                acc.assign(&x.entry(i, j).to_float(bits));
                for k in 0..j {
                    prod.assign(&l[i * n + k] * &l[j * n + k]);
                    acc -= &prod;
                }
                l[i * n + j] = Float::with_val(bits, &acc / &d);
            }
            l[j * n + j] = d;
        }
        Some(Cholesky { n, bits, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Entry `L_ij` (zero above the diagonal).
    pub fn entry(&self, i: usize, j: usize) -> ExtFloat {
        ExtFloat(self.l[i * self.n + j].clone())
    }

    /// `log det X = 2 Σ log L_ii`.
    pub fn log_det(&self) -> ExtFloat {
        let mut acc = Float::new(self.bits);
        for i in 0..self.n {
            acc += Float::with_val(self.bits, self.l[i * self.n + i].ln_ref());
        }
        acc *= 2;
        ExtFloat(acc)
    }
}

/// Strict cone-membership test: true iff Cholesky completes with every
/// pivot above `n·ε·max_diag`.
pub fn is_positive_definite<T: Entry>(x: &SymMatrix<T>) -> bool {
    Cholesky::factor(x).is_some()
}

/// Factor `V` (n×n, in `f64`) with `V Vᵀ ≈ X`. Negative eigenvalues are
/// clamped to zero; rows of `V` are the vertex vectors used by rounding.
pub fn psd_factor<T: Entry>(x: &SymMatrix<T>, clip: f64) -> Result<DMatrix<f64>> {
    let n = x.n;
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(x.to_dmatrix());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min < -clip * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: min, max_eigenvalue: max });
    }
    let mut v = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    Ok(v)
}

const POWER_MAX_ITER: usize = 2000;
const POWER_RTOL: f64 = 1e-10;

/// Estimate of `λ_max / λ_min` in double precision: power iteration for the
/// top eigenvalue, inverse iteration through a Cholesky factor for the
/// bottom one. Returns `+∞` when `M` is singular or indefinite.
pub fn condition_estimate<T: Entry>(m: &SymMatrix<T>) -> f64 {
    let n = m.n;
    if n == 0 {
        return 1.0;
    }
    let a = m.to_dmatrix();
    let Some(chol) = a.clone().cholesky() else { return f64::INFINITY };
    let start = nalgebra::DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);

    let lmax = rayleigh_iterate(&start, |v| &a * v, |v, av| v.dot(av));
    let lmin_inv = rayleigh_iterate(&start, |v| chol.solve(v), |v, av| v.dot(av));
    if !(lmax > 0.0) || !(lmin_inv > 0.0) || !lmin_inv.is_finite() {
        return f64::INFINITY;
    }
    lmax * lmin_inv
}

fn rayleigh_iterate(
    start: &nalgebra::DVector<f64>,
    apply: impl Fn(&nalgebra::DVector<f64>) -> nalgebra::DVector<f64>,
    quotient: impl Fn(&nalgebra::DVector<f64>, &nalgebra::DVector<f64>) -> f64,
) -> f64 {
    let mut v = start.normalize();
    let mut last = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = apply(&v);
        let q = quotient(&v, &w);
        let norm = w.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return q;
        }
        v = w / norm;
        if (q - last).abs() <= POWER_RTOL * q.abs() {
            return q;
        }
        last = q;
    }
    last
}
