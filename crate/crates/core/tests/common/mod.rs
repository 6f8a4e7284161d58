//! Exact and independent reference computations shared by the integration
//! tests.
#![allow(dead_code)]

use gwsdp::arith::{ExtFloat, PrecisionContext};
use gwsdp::linalg::SymMatrix;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact value `m · 2^e`. Closed under `+`, `−`, `×` without any gcd work.
#[derive(Clone, Debug, PartialEq)]
pub struct Dyadic {
    pub m: BigInt,
    pub e: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self { m: BigInt::zero(), e: 0 }
    }

    pub fn from_int(i: i64) -> Self {
        Self { m: BigInt::from(i), e: 0 }
    }

    pub fn from_f64(x: f64) -> Self {
        let r = BigRational::from_float(x).expect("finite");
        let den = r.denom().clone();
        let shift = den.bits() as i64 - 1;
        assert_eq!(BigInt::from(1) << shift as usize, den, "dyadic denominator");
        Self { m: r.numer().clone(), e: -shift }
    }

    pub fn from_ext(x: &ExtFloat) -> Self {
        let f = x.as_float();
        if f.is_zero() {
            return Self::zero();
        }
        let (int, exp) = f.to_integer_exp().expect("finite");
        let m = BigInt::parse_bytes(int.to_string_radix(16).as_bytes(), 16).expect("hex");
        Self { m, e: exp as i64 }
    }

    fn align(&self, other: &Self) -> (BigInt, BigInt, i64) {
        let e = self.e.min(other.e);
        ((&self.m) << (self.e - e) as usize, (&other.m) << (other.e - e) as usize, e)
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b, e) = self.align(o);
        Self { m: a + b, e }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let (a, b, e) = self.align(o);
        Self { m: a - b, e }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self { m: &self.m * &o.m, e: self.e + o.e }
    }

    pub fn abs(&self) -> Self {
        Self { m: self.m.abs(), e: self.e }
    }

    pub fn to_rational(&self) -> BigRational {
        if self.e >= 0 {
            BigRational::from_integer(&self.m << self.e as usize)
        } else {
            BigRational::new(self.m.clone(), BigInt::from(1) << (-self.e) as usize)
        }
    }
}

/// `|computed − exact|` measured in units in the last place of `scale` at
/// `bits` of mantissa.
pub fn ulps(computed: &Dyadic, exact: &Dyadic, scale: &Dyadic, bits: u32) -> f64 {
    let diff = computed.sub(exact).abs();
    if diff.m.is_zero() {
        return 0.0;
    }
    let s = scale.abs();
    if s.m.is_zero() {
        return f64::INFINITY;
    }
    // ulp(s) = 2^(floor(log2 s) - bits + 1)
    let log2 = s.m.bits() as i64 - 1 + s.e;
    let ulp = Dyadic { m: BigInt::from(1), e: log2 - bits as i64 + 1 };
    (diff.to_rational() / ulp.to_rational()).to_f64().unwrap()
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Symmetric matrix with entries uniform in `[-1, 1]`, rounded into `ctx`.
pub fn random_sym(n: usize, ctx: PrecisionContext, rng: &mut ChaCha8Rng) -> SymMatrix {
    SymMatrix::from_fn(n, ctx, |_, _| ctx.from_f64(rng.gen_range(-1.0..1.0)))
}

/// Symmetric integer weight matrix with zero diagonal.
pub fn random_weights(n: usize, lo: i64, hi: i64, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
    SymMatrix::from_fn_f64(n, |i, j| if i == j { 0.0 } else { rng.gen_range(lo..=hi) as f64 })
}

pub fn dyadic_matrix(x: &SymMatrix) -> Vec<Vec<Dyadic>> {
    let n = x.order();
    (0..n).map(|i| (0..n).map(|j| Dyadic::from_ext(&x.get(i, j))).collect()).collect()
}

pub fn dyadic_matrix_f64(x: &SymMatrix<f64>) -> Vec<Vec<Dyadic>> {
    let n = x.order();
    (0..n).map(|i| (0..n).map(|j| Dyadic::from_f64(x.get_f64(i, j))).collect()).collect()
}

pub fn dmul(a: &[Vec<Dyadic>], b: &[Vec<Dyadic>]) -> Vec<Vec<Dyadic>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Dyadic::zero();
                    for k in 0..b.len() {
                        if !a[i][k].m.is_zero() && !b[k][j].m.is_zero() {
                            acc = acc.add(&a[i][k].mul(&b[k][j]));
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn dtrace(a: &[Vec<Dyadic>]) -> Dyadic {
    (0..a.len()).fold(Dyadic::zero(), |acc, i| acc.add(&a[i][i]))
}

pub fn dabs_matrix(a: &[Vec<Dyadic>]) -> Vec<Vec<Dyadic>> {
    a.iter().map(|r| r.iter().map(Dyadic::abs).collect()).collect()
}

/// The constraint matrix `A_i = e_i e_iᵀ`, materialized.
pub fn constraint(n: usize, i: usize) -> Vec<Vec<Dyadic>> {
    (0..n).map(|r| (0..n).map(|c| Dyadic::from_int((r == i && c == i) as i64)).collect()).collect()
}

/// Exact `M_ij = Tr(A_i X A_j X)` from explicit products.
pub fn trace_form_normal(x: &[Vec<Dyadic>]) -> Vec<Vec<Dyadic>> {
    let n = x.len();
    let ax: Vec<_> = (0..n).map(|i| dmul(&constraint(n, i), x)).collect();
    (0..n).map(|i| (0..n).map(|j| dtrace(&dmul(&ax[i], &ax[j]))).collect()).collect()
}

/// Exact `rhs_i = Tr(A_i X C X) − μ Tr(A_i X)` and the same expression on
/// absolute values (the rounding-error scale).
pub fn trace_form_rhs(x: &[Vec<Dyadic>], c: &[Vec<Dyadic>], mu: &Dyadic) -> (Vec<Dyadic>, Vec<Dyadic>) {
    let n = x.len();
    let xcx = dmul(&dmul(x, c), x);
    let ax = dabs_matrix(x);
    let scale_m = dmul(&dmul(&ax, &dabs_matrix(c)), &ax);
    let mut exact = Vec::new();
    let mut scale = Vec::new();
    for i in 0..n {
        let a = constraint(n, i);
        let t1 = dtrace(&dmul(&a, &xcx));
        let t2 = dtrace(&dmul(&a, x));
        exact.push(t1.sub(&mu.mul(&t2)));
        scale.push(dtrace(&dmul(&a, &scale_m)).add(&mu.abs().mul(&t2.abs())));
    }
    (exact, scale)
}

/// Conjugate gradient in exact rational arithmetic. Returns the number of
/// iterations to reach `‖r‖ ≤ tol·‖b‖` (compared squared), or `None`.
pub fn rational_cg_iterations(m: &[Vec<i64>], b: &[i64], tol: f64, max_iter: usize) -> Option<usize> {
    let n = b.len();
    let mq: Vec<Vec<BigRational>> =
        m.iter().map(|r| r.iter().map(|&v| BigRational::from_integer(v.into())).collect()).collect();
    let mut r: Vec<BigRational> = b.iter().map(|&v| BigRational::from_integer(v.into())).collect();
    let mut p = r.clone();
    let dot = |u: &[BigRational], v: &[BigRational]| u.iter().zip(v).fold(BigRational::zero(), |a, (x, y)| a + x * y);
    let mut rr = dot(&r, &r);
    let bb = rr.clone();
    let tol2 = BigRational::from_float(tol).unwrap();
    let tol2 = &tol2 * &tol2;
    for k in 1..=max_iter {
        let q: Vec<BigRational> = (0..n).map(|i| dot(&mq[i], &p)).collect();
        let pq = dot(&p, &q);
        if pq.is_zero() {
            return None;
        }
        let alpha = &rr / &pq;
        for i in 0..n {
            r[i] = &r[i] - &alpha * &q[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next <= &tol2 * &bb {
            return Some(k);
        }
        let beta = &rr_next / &rr;
        for i in 0..n {
            p[i] = &r[i] + &beta * &p[i];
        }
        rr = rr_next;
    }
    None
}

/// Integer SPD matrix `AᵀA + shift·I` with `A` entries in `[-3, 3]`.
pub fn random_spd_int(n: usize, shift: i64, rng: &mut ChaCha8Rng) -> Vec<Vec<i64>> {
    let a: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[k][i] * a[k][j]).sum::<i64>() + if i == j { shift } else { 0 })
                .collect()
        })
        .collect()
}

pub fn int_matrix(m: &[Vec<i64>]) -> SymMatrix<f64> {
    SymMatrix::from_fn_f64(m.len(), |i, j| m[i][j] as f64)
}

/// Newton direction from the quadratic model
/// `min Tr((C − μX⁻¹)Δ) + (μ/2) Tr(X⁻¹ΔX⁻¹Δ)  s.t.  Δ_ii = 0`
/// by a dense KKT solve over the symmetric unknowns, in `f64`.
pub fn kkt_newton_direction(x: &DMatrix<f64>, c: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let xi = x.clone().try_inverse().expect("invertible");
    let basis: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let unit = |(a, b): (usize, usize)| {
        let mut e = DMatrix::<f64>::zeros(n, n);
        e[(a, b)] = 1.0;
        e[(b, a)] = 1.0;
        e
    };
    let nb = basis.len();
    let mut kkt = DMatrix::<f64>::zeros(nb + n, nb + n);
    let mut rhs = DVector::<f64>::zeros(nb + n);
    let g = c - &xi * mu;
    let xe: Vec<DMatrix<f64>> = basis.iter().map(|&p| &xi * unit(p)).collect();
    for (s, &p) in basis.iter().enumerate() {
        rhs[s] = -(&g * unit(p)).trace();
        for t in 0..nb {
            kkt[(s, t)] = mu * (&xe[s] * &xe[t]).trace();
        }
        if p.0 == p.1 {
            kkt[(s, nb + p.0)] = 1.0;
            kkt[(nb + p.0, s)] = 1.0;
        }
    }
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    let mut d = DMatrix::<f64>::zeros(n, n);
    for (s, &(a, b)) in basis.iter().enumerate() {
        d[(a, b)] = sol[s];
        d[(b, a)] = sol[s];
    }
    d
}

/// Random correlation matrix (unit diagonal, positive definite).
pub fn random_correlation(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n + 2, |_, _| rng.gen_range(-1.0..1.0));
    let s = &a * a.transpose() + DMatrix::<f64>::identity(n, n) * 0.5;
    let d: Vec<f64> = (0..n).map(|i| s[(i, i)].sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (d[i] * d[j]))
}
